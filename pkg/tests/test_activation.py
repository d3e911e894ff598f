"""Piecewise-linear activations and their polynomial mollification."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracopt import Activation, MollifiedActivation, bump, bump_cdf


def mollified_reference(fun, x, eps, kinks=(), dps=30):
    """Convolution against the quartic bump by adaptive quadrature.

    Splits at the images of the kinks so the oracle itself is smooth on
    every subinterval.
    """
    from mpmath import mp, mpf, quad

    with mp.workdps(dps):
        xx, ee = mpf(repr(float(x))), mpf(repr(float(eps)))
        pts = sorted({mpf(-1), mpf(1)}
                     | {(xx - mpf(repr(float(k)))) / ee for k in kinks
                        if abs(x - k) < eps})
        w = lambda s: mpf(15) / 16 * (1 - s * s) ** 2
        return float(quad(lambda s: mpf(repr(float(fun(float(xx - ee * s))))) * w(s), pts))


class TestPiecewiseLinear:
    def test_relu_values(self):
        f = Activation.relu()
        npt.assert_array_equal(f.value(np.array([-2.0, 0.0, 3.0])), [0.0, 0.0, 3.0])
        assert f.lipschitz == 1.0
        npt.assert_array_equal(f.kinks, [0.0])

    def test_absval(self):
        f = Activation.absval()
        npt.assert_array_equal(f.value(np.array([-2.0, 0.0, 1.5])), [2.0, 0.0, 1.5])

    def test_max_shift_anchor(self):
        f = Activation.max_shift(1.0)
        npt.assert_array_equal(f.value(np.array([0.0, 1.0, 2.0])), [1.0, 1.0, 2.0])

    def test_leaky_relu(self):
        f = Activation.leaky_relu(0.1)
        npt.assert_allclose(f.value(np.array([-2.0, 4.0])), [-0.2, 4.0])

    def test_identity_smoothness(self):
        f = Activation.identity()
        assert f.kinks.size == 0
        fm, fp = f.one_sided_slopes(np.array([0.3, -5.0]))
        npt.assert_array_equal(fm, [1.0, 1.0])
        npt.assert_array_equal(fp, [1.0, 1.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            Activation.piecewise_linear([0.0, 0.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            Activation.piecewise_linear([0.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            Activation.piecewise_linear([np.inf], [0.0, 1.0])

    def test_one_sided_slopes_at_kink(self):
        f = Activation.piecewise_linear([-1.0, 2.0], [0.5, -1.0, 3.0])
        fm, fp = f.one_sided_slopes(np.array([-1.0, 0.0, 2.0]))
        npt.assert_array_equal(fm, [0.5, -1.0, -1.0])
        npt.assert_array_equal(fp, [-1.0, -1.0, 3.0])

    def test_lipschitz_is_max_abs_slope(self):
        f = Activation.piecewise_linear([-1.0, 2.0], [0.5, -4.0, 3.0])
        assert f.lipschitz == 4.0

    def test_dir_derivative_relu_at_kink(self):
        f = Activation.relu()
        z = np.zeros(2)
        npt.assert_array_equal(f.dir_derivative(z, np.array([2.0, -3.0])), [2.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(tau=st.floats(1e-6, 1e3), seed=st.integers(0, 2**31))
    def test_dir_derivative_positive_homogeneity(self, tau, seed):
        rng = np.random.default_rng(seed)
        f = Activation.piecewise_linear([-0.5, 0.0, 1.2], [1.0, -2.0, 0.3, 2.0])
        z = rng.standard_normal(8)
        d = rng.standard_normal(8)
        npt.assert_allclose(f.dir_derivative(z, tau * d), tau * f.dir_derivative(z, d),
                            rtol=1e-12, atol=0.0)

    def test_value_and_zero_residual(self):
        f = Activation.relu()
        assert f.value_and_zero_residual(np.array([0.7, -2.0])) == 0.7


class TestMollified:
    def test_frozen_values_at_width_one(self):
        fe = MollifiedActivation(Activation.relu(), 1.0)
        # integral of the quartic bump's positive part pinned by hand:
        # relu_eps(0) = eps * 5/32, slope there one half
        assert float(fe.value(np.array([0.0]))[0]) == pytest.approx(5.0 / 32.0, abs=1e-15)
        assert float(fe.derivative(np.array([0.0]))[0]) == pytest.approx(0.5, abs=1e-15)

    def test_agrees_with_base_outside_band(self, rng):
        f = Activation.piecewise_linear([-0.3, 0.8], [0.2, -1.0, 2.0])
        fe = MollifiedActivation(f, 0.05)
        z = np.array([-2.0, -0.36, 0.86, 3.0])
        npt.assert_array_equal(fe.value(z), f.value(z))

    def test_closed_form_vs_quadrature_oracle(self):
        f = Activation.relu()
        eps = 0.37
        fe = MollifiedActivation(f, eps)
        for x in (-0.5, -0.36, -0.1, 0.0, 0.2, 0.13, 0.369, 0.8):
            ref = mollified_reference(lambda v: max(v, 0.0), x, eps, kinks=[0.0])
            assert abs(float(fe.value(np.array([x]))[0]) - ref) <= 1e-14

    def test_two_kink_closed_form_vs_oracle(self):
        f = Activation.piecewise_linear([-0.4, 0.5], [1.0, -0.5, 2.0])
        eps = 0.3
        fe = MollifiedActivation(f, eps)
        base = lambda v: float(f.value(np.array([v]))[0])
        for x in (-0.7, -0.4, -0.2, 0.1, 0.45, 0.5, 0.75):
            ref = mollified_reference(base, x, eps, kinks=[-0.4, 0.5])
            assert abs(float(fe.value(np.array([x]))[0]) - ref) <= 1e-13

    def test_derivative_matches_fd(self):
        fe = MollifiedActivation(Activation.absval(), 0.2)
        z = np.linspace(-0.5, 0.5, 41)
        h = 1e-7
        fd = (fe.value(z + h) - fe.value(z - h)) / (2 * h)
        npt.assert_allclose(fe.derivative(z), fd, atol=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(eps=st.floats(1e-3, 2.0), seed=st.integers(0, 2**31))
    def test_lipschitz_preserved(self, eps, seed):
        rng = np.random.default_rng(seed)
        kinks = np.sort(rng.uniform(-2, 2, 3))
        kinks = kinks[np.diff(np.concatenate([[-np.inf], kinks])) > 1e-3]
        slopes = rng.uniform(-3, 3, kinks.size + 1)
        f = Activation.piecewise_linear(kinks, slopes)
        fe = MollifiedActivation(f, eps)
        z = rng.uniform(-3, 3, 200)
        assert np.max(np.abs(fe.derivative(z))) <= f.lipschitz + 1e-12

    def test_uniform_distance_scales_with_eps(self):
        f = Activation.relu()
        z = np.linspace(-1.0, 1.0, 2001)
        for eps in (0.5, 0.05, 0.005):
            gap = np.max(np.abs(MollifiedActivation(f, eps).value(z) - f.value(z)))
            # peak deviation sits at the kink and equals eps * 5/32
            assert gap == pytest.approx(eps * 5.0 / 32.0, rel=1e-12)

    def test_smooth_base_quadrature_path(self):
        f = Activation.smooth_tanh()
        fe = MollifiedActivation(f, 0.4)
        for x in (-0.7, 0.0, 0.9):
            ref = mollified_reference(np.tanh, x, 0.4)
            assert abs(float(fe.value(np.array([x]))[0]) - ref) <= 1e-9

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            MollifiedActivation(Activation.relu(), 0.0)

    def test_lipschitz_property_forwarded(self):
        f = Activation.leaky_relu(0.2)
        assert MollifiedActivation(f, 0.1).lipschitz == f.lipschitz


def test_bump_normalization():
    s = np.linspace(-1, 1, 200001)
    mass = np.trapezoid(bump(s), s)
    assert abs(mass - 1.0) <= 1e-9
    assert bump_cdf(np.array([-1.0]))[0] == 0.0
    assert bump_cdf(np.array([1.0]))[0] == 1.0
    assert bump_cdf(np.array([0.0]))[0] == 0.5


def test_bump_vanishes_outside_support():
    npt.assert_array_equal(bump(np.array([-1.5, 1.01, 7.0])), [0.0, 0.0, 0.0])
