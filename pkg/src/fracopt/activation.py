"""Componentwise activations, their one-sided derivatives, and mollification.

An :class:`Activation` is a globally Lipschitz scalar function applied
componentwise.  Two backends exist: a piecewise-linear table (breakpoints
plus segment slopes), which covers relu, leaky variants, abs and shifted
maxima uniformly, and a smooth callable backend for bases such as tanh.

Mollification convolves with the fixed even bump
``phi(s) = (15/16) * (1 - s**2)**2`` supported on ``[-1, 1]`` (unit mass,
continuously differentiable).  For piecewise-linear bases the convolution
has a closed form; smooth bases fall back to adaptive Simpson quadrature
with tolerance 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = ["Activation", "MollifiedActivation", "bump", "bump_cdf"]


def bump(s):
    """The mollifier kernel ``(15/16)(1 - s^2)^2`` on ``[-1, 1]``, 0 outside."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) <= 1.0
    return np.where(inside, 0.9375 * (1.0 - s**2) ** 2, 0.0)


def bump_cdf(u):
    """Antiderivative of :func:`bump` with ``bump_cdf(-1) = 0, bump_cdf(1) = 1``."""
    u = np.asarray(u, dtype=float)
    uc = np.clip(u, -1.0, 1.0)
    # clip again: the quintic evaluates to +-1e-16 outside [0, 1] at the ends
    return np.clip(0.9375 * (uc - 2.0 * uc**3 / 3.0 + uc**5 / 5.0) + 0.5, 0.0, 1.0)


def _bump_s_moment(u):
    # antiderivative of s * bump(s), normalized so the value at -1 is 0
    uc = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    return 0.9375 * (uc**2 / 2.0 - uc**4 / 2.0 + uc**6 / 6.0) - 5.0 / 32.0


def _smooth_relu(x, eps: float):
    """Closed-form mollification of ``max(0, x)`` at width ``eps``."""
    x = np.asarray(x, dtype=float)
    u = x / eps
    core = x * bump_cdf(u) - eps * _bump_s_moment(u)
    return np.where(x >= eps, x, np.where(x <= -eps, 0.0, core))


def _adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Plain recursive adaptive Simpson rule."""

    def simpson(lo, flo, hi, fhi, fmid):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, flo, hi, fhi, fmid, whole, tol_loc, depth):
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flm = f(lmid)
        frm = f(rmid)
        left = simpson(lo, flo, mid, fmid, flm)
        right = simpson(mid, fmid, hi, fhi, frm)
        if depth > 50 or abs(left + right - whole) <= 15.0 * tol_loc:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, flo, mid, fmid, flm, left, 0.5 * tol_loc, depth + 1) + recurse(
            mid, fmid, hi, fhi, frm, right, 0.5 * tol_loc, depth + 1
        )

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = simpson(a, fa, b, fb, fm)
    return recurse(a, fa, b, fb, fm, whole, tol, 0)


@dataclass(frozen=True)
class Activation:
    """Globally Lipschitz componentwise nonlinearity.

    Piecewise-linear instances store the representation
    ``f(z) = const + slope0 * z + sum_i jump_i * max(0, z - kink_i)``
    with strictly increasing kinks; smooth instances store value/derivative
    callables and an empty kink list.
    """

    name: str
    kinks: np.ndarray
    lipschitz: float
    _const: float = 0.0
    _slope0: float = 0.0
    _jumps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    _fun: Optional[Callable] = None
    _dfun: Optional[Callable] = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def piecewise_linear(cls, breakpoints, slopes, anchor=(0.0, 0.0), name="piecewise") -> "Activation":
        """Build from segment slopes between sorted breakpoints.

        ``slopes`` has one more entry than ``breakpoints``; ``anchor`` pins
        the function value at one point.
        """
        bp = np.asarray(breakpoints, dtype=float)
        sl = np.asarray(slopes, dtype=float)
        if sl.shape[0] != bp.shape[0] + 1:
            raise ValueError(
                f"need len(slopes) == len(breakpoints) + 1, got {sl.shape[0]} and {bp.shape[0]}"
            )
        if bp.size and not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(sl))):
            raise ValueError("breakpoints and slopes must be finite")
        jumps = np.diff(sl)
        x0, f0 = float(anchor[0]), float(anchor[1])
        # value at anchor without the constant, then solve for the constant
        raw = sl[0] * x0 + float(np.sum(jumps * np.maximum(0.0, x0 - bp)))
        return cls(
            name=name,
            kinks=bp[np.abs(jumps) > 0.0],
            lipschitz=float(np.max(np.abs(sl))),
            _const=f0 - raw,
            _slope0=float(sl[0]),
            _jumps=jumps[np.abs(jumps) > 0.0],
        )

    @classmethod
    def relu(cls) -> "Activation":
        return cls.piecewise_linear([0.0], [0.0, 1.0], name="relu")

    @classmethod
    def absval(cls) -> "Activation":
        return cls.piecewise_linear([0.0], [-1.0, 1.0], name="abs")

    @classmethod
    def max_shift(cls, c: float) -> "Activation":
        """``z -> max(c, z)``; the kink sits at ``z = c``."""
        return cls.piecewise_linear([c], [0.0, 1.0], anchor=(c, c), name=f"max_shift({c})")

    @classmethod
    def leaky_relu(cls, alpha: float = 0.1) -> "Activation":
        return cls.piecewise_linear([0.0], [alpha, 1.0], name=f"leaky_relu({alpha})")

    @classmethod
    def identity(cls) -> "Activation":
        return cls.piecewise_linear([], [1.0], name="identity")

    @classmethod
    def smooth_tanh(cls) -> "Activation":
        return cls(
            name="tanh",
            kinks=np.zeros(0),
            lipschitz=1.0,
            _fun=np.tanh,
            _dfun=lambda z: 1.0 / np.cosh(np.asarray(z, dtype=float)) ** 2,
        )

    # -- evaluation --------------------------------------------------------

    @property
    def is_piecewise_linear(self) -> bool:
        return self._fun is None

    def value(self, z):
        z = np.asarray(z, dtype=float)
        if self._fun is not None:
            return np.asarray(self._fun(z), dtype=float)
        out = self._const + self._slope0 * z
        if self.kinks.size:
            out = out + np.maximum(0.0, z[..., None] - self.kinks) @ self._jumps
        return out

    def _slope_prefix(self, idx):
        csum = np.concatenate(([0.0], np.cumsum(self._jumps)))
        return self._slope0 + csum[idx]

    def one_sided_slopes(self, z):
        """Left and right derivatives ``(f'_-, f'_+)`` at each entry of ``z``.

        Off kinks the two coincide with the classical derivative.
        """
        z = np.asarray(z, dtype=float)
        if self._fun is not None:
            d = np.asarray(self._dfun(z), dtype=float)
            return d, d.copy()
        left = self._slope_prefix(np.searchsorted(self.kinks, z, side="left"))
        right = self._slope_prefix(np.searchsorted(self.kinks, z, side="right"))
        return left, right

    def dir_derivative(self, z, d):
        """Exact directional derivative ``f'(z; d)`` applied componentwise.

        At a kink the one-sided slope is selected by the sign of the
        direction entry; the map is positively homogeneous in ``d``.
        """
        z = np.asarray(z, dtype=float)
        d = np.asarray(d, dtype=float)
        fm, fp = self.one_sided_slopes(z)
        return np.where(d >= 0.0, fp * d, fm * d)

    def value_and_zero_residual(self, z0) -> float:
        """Sup-norm of ``f`` at ``z0`` (compatibility diagnostics)."""
        v = np.atleast_1d(self.value(z0))
        return float(np.max(np.abs(v)))


@dataclass(frozen=True)
class MollifiedActivation:
    """Smoothing ``f_eps(z) = integral f(z - eps*s) * bump(s) ds`` of a base activation.

    The mollification keeps the Lipschitz constant of the base, agrees with
    it at distance ``>= eps`` from every kink (piecewise-linear bases), and
    its derivative at a kink is sandwiched between the one-sided slopes.
    """

    base: Activation
    eps: float

    def __post_init__(self) -> None:
        if not self.eps > 0.0:
            raise ValueError(f"mollification width must be positive, got {self.eps}")

    @property
    def lipschitz(self) -> float:
        return self.base.lipschitz

    def value(self, z):
        z = np.asarray(z, dtype=float)
        b = self.base
        if b.is_piecewise_linear:
            out = b._const + b._slope0 * z
            if b.kinks.size:
                out = out + _smooth_relu(z[..., None] - b.kinks, self.eps) @ b._jumps
            return out
        return self._quadrature(z, b.value)

    def derivative(self, z):
        """Classical derivative of the mollified function (a genuine Jacobian diagonal)."""
        z = np.asarray(z, dtype=float)
        b = self.base
        if b.is_piecewise_linear:
            out = np.full_like(z, b._slope0)
            if b.kinks.size:
                out = out + bump_cdf((z[..., None] - b.kinks) / self.eps) @ b._jumps
            return out
        return self._quadrature(z, b._dfun)

    def _quadrature(self, z, fun):
        eps = self.eps

        def single(zi: float) -> float:
            return _adaptive_simpson(
                lambda s: float(fun(zi - eps * s)) * float(bump(s)), -1.0, 1.0, 1e-12
            )

        flat = np.asarray(z, dtype=float).reshape(-1)
        out = np.array([single(zi) for zi in flat])
        return out.reshape(np.shape(z))
