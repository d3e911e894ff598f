"""Uniform time grids and discrete fractional integral operators.

The central objects are :class:`TimeGrid`, which owns the discretization of
``[0, T]`` together with the product-integration weights for the weakly
singular kernel ``(t - s)**(gamma - 1) / Gamma(gamma)``, and the pair of
discrete Riemann-Liouville integrals :func:`left_frac_integral` /
:func:`right_frac_integral` built on those weights.

Weights come from integrating the kernel exactly over each panel
``[t_k, t_{k+1}]`` and sampling the integrand at a single panel endpoint
(right endpoint for the left integral, left endpoint for the right one).
For ``gamma = 1`` both reduce to the rectangle rule with weight ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MittagLefflerRangeError

__all__ = [
    "TimeGrid",
    "GridFunction",
    "left_frac_integral",
    "right_frac_integral",
    "mittag_leffler",
    "operator_norm_bound",
    "diagnostic_exponent",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, T]`` with fractional product-integration weights.

    Parameters
    ----------
    T : float
        Final time, ``T > 0``.
    N : int
        Number of panels; the grid has ``N + 1`` nodes ``t_j = j * T / N``.
    gamma : float
        Fractional order in ``(0, 1]``.

    Attributes
    ----------
    h : float
        Panel width ``T / N``.
    t : ndarray, shape (N + 1,)
        Grid nodes.
    kernel : ndarray, shape (N + 1,)
        Convolution weights ``kernel[m] = h**gamma * (m**gamma - (m-1)**gamma)
        / Gamma(gamma + 1)`` for ``m >= 1`` (``kernel[0]`` is unused and 0).
        The weight attached to panel ``[t_k, t_{k+1}]`` when evaluating the
        left integral at ``t_j`` is ``kernel[j - k]``; it equals the exact
        integral of the kernel over that panel.
    """

    T: float
    N: int
    gamma: float
    h: float = field(init=False)
    t: np.ndarray = field(init=False, repr=False)
    kernel: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.T > 0.0:
            raise ValueError(f"final time must be positive, got T={self.T}")
        if self.N < 1:
            raise ValueError(f"need at least one panel, got N={self.N}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"fractional order must lie in (0, 1], got {self.gamma}")
        h = self.T / self.N
        m = np.arange(self.N + 1, dtype=float)
        kern = np.zeros(self.N + 1)
        kern[1:] = h**self.gamma * (m[1:] ** self.gamma - m[:-1] ** self.gamma)
        kern[1:] /= math.gamma(self.gamma + 1.0)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "t", h * m)
        object.__setattr__(self, "kernel", kern)

    def weight_row(self, j: int) -> np.ndarray:
        """Weights ``w[j][k]``, ``k = 0..j-1``, for the left integral at ``t_j``.

        Row sums satisfy ``sum_k w[j][k] == t_j**gamma / Gamma(gamma + 1)``
        up to rounding, because the panel integrals telescope.
        """
        if not 0 <= j <= self.N:
            raise IndexError(f"node index {j} outside 0..{self.N}")
        return self.kernel[j:0:-1].copy()

    def weight(self, j: int, k: int) -> float:
        """Single weight ``w[j][k]`` for ``0 <= k < j <= N``."""
        if not 0 <= k < j <= self.N:
            raise IndexError(f"weight indices must satisfy 0 <= k < j <= N, got j={j} k={k}")
        return float(self.kernel[j - k])


_KINDS = {"state", "sensitivity", "adjoint-interior", "control"}


@dataclass(frozen=True)
class GridFunction:
    """Nodal values on a :class:`TimeGrid` with a semantics tag.

    ``state``, ``sensitivity`` and ``control`` functions carry ``N + 1`` nodal
    values; ``adjoint-interior`` functions carry ``N`` values on
    ``t_0 .. t_{N-1}`` only, because the continuous object is singular at
    ``t = T``.
    """

    grid: TimeGrid
    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown grid-function kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=float)
        expected = self.grid.N if self.kind == "adjoint-interior" else self.grid.N + 1
        if vals.shape[0] != expected:
            raise ValueError(
                f"{self.kind} function needs {expected} nodal values, got {vals.shape[0]}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None) -> np.ndarray:
        return self.values if dtype is None else self.values.astype(dtype)


def _nodal(values) -> np.ndarray:
    vals = values.values if isinstance(values, GridFunction) else values
    return np.asarray(vals, dtype=float)


def left_frac_integral(phi, grid: TimeGrid) -> np.ndarray:
    """Discrete left fractional integral of order ``gamma`` at all nodes.

    Approximates ``t -> integral_0^t (t - s)**(gamma-1) / Gamma(gamma) *
    phi(s) ds`` by exact panel integrals of the kernel applied to the
    right-endpoint samples ``phi(t_{k+1})``.  The value at ``t_0`` is 0 and
    ``phi(t_0)`` is never used.

    Parameters
    ----------
    phi : array_like, shape (N + 1, ...) or GridFunction
        Nodal samples; trailing dimensions are carried through.
    grid : TimeGrid

    Returns
    -------
    ndarray, shape (N + 1, ...)
    """
    vals = _nodal(phi)
    if vals.shape[0] != grid.N + 1:
        raise ValueError(f"expected {grid.N + 1} nodal values, got {vals.shape[0]}")
    flat = vals.reshape(grid.N + 1, -1)
    res = np.empty_like(flat)
    res[0] = 0.0
    kern = grid.kernel[1:]
    for c in range(flat.shape[1]):
        res[1:, c] = np.convolve(kern, flat[1:, c])[: grid.N]
    return res.reshape(vals.shape)


def right_frac_integral(psi, grid: TimeGrid) -> np.ndarray:
    """Discrete right fractional integral, the mirror of :func:`left_frac_integral`.

    Approximates ``t -> integral_t^T (s - t)**(gamma-1) / Gamma(gamma) *
    psi(s) ds`` by exact panel integrals applied to the left-endpoint samples
    ``psi(t_k)``.  The value at ``t_N`` is 0 and ``psi(t_N)`` is never used;
    ``psi`` may therefore be given on all ``N + 1`` nodes or on the first
    ``N`` only.

    Returns
    -------
    ndarray, shape (N + 1, ...), last node zero.
    """
    vals = _nodal(psi)
    if vals.shape[0] == grid.N + 1:
        vals = vals[:-1]
    if vals.shape[0] != grid.N:
        raise ValueError(f"expected {grid.N} or {grid.N + 1} nodal values, got {vals.shape[0]}")
    flat = vals.reshape(grid.N, -1)
    res = np.zeros((grid.N + 1, flat.shape[1]))
    kern = grid.kernel[1:]
    for c in range(flat.shape[1]):
        res[:-1, c] = np.convolve(kern, flat[::-1, c])[: grid.N][::-1]
    return res.reshape((grid.N + 1,) + vals.shape[1:])


def mittag_leffler(gamma: float, z: float) -> float:
    """One-parameter Mittag-Leffler function ``E_gamma(z)`` by direct series.

    Sums ``sum_n z**n / Gamma(n * gamma + 1)`` with compensated (Kahan)
    accumulation, stopping once a term falls below ``1e-16`` of the running
    sum.  Only ``|z| <= 50`` is supported; outside that range, or when 400
    terms do not converge (small ``gamma`` with large ``|z|`` overflows
    float64 well before convergence), a :class:`MittagLefflerRangeError` is
    raised rather than returning silent garbage.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"order must lie in (0, 1], got {gamma}")
    if not np.isfinite(z) or abs(z) > 50.0:
        raise MittagLefflerRangeError(f"|z| <= 50 required for the series regime, got z={z}")
    total = 0.0
    comp = 0.0
    term = 1.0
    n = 0
    while True:
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        n += 1
        if n > 400:
            raise MittagLefflerRangeError(
                f"series for E_{gamma}({z}) did not converge within 400 terms"
            )
        if z == 0.0:
            break
        sign = -1.0 if (z < 0.0 and n % 2 == 1) else 1.0
        try:
            term = sign * math.exp(n * math.log(abs(z)) - math.lgamma(n * gamma + 1.0))
        except OverflowError as exc:
            raise MittagLefflerRangeError(f"series term overflow for E_{gamma}({z})") from exc
        if not math.isfinite(term) or not math.isfinite(total):
            raise MittagLefflerRangeError(f"series overflow for E_{gamma}({z})")
        if abs(term) < 1e-16 * max(abs(total), 1e-300):
            total += term
            break
    return total


def operator_norm_bound(grid: TimeGrid) -> float:
    """Sup-norm bound ``T**gamma / (gamma * Gamma(gamma))`` of the left integral."""
    return grid.T**grid.gamma / (grid.gamma * math.gamma(grid.gamma))


def diagnostic_exponent(gamma: float) -> float:
    """Default integrability exponent for singular-density diagnostics.

    The admissible range is ``[1, 1/(1-gamma))``; the default is its
    midpoint, capped at 2 when ``gamma = 1`` makes the range unbounded.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"order must lie in (0, 1], got {gamma}")
    if gamma == 1.0:
        return 2.0
    return min(0.5 * (1.0 + 1.0 / (1.0 - gamma)), 2.0)
