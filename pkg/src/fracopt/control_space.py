"""Discrete H1 geometry for the controls: inner products, lifts, projection.

The discrete H1 inner product combines the trapezoid rule for the mass part
with forward differences (constant per panel) for the derivative part, i.e.
the standard P1 mass-plus-stiffness form ``u^T (M + K) v`` with diagonal
(lumped) M.  :func:`riesz_lift` inverts ``M + K`` against an L2 density,
turning integral pairings into H1 gradients; :func:`project_box` is the
metric projection onto nodal box constraints, computed componentwise by a
primal active-set method on the tridiagonal system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .errors import ProjectionFailure
from .frac_kernel import TimeGrid

__all__ = [
    "h1_inner",
    "h1_norm",
    "riesz_lift",
    "pairing_density",
    "project_box",
    "BoxConstraint",
    "cone_directions",
    "ControlPair",
]


def _nodal(values) -> np.ndarray:
    return np.asarray(getattr(values, "values", values), dtype=float)


def _mass_diagonal(grid: TimeGrid) -> np.ndarray:
    c = np.full(grid.N + 1, grid.h)
    c[0] = c[-1] = 0.5 * grid.h
    return c


def _h1_banded(grid: TimeGrid) -> np.ndarray:
    """Upper banded form of M + K for :func:`scipy.linalg.solveh_banded`."""
    N, h = grid.N, grid.h
    ab = np.zeros((2, N + 1))
    ab[0, 1:] = -1.0 / h
    ab[1] = _mass_diagonal(grid)
    ab[1, 0] += 1.0 / h
    ab[1, -1] += 1.0 / h
    ab[1, 1:-1] += 2.0 / h
    return ab


def h1_inner(u, v, grid: TimeGrid) -> float:
    """Discrete H1 inner product; trailing dimensions are contracted."""
    uv = _nodal(u)
    vv = _nodal(v)
    if uv.shape != vv.shape or uv.shape[0] != grid.N + 1:
        raise ValueError(f"shape mismatch in h1_inner: {uv.shape} vs {vv.shape}")
    flat_u = uv.reshape(grid.N + 1, -1)
    flat_v = vv.reshape(grid.N + 1, -1)
    mass = float(np.sum(_mass_diagonal(grid)[:, None] * flat_u * flat_v))
    du = np.diff(flat_u, axis=0) / grid.h
    dv = np.diff(flat_v, axis=0) / grid.h
    return mass + float(grid.h * np.sum(du * dv))


def h1_norm(u, grid: TimeGrid) -> float:
    return float(np.sqrt(max(h1_inner(u, u, grid), 0.0)))


def riesz_lift(density, grid: TimeGrid) -> np.ndarray:
    """H1 representative ``g`` of an L2 density: ``(g, v)_H1 = (density, v)_L2``.

    Solves the SPD tridiagonal system ``(M + K) g = M density`` for every
    trailing component at once.
    """
    psi = _nodal(density)
    if psi.shape[0] != grid.N + 1:
        raise ValueError(f"expected {grid.N + 1} nodal values, got {psi.shape[0]}")
    rhs = (_mass_diagonal(grid)[:, None] * psi.reshape(grid.N + 1, -1))
    out = solveh_banded(_h1_banded(grid), rhs)
    return out.reshape(psi.shape)


def pairing_density(weights, grid: TimeGrid) -> np.ndarray:
    """Nodal L2 density realizing the duality pairing of an interior function.

    Given panel weights ``w_k`` (k = 0..N-1), returns the density ``psi`` with
    ``(psi, v)_L2 == sum_k h * w_k . v_{k+1}`` for every nodal ``v``; feeding
    it to :func:`riesz_lift` yields the exact H1 gradient of that pairing.
    """
    w = _nodal(weights)
    if w.shape[0] != grid.N:
        raise ValueError(f"expected {grid.N} panel values, got {w.shape[0]}")
    psi = np.zeros((grid.N + 1,) + w.shape[1:])
    psi[1:] = w
    psi[-1] *= 2.0  # trapezoid end weight is h/2
    return psi


def _apply_tridiag(diag, off, x):
    y = diag * x
    y[:-1] += off * x[1:]
    y[1:] += off * x[:-1]
    return y


def _project_scalar(v, lo, up, grid: TimeGrid, tol: float, max_cycles: int) -> np.ndarray:
    ab = _h1_banded(grid)
    diag = ab[1]
    off = -1.0 / grid.h
    b = _apply_tridiag(diag, off, v)
    x = np.clip(v, lo, up)
    at_lower = v <= lo
    at_upper = v >= up
    pinned = up - lo <= 1e-15
    at_lower |= pinned
    at_upper &= ~pinned

    scale = max(1.0, float(np.max(np.abs(b))))
    for _ in range(max_cycles):
        free = ~(at_lower | at_upper)
        idx = np.flatnonzero(free)
        if idx.size == 0:
            trial = x.copy()
        else:
            rhs = b[idx].copy()
            left = idx - 1
            right = idx + 1
            fixed_left = (left >= 0) & ~free[np.maximum(left, 0)]
            fixed_right = (right <= grid.N) & ~free[np.minimum(right, grid.N)]
            rhs[fixed_left] -= off * x[left[fixed_left]]
            rhs[fixed_right] -= off * x[right[fixed_right]]
            if idx.size == 1:
                sol = rhs / diag[idx]
            else:
                sub = np.zeros((2, idx.size))
                sub[1] = diag[idx]
                adjacent = np.diff(idx) == 1
                sub[0, 1:][adjacent] = off
                sol = solveh_banded(sub, rhs)
            trial = x.copy()
            trial[idx] = sol

        viol_lo = lo - trial
        viol_up = trial - up
        if idx.size == 0 or float(max(viol_lo[idx].max(initial=0.0), viol_up[idx].max(initial=0.0))) <= tol * scale:
            x = trial
            g = _apply_tridiag(diag, off, x) - b
            mu_lo = np.where(at_lower & ~pinned, g, np.inf)
            mu_up = np.where(at_upper, -g, np.inf)
            worst_lo = float(np.min(mu_lo)) if np.any(at_lower & ~pinned) else np.inf
            worst_up = float(np.min(mu_up)) if np.any(at_upper) else np.inf
            if min(worst_lo, worst_up) >= -tol * scale:
                return x
            if worst_lo <= worst_up:
                at_lower[int(np.argmin(mu_lo))] = False
            else:
                at_upper[int(np.argmin(mu_up))] = False
        else:
            step = trial - x
            alpha = 1.0
            blocker = -1
            to_upper = False
            for i in idx:
                if step[i] > tol:
                    cand = (up[i] - x[i]) / step[i]
                    if cand < alpha:
                        alpha, blocker, to_upper = cand, i, True
                elif step[i] < -tol:
                    cand = (lo[i] - x[i]) / step[i]
                    if cand < alpha:
                        alpha, blocker, to_upper = cand, i, False
            x = x + max(alpha, 0.0) * step
            if blocker >= 0:
                if to_upper:
                    at_upper[blocker] = True
                    x[blocker] = up[blocker]
                else:
                    at_lower[blocker] = True
                    x[blocker] = lo[blocker]
    raise ProjectionFailure(f"active set cycled beyond {max_cycles} iterations")


def project_box(v, lower, upper, grid: TimeGrid, tol: float = 1e-10) -> np.ndarray:
    """H1-metric projection onto ``{lower <= u <= upper}`` nodally.

    Componentwise independent scalar projections; raises
    :class:`ProjectionFailure` after ``10 * N`` active-set cycles.
    """
    vv = _nodal(v)
    single = vv.ndim == 1
    cols = vv.reshape(grid.N + 1, -1)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), vv.shape).reshape(grid.N + 1, -1)
    up = np.broadcast_to(np.asarray(upper, dtype=float), vv.shape).reshape(grid.N + 1, -1)
    if np.any(lo > up):
        raise ValueError("box constraint needs lower <= upper everywhere")
    out = np.empty_like(cols)
    max_cycles = 10 * grid.N
    for c in range(cols.shape[1]):
        out[:, c] = _project_scalar(cols[:, c], lo[:, c], up[:, c], grid, tol, max_cycles)
    return out[:, 0] if single else out.reshape(vv.shape)


@dataclass(frozen=True)
class BoxConstraint:
    """Nodal box ``lower <= ell <= upper`` for the offset control."""

    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def from_bounds(cls, lower, upper, grid: TimeGrid, n: int) -> "BoxConstraint":
        shape = (grid.N + 1, n)
        lo = np.broadcast_to(np.asarray(lower, dtype=float), shape).copy()
        up = np.broadcast_to(np.asarray(upper, dtype=float), shape).copy()
        if np.any(lo > up):
            raise ValueError("box constraint needs lower <= upper everywhere")
        return cls(lo, up)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def project(self, ell, grid: TimeGrid) -> np.ndarray:
        return project_box(ell, self.lower, self.upper, grid)

    def contains(self, ell, tol: float = 1e-12) -> bool:
        lv = _nodal(ell)
        return bool(np.all(lv >= self.lower - tol) and np.all(lv <= self.upper + tol))

    def active_masks(self, ell, tol: float = 1e-9):
        lv = _nodal(ell)
        return lv <= self.lower + tol, lv >= self.upper - tol


def cone_directions(ell, box: BoxConstraint, grid: TimeGrid, count: int, rng, active_tol: float = 1e-9):
    """Sample unit-H1 directions in the feasible cone at ``ell``.

    Gaussian nodal draws, sign-rectified at bounds that are active to within
    ``active_tol`` so that ``ell + tau * d`` stays feasible for small
    ``tau > 0``.  Only the algebraic cone matters for finite sampling; no
    closure is taken.
    """
    lv = _nodal(ell)
    at_lo, at_up = box.active_masks(lv, active_tol)
    dirs = []
    for _ in range(count):
        d = rng.standard_normal(lv.shape)
        d = np.where(at_lo, np.abs(d), d)
        d = np.where(at_up, -np.abs(d), d)
        nrm = h1_norm(d, grid)
        if nrm > 0:
            dirs.append(d / nrm)
    return np.array(dirs)


@dataclass(frozen=True)
class ControlPair:
    """Coupling matrix ``a`` and offset ``ell`` as nodal control functions."""

    a: np.ndarray
    ell: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(getattr(self.a, "values", self.a), dtype=float)
        ell = np.asarray(getattr(self.ell, "values", self.ell), dtype=float)
        if a.ndim != 3 or a.shape[1] != a.shape[2] or ell.ndim != 2 or a.shape[:2] != ell.shape:
            raise ValueError(f"inconsistent control shapes {a.shape} and {ell.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "ell", ell)

    def h1_norm(self, grid: TimeGrid) -> float:
        return float(np.sqrt(h1_inner(self.a, self.a, grid) + h1_inner(self.ell, self.ell, grid)))

    def distance(self, other: "ControlPair", grid: TimeGrid) -> float:
        da = self.a - other.a
        de = self.ell - other.ell
        return float(np.sqrt(h1_inner(da, da, grid) + h1_inner(de, de, grid)))
