"""Directional state sensitivities, exact and smoothed.

:func:`solve_sensitivity` propagates a control direction through the exact
directional derivative of the activation, selecting one-sided slopes by the
sign of the directional argument at kinks; the result is positively
homogeneous in the direction but not additive.  :func:`smoothed_sensitivity`
replaces the selection by the classical Jacobian of a mollified activation,
giving a genuinely linear map solved by per-step direct linear solves.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractionFailure, NonFiniteError
from .frac_kernel import GridFunction, TimeGrid
from .state_solver import _coerce_controls, nodal_arguments

__all__ = ["solve_sensitivity", "smoothed_sensitivity"]

_FP_TOL = 1e-13
_FP_MAXIT = 100


def _direction_data(y, a, ell, da, dell, grid):
    y = np.asarray(getattr(y, "values", y), dtype=float)
    n = y.shape[1]
    a, ell = _coerce_controls(a, ell, grid, n)
    da, dell = _coerce_controls(da, dell, grid, n)
    z = nodal_arguments(a, ell, y)
    g = np.einsum("jik,jk->ji", da, y) + dell
    return y, a, z, g, n


def solve_sensitivity(activation, y, a, ell, da, dell, grid: TimeGrid) -> GridFunction:
    """Directional derivative of the state map along ``(da, dell)``.

    ``y`` must be the solved state for ``(a, ell)``.  Each step solves the
    piecewise-linear fixed point

        dy_j = sum_{k<j} w[j][k] f'(z_{k+1}; a dy + da y + dell)_{k+1}

    whose per-step contraction factor matches the forward solver's.
    """
    y, a, z, g, n = _direction_data(y, a, ell, da, dell, grid)
    N = grid.N
    w1 = grid.kernel[1]
    rho = w1 * activation.lipschitz * float(np.max(np.linalg.norm(a, axis=(1, 2))))
    if rho >= 0.9:
        raise ContractionFailure(
            f"per-step contraction factor {rho:.3f} >= 0.9; refine the grid"
        )
    wrev = grid.kernel[::-1]
    dy = np.zeros((N + 1, n))
    dbuf = np.zeros((N + 1, n))
    for j in range(1, N + 1):
        hist = wrev[N - j : N - 1] @ dbuf[1:j]
        x = dy[j - 1]
        aj, zj, gj = a[j], z[j], g[j]
        for _ in range(_FP_MAXIT):
            xn = hist + w1 * activation.dir_derivative(zj, aj @ x + gj)
            if not np.all(np.isfinite(xn)):
                raise NonFiniteError(f"sensitivity iterate diverged at node {j}")
            if np.linalg.norm(xn - x) <= _FP_TOL * max(1.0, np.linalg.norm(xn)):
                x = xn
                break
            x = xn
        else:
            raise ContractionFailure(f"sensitivity fixed point stalled at node {j}")
        dbuf[j] = activation.dir_derivative(zj, aj @ x + gj)
        dy[j] = hist + w1 * dbuf[j]
    return GridFunction(grid, dy, "sensitivity")


def smoothed_sensitivity(mollified, y, a, ell, da, dell, grid: TimeGrid) -> GridFunction:
    """Linearized sensitivity through the mollified activation's Jacobian.

    ``y`` must be the solved state of the *mollified* system for ``(a, ell)``.
    Per step the linear system ``(I - w1 diag(F_j) a_j) dy_j = rhs`` is solved
    directly, so the map is linear in ``(da, dell)`` to machine precision.
    """
    y, a, z, g, n = _direction_data(y, a, ell, da, dell, grid)
    N = grid.N
    w1 = grid.kernel[1]
    fprime = mollified.derivative(z)
    wrev = grid.kernel[::-1]
    eye = np.eye(n)
    dy = np.zeros((N + 1, n))
    dbuf = np.zeros((N + 1, n))
    for j in range(1, N + 1):
        hist = wrev[N - j : N - 1] @ dbuf[1:j]
        fj = fprime[j]
        mat = eye - w1 * (fj[:, None] * a[j])
        dy[j] = np.linalg.solve(mat, hist + w1 * fj * g[j])
        dbuf[j] = fj * (a[j] @ dy[j] + g[j])
    return GridFunction(grid, dy, "sensitivity")
