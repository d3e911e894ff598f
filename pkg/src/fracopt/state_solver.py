"""Forward solver for the memory-kernel state equation.

Solves the nodal fixed-point system

    y_j = y_0 + sum_{k<j} w[j][k] * f(a(t_{k+1}) y_{k+1} + ell(t_{k+1}))

which discretizes the integral form ``y(t) = y_0 + I^gamma[f(a y + ell)](t)``
with exact panel integrals of the singular kernel and right-endpoint
sampling of the integrand.  Each step is implicit in ``y_j`` only; the
per-step map contracts with factor ``h**gamma * L * ||a_j|| / Gamma(gamma+1)``,
so the solver refuses to run (rather than silently diverging) when that
factor reaches 0.9.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractionFailure, NonFiniteError
from .frac_kernel import GridFunction, TimeGrid

__all__ = [
    "solve_state",
    "lipschitz_probe",
    "difference_quotient_diagnostic",
    "compatibility_check",
    "nodal_arguments",
]

_FP_TOL = 1e-13
_FP_MAXIT = 100


def _coerce_controls(a, ell, grid: TimeGrid, n: int):
    if a is None:
        a = np.zeros((grid.N + 1, n, n))
    else:
        a = np.asarray(getattr(a, "values", a), dtype=float)
    if ell is None:
        ell = np.zeros((grid.N + 1, n))
    else:
        ell = np.asarray(getattr(ell, "values", ell), dtype=float)
    if a.shape != (grid.N + 1, n, n):
        raise ValueError(f"expected a with shape {(grid.N + 1, n, n)}, got {a.shape}")
    if ell.shape != (grid.N + 1, n):
        raise ValueError(f"expected ell with shape {(grid.N + 1, n)}, got {ell.shape}")
    return a, ell


def nodal_arguments(a, ell, y) -> np.ndarray:
    """Activation arguments ``z_j = a_j y_j + ell_j`` at every node."""
    y = np.asarray(getattr(y, "values", y), dtype=float)
    return np.einsum("jik,jk->ji", a, y) + ell


def solve_state(activation, a, ell, y0, grid: TimeGrid) -> GridFunction:
    """March the implicit product-integration scheme forward.

    Parameters
    ----------
    activation : Activation or MollifiedActivation
        Componentwise nonlinearity, evaluated through ``.value``.
    a : array_like (N+1, n, n) or None
        Nodal state-coupling matrices (None means zero).
    ell : array_like (N+1, n) or None
        Nodal offsets (None means zero).
    y0 : array_like (n,)
        Initial value.
    grid : TimeGrid

    Returns
    -------
    GridFunction with kind ``"state"``.

    Raises
    ------
    ContractionFailure
        If the per-step contraction factor reaches 0.9, or a step stalls.
    NonFiniteError
        If iterates stop being finite.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    n = y0.shape[0]
    a, ell = _coerce_controls(a, ell, grid, n)
    N = grid.N
    w1 = grid.kernel[1]
    lip = activation.lipschitz

    a_norms = np.linalg.norm(a, axis=(1, 2))
    rho = w1 * lip * float(np.max(a_norms))
    if rho >= 0.9:
        raise ContractionFailure(
            f"per-step contraction factor {rho:.3f} >= 0.9; refine the grid"
        )

    wrev = grid.kernel[::-1]
    y = np.empty((N + 1, n))
    fbuf = np.zeros((N + 1, n))
    y[0] = y0
    for j in range(1, N + 1):
        hist = y0 + wrev[N - j : N - 1] @ fbuf[1:j]
        x = y[j - 1]
        aj = a[j]
        lj = ell[j]
        for _ in range(_FP_MAXIT):
            # overflow surfaces as NonFiniteError, not as a warning
            with np.errstate(over="ignore", invalid="ignore"):
                xn = hist + w1 * activation.value(aj @ x + lj)
            if not np.all(np.isfinite(xn)):
                raise NonFiniteError(f"state iterate diverged at node {j}")
            if np.linalg.norm(xn - x) <= _FP_TOL * max(1.0, np.linalg.norm(xn)):
                x = xn
                break
            x = xn
        else:
            raise ContractionFailure(f"fixed point stalled at node {j} (factor {rho:.3f})")
        # one closing evaluation so the stored pair satisfies the scheme exactly
        fbuf[j] = activation.value(aj @ x + lj)
        y[j] = hist + w1 * fbuf[j]
    return GridFunction(grid, y, "state")


def lipschitz_probe(activation, y0, grid: TimeGrid, pairs) -> float:
    """Largest observed ratio ``||S(u1) - S(u2)||_inf / ||u1 - u2||_inf``.

    ``pairs`` iterates over ``((a1, ell1), (a2, ell2))`` control pairs; the
    control distance is the max over nodes of the Frobenius distance of the
    ``a`` parts and the sup distance of the ``ell`` parts.
    """
    worst = 0.0
    for (a1, e1), (a2, e2) in pairs:
        y1 = solve_state(activation, a1, e1, y0, grid).values
        y2 = solve_state(activation, a2, e2, y0, grid).values
        num = float(np.max(np.abs(y1 - y2)))
        da = np.linalg.norm(np.asarray(a1, dtype=float) - np.asarray(a2, dtype=float), axis=(1, 2))
        de = np.abs(np.asarray(e1, dtype=float) - np.asarray(e2, dtype=float))
        den = max(float(np.max(da)), float(np.max(de)))
        if den == 0.0:
            continue
        worst = max(worst, num / den)
    return worst


def difference_quotient_diagnostic(y, grid: TimeGrid, zeta: float) -> float:
    """Discrete ``L^zeta`` norm of forward difference quotients of ``y``.

    Stays bounded under refinement exactly when the underlying function has
    an integrable-to-power-``zeta`` derivative; for the singular profile
    ``t**gamma`` that is the case iff ``zeta < 1/(1-gamma)``.
    """
    if zeta < 1.0:
        raise ValueError(f"need zeta >= 1, got {zeta}")
    vals = np.asarray(getattr(y, "values", y), dtype=float)
    dq = np.diff(vals, axis=0) / grid.h
    if dq.ndim == 1:
        mags = np.abs(dq)
    else:
        mags = np.linalg.norm(dq.reshape(dq.shape[0], -1), axis=1)
    return float(np.sum(grid.h * mags**zeta) ** (1.0 / zeta))


def compatibility_check(activation, a, ell, y0) -> float:
    """Sup-norm of ``f(a(0) y0 + ell(0))``; 0 means no initial layer.

    Informational: values above 1e-12 signal that the state leaves the
    initial value with the kernel's ``t**gamma`` profile rather than
    linearly.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    a0 = np.zeros((y0.size, y0.size)) if a is None else np.asarray(a, dtype=float)[0]
    e0 = np.zeros(y0.size) if ell is None else np.asarray(ell, dtype=float)[0]
    return float(np.max(np.abs(np.atleast_1d(activation.value(a0 @ y0 + e0)))))
