"""Backward multiplier solver and the discrete duality pairing.

The adjoint state lives on the interior nodes ``t_0 .. t_{N-1}`` (index k
standing for panel ``[t_k, t_{k+1}]``); it is singular like
``(T - t)**(gamma-1)`` at the final time, so node ``t_N`` carries no value.
The sweep is the exact transpose of the forward scheme:

    p_k = sigma_k * q_T + sum_{m>=k} wr[k][m] * a(t_{m+1})^T lam_m,
    lam_k = f_eps'(z_{k+1}) * p_k,

where ``wr[k][m]`` are exact panel integrals of the right-sided kernel
``(s - t)**(gamma-1)/Gamma(gamma)`` (numerically identical to the forward
weights by symmetry) and ``sigma_k`` is the exact panel mean of the singular
terminal kernel, added analytically and never quadratured.  Transposition
makes the discrete duality identity

    sum_k h * lam_k . (da y + dell)_{k+1}  ==  q_T . dy_N

hold to solver precision, which is what the reduced gradient and the
stationarity certificates rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frac_kernel import GridFunction, TimeGrid
from .state_solver import _coerce_controls, nodal_arguments

__all__ = [
    "AdjointPair",
    "solve_adjoint_smoothed",
    "adjoint_residual",
    "multiplier_pairing",
    "lr_norm",
    "Defect",
]


@dataclass(frozen=True)
class AdjointPair:
    """Adjoint state ``p`` and multiplier ``lam`` on the interior nodes."""

    p: GridFunction
    lam: GridFunction
    terminal_gradient: np.ndarray

    def __post_init__(self) -> None:
        if self.p.kind != "adjoint-interior" or self.lam.kind != "adjoint-interior":
            raise ValueError("adjoint pair components must be adjoint-interior functions")


def _singular_coefficients(grid: TimeGrid) -> np.ndarray:
    # exact panel means of (T - t)**(gamma-1)/Gamma(gamma): kernel[N-k]/h
    return grid.kernel[grid.N : 0 : -1] / grid.h


def solve_adjoint_smoothed(mollified, y, a, ell, grad_terminal, grid: TimeGrid) -> AdjointPair:
    """Backward sweep for the smoothed multiplier system.

    Parameters
    ----------
    mollified : MollifiedActivation
        Supplies the diagonal Jacobian ``f_eps'``.
    y : GridFunction or array (N+1, n)
        Solved (smoothed) state for ``(a, ell)``.
    a, ell : controls (None means zero).
    grad_terminal : array (n,)
        Gradient of the terminal cost at ``y_N``.
    """
    yv = np.asarray(getattr(y, "values", y), dtype=float)
    n = yv.shape[1]
    a, ell = _coerce_controls(a, ell, grid, n)
    q = np.atleast_1d(np.asarray(grad_terminal, dtype=float))
    N = grid.N
    w1 = grid.kernel[1]
    fprime = mollified.derivative(nodal_arguments(a, ell, yv))
    sigma = _singular_coefficients(grid)
    eye = np.eye(n)
    p = np.zeros((N, n))
    lam = np.zeros((N, n))
    u = np.zeros((N, n))  # u_m = a_{m+1}^T lam_m
    kern = grid.kernel
    for k in range(N - 1, -1, -1):
        tail = kern[2 : N - k + 1] @ u[k + 1 : N]
        rhs = sigma[k] * q + tail
        fk = fprime[k + 1]
        mat = eye - w1 * (a[k + 1].T * fk[None, :])
        p[k] = np.linalg.solve(mat, rhs)
        lam[k] = fk * p[k]
        u[k] = a[k + 1].T @ lam[k]
    return AdjointPair(
        GridFunction(grid, p, "adjoint-interior"),
        GridFunction(grid, lam, "adjoint-interior"),
        q,
    )


def multiplier_pairing(lam, v, grid: TimeGrid) -> float:
    """Exact discrete duality pairing ``sum_k h * lam_k . v_{k+1}``.

    ``lam`` is an interior (N-node) function, ``v`` a full nodal function;
    trailing dimensions are contracted (Frobenius for matrix values).
    """
    lv = np.asarray(getattr(lam, "values", lam), dtype=float)
    vv = np.asarray(getattr(v, "values", v), dtype=float)
    if lv.shape[0] != grid.N or vv.shape[0] != grid.N + 1:
        raise ValueError("pairing expects an interior function against a nodal one")
    return float(grid.h * np.sum(lv * vv[1:]))


def lr_norm(values, grid: TimeGrid, r: float) -> float:
    """Discrete ``L^r`` norm of an interior function (panel rectangle rule)."""
    if r < 1.0:
        raise ValueError(f"need r >= 1, got {r}")
    lv = np.asarray(getattr(values, "values", values), dtype=float)
    if lv.ndim == 1:
        mags = np.abs(lv)
    else:
        mags = np.linalg.norm(lv.reshape(lv.shape[0], -1), axis=1)
    return float(np.sum(grid.h * mags**r) ** (1.0 / r))


@dataclass(frozen=True)
class Defect:
    absolute: float
    relative: float


def adjoint_residual(pair: AdjointPair, a, grid: TimeGrid, r: float) -> Defect:
    """Defect of the defining backward identity for a candidate pair.

    Reconstructs ``p`` explicitly from the pair's multiplier (the identity is
    explicit once ``lam`` is given) and returns the ``L^r`` distance to the
    pair's ``p``, absolute and relative to the reconstruction's norm.  With
    ``a = 0`` the reconstruction is the bare singular term, so the residual
    measures only singular-term mismatch.
    """
    pv = pair.p.values
    lv = pair.lam.values
    n = pv.shape[1]
    a, _ = _coerce_controls(a, None, grid, n)
    N = grid.N
    u = np.einsum("kli,kl->ki", a[1:], lv)  # a_{m+1}^T lam_m
    sigma = _singular_coefficients(grid)
    kern = grid.kernel
    p_rec = sigma[:, None] * pair.terminal_gradient[None, :]
    for k in range(N):
        p_rec[k] += kern[1 : N - k + 1] @ u[k:N]
    absolute = lr_norm(pv - p_rec, grid, r)
    scale = max(lr_norm(p_rec, grid, r), 1e-300)
    return Defect(absolute, absolute / scale)
