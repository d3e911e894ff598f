import itertools

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260521)


def random_stable_problem(rng, n, N, gamma=0.5, T=1.0, coupling=0.4, offset=0.6):
    """Random controls scaled so the marching contraction holds comfortably."""
    from fracopt import TimeGrid

    grid = TimeGrid(T=T, N=N, gamma=gamma)
    a = coupling * rng.standard_normal((N + 1, n, n))
    ell = offset * rng.standard_normal((N + 1, n))
    y0 = rng.standard_normal(n)
    return grid, a, ell, y0


def find_off_kink_relu_problem(seed, n=3, N=256, margin=0.05, coupling=0.25,
                               offset=0.25, bias=1.2, tries=200):
    """Rejection-sample a ReLU problem whose nodal arguments avoid the kink."""
    from fracopt import Activation, nodal_arguments, solve_state

    rng = np.random.default_rng(seed)
    f = Activation.relu()
    for _ in range(tries):
        grid, a, ell, y0 = random_stable_problem(
            rng, n=n, N=N, coupling=coupling, offset=offset)
        ell = ell + bias  # push the arguments away from the kink at zero
        y = solve_state(f, a, ell, y0, grid)
        z = nodal_arguments(a, ell, y.values)
        if np.min(np.abs(z)) > margin:
            return f, grid, a, ell, y0, y
    raise AssertionError("rejection sampling failed to find an off-kink problem")


def dense_h1_matrix(grid):
    """Dense mass-plus-stiffness matrix of the discrete H1 inner product."""
    m = grid.N + 1
    h = grid.h
    mass = np.full(m, h)
    mass[0] = mass[-1] = 0.5 * h
    A = np.diag(mass)
    A += np.diag(np.full(m, 2.0 / h)) - np.diag(np.full(m - 1, 1.0 / h), 1) - np.diag(
        np.full(m - 1, 1.0 / h), -1
    )
    A[0, 0] -= 1.0 / h
    A[-1, -1] -= 1.0 / h
    return A


def brute_force_project(v, lo, up, grid):
    """Enumerate every active set of the small box-constrained QP.

    Solves the equality-constrained system for each of the 3**(N+1) sign
    patterns and keeps the primal-feasible candidate with the lowest
    objective; the true projection appears under its own pattern and beats
    every other feasible candidate.  Exponential, so only usable for tiny N.
    """
    m = grid.N + 1
    A = dense_h1_matrix(grid)
    b = A @ v
    best = None
    for pattern in itertools.product((-1, 0, 1), repeat=m):
        pat = np.array(pattern)
        fixed = pat != 0
        x = np.empty(m)
        x[pat == -1] = lo[pat == -1]
        x[pat == 1] = up[pat == 1]
        free = ~fixed
        if free.any():
            rhs = b[free] - A[np.ix_(free, fixed)] @ x[fixed]
            x[free] = np.linalg.solve(A[np.ix_(free, free)], rhs)
        if np.any(x < lo - 1e-9) or np.any(x > up + 1e-9):
            continue
        val = 0.5 * x @ A @ x - b @ x
        if best is None or val < best[0] - 1e-12:
            best = (val, x)
    assert best is not None
    return best[1]
