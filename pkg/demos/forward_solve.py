"""
Solve the scalar linear fractional ODE

    d^gamma y = y,  y(0) = 1,  t in [0, 1],

whose exact solution is the fractional exponential, and tabulate the
sup-norm error of the product-rectangle marching scheme under grid
refinement for a few orders gamma.
"""
import numpy as np

from fracopt import Activation, TimeGrid, mittag_leffler, solve_state

probe = np.linspace(0.0, 1.0, 33)

for gamma in (0.3, 0.5, 0.7, 1.0):
    ref = np.array([mittag_leffler(gamma, t**gamma) for t in probe])
    print(f"gamma = {gamma}")
    print(f"  {'N':>5}  {'h':>10}  {'sup error':>12}")
    prev = None
    for N in (64, 128, 256, 512, 1024):
        grid = TimeGrid(T=1.0, N=N, gamma=gamma)
        y = solve_state(
            Activation.identity(),
            np.ones((N + 1, 1, 1)),
            np.zeros((N + 1, 1)),
            np.array([1.0]),
            grid,
        )
        idx = (np.arange(33) * N) // 32
        err = np.max(np.abs(y.values[idx, 0] - ref))
        rate = "" if prev is None else f"  rate {np.log2(prev / err):.2f}"
        print(f"  {N:>5}  {grid.h:>10.4e}  {err:>12.4e}{rate}")
        prev = err
    print()
