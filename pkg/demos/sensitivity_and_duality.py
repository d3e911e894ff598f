"""
Two identities behind the optimizer's gradients.

First, the exact nonsmooth directional state sensitivity is the limit of
forward difference quotients (shown off the kink, where the one-sided
derivative is a plain derivative).  Second, the backward multiplier sweep
is the exact transpose of the forward scheme, so the discrete duality
pairing matches the terminal derivative to rounding rather than to O(h).
"""
import numpy as np

from fracopt import (
    Activation,
    MollifiedActivation,
    TimeGrid,
    multiplier_pairing,
    smoothed_sensitivity,
    solve_adjoint_smoothed,
    solve_sensitivity,
    solve_state,
)

rng = np.random.default_rng(7)
n, N = 3, 128
grid = TimeGrid(T=1.0, N=N, gamma=0.5)
f = Activation.relu()

a = 0.25 * rng.standard_normal((N + 1, n, n))
ell = 1.2 + 0.25 * rng.standard_normal((N + 1, n))  # biased off the kink
y0 = rng.standard_normal(n)
y = solve_state(f, a, ell, y0, grid)

da = rng.standard_normal(a.shape)
de = rng.standard_normal(ell.shape)
dy = solve_sensitivity(f, y, a, ell, da, de, grid)

print("difference quotients vs directional sensitivity (sup norm):")
for tau in (1e-1, 1e-2, 1e-3, 1e-4):
    yp = solve_state(f, a + tau * da, ell + tau * de, y0, grid)
    err = np.max(np.abs((yp.values - y.values) / tau - dy.values))
    print(f"  tau = {tau:.0e}   error = {err:.3e}")

fe = MollifiedActivation(f, 0.25)
ys = solve_state(fe, a, ell, y0, grid)
q = rng.standard_normal(n)
pair = solve_adjoint_smoothed(fe, ys, a, ell, q, grid)
dys = smoothed_sensitivity(fe, ys, a, ell, da, de, grid)
source = np.einsum("kij,kj->ki", da, ys.values) + de
lhs = multiplier_pairing(pair.lam, source, grid)
rhs = float(q @ dys.values[-1])
print("\nduality pairing on the smoothed problem:")
print(f"  <multiplier, source>   = {lhs:.15e}")
print(f"  grad . terminal shift  = {rhs:.15e}")
print(f"  gap                    = {abs(lhs - rhs):.3e}")
