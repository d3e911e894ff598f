"""
How the bump-mollified ReLU behaves: it agrees with ReLU outside the
smoothing band, stays within eps * 5/32 of it uniformly, and replaces the
kink with a quintic transition whose slope at the kink is exactly 1/2.
"""
import numpy as np

from fracopt import Activation, MollifiedActivation

relu = Activation.relu()

for eps in (0.5, 0.1, 0.01):
    fe = MollifiedActivation(relu, eps)
    z = np.linspace(-1.0, 1.0, 2001)
    gap = np.max(np.abs(fe.value(z[:, None]) - relu.value(z[:, None])))
    print(f"eps = {eps:<5}  sup |relu_eps - relu| = {gap:.6e}"
          f"  (bound eps*5/32 = {eps * 5 / 32:.6e})")
    print(f"           value at kink  {fe.value(np.array([0.0]))[0]:.6e}"
          f"  (exactly eps*5/32)")
    print(f"           slope at kink  {fe.derivative(np.array([0.0]))[0]:.6e}"
          f"  (exactly 1/2)")
    outside = np.abs(z) > eps
    exact_outside = np.max(np.abs(
        fe.value(z[outside, None]) - relu.value(z[outside, None])))
    print(f"           mismatch outside the band = {exact_outside:.1e}\n")

# the same machinery smooths any piecewise-linear activation, e.g. |z|
fe = MollifiedActivation(Activation.absval(), 0.2)
z = np.array([-0.3, -0.1, 0.0, 0.1, 0.3])
print("mollified |z| at", z.tolist())
print("           ->", np.round(fe.value(z[:, None])[:, 0], 6).tolist())
