"""
Train the coupling matrix and offset of a two-component ReLU system so the
terminal state hits a target, by projected gradient descent across a
schedule of shrinking smoothing widths.  The stage table shows the
objective settling and the warm-start drift collapsing once the smoothing
width drops below the smallest nodal argument magnitude.
"""
import numpy as np

from fracopt import (
    Activation,
    BoxConstraint,
    HomotopyConfig,
    TimeGrid,
    quadratic_tracking,
    run_homotopy,
)

grid = TimeGrid(T=1.0, N=64, gamma=0.5)
cost = quadratic_tracking([1.5, 2.0])
box = BoxConstraint.from_bounds(-1.0, 1.0, grid, n=2)
cfg = HomotopyConfig(stages=10, stage_tol=1e-6, max_iterations=300)

result = run_homotopy(Activation.relu(), None, box, cost,
                      np.array([1.0, 1.0]), grid, cfg)

print(f"{'stage':>5} {'eps':>10} {'objective':>14} {'residual':>10} "
      f"{'drift':>10} {'iters':>5}")
for rec in result.history:
    print(f"{rec.stage:>5} {rec.eps:>10.3e} {rec.objective:>14.8f} "
          f"{rec.residual:>10.2e} {rec.drift:>10.2e} {rec.iterations:>5}")

y = result.state
print(f"\nterminal state  {np.round(y.values[-1], 6).tolist()}  (target [1.5, 2.0])")
print(f"control norm    {result.control.h1_norm(grid):.6f}")
print(f"offset range    [{result.control.ell.min():.4f}, {result.control.ell.max():.4f}]"
      f"  within the box [-1, 1]")
