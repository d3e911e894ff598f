"""
Audit a trained control against the first-order optimality certificate:
constraint qualification, adjoint defect, multiplier inclusion between the
one-sided derivative products, the two gradient identities, and a sampled
directional lower bound.  A deliberately shifted control is audited next
to show which checks catch it.
"""
import numpy as np

from fracopt import (
    Activation,
    BoxConstraint,
    ControlPair,
    HomotopyConfig,
    TimeGrid,
    assemble_report,
    quadratic_tracking,
    run_homotopy,
)

grid = TimeGrid(T=1.0, N=64, gamma=0.5)
f = Activation.relu()
cost = quadratic_tracking([1.5, 2.0])
box = BoxConstraint.from_bounds(-1.0, 1.0, grid, n=2)
y0 = np.array([1.0, 1.0])
cfg = HomotopyConfig(stages=10, stage_tol=5e-7, max_iterations=300)

result = run_homotopy(f, None, box, cost, y0, grid, cfg)

report = assemble_report(f, result.control, box, cost, y0, grid,
                         eps_final=result.eps_final, adjoint=result.adjoint,
                         samples=100, seed=0)
print("trained control:")
print(f"  cq satisfied        {report.cq.satisfied} (component {report.cq.index})")
print(f"  adjoint defect      {report.adjoint_relative:.2e} (relative)")
print(f"  coupling gradient   {report.gradient.grad_a_relative:.2e} (relative)")
print(f"  inclusion distance  {report.inclusion.max_distance:.2e}")
print(f"  sign condition      {report.inclusion.sign_violation:.2e}")
print(f"  offset VI           {report.gradient.vi_violation:.2e}")
print(f"  directional bound   {report.b_stationarity.minimum:.2e} "
      f"({report.b_stationarity.samples} directions)")
print(f"  verdict             {'PASSED' if report.passed() else 'FAILED'}")

shifted = ControlPair(result.control.a + 0.4, result.control.ell)
bad = assemble_report(f, shifted, box, cost, y0, grid,
                      eps_final=result.eps_final, samples=100, seed=0)
print("\nshifted control:")
print(f"  coupling gradient   {bad.gradient.grad_a_relative:.2e}")
print(f"  directional bound   {bad.b_stationarity.minimum:.2e}")
print(f"  verdict             {'PASSED' if bad.passed() else 'FAILED'}"
      f"  (failing: {', '.join(bad.failures())})")
