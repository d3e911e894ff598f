"""Smoothing homotopy for the nonsmooth terminal-cost control problem.

Outer loop: a geometric schedule of smoothing widths ``eps_k = eps0 *
factor**k``.  Each stage minimizes the smoothed reduced objective

    J_eps(a, ell) = g(y_eps(T)) + 0.5 ||a||_H1^2 + 0.5 ||ell||_H1^2

by projected gradient in the discrete H1 metric (projection acts on the
offset control only), warm-starting from the previous stage.  The gradient
is assembled from the exact transpose adjoint of the marching scheme, so
finite-difference checks of the reduced gradient close to near machine
precision rather than to discretization order.

The schedule is a heuristic: no rate in eps is claimed, only stagewise
descent and stabilizing control drift, which the stage history records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .activation import Activation, MollifiedActivation
from .adjoint import AdjointPair, lr_norm, solve_adjoint_smoothed
from .control_space import (
    BoxConstraint,
    ControlPair,
    h1_inner,
    pairing_density,
    riesz_lift,
)
from .errors import ContractionFailure, LineSearchFailure, NonFiniteError
from .frac_kernel import GridFunction, TimeGrid, diagnostic_exponent
from .state_solver import solve_state

__all__ = [
    "TerminalCost",
    "quadratic_tracking",
    "HomotopyConfig",
    "StageRecord",
    "HomotopyResult",
    "reduced_objective",
    "reduced_gradient",
    "solve_stage",
    "run_homotopy",
    "default_start",
]


@dataclass(frozen=True)
class TerminalCost:
    """Terminal cost ``g(y(T))`` given by value and gradient callables."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"


def quadratic_tracking(target, weight: float = 1.0) -> TerminalCost:
    """g(y) = weight/2 * ||y - target||^2."""
    yd = np.asarray(target, dtype=float)
    if weight < 0:
        raise ValueError("tracking weight must be nonnegative")
    return TerminalCost(
        value=lambda y: 0.5 * weight * float(np.sum((y - yd) ** 2)),
        gradient=lambda y: weight * (y - yd),
        label="quadratic_tracking",
    )


@dataclass(frozen=True)
class HomotopyConfig:
    """Schedule and inner-solver parameters.

    ``prox_anchor`` adds 0.5 * ||ctrl - anchor||_H1^2 to every stage;
    ``prox_from_warm_start`` re-anchors that term at each stage's warm start
    instead.  Both are off by default; the trust region of the underlying
    analysis is a proof device and is not enforced.
    """

    eps0: float = 1.0
    eps_factor: float = 0.5
    stages: int = 12
    stage_tol: float = 5e-7
    max_iterations: int = 400
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    step0: float = 1.0
    step_max: float = 1e6
    prox_anchor: Optional[ControlPair] = None
    prox_from_warm_start: bool = False

    def __post_init__(self) -> None:
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.eps_factor < 1:
            raise ValueError("eps_factor must lie in (0, 1)")
        if self.stages < 1 or self.max_iterations < 1:
            raise ValueError("stages and max_iterations must be >= 1")
        if not 0 < self.armijo_c < 1 or not 0 < self.backtrack < 1:
            raise ValueError("Armijo parameters out of range")

    def schedule(self) -> np.ndarray:
        k = np.arange(1, self.stages + 1)
        return self.eps0 * self.eps_factor ** k


@dataclass(frozen=True)
class StageRecord:
    stage: int
    eps: float
    objective: float
    residual: float
    multiplier_norm: float
    drift: float
    iterations: int

    # columns streamed to the history CSV, in order
    CSV_FIELDS = ("stage", "eps", "objective", "residual", "multiplier_norm")

    def csv_row(self) -> tuple:
        return (self.stage, self.eps, self.objective, self.residual, self.multiplier_norm)


@dataclass(frozen=True)
class HomotopyResult:
    control: ControlPair
    adjoint: AdjointPair
    state: GridFunction
    history: tuple
    eps_final: float
    activation: MollifiedActivation

    def history_rows(self):
        return [rec.csv_row() for rec in self.history]


def _prox_terms(ctrl: ControlPair, anchor: Optional[ControlPair], grid: TimeGrid):
    if anchor is None:
        return 0.0, None, None
    da = ctrl.a - anchor.a
    de = ctrl.ell - anchor.ell
    val = 0.5 * (h1_inner(da, da, grid) + h1_inner(de, de, grid))
    return val, da, de


def _objective_given_state(ctrl: ControlPair, cost: TerminalCost, y: GridFunction,
                           grid: TimeGrid, anchor: Optional[ControlPair]) -> float:
    val = float(cost.value(y.values[-1]))
    val += 0.5 * (h1_inner(ctrl.a, ctrl.a, grid) + h1_inner(ctrl.ell, ctrl.ell, grid))
    val += _prox_terms(ctrl, anchor, grid)[0]
    return val


def reduced_objective(fe, ctrl: ControlPair, cost: TerminalCost, y0, grid: TimeGrid,
                      prox_anchor: Optional[ControlPair] = None) -> float:
    """Smoothed reduced objective at the given controls."""
    y = solve_state(fe, ctrl.a, ctrl.ell, y0, grid)
    return _objective_given_state(ctrl, cost, y, grid, prox_anchor)


def _gradient_given_state(fe, ctrl: ControlPair, cost: TerminalCost, y: GridFunction,
                          grid: TimeGrid, anchor: Optional[ControlPair]):
    pair = solve_adjoint_smoothed(fe, y, ctrl.a, ctrl.ell,
                                  np.asarray(cost.gradient(y.values[-1]), dtype=float), grid)
    lam = pair.lam.values
    dens_a = np.einsum("ki,kj->kij", lam, y.values[1:])
    ga = ctrl.a + riesz_lift(pairing_density(dens_a, grid), grid)
    gl = ctrl.ell + riesz_lift(pairing_density(lam, grid), grid)
    _, da, de = _prox_terms(ctrl, anchor, grid)
    if da is not None:
        ga = ga + da
        gl = gl + de
    return ControlPair(ga, gl), pair


def reduced_gradient(fe, ctrl: ControlPair, cost: TerminalCost, y0, grid: TimeGrid,
                     prox_anchor: Optional[ControlPair] = None) -> ControlPair:
    """H1-Riesz representative of the smoothed reduced gradient."""
    y = solve_state(fe, ctrl.a, ctrl.ell, y0, grid)
    return _gradient_given_state(fe, ctrl, cost, y, grid, prox_anchor)[0]


def _pg_residual(ctrl: ControlPair, grad: ControlPair, box: Optional[BoxConstraint],
                 grid: TimeGrid) -> float:
    ra2 = h1_inner(grad.a, grad.a, grid)
    shifted = ctrl.ell - grad.ell
    proj = box.project(shifted, grid) if box is not None else shifted
    rl = ctrl.ell - proj
    return float(np.sqrt(ra2 + h1_inner(rl, rl, grid)))


def solve_stage(fe, start: ControlPair, box: Optional[BoxConstraint], cost: TerminalCost,
                y0, grid: TimeGrid, cfg: HomotopyConfig, stats: Optional[dict] = None) -> ControlPair:
    """Projected gradient with Armijo backtracking at a fixed smoothing width.

    Iterates ``a <- a - s grad_a``, ``ell <- proj_box(ell - s grad_ell)``
    until the unit-step projected-gradient residual drops below
    ``cfg.stage_tol`` or the iteration cap is reached.  Accepted steps
    satisfy ``J(new) <= J(old) - c/s * dist(new, old)^2``, which reduces to
    the classical Armijo condition when the projection is inactive.  Raises
    :class:`LineSearchFailure` when ``max_backtracks`` halvings cannot
    produce sufficient decrease.
    """
    anchor = start if cfg.prox_from_warm_start else cfg.prox_anchor
    ctrl = start
    y = solve_state(fe, ctrl.a, ctrl.ell, y0, grid)
    obj = _objective_given_state(ctrl, cost, y, grid, anchor)
    step = cfg.step0
    residual = np.inf
    iterations = 0

    for iterations in range(cfg.max_iterations):
        grad, _ = _gradient_given_state(fe, ctrl, cost, y, grid, anchor)
        residual = _pg_residual(ctrl, grad, box, grid)
        if residual <= cfg.stage_tol:
            break

        step = min(step * 2.0, cfg.step_max)
        accepted = False
        for _ in range(cfg.max_backtracks + 1):
            a_new = ctrl.a - step * grad.a
            ell_shift = ctrl.ell - step * grad.ell
            ell_new = box.project(ell_shift, grid) if box is not None else ell_shift
            da = a_new - ctrl.a
            de = ell_new - ctrl.ell
            dist2 = h1_inner(da, da, grid) + h1_inner(de, de, grid)
            if dist2 <= 1e-30:
                accepted = True
                trial, y_new, obj_new = ctrl, y, obj
                break
            trial = ControlPair(a_new, ell_new)
            try:
                y_new = solve_state(fe, a_new, ell_new, y0, grid)
            except (ContractionFailure, NonFiniteError):
                # overlong trial step left the solvable regime; shrink it
                step *= cfg.backtrack
                continue
            obj_new = _objective_given_state(trial, cost, y_new, grid, anchor)
            if obj_new <= obj - cfg.armijo_c / step * dist2:
                accepted = True
                break
            step *= cfg.backtrack
        if not accepted:
            raise LineSearchFailure(
                f"no sufficient decrease after {cfg.max_backtracks} backtracks "
                f"(residual {residual:.3e})")
        if trial is ctrl:
            break
        ctrl, y, obj = trial, y_new, obj_new
    else:
        iterations = cfg.max_iterations

    if stats is not None:
        stats.update(objective=obj, residual=residual, iterations=iterations, step=step)
    return ctrl


def default_start(box: Optional[BoxConstraint], grid: TimeGrid, n: int) -> ControlPair:
    """Zero coupling; offset at the box midpoint (zero where unbounded)."""
    a0 = np.zeros((grid.N + 1, n, n))
    if box is None:
        return ControlPair(a0, np.zeros((grid.N + 1, n)))
    mid = box.midpoint()
    ell0 = np.where(np.isfinite(mid), mid, np.clip(0.0, box.lower, box.upper))
    return ControlPair(a0, ell0)


def run_homotopy(f: Activation, start: Optional[ControlPair], box: Optional[BoxConstraint],
                 cost: TerminalCost, y0, grid: TimeGrid,
                 cfg: Optional[HomotopyConfig] = None) -> HomotopyResult:
    """Drive the smoothing schedule to its final width with warm starts.

    Returns the final controls, the final-stage smoothed adjoint pair (the
    candidate multiplier for the stationarity audit), the final smoothed
    state, and one :class:`StageRecord` per stage.
    """
    cfg = cfg or HomotopyConfig()
    y0 = np.asarray(y0, dtype=float)
    ctrl = start if start is not None else default_start(box, grid, y0.shape[0])
    r = diagnostic_exponent(grid.gamma)

    history = []
    fe = None
    for k, eps in enumerate(cfg.schedule(), start=1):
        fe = MollifiedActivation(f, float(eps))
        prev = ctrl
        stats: dict = {}
        ctrl = solve_stage(fe, ctrl, box, cost, y0, grid, cfg, stats=stats)
        drift = ctrl.distance(prev, grid)
        y = solve_state(fe, ctrl.a, ctrl.ell, y0, grid)
        _, pair = _gradient_given_state(fe, ctrl, cost, y, grid, None)
        history.append(StageRecord(
            stage=k,
            eps=float(eps),
            objective=float(stats.get("objective", np.nan)),
            residual=float(stats.get("residual", np.nan)),
            multiplier_norm=lr_norm(pair.lam.values, grid, r),
            drift=drift,
            iterations=int(stats.get("iterations", -1)),
        ))

    y = solve_state(fe, ctrl.a, ctrl.ell, y0, grid)
    _, pair = _gradient_given_state(fe, ctrl, cost, y, grid, None)
    return HomotopyResult(
        control=ctrl,
        adjoint=pair,
        state=y,
        history=tuple(history),
        eps_final=float(cfg.schedule()[-1]),
        activation=fe,
    )
