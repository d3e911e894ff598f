"""Certificate audits for candidate optimal controls.

Given a candidate control pair with its state and an adjoint/multiplier
pair, these checks quantify how far the candidate is from the first-order
conditions of the nonsmooth problem:

* a constraint-qualification scan (some state component bounded away from
  zero),
* the differential-inclusion test (multiplier between the one-sided
  adjoint products, with the endpoint ordering reported separately),
* residuals of the two gradient identities (coupling-control equation and
  the offset variational inequality on sampled cone directions),
* a sampled B-stationarity lower bound driven by the exact nonsmooth
  directional state sensitivity.

All residuals are reported absolutely and relative to problem norms, so
tolerances are dimensionless.  Sampling is Monte-Carlo with an explicit
seed; sample counts and the seed are part of the report.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .activation import Activation, MollifiedActivation
from .adjoint import AdjointPair, adjoint_residual, lr_norm, multiplier_pairing, solve_adjoint_smoothed
from .control_space import (
    BoxConstraint,
    ControlPair,
    cone_directions,
    h1_inner,
    h1_norm,
    pairing_density,
    riesz_lift,
)
from .frac_kernel import GridFunction, TimeGrid, diagnostic_exponent
from .optimizer import TerminalCost
from .sensitivity import solve_sensitivity
from .state_solver import nodal_arguments, solve_state

__all__ = [
    "CqResult",
    "InclusionResult",
    "GradientSystemResult",
    "BStationarityResult",
    "Tolerances",
    "StationarityReport",
    "check_cq",
    "check_inclusion",
    "check_gradient_system",
    "check_b_stationarity",
    "directional_stationarity_value",
    "assemble_report",
]


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=float)


@dataclass(frozen=True)
class CqResult:
    satisfied: bool
    index: Optional[int]
    componentwise_min: np.ndarray
    tol: float


def check_cq(y, tol: float = 1e-8) -> CqResult:
    """Find a state component with ``min_t |y_m(t)| > tol``.

    Returns the first such index; with a nonnegative activation and positive
    initial data the first component already qualifies, since the state can
    only grow from its starting value.
    """
    yv = _values(y)
    minima = np.min(np.abs(yv), axis=0)
    hits = np.flatnonzero(minima > tol)
    if hits.size:
        return CqResult(True, int(hits[0]), minima, tol)
    return CqResult(False, None, minima, tol)


@dataclass(frozen=True)
class InclusionResult:
    max_distance: float
    sign_violation: float
    kkt_consistent: float
    off_kink_nodes: int
    kink_band: float


def check_inclusion(activation: Activation, y, a, ell, p, lam,
                    kink_band: float = 0.0, kkt_tol: float = 1e-8) -> InclusionResult:
    """Distance of the multiplier to the one-sided adjoint product interval.

    Pairs panel values ``p_k``, ``lam_k`` with the nodal argument at
    ``t_{k+1}``.  The membership test sorts the interval endpoints; the
    ordering requirement ``p f'_- <= p f'_+`` is scored separately as
    ``sign_violation`` (it fails exactly where the adjoint is negative at a
    convex kink).  Off the kink band (``|arg - kink| > kink_band``) the
    interval degenerates and the scheme should reduce to a plain equality;
    ``kkt_consistent`` is the fraction of those nodes where it does.
    """
    yv = _values(y)
    av = _values(a)
    lv = _values(ell)
    pv = _values(p)
    lamv = _values(lam)
    z = nodal_arguments(av, lv, yv)[1:]
    if pv.shape != z.shape or lamv.shape != z.shape:
        raise ValueError("adjoint arrays must carry one value per panel and component")

    fm, fp = activation.one_sided_slopes(z)
    lo = np.minimum(pv * fm, pv * fp)
    hi = np.maximum(pv * fm, pv * fp)
    dist = np.maximum(np.maximum(lo - lamv, lamv - hi), 0.0)
    sign = np.maximum(pv * fm - pv * fp, 0.0)

    if activation.kinks.size:
        gaps = np.abs(z[..., None] - activation.kinks)
        near = np.any(gaps <= kink_band, axis=-1)
    else:
        near = np.zeros(z.shape, dtype=bool)
    off = ~near
    if np.any(off):
        prod = pv[off] * fp[off]
        ok = np.abs(lamv[off] - prod) <= kkt_tol * np.maximum(1.0, np.abs(prod))
        fraction = float(np.count_nonzero(ok)) / float(np.count_nonzero(off))
    else:
        fraction = 1.0
    return InclusionResult(
        max_distance=float(dist.max(initial=0.0)),
        sign_violation=float(sign.max(initial=0.0)),
        kkt_consistent=fraction,
        off_kink_nodes=int(np.count_nonzero(off)),
        kink_band=float(kink_band),
    )


@dataclass(frozen=True)
class GradientSystemResult:
    grad_a_residual: float
    grad_a_relative: float
    vi_violation: float
    vi_direction: Optional[np.ndarray]
    samples: int


def check_gradient_system(ctrl: ControlPair, y, lam, box: Optional[BoxConstraint],
                          grid: TimeGrid, samples: int = 100, rng=None,
                          active_tol: float = 1e-9) -> GradientSystemResult:
    """Residuals of the two control gradient identities.

    ``grad_a_residual``: H1 norm of the coupling control plus the lifted
    multiplier/state outer-product density (zero iff the coupling equation
    holds discretely), also scaled by the sizes of its two terms.
    ``vi_violation``: most negative sampled value of
    ``(ell, d)_H1 + <lam, d>`` over feasible-cone directions ``d``.
    """
    yv = _values(y)
    lamv = _values(lam)
    dens = np.einsum("ki,kj->kij", lamv, yv[1:])
    lift = riesz_lift(pairing_density(dens, grid), grid)
    resid = h1_norm(ctrl.a + lift, grid)
    denom = h1_norm(ctrl.a, grid) + h1_norm(lift, grid)
    relative = resid / denom if denom > 0 else 0.0

    vi = 0.0
    worst = None
    if samples > 0:
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        the_box = box if box is not None else BoxConstraint.from_bounds(-np.inf, np.inf, grid, ctrl.ell.shape[1])
        dirs = cone_directions(ctrl.ell, the_box, grid, samples, gen, active_tol=active_tol)
        if len(dirs):
            vals = np.array([
                h1_inner(ctrl.ell, d, grid) + multiplier_pairing(lamv, d, grid) for d in dirs
            ])
            k = int(np.argmin(vals))
            vi = float(vals[k])
            worst = dirs[k]
    return GradientSystemResult(
        grad_a_residual=float(resid),
        grad_a_relative=float(relative),
        vi_violation=vi,
        vi_direction=worst,
        samples=samples,
    )


def directional_stationarity_value(f: Activation, ctrl: ControlPair, cost: TerminalCost,
                                   y0, grid: TimeGrid, da, dell,
                                   y: Optional[GridFunction] = None) -> float:
    """Raw first-order value along one direction (positively homogeneous).

    ``grad g(y(T)) . dy(T) + (a, da)_H1 + (ell, dell)_H1`` with ``dy`` the
    exact nonsmooth directional state sensitivity.
    """
    if y is None:
        y = solve_state(f, ctrl.a, ctrl.ell, np.asarray(y0, dtype=float), grid)
    dy = solve_sensitivity(f, y, ctrl.a, ctrl.ell, da, dell, grid)
    gy = np.asarray(cost.gradient(y.values[-1]), dtype=float)
    return float(gy @ dy.values[-1]
                 + h1_inner(ctrl.a, da, grid)
                 + h1_inner(ctrl.ell, dell, grid))


@dataclass(frozen=True)
class BStationarityResult:
    minimum: float
    raw_minimum: float
    samples: int
    seed: int


def check_b_stationarity(f: Activation, ctrl: ControlPair, box: Optional[BoxConstraint],
                         cost: TerminalCost, y0, grid: TimeGrid,
                         samples: int = 200, seed: int = 0,
                         threads: Optional[int] = None,
                         active_tol: float = 1e-9) -> BStationarityResult:
    """Sampled lower bound on the directional first-order values.

    Directions: Gaussian nodal coupling perturbations, offset perturbations
    from the feasible cone at ``ctrl.ell``.  Values are normalized by the
    joint H1 norm of the direction; the result is a Monte-Carlo check, not a
    certificate over all directions.
    """
    rng = np.random.default_rng(seed)
    y0 = np.asarray(y0, dtype=float)
    n = y0.shape[0]
    y = solve_state(f, ctrl.a, ctrl.ell, y0, grid)
    the_box = box if box is not None else BoxConstraint.from_bounds(-np.inf, np.inf, grid, n)
    dls = cone_directions(ctrl.ell, the_box, grid, samples, rng, active_tol=active_tol)
    count = len(dls)
    das = rng.standard_normal((count, grid.N + 1, n, n))

    def one(i: int) -> float:
        raw = directional_stationarity_value(f, ctrl, cost, y0, grid, das[i], dls[i], y=y)
        nrm = np.sqrt(h1_inner(das[i], das[i], grid) + h1_inner(dls[i], dls[i], grid))
        return raw / nrm

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, range(count)))
    else:
        vals = [one(i) for i in range(count)]
    vals = np.asarray(vals)
    k = int(np.argmin(vals))
    nrm_k = np.sqrt(h1_inner(das[k], das[k], grid) + h1_inner(dls[k], dls[k], grid))
    return BStationarityResult(
        minimum=float(vals[k]),
        raw_minimum=float(vals[k] * nrm_k),
        samples=count,
        seed=seed,
    )


@dataclass(frozen=True)
class Tolerances:
    """Dimensionless certificate tolerances (relative where applicable)."""

    adjoint: float = 1e-6
    gradient: float = 1e-6
    inclusion: float = 1e-6
    sign: float = 0.0
    vi: float = 1e-6
    b_stationarity: float = 1e-5


@dataclass(frozen=True)
class StationarityReport:
    cq: CqResult
    adjoint_absolute: float
    adjoint_relative: float
    inclusion: InclusionResult
    gradient: GradientSystemResult
    b_stationarity: BStationarityResult
    norms: dict = field(default_factory=dict)
    problem: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cq": {
                "satisfied": bool(self.cq.satisfied),
                "index": self.cq.index,
                "componentwise_min": [float(v) for v in self.cq.componentwise_min],
                "tol": float(self.cq.tol),
            },
            "adjoint": {
                "absolute": self.adjoint_absolute,
                "relative": self.adjoint_relative,
            },
            "inclusion": {
                "violation": self.inclusion.max_distance,
                "sign_condition": self.inclusion.sign_violation,
                "kkt_consistent": self.inclusion.kkt_consistent,
                "off_kink_nodes": self.inclusion.off_kink_nodes,
                "kink_band": self.inclusion.kink_band,
            },
            "gradient": {
                "a_residual": self.gradient.grad_a_residual,
                "a_relative": self.gradient.grad_a_relative,
                "vi_violation": self.gradient.vi_violation,
                "vi_samples": self.gradient.samples,
            },
            "b_stationarity": {
                "minimum": self.b_stationarity.minimum,
                "raw_minimum": self.b_stationarity.raw_minimum,
                "samples": self.b_stationarity.samples,
                "seed": self.b_stationarity.seed,
            },
            "norms": dict(sorted(self.norms.items())),
            "problem": dict(sorted(self.problem.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def passed(self, tol: Optional[Tolerances] = None) -> bool:
        tol = tol or Tolerances()
        return bool(
            self.cq.satisfied
            and self.adjoint_relative <= tol.adjoint
            and self.gradient.grad_a_relative <= tol.gradient
            and self.inclusion.max_distance <= tol.inclusion
            and self.inclusion.sign_violation <= tol.sign
            and self.gradient.vi_violation >= -tol.vi
            and self.b_stationarity.minimum >= -tol.b_stationarity
        )

    def failures(self, tol: Optional[Tolerances] = None) -> list:
        tol = tol or Tolerances()
        out = []
        if not self.cq.satisfied:
            out.append("cq")
        if self.adjoint_relative > tol.adjoint:
            out.append("adjoint")
        if self.gradient.grad_a_relative > tol.gradient:
            out.append("gradient")
        if self.inclusion.max_distance > tol.inclusion:
            out.append("inclusion")
        if self.inclusion.sign_violation > tol.sign:
            out.append("sign")
        if self.gradient.vi_violation < -tol.vi:
            out.append("vi")
        if self.b_stationarity.minimum < -tol.b_stationarity:
            out.append("b_stationarity")
        return out


def assemble_report(f: Activation, ctrl: ControlPair, box: Optional[BoxConstraint],
                    cost: TerminalCost, y0, grid: TimeGrid, eps_final: float,
                    adjoint: Optional[AdjointPair] = None,
                    samples: int = 200, seed: int = 0,
                    threads: Optional[int] = None,
                    kink_band: Optional[float] = None,
                    r: Optional[float] = None) -> StationarityReport:
    """Full audit of a candidate control pair.

    When no adjoint pair is supplied, one is reconstructed from the smoothed
    problem at width ``eps_final`` (the multiplier a smoothing homotopy would
    hand over).  The kink band defaults to twice that width.
    """
    y0 = np.asarray(y0, dtype=float)
    r = diagnostic_exponent(grid.gamma) if r is None else float(r)
    band = 2.0 * eps_final if kink_band is None else float(kink_band)

    y = solve_state(f, ctrl.a, ctrl.ell, y0, grid)
    if adjoint is None:
        fe = MollifiedActivation(f, eps_final)
        y_eps = solve_state(fe, ctrl.a, ctrl.ell, y0, grid)
        adjoint = solve_adjoint_smoothed(
            fe, y_eps, ctrl.a, ctrl.ell,
            np.asarray(cost.gradient(y_eps.values[-1]), dtype=float), grid)

    defect = adjoint_residual(adjoint, ctrl.a, grid, r)
    incl = check_inclusion(f, y, ctrl.a, ctrl.ell,
                           adjoint.p.values, adjoint.lam.values, kink_band=band)
    grad = check_gradient_system(ctrl, y, adjoint.lam, box, grid,
                                 samples=samples,
                                 rng=np.random.default_rng([seed, 1]))
    bstat = check_b_stationarity(f, ctrl, box, cost, y0, grid,
                                 samples=samples, seed=seed, threads=threads)
    lam_norm = lr_norm(adjoint.lam.values, grid, r)
    return StationarityReport(
        cq=check_cq(y),
        adjoint_absolute=defect.absolute,
        adjoint_relative=defect.relative,
        inclusion=incl,
        gradient=grad,
        b_stationarity=bstat,
        norms={
            "control": ctrl.h1_norm(grid),
            "multiplier": lam_norm,
            "terminal_state": float(np.linalg.norm(y.values[-1])),
        },
        problem={
            "T": grid.T,
            "N": grid.N,
            "gamma": grid.gamma,
            "eps_final": float(eps_final),
            "r_exponent": r,
            "kink_band": band,
        },
    )
