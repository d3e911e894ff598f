"""Command-line front end: configure, run, and persist experiments.

Subcommands
-----------
``solve``        forward state solve, nodal CSV + JSON metadata
``optimize``     smoothing homotopy, control CSVs + history + certificate
``certify``      audit saved controls against the certificate tolerances
``convergence``  refinement study against the one-dimensional linear benchmark

Configuration is a YAML file with sections ``problem``, ``grid``,
``activation``, ``constraints``, ``homotopy``, ``certify``.  Unknown
sections or keys are hard errors.  Flags: ``--config PATH``, ``--out DIR``,
``--seed U64``, ``--threads INT``; the environment variables ``FRACOPT_OUT``,
``FRACOPT_SEED`` and ``FRACOPT_THREADS`` supply defaults when the flag is
absent.  Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 certificate failure.

Numbers in CSV bodies are written with 17 significant digits, so identical
config and seed reproduce byte-identical files.  No timestamps are emitted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from .activation import Activation
from .control_space import BoxConstraint, ControlPair
from .errors import (
    ConfigError,
    ContractionFailure,
    LineSearchFailure,
    MittagLefflerRangeError,
    NonFiniteError,
    ProjectionFailure,
)
from .frac_kernel import TimeGrid, mittag_leffler
from .optimizer import HomotopyConfig, default_start, quadratic_tracking, run_homotopy
from .state_solver import solve_state
from .stationarity import Tolerances, assemble_report

__all__ = ["main", "load_config"]

_SOLVER_ERRORS = (ContractionFailure, NonFiniteError, LineSearchFailure,
                  ProjectionFailure, MittagLefflerRangeError)

# section -> key -> (coercer, default); None default means "must fall back
# to a computed value later" and stays None when absent.
_VECTOR = "vector"
_SCHEMA = {
    "problem": {
        "n": (int, 2),
        "y0": (_VECTOR, 1.0),
        "target": (_VECTOR, 0.0),
        "tracking_weight": (float, 1.0),
    },
    "grid": {
        "T": (float, 1.0),
        "N": (int, 128),
        "gamma": (float, 0.5),
    },
    "activation": {
        "name": (str, "relu"),
        "leak": (float, None),
        "shift": (float, None),
        "breakpoints": (list, None),
        "slopes": (list, None),
        "anchor": (list, None),
    },
    "constraints": {
        "lower": (_VECTOR, -1.0),
        "upper": (_VECTOR, 1.0),
    },
    "homotopy": {
        "eps0": (float, 1.0),
        "eps_factor": (float, 0.5),
        "stages": (int, 12),
        "stage_tol": (float, 5e-7),
        "max_iterations": (int, 400),
        "armijo_c": (float, 1e-4),
        "backtrack": (float, 0.5),
        "max_backtracks": (int, 40),
    },
    "certify": {
        "samples": (int, 200),
        "seed": (int, 0),
        "kink_band": (float, None),
        "tol_adjoint": (float, 1e-6),
        "tol_gradient": (float, 1e-6),
        "tol_inclusion": (float, 1e-6),
        "tol_sign": (float, 0.0),
        "tol_vi": (float, 1e-6),
        "tol_b_stationarity": (float, 1e-5),
    },
}

_ACTIVATION_KEYS = {
    "relu": set(),
    "abs": set(),
    "identity": set(),
    "leaky_relu": {"leak"},
    "max_shift": {"shift"},
    "piecewise_linear": {"breakpoints", "slopes", "anchor"},
    "tanh": set(),
}


def _coerce(section: str, key: str, spec, raw):
    kind = spec[0]
    try:
        if kind is _VECTOR:
            if isinstance(raw, (list, tuple)):
                return [float(v) for v in raw]
            return float(raw) if raw is not None else None
        if kind is list:
            if raw is None:
                return None
            if not isinstance(raw, (list, tuple)):
                raise TypeError
            return [float(v) for v in raw]
        if raw is None:
            return None
        if kind is int and isinstance(raw, float) and raw != int(raw):
            raise TypeError
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}: cannot interpret {raw!r}") from None


def load_config(path) -> dict:
    """Parse and validate a YAML config; unknown sections or keys fail hard."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping of sections")

    cfg: dict = {}
    for section, content in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section: {section!r}")
        if content is None:
            content = {}
        if not isinstance(content, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key in content:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    for section, keys in _SCHEMA.items():
        got = raw.get(section) or {}
        cfg[section] = {
            key: _coerce(section, key, spec, got[key]) if key in got else spec[1]
            for key, spec in keys.items()
        }

    act = cfg["activation"]
    name = act["name"]
    if name not in _ACTIVATION_KEYS:
        raise ConfigError(f"unknown activation {name!r}; choose from {sorted(_ACTIVATION_KEYS)}")
    allowed = _ACTIVATION_KEYS[name]
    given = {k for k in ("leak", "shift", "breakpoints", "slopes", "anchor")
             if (raw.get("activation") or {}).get(k) is not None}
    stray = given - allowed
    if stray:
        raise ConfigError(f"activation {name!r} does not use key(s) {sorted(stray)}")
    return cfg


def build_activation(cfg: dict) -> Activation:
    act = cfg["activation"]
    name = act["name"]
    if name == "relu":
        return Activation.relu()
    if name == "abs":
        return Activation.absval()
    if name == "identity":
        return Activation.identity()
    if name == "leaky_relu":
        return Activation.leaky_relu(act["leak"] if act["leak"] is not None else 0.1)
    if name == "max_shift":
        return Activation.max_shift(act["shift"] if act["shift"] is not None else 0.0)
    if name == "tanh":
        return Activation.smooth_tanh()
    if name == "piecewise_linear":
        if act["breakpoints"] is None or act["slopes"] is None:
            raise ConfigError("piecewise_linear needs activation.breakpoints and activation.slopes")
        anchor = act["anchor"] if act["anchor"] is not None else (0.0, 0.0)
        if len(anchor) != 2:
            raise ConfigError("activation.anchor must be a pair [z, value]")
        try:
            return Activation.piecewise_linear(act["breakpoints"], act["slopes"],
                                               anchor=(anchor[0], anchor[1]))
        except ValueError as exc:
            raise ConfigError(f"activation: {exc}") from None
    raise ConfigError(f"unknown activation {name!r}")


def _vector(value, n: int, what: str) -> np.ndarray:
    if isinstance(value, list):
        if len(value) != n:
            raise ConfigError(f"{what} must have length n={n}, got {len(value)}")
        return np.asarray(value, dtype=float)
    return np.full(n, float(value))


def _assemble(cfg: dict):
    g = cfg["grid"]
    try:
        grid = TimeGrid(T=g["T"], N=g["N"], gamma=g["gamma"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    n = cfg["problem"]["n"]
    if n < 1:
        raise ConfigError("problem.n must be >= 1")
    y0 = _vector(cfg["problem"]["y0"], n, "problem.y0")
    target = _vector(cfg["problem"]["target"], n, "problem.target")
    cost = quadratic_tracking(target, cfg["problem"]["tracking_weight"])
    f = build_activation(cfg)
    c = cfg["constraints"]
    lo = _vector(c["lower"], n, "constraints.lower") if c["lower"] is not None else np.full(n, -np.inf)
    up = _vector(c["upper"], n, "constraints.upper") if c["upper"] is not None else np.full(n, np.inf)
    try:
        box = BoxConstraint.from_bounds(lo, up, grid, n)
    except ValueError as exc:
        raise ConfigError(f"constraints: {exc}") from None
    h = cfg["homotopy"]
    try:
        hcfg = HomotopyConfig(
            eps0=h["eps0"], eps_factor=h["eps_factor"], stages=h["stages"],
            stage_tol=h["stage_tol"], max_iterations=h["max_iterations"],
            armijo_c=h["armijo_c"], backtrack=h["backtrack"],
            max_backtracks=h["max_backtracks"],
        )
    except ValueError as exc:
        raise ConfigError(f"homotopy: {exc}") from None
    return grid, n, y0, cost, f, box, hcfg


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _state_rows(grid: TimeGrid, values: np.ndarray):
    for j in range(grid.N + 1):
        yield (grid.t[j], *values[j])


def _control_headers(n: int):
    a_cols = ["t"] + [f"a_{i}_{j}" for i in range(n) for j in range(n)]
    l_cols = ["t"] + [f"ell_{i}" for i in range(n)]
    return a_cols, l_cols


def _load_controls(a_path, ell_path, grid: TimeGrid, n: int) -> ControlPair:
    for p in (a_path, ell_path):
        if not Path(p).is_file():
            raise ConfigError(f"controls file not found: {p}")
    try:
        a_tab = np.loadtxt(a_path, delimiter=",", skiprows=1, ndmin=2)
        l_tab = np.loadtxt(ell_path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"controls file parse error: {exc}") from None
    if a_tab.shape != (grid.N + 1, 1 + n * n) or l_tab.shape != (grid.N + 1, 1 + n):
        raise ConfigError(
            f"controls shape mismatch: expected {grid.N + 1} rows with {n * n} (a) "
            f"and {n} (ell) value columns, got {a_tab.shape} and {l_tab.shape}")
    return ControlPair(a_tab[:, 1:].reshape(grid.N + 1, n, n), l_tab[:, 1:])


def _tolerances(cfg: dict) -> Tolerances:
    c = cfg["certify"]
    return Tolerances(
        adjoint=c["tol_adjoint"], gradient=c["tol_gradient"],
        inclusion=c["tol_inclusion"], sign=c["tol_sign"],
        vi=c["tol_vi"], b_stationarity=c["tol_b_stationarity"],
    )


def cmd_solve(cfg: dict, out: Path, seed: int, threads) -> int:
    grid, n, y0, cost, f, box, hcfg = _assemble(cfg)
    start = default_start(box, grid, n)
    y = solve_state(f, start.a, start.ell, y0, grid)
    _write_csv(out / "state.csv", ["t"] + [f"y_{i}" for i in range(n)],
               _state_rows(grid, y.values))
    _write_json(out / "solve_meta.json", {
        "T": grid.T, "N": grid.N, "gamma": grid.gamma,
        "activation": cfg["activation"]["name"], "n": n,
        "y0": [float(v) for v in y0],
        "terminal_state": [float(v) for v in y.values[-1]],
    })
    print(f"state written to {out / 'state.csv'} "
          f"(N={grid.N}, gamma={grid.gamma}, activation={cfg['activation']['name']})")
    return 0


def cmd_optimize(cfg: dict, out: Path, seed: int, threads) -> int:
    grid, n, y0, cost, f, box, hcfg = _assemble(cfg)
    start = default_start(box, grid, n)
    result = run_homotopy(f, start, box, cost, y0, grid, hcfg)

    a_cols, l_cols = _control_headers(n)
    av = result.control.a.reshape(grid.N + 1, n * n)
    _write_csv(out / "control_a.csv", a_cols,
               ((grid.t[j], *av[j]) for j in range(grid.N + 1)))
    _write_csv(out / "control_ell.csv", l_cols,
               ((grid.t[j], *result.control.ell[j]) for j in range(grid.N + 1)))
    _write_csv(out / "history.csv", list(result.history[0].CSV_FIELDS),
               result.history_rows())

    report = assemble_report(
        f, result.control, box, cost, y0, grid, result.eps_final,
        adjoint=result.adjoint, samples=cfg["certify"]["samples"], seed=seed,
        threads=threads, kink_band=cfg["certify"]["kink_band"])
    with open(out / "report.json", "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    _write_json(out / "optimize_meta.json", {
        "stages": len(result.history),
        "eps_final": result.eps_final,
        "objective": result.history[-1].objective,
        "residual": result.history[-1].residual,
        "certificate_passed": report.passed(_tolerances(cfg)),
        "seed": seed,
    })
    last = result.history[-1]
    print(f"homotopy finished: {len(result.history)} stages, eps_final={result.eps_final:.3e}, "
          f"objective={last.objective:.6e}, residual={last.residual:.3e}")
    print(f"certificate {'PASSED' if report.passed(_tolerances(cfg)) else 'FAILED'}; "
          f"outputs in {out}")
    return 0


def cmd_certify(cfg: dict, out: Path, seed: int, threads, a_path, ell_path) -> int:
    grid, n, y0, cost, f, box, hcfg = _assemble(cfg)
    ctrl = _load_controls(a_path, ell_path, grid, n)
    eps_final = hcfg.schedule()[-1]
    report = assemble_report(
        f, ctrl, box, cost, y0, grid, float(eps_final),
        samples=cfg["certify"]["samples"], seed=seed, threads=threads,
        kink_band=cfg["certify"]["kink_band"])
    with open(out / "report.json", "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    tol = _tolerances(cfg)
    ok = report.passed(tol)
    print(f"certificate {'PASSED' if ok else 'FAILED'}; report in {out / 'report.json'}")
    if not ok:
        print("failing checks: " + ", ".join(report.failures(tol)), file=sys.stderr)
        return 4
    return 0


_STUDY_SIZES = (64, 128, 256, 512, 1024)


def cmd_convergence(cfg: dict, out: Path, seed: int, threads) -> int:
    gamma = cfg["grid"]["gamma"]
    T = cfg["grid"]["T"]
    ident = Activation.identity()
    exact = mittag_leffler(gamma, T ** gamma)
    rows = []
    for N in _STUDY_SIZES:
        grid = TimeGrid(T=T, N=N, gamma=gamma)
        a = np.ones((N + 1, 1, 1))
        y = solve_state(ident, a, np.zeros((N + 1, 1)), np.array([1.0]), grid)
        err = abs(float(y.values[-1, 0]) - exact)
        rows.append((N, grid.h, err))
    logs = np.log([r[2] for r in rows])
    logn = np.log([r[0] for r in rows])
    order = float(-np.polyfit(logn, logs, 1)[0])
    _write_csv(out / "convergence.csv", ["N", "h", "error"], rows)
    _write_json(out / "convergence_meta.json", {
        "gamma": gamma, "T": T, "reference": exact,
        "fitted_order": order, "sizes": list(_STUDY_SIZES),
    })
    print(f"convergence study written to {out / 'convergence.csv'}; "
          f"fitted order {order:.3f} (gamma={gamma})")
    return 0


def _env_int(name: str):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"environment variable {name} must be an integer, got {raw!r}") from None


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fracopt",
        description="Nonsmooth fractional optimal control: solve, optimize, certify.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, extra in (("solve", ()), ("optimize", ()),
                        ("certify", ("controls_a", "controls_ell")), ("convergence", ())):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", default=None, help="output directory (default: ., or FRACOPT_OUT)")
        p.add_argument("--seed", type=int, default=None,
                       help="sampling seed (default: certify.seed, or FRACOPT_SEED)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for sampled checks (default: FRACOPT_THREADS)")
        for pos in extra:
            p.add_argument(pos, help=f"path to {pos.replace('_', ' ')} CSV")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out if args.out is not None else os.environ.get("FRACOPT_OUT", "."))
        out.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else _env_int("FRACOPT_SEED")
        if seed is None:
            seed = cfg["certify"]["seed"]
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
        threads = args.threads if args.threads is not None else _env_int("FRACOPT_THREADS")
        if args.command == "solve":
            return cmd_solve(cfg, out, seed, threads)
        if args.command == "optimize":
            return cmd_optimize(cfg, out, seed, threads)
        if args.command == "certify":
            return cmd_certify(cfg, out, seed, threads, args.controls_a, args.controls_ell)
        return cmd_convergence(cfg, out, seed, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
