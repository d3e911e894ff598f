"""Config validation, subcommand round trips, and exit codes."""

import json

import numpy as np
import pytest

from fracopt import ConfigError
from fracopt.cli import build_activation, load_config, main


def write_config(path, text):
    path.write_text(text)
    return str(path)


BASE = """\
problem:
  n: 1
  y0: 0.5
  target: 1.2
grid:
  T: 1.0
  N: 24
  gamma: 0.5
activation:
  name: relu
constraints:
  lower: -1.0
  upper: 1.0
homotopy:
  stages: 5
  stage_tol: 1.0e-5
  max_iterations: 150
certify:
  samples: 30
"""


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.yaml")

    def test_unknown_section(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "solver:\n  x: 1\n")
        with pytest.raises(ConfigError, match="unknown config section"):
            load_config(p)

    def test_unknown_key(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "grid:\n  M: 10\n")
        with pytest.raises(ConfigError, match="unknown key grid.M"):
            load_config(p)

    def test_type_coercion_rejects_fractional_int(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "grid:\n  N: 10.5\n")
        with pytest.raises(ConfigError, match="grid.N"):
            load_config(p)

    def test_defaults_fill_missing_sections(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "problem:\n  n: 3\n")
        cfg = load_config(p)
        assert cfg["problem"]["n"] == 3
        assert cfg["grid"]["N"] == 128
        assert cfg["homotopy"]["stages"] == 12
        assert cfg["certify"]["tol_sign"] == 0.0

    def test_scalar_or_list_vectors(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "problem:\n  y0: [1.0, 2.0]\n  target: 0.5\n")
        cfg = load_config(p)
        assert cfg["problem"]["y0"] == [1.0, 2.0]
        assert cfg["problem"]["target"] == 0.5

    def test_stray_activation_key(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "activation:\n  name: relu\n  leak: 0.2\n")
        with pytest.raises(ConfigError, match="does not use"):
            load_config(p)

    def test_unknown_activation_name(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "activation:\n  name: swish\n")
        with pytest.raises(ConfigError, match="unknown activation"):
            load_config(p)

    def test_non_mapping_root(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(p)


class TestBuildActivation:
    def test_named_activations(self, tmp_path):
        for name, z, want in (("relu", -1.0, 0.0), ("abs", -2.0, 2.0),
                              ("identity", -3.0, -3.0)):
            p = write_config(tmp_path / f"{name}.yaml", f"activation:\n  name: {name}\n")
            f = build_activation(load_config(p))
            assert f.value(np.array([z]))[0] == pytest.approx(want)

    def test_leaky_with_parameter(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "activation:\n  name: leaky_relu\n  leak: 0.25\n")
        f = build_activation(load_config(p))
        assert f.value(np.array([-2.0]))[0] == pytest.approx(-0.5)

    def test_piecewise_requires_tables(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", "activation:\n  name: piecewise_linear\n")
        with pytest.raises(ConfigError, match="breakpoints"):
            build_activation(load_config(p))

    def test_piecewise_full_spec(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", (
            "activation:\n  name: piecewise_linear\n"
            "  breakpoints: [0.0, 1.0]\n  slopes: [0.0, 1.0, 2.0]\n  anchor: [0.0, 0.0]\n"))
        f = build_activation(load_config(p))
        assert f.value(np.array([2.0]))[0] == pytest.approx(3.0)


class TestMainExitCodes:
    def test_bad_config_is_2(self, tmp_path, capsys):
        p = write_config(tmp_path / "c.yaml", "grid:\n  N: -4\n")
        assert main(["solve", "--config", p, "--out", str(tmp_path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_negative_seed_is_2(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", BASE)
        assert main(["solve", "--config", p, "--out", str(tmp_path), "--seed", "-1"]) == 2

    def test_solver_failure_is_3(self, tmp_path, capsys):
        # horizon far outside the special-function range, and the reference
        # marching step is non-contractive at that width either way
        cfg = BASE.replace("T: 1.0", "T: 10000.0")
        p = write_config(tmp_path / "c.yaml", cfg)
        assert main(["convergence", "--config", p, "--out", str(tmp_path)]) == 3
        assert "solver failure" in capsys.readouterr().err


class TestSolveCommand:
    def test_round_trip(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", BASE)
        out = tmp_path / "run"
        assert main(["solve", "--config", p, "--out", str(out)]) == 0
        tab = np.loadtxt(out / "state.csv", delimiter=",", skiprows=1)
        assert tab.shape == (25, 2)
        assert tab[0, 1] == pytest.approx(0.5)
        meta = json.loads((out / "solve_meta.json").read_text())
        assert meta["N"] == 24 and meta["activation"] == "relu"
        assert meta["terminal_state"][0] == pytest.approx(tab[-1, 1])

    def test_reruns_are_byte_identical(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", BASE)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["solve", "--config", p, "--out", str(out1)]) == 0
        assert main(["solve", "--config", p, "--out", str(out2)]) == 0
        for name in ("state.csv", "solve_meta.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_out_from_environment(self, tmp_path, monkeypatch):
        p = write_config(tmp_path / "c.yaml", BASE)
        envdir = tmp_path / "envout"
        monkeypatch.setenv("FRACOPT_OUT", str(envdir))
        assert main(["solve", "--config", p]) == 0
        assert (envdir / "state.csv").is_file()


class TestConvergenceCommand:
    def test_study_outputs(self, tmp_path):
        p = write_config(tmp_path / "c.yaml", BASE)
        out = tmp_path / "conv"
        assert main(["convergence", "--config", p, "--out", str(out)]) == 0
        tab = np.loadtxt(out / "convergence.csv", delimiter=",", skiprows=1)
        assert tab.shape == (5, 3)
        assert np.all(np.diff(tab[:, 2]) < 0)  # errors fall under refinement
        meta = json.loads((out / "convergence_meta.json").read_text())
        assert meta["fitted_order"] > 0.4


@pytest.fixture(scope="module")
def optimized(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("opt")
    p = write_config(tmp / "c.yaml", BASE)
    out = tmp / "run"
    code = main(["optimize", "--config", p, "--out", str(out)])
    return code, p, out


class TestOptimizeAndCertify:
    def test_optimize_succeeds(self, optimized):
        code, p, out = optimized
        assert code == 0
        for name in ("control_a.csv", "control_ell.csv", "history.csv",
                     "report.json", "optimize_meta.json"):
            assert (out / name).is_file()
        hist = np.loadtxt(out / "history.csv", delimiter=",", skiprows=1)
        assert hist.shape == (5, 5)
        meta = json.loads((out / "optimize_meta.json").read_text())
        assert meta["stages"] == 5
        assert meta["eps_final"] == pytest.approx(2.0**-5)

    def test_certify_reloaded_controls(self, optimized, tmp_path):
        code, p, out = optimized
        report_dir = tmp_path / "cert"
        rc = main(["certify", "--config", p, "--out", str(report_dir),
                   str(out / "control_a.csv"), str(out / "control_ell.csv")])
        report = json.loads((report_dir / "report.json").read_text())
        assert rc in (0, 4)  # tolerance verdict, but the report must exist
        assert report["problem"]["N"] == 24
        assert report["cq"]["satisfied"] is True

    def test_certify_zero_controls_fails(self, optimized, tmp_path, capsys):
        code, p, out = optimized
        a = np.loadtxt(out / "control_a.csv", delimiter=",", skiprows=1, ndmin=2)
        ell = np.loadtxt(out / "control_ell.csv", delimiter=",", skiprows=1, ndmin=2)
        a[:, 1:] = 0.0
        ell[:, 1:] = 0.9  # far from any stationary offset
        np.savetxt(tmp_path / "a.csv", a, delimiter=",", header="t,a_0_0", comments="")
        np.savetxt(tmp_path / "l.csv", ell, delimiter=",", header="t,ell_0", comments="")
        rc = main(["certify", "--config", p, "--out", str(tmp_path),
                   str(tmp_path / "a.csv"), str(tmp_path / "l.csv")])
        assert rc == 4
        assert "failing checks" in capsys.readouterr().err

    def test_certify_shape_mismatch_is_2(self, optimized, tmp_path):
        code, p, out = optimized
        (tmp_path / "a.csv").write_text("t,a_0_0\n0.0,0.0\n")
        rc = main(["certify", "--config", p, "--out", str(tmp_path),
                   str(tmp_path / "a.csv"), str(out / "control_ell.csv")])
        assert rc == 2

    def test_certify_missing_controls_is_2(self, optimized, tmp_path):
        code, p, out = optimized
        rc = main(["certify", "--config", p, "--out", str(tmp_path),
                   str(tmp_path / "absent.csv"), str(out / "control_ell.csv")])
        assert rc == 2
