import csv
from pathlib import Path

import numpy as np
import pytest

from porostab import io
from porostab.cli import main
from porostab.cases import build_cantilever
from porostab.materials import compute_tau

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SMALL = "scenario: {name: cantilever, overrides: {nx: 4, nz: 4}}\nscheme: fim\n"


def test_run_emits_snapshots_and_csv(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "run"
    assert main(["run", "--config", cfg, "--scheme", "fim", "--dt", "1d", "--steps", "10",
                 "--out", str(out)]) == 0
    assert len(sorted(out.glob("snapshot_*.vtk"))) == 10
    rows = io.read_diagnostics(out / "diagnostics.csv")
    assert len(rows) == 11 and rows[-1]["time_s"] == 10 * 86400.0
    assert (out / "manifest.json").exists()
    assert "run: 10 steps" in capsys.readouterr().out


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("POROSTAB_OUTPUT", str(tmp_path / "root"))
    cfg = write(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--dt", "1d", "--steps", "1"]) == 0
    assert (tmp_path / "root" / "cantilever_fully_implicit" / "diagnostics.csv").exists()


def test_ambiguous_schedule(tmp_path, capsys):
    cfg = write(tmp_path, SMALL + "schedule: [{dt: 1d, steps: 2}]\n")
    assert main(["run", "--config", cfg, "--dt", "1d", "--steps", "2",
                 "--out", str(tmp_path)]) == 2
    assert "ambiguous schedule" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["--dt", "1d"], ["--steps", "3"], ["--scheme", "newton"],
                                  ["--dt", "1 fortnight", "--steps", "1"]])
def test_bad_run_flags(tmp_path, argv):
    cfg = write(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--out", str(tmp_path)] + argv) == 2


def test_missing_schedule(tmp_path):
    assert main(["run", "--config", write(tmp_path, SMALL), "--out", str(tmp_path)]) == 2


def test_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.yaml")]) == 2


def test_stab_c3_sets_tau(tmp_path, monkeypatch):
    import porostab.cli as cli
    seen = {}
    real = cli.run_simulation

    def spy(scenario, cfg, schedule, problem=None, callback=None):
        problem = scenario.build_problem(cfg.stabilization)
        V = scenario.mesh.cell_volumes[0]
        seen["tau"] = problem.system.s_face / V
        return real(scenario, cfg, schedule, problem, callback)

    monkeypatch.setattr(cli, "run_simulation", spy)
    cfg = write(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--scheme", "fs", "--dt", "1d", "--steps", "1",
                 "--stab", "on", "--c", "3", "--out", str(tmp_path / "o")]) == 0
    np.testing.assert_allclose(seen["tau"], compute_tau(3e9, 3e9, 3.0), rtol=1e-14)
    assert compute_tau(3e9, 3e9, 3.0) == pytest.approx(5.625e-11)


def test_sweep_single_dt_matches_run(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--dt", "1d", "--steps", "3",
                 "--out", str(tmp_path / "run")]) == 0
    assert main(["sweep-dt", "--config", cfg, "--dts", "1d", "--t-end", "3d", "--vtk",
                 "--out", str(tmp_path / "sw")]) == 0
    sub = tmp_path / "sw" / "dt_86400s"
    for name in ("diagnostics.csv", "snapshot_00003.vtk"):
        assert (sub / name).read_bytes() == (tmp_path / "run" / name).read_bytes()
    with open(tmp_path / "sw" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and int(rows[0]["steps"]) == 3


def test_sweep_rejects_nondividing_dt(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["sweep-dt", "--config", cfg, "--dts", "0.7d", "--t-end", "1d",
                 "--out", str(tmp_path)]) == 2


def test_vn_sweep_zero_flow(tmp_path):
    grid = write(tmp_path, "base: {b: 1, K_dr: 5e9, k: 0, mu: 1e-3, dx: 1}\n"
                           "theta: {linspace: [0, 3.141592653589793, 5]}\n"
                           "dt: [1d, 1y]\ntau: [0]\n", "g.yaml")
    out = tmp_path / "vn.csv"
    assert main(["vn-sweep", "--grid", grid, "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10 and all(float(r["gamma"]) == 1.0 for r in rows)


def test_vn_sweep_committed_grid(tmp_path):
    out = tmp_path / "vn.csv"
    assert main(["vn-sweep", "--grid", str(CONFIGS / "vn_grid.yaml"), "--out", str(out)]) == 0
    with open(out) as fh:
        gam = [float(r["gamma"]) for r in csv.DictReader(fh)]
    assert max(gam) <= 1.0


def test_vn_sweep_bad_grid(tmp_path):
    grid = write(tmp_path, "base: {b: 1}\ntheta: [0]\ndt: [1]\ntau: [0]\n", "g.yaml")
    assert main(["vn-sweep", "--grid", grid, "--out", str(tmp_path / "x.csv")]) == 2


def test_certify(tmp_path):
    assert main(["certify-nullspace", "--config", str(CONFIGS / "cantilever.yaml")]) == 0
    assert main(["certify-nullspace", "--config", str(CONFIGS / "staircase.yaml")]) == 0


def test_certify_failure_exit_code(tmp_path, monkeypatch):
    import porostab.cli as cli
    monkeypatch.setattr(cli, "nullspace_residual", lambda *a: 1.0)
    assert main(["certify-nullspace", "--config", str(CONFIGS / "cantilever.yaml")]) == 4


def test_solver_error_exit_code(tmp_path, monkeypatch):
    import porostab.cli as cli
    from porostab.errors import SolverError

    def boom(*a, **k):
        raise SolverError("breakdown", 1.0)
    monkeypatch.setattr(cli, "run_simulation", boom)
    cfg = write(tmp_path, SMALL)
    assert main(["run", "--config", cfg, "--dt", "1d", "--steps", "1",
                 "--out", str(tmp_path)]) == 3


def test_index_matches_csv(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "run"
    main(["run", "--config", cfg, "--dt", "1d", "--steps", "3", "--out", str(out)])
    capsys.readouterr()
    assert main(["index", "--vtk", str(out / "snapshot_00003.vtk")]) == 0
    value = float(capsys.readouterr().out.strip())
    rows = io.read_diagnostics(out / "diagnostics.csv")
    assert value == rows[3]["oscillation_index_masked"]


def test_index_mask(tmp_path, capsys):
    sc = build_cantilever(nx=4, nz=4)
    pb = sc.build_problem()
    path = io.write_vtk_snapshot(pb.initial_state(p0=1.0), sc.mesh, tmp_path / "s.vtk")
    assert main(["index", "--vtk", str(path), "--mask", "0"]) == 0
    assert float(capsys.readouterr().out) == 0.0
    assert main(["index", "--vtk", str(path), "--mask", "5"]) == 2


def test_committed_configs_parse():
    for path in sorted(CONFIGS.glob("*.yaml")):
        if path.name != "vn_grid.yaml":
            io.load_config(path)
