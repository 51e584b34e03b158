import csv

import pytest

from pfaccel import cli
from pfaccel.staggered import IterationRecord, SimulationReport, StepResult


def test_defaults():
    cfg = cli.parse_config(argv=[])
    assert (cfg.case, cfg.profile, cfg.mode, cfg.depth, cfg.omega, cfg.n_switch) == (
        "tensile", "desk", "combined", 1, 1.6, 5)
    assert cli.run_specs(cfg) == [(1, 1.6)]


def test_file_then_flags(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\ncase = shear\nomega = 1.3\ntol_res_rel = 1e-3\nmax-iter = 20\n")
    cfg = cli.parse_config(argv=["--config", str(p), "--omega", "1.5"])
    assert cfg.case == "shear" and cfg.omega == 1.5 and cfg.max_iter == 20
    assert cfg.solver_config().tol_res_rel == 1e-3


def test_unknown_key(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("colour = blue\n")
    with pytest.raises(cli.ConfigError, match="colour"):
        cli.parse_config(p)


@pytest.mark.parametrize("argv,key", [(["--omega", "2.5"], "omega"), (["--depth", "-1"], "depth"),
                                      (["--omega", "fast"], "omega")])
def test_invalid_values_name_key(argv, key):
    with pytest.raises(cli.ConfigError, match=key):
        cli.parse_config(argv=argv)


def test_sweep_is_cartesian():
    cfg = cli.parse_config(argv=["--sweep-depth", "0,1,2", "--sweep-omega", "1.0,1.6"])
    assert cli.run_specs(cfg) == [(0, 1.0), (0, 1.6), (1, 1.0), (1, 1.6), (2, 1.0), (2, 1.6)]


def test_sweep_rejects_bad_omega():
    with pytest.raises(cli.ConfigError, match="omega"):
        cli.parse_config(argv=["--sweep-omega", "1.0,2.0"])


def _report():
    rep = SimulationReport("demo")
    rep.steps = [StepResult(1, 1e-4, 3, True, {"AA": 2, "OR": 1}, 0.0, 0.1, 6),
                 StepResult(2, 2e-4, 5, False, {"AA": 5}, 0.0, 0.2, 9)]
    rep.records = [IterationRecord(1, i, 10.0**-i, "AA", 2, 0.0) for i in (1, 2, 3)]
    return rep


def test_csv_writers(tmp_path):
    rep = _report()
    cli.write_iteration_csv(rep, tmp_path / "it.csv")
    rows = list(csv.reader(open(tmp_path / "it.csv")))
    assert rows[0] == ["load_step", "iterations", "converged", "mode_summary"]
    assert rows[1] == ["1", "3", "1", "AA:2 OR:1"]
    assert rows[-1] == ["TOTAL", "8", "0", ""]
    assert cli.read_iteration_csv(tmp_path / "it.csv") == {1: 3, 2: 5}
    cli.write_load_csv(rep, tmp_path / "ld.csv")
    rows = list(csv.reader(open(tmp_path / "ld.csv")))
    assert rows[0] == ["load_step", "applied_displacement", "tau_x", "tau_y"]
    assert float(rows[2][3]) == 0.2
    cli.write_residual_csv(rep, tmp_path / "res.csv")
    rows = list(csv.reader(open(tmp_path / "res.csv")))
    assert rows[0] == ["load_step", "iter", "res_u_norm", "mode"] and len(rows) == 4


def test_main_run_and_sweep(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["--case", "tensile", "--steps", "2", "--out", str(out), "--vtk",
                     "--sweep-depth", "0,1", "--sweep-omega", "1.6"])
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert "iterations_m0_w1.6.csv" in names and "iterations_m1_w1.6.csv" in names
    assert "fields_m1_w1.6_0002.vtk" in names
    grid = list(csv.reader(open(out / "sweep_summary.csv")))
    assert grid[0] == ["depth", "omega=1.6"] and len(grid) == 3


def test_exit_codes(tmp_path):
    assert cli.main(["--steps", "1", "--max-iter", "1", "--out", str(tmp_path)]) == 2
    assert cli.main(["--omega", "3", "--out", str(tmp_path)]) == 1
    assert cli.main(["--case", "nope"]) == 1
