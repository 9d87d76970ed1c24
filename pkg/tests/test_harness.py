import json

import numpy as np
import pytest

from bcowlab.cli import main
from bcowlab.config import ConfigError, ExperimentConfig, expand_axis, parse_config
from bcowlab.harness import (RunRecord, emit_csv, format_value, header, read_csv, run,
                             stable_text)
from bcowlab.linalg import matrix_to_dict


def write_problem(path, A, b, x, T):
    path.write_text(json.dumps({"A": matrix_to_dict(A), "b": matrix_to_dict(np.asarray(b)),
                                "x_in": matrix_to_dict(np.asarray(x)), "T": T}))
    return str(path)


# -- config ------------------------------------------------------------------------

def test_minimal_config_defaults():
    cfg = parse_config("mode: solve\nproblem: p.json\n")
    assert cfg.epsilon == 0.1 and cfg.method == "block_forward" and cfg.jobs == 1
    assert len(cfg.cells()) == 1


def test_range_axis_gives_six_cells_in_order():
    cfg = parse_config("mode: verify-bounds\nfamily: jordan_block:N=2\nsweep:\n  k: 5..10\n")
    assert [c["k"] for c in cfg.cells()] == [5, 6, 7, 8, 9, 10]
    cfg = parse_config("mode: sweep\nseed: 1\nsweep:\n  N: [2, 3]\n  k: [5, 6]\n")
    assert [(c["N"], c["k"]) for c in cfg.cells()] == [(2, 5), (2, 6), (3, 5), (3, 6)]


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="epsilom"):
        parse_config("mode: solve\nproblem: p.json\nepsilom: 0.1\n")
    with pytest.raises(ConfigError, match="tolerances.bogus"):
        parse_config("mode: solve\nproblem: p\ntolerances:\n  bogus: 1\n")
    with pytest.raises(ConfigError, match="sweep.Ns"):
        parse_config("mode: solve\nproblem: p\nsweep:\n  Ns: [8]\n")


def test_yaml_error_has_position():
    with pytest.raises(ConfigError) as info:
        parse_config("mode: solve\nproblem: [unclosed\n")
    assert info.value.line is not None and info.value.column is not None
    assert "line" in str(info.value)


def test_validation_names_field():
    with pytest.raises(ConfigError, match="^epsilon"):
        parse_config("mode: solve\nproblem: p\nepsilon: 0.7\n")
    with pytest.raises(ConfigError, match="^mode"):
        parse_config("mode: fly\n")
    with pytest.raises(ConfigError, match="^seed"):
        parse_config("mode: verify-bounds\nfamily: random_sparse:N=3\n")
    with pytest.raises(ConfigError, match="^seed"):
        parse_config("mode: sweep\nsweep:\n  N: [2]\n")
    with pytest.raises(ConfigError, match="^sweep"):
        parse_config("mode: sweep\nseed: 3\n")
    with pytest.raises(ConfigError, match="^family"):
        parse_config("mode: verify-bounds\nfamily: nonsense\n")
    assert parse_config("mode: solve\nproblem: p\nepsilon: 1e-3\n").epsilon == 1e-3


def test_expand_axis():
    assert expand_axis("2..4") == [2, 3, 4]
    assert expand_axis(7) == [7]
    assert expand_axis([1, 2]) == [1, 2]
    with pytest.raises(ConfigError):
        expand_axis("4..2")
    with pytest.raises(ConfigError):
        expand_axis("abc")


# -- run -------------------------------------------------------------------------------

def test_trivial_solve_cell(tmp_path):
    path = write_problem(tmp_path / "zero.json", np.zeros((2, 2)), [0, 0], [1.0, 2.0], 1.0)
    rec = run(ExperimentConfig(mode="solve", problem=path), tmp_path / "out.csv")
    (row,) = rec.rows
    assert row["pass_all"] is True and row["state_error"] == 0.0
    assert rec.exit_status == 0


def test_solve_cell_nontrivial(tmp_path, rng):
    A = rng.standard_normal((3, 3))
    path = write_problem(tmp_path / "p.json", A, rng.standard_normal(3), rng.standard_normal(3), 1.5)
    rec = run(ExperimentConfig(mode="solve", problem=path, sweep={"epsilon": [0.1, 0.01]}))
    assert [r["pass_all"] for r in rec.rows] == [True, True]
    assert rec.rows[1]["k"] >= rec.rows[0]["k"]
    assert all(r["state_error"] <= r["delta"] for r in rec.rows)


def test_jordan_campaign(tmp_path):
    cfg = ExperimentConfig(mode="verify-bounds", family="jordan_block:N=3,eigenvalue=-1",
                           sweep={"k": [5, 7], "m": [1, 2]})
    rec = run(cfg, tmp_path / "vb.csv")
    assert rec.exit_status == 0 and len(rec.rows) == 4
    rows = read_csv(tmp_path / "vb.csv")
    assert all(r["kappa_V"] == "non-diagonalizable" for r in rows)
    assert all(float(r["kappa"]) <= float(r["bound_kappa"]) for r in rows)
    assert all(r["pass_all"] == "true" for r in rows)


def test_autonomize_err_decreases(tmp_path):
    cfg = ExperimentConfig(mode="autonomize", problem="cosine_drive", epsilon=1e-6)
    rec = run(cfg, tmp_path / "au.csv")
    errs = [float(r["err_final"]) for r in read_csv(tmp_path / "au.csv")]
    assert len(errs) == 3 and errs[0] > errs[1] > errs[2]
    assert rec.exit_status == 0


def test_cell_errors_are_isolated(tmp_path):
    cfg = ExperimentConfig(mode="verify-bounds", family="jordan_block", sweep={"N": [2, 0, 3]})
    rec = run(cfg)
    assert [bool(r["error"]) for r in rec.rows] == [False, True, False]
    assert rec.rows[0]["pass_all"] and rec.rows[2]["pass_all"]
    assert "DimensionError" in rec.rows[1]["error"]
    assert rec.exit_status == 1


def test_exit_status_on_failed_check():
    cfg = ExperimentConfig(mode="sweep", seed=3, sweep={"N": [3], "k": [6]},
                           tolerances={"oracle_tol": 1e-300})
    rec = run(cfg)
    assert rec.rows[0]["error"] == "" and rec.rows[0]["pass_all"] is False
    assert rec.exit_status == 1


def test_not_applicable_does_not_fail():
    # k = 4 puts the norm and condition checks out of scope
    cfg = ExperimentConfig(mode="verify-bounds", family="diagonal:spectrum=-1|-2", sweep={"k": [4]})
    rec = run(cfg)
    assert rec.exit_status == 0


# -- CSV -------------------------------------------------------------------------------

def test_empty_record_is_header_only(tmp_path):
    emit_csv(RunRecord(config={}, mode="sweep"), tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text(encoding="utf-8").splitlines()
    assert lines == [",".join(header("sweep"))]


def test_single_cell_two_lines_and_reparse(tmp_path):
    cfg = ExperimentConfig(mode="sweep", seed=11, sweep={"N": [2], "k": [6], "m": [2]})
    rec = run(cfg, tmp_path / "s.csv")
    text = (tmp_path / "s.csv").read_text(encoding="utf-8")
    assert len(text.splitlines()) == 2
    (back,) = read_csv(tmp_path / "s.csv")
    row = rec.rows[0]
    for key in ("h", "delta", "state_error", "norm_C", "kappa", "bound_kappa"):
        assert float(back[key]) == pytest.approx(row[key], rel=1e-11)
    assert int(back["N"]) == 2 and back["pass_all"] == "true"


def test_complex_columns(tmp_path, rng):
    A = 1j * np.eye(2)
    path = write_problem(tmp_path / "rot.json", A, [0, 0], [1.0, 0.0], 1.0)
    run(ExperimentConfig(mode="solve", problem=path), tmp_path / "c.csv")
    (row,) = read_csv(tmp_path / "c.csv")
    z = complex(float(row["x0_re"]), float(row["x0_im"]))
    assert abs(z) == pytest.approx(1.0, rel=1e-9)


def test_format_value():
    assert format_value(1 / 3) == "0.333333333333"
    assert format_value(True) == "true" and format_value(None) == "" and format_value(3) == "3"
    assert format_value(float("nan")) == "nan" and format_value("x") == "x"


def test_determinism_across_runs_and_jobs(tmp_path):
    base = dict(mode="sweep", seed=2024, sweep={"N": [2, 4], "k": [5, 8], "m": [1, 3]})
    run(ExperimentConfig(**base, jobs=1), tmp_path / "a.csv")
    run(ExperimentConfig(**base, jobs=4), tmp_path / "b.csv")
    run(ExperimentConfig(**base, jobs=2), tmp_path / "c.csv")
    a, b, c = (stable_text(tmp_path / f) for f in ("a.csv", "b.csv", "c.csv"))
    assert a == b == c
    run(ExperimentConfig(**{**base, "seed": 2025}), tmp_path / "d.csv")
    assert stable_text(tmp_path / "d.csv") != a


# -- CLI ---------------------------------------------------------------------------------

def test_cli_verify_bounds(tmp_path, capsys):
    out = tmp_path / "v.csv"
    rc = main(["verify-bounds", "--family", "non_normal_2x2:K=20", "--sweep", "k=5,6;m=1,2",
               "--out", str(out), "--jobs", "2"])
    assert rc == 0 and len(read_csv(out)) == 4
    assert "4 passed" in capsys.readouterr().out


def test_cli_env_outdir_and_config(tmp_path, monkeypatch):
    monkeypatch.setenv("BCOWLAB_OUTDIR", str(tmp_path / "res"))
    cfg = tmp_path / "c.yaml"
    cfg.write_text("mode: sweep\nseed: 5\nsweep:\n  N: [2]\n  k: [5]\n")
    assert main(["sweep", "--config", str(cfg)]) == 0
    assert (tmp_path / "res" / "sweep.csv").exists()
    assert main(["solve", "--config", str(cfg)]) == 2


def test_cli_autonomize_flags(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["autonomize", "--problem", "rotating_2x2", "--Ns", "16", "--epsilon", "1e-4",
                 "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert row["problem"] == "rotating_2x2" and row["Ns"] == "16"


def test_cli_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("mode: sweep\nseed: 1\nsweep: {N: [2]}\nwat: 1\n")
    assert main(["sweep", "--config", str(cfg)]) == 2
    assert "wat" in capsys.readouterr().err
