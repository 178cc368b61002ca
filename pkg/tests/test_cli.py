import os

import numpy as np

from stacknash.cli import main, run_experiment
from stacknash.config import build_problem, parse_config

SMALL = [
    "problem.n=10",
    "problem.num_steps=5",
    "run.samples=15",
]


def _read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# stacknash-csv v1 kind=")
    header = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:]]
    return header, rows


def test_default_config_builds():
    cfg = parse_config(None)
    problem, ws, run = build_problem(cfg)
    assert problem.mesh.n_dof == 16
    assert problem.tree.num_steps == 8
    assert run["seed"] == 12345


def test_verify_passes_on_defaults(tmp_path):
    rc = main(["verify", "--out", str(tmp_path)] + sum((["--override", o] for o in SMALL), []))
    assert rc == 0
    header, rows = _read_csv(tmp_path / "checks.csv")
    assert header == ["check", "value", "tolerance", "pass"]
    assert all(r[3] == "true" for r in rows)


def test_forward_and_summary(tmp_path):
    rc = main(["forward", "--out", str(tmp_path)] + sum((["--override", o] for o in SMALL), []))
    assert rc == 0
    header, rows = _read_csv(tmp_path / "trace.csv")
    assert header == ["level", "t", "energy", "max_node_spread"]
    assert len(rows) == 6
    for r in rows:
        assert all(np.isfinite(float(v)) for v in r)
    assert os.path.exists(tmp_path / "profiles.csv")
    assert os.path.exists(tmp_path / "meta.txt")


def test_control_zero_instance(tmp_path):
    overrides = SMALL + ["problem.y0_bulk=0.0", "cost.y1d=0.0", "cost.y2d=0.0"]
    rc = main(["control", "--out", str(tmp_path)] + sum((["--override", o] for o in overrides), []))
    assert rc == 0
    header, rows = _read_csv(tmp_path / "summary.csv")
    summary = dict(rows)
    assert float(summary["terminal_norm_sq"]) == 0.0


def test_observability_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        rc = main(["observability", "--out", str(out)] + sum((["--override", o] for o in SMALL), []))
        assert rc == 0
    for name in ("samples.csv", "summary.csv", "weights.csv", "meta.txt"):
        with open(a / name, "rb") as fa, open(b / name, "rb") as fb:
            assert fa.read() == fb.read(), f"{name} not byte-identical"
    header, rows = _read_csv(a / "samples.csv")
    assert header == ["sample_id", "lhs", "rhs", "ratio"]
    assert len(rows) == 15
    for r in rows:
        assert all(np.isfinite(float(v)) for v in r[1:])


def test_nash_subcommand(tmp_path):
    overrides = SMALL + ["controls.u1=sin(pi*x)", "controls.u2=0.3"]
    rc = main(["nash", "--out", str(tmp_path)] + sum((["--override", o] for o in overrides), []))
    assert rc == 0
    header, rows = _read_csv(tmp_path / "summary.csv")
    summary = dict(rows)
    assert float(summary["stationarity_max_rel"]) <= 1e-6


def test_malformed_region_exits_nonzero(tmp_path, capsys):
    # G_d disjoint from G0 violates the shared-observation assumption
    rc = main([
        "forward", "--out", str(tmp_path),
        "--override", "regions.gd=0.9,0.95",
    ])
    assert rc == 2
    err = capsys.readouterr().err
    assert "G_d" in err and "G0" in err

    rc = main(["forward", "--out", str(tmp_path), "--override", "regions.gd=oops"])
    assert rc == 2


def test_unknown_expression_rejected(tmp_path):
    rc = main([
        "forward", "--out", str(tmp_path),
        "--override", "problem.y0_bulk=__import__('os')",
    ])
    assert rc == 2


def test_config_file_roundtrip(tmp_path):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text("[problem]\nn = 8\nnum_steps = 4\n\n[run]\nseed = 7\n")
    rc = run_experiment("forward", str(cfg_path), out=str(tmp_path / "out"))
    assert rc == 0
    meta = (tmp_path / "out" / "meta.txt").read_text()
    assert "seed=7" in meta


def test_adapted_coefficient_expression(tmp_path):
    overrides = SMALL + ["coefficients.a2=0.2*(1+0.1*W)", "problem.num_steps=4"]
    rc = main(["forward", "--out", str(tmp_path)] + sum((["--override", o] for o in overrides), []))
    assert rc == 0


def test_seed_flag_changes_meta(tmp_path):
    rc = main(["forward", "--out", str(tmp_path), "--seed", "99"]
              + sum((["--override", o] for o in SMALL), []))
    assert rc == 0
    meta = (tmp_path / "meta.txt").read_text()
    assert "seed=99" in meta
