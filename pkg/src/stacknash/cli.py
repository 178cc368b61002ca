"""Batch front door: experiment orchestration with deterministic outputs.

Subcommands (each writes ``summary.csv`` and ``meta.txt`` to the output
directory, plus subcommand-specific CSVs):

    forward        simulate the controlled state equation
    nash           follower equilibrium and stationarity audit
    observability  empirical observability-ratio study (samples.csv)
    control        full leader pipeline (trace.csv of the minimization)
    verify         cross-module invariant suite (checks.csv; exit 1 on failure)

Usage: stacknash <subcommand> --config <path> [--out <dir>] [--seed <u64>]
       [--override section.key=value ...]
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib.metadata import PackageNotFoundError, version as _pkg_version

import numpy as np

from . import config as cfgmod
from . import reporting
from .coupled import duality_residual, solve_adjoint, solve_optimality
from .errors import ConfigError, StacknashError
from .geometry import inner_product
from .hum import compute_leader_controls, eval_J_eps, grad_J_eps, tdot
from .nash import eval_J, solve_nash, state_under_controls, verify_nash_stationarity
from .quadrature import expect_sqnorm
from .weights import check_observability, eval_rho, eval_weights

__all__ = ["main", "run_experiment"]


def _version() -> str:
    try:
        return _pkg_version("stacknash")
    except PackageNotFoundError:  # pragma: no cover
        return "0.0.0"


def _emit_meta(out, cfg, seed):
    reporting.write_meta(
        os.path.join(out, "meta.txt"), cfgmod.config_hash(cfg), seed, _version()
    )


def _cmd_forward(problem, ws, run, cfg, out):
    u, v = cfgmod.build_controls(cfg, problem)
    levels = state_under_controls(problem, u, v)
    mesh, tree = problem.mesh, problem.tree
    rows = []
    for k, lv in enumerate(levels):
        energy = expect_sqnorm(mesh, lv)
        var = float(np.max(np.mean((lv - lv[:1]) ** 2, axis=0)))
        rows.append((k, k * tree.dt, energy, var))
    reporting.write_csv(
        os.path.join(out, "trace.csv"), "forward-trace",
        ["level", "t", "energy", "max_node_spread"], rows,
    )
    coords = mesh.all_coords
    YN = levels[-1]
    prows = []
    for j in range(mesh.n_dof):
        x = coords[j, 0]
        y = coords[j, 1] if coords.shape[1] > 1 else 0.0
        block = "bulk" if j < mesh.n_bulk else "boundary"
        y0 = problem.Y0[j]
        prows.append((x, y, block, y0, float(YN[:, j].mean()), float(YN[:, j].std())))
    reporting.write_csv(
        os.path.join(out, "profiles.csv"), "profiles",
        ["x", "y", "block", "y0", "yT_mean", "yT_std"], prows,
    )
    reporting.write_summary(
        os.path.join(out, "summary.csv"),
        [
            ("terminal_energy", rows[-1][2]),
            ("sup_energy", max(r[2] for r in rows)),
            ("levels", tree.num_steps + 1),
        ],
    )
    return 0


def _cmd_nash(problem, ws, run, cfg, out):
    u, _ = cfgmod.build_controls(cfg, problem)
    v = solve_nash(problem, u)
    report = verify_nash_stationarity(problem, u, v, seed=run["seed"])
    reporting.write_summary(
        os.path.join(out, "summary.csv"),
        [
            ("J_leaders", eval_J(problem, u)),
            ("J1", report["J"][0]),
            ("J2", report["J"][1]),
            ("stationarity_max_rel", report["max_rel_derivative"]),
            ("stationarity_f1", report["per_follower"][0]),
            ("stationarity_f2", report["per_follower"][1]),
        ],
    )
    return 0


def _cmd_observability(problem, ws, run, cfg, out):
    rep = check_observability(problem, ws, num_samples=run["samples"], seed=run["seed"])
    reporting.write_csv(
        os.path.join(out, "samples.csv"), "observability-samples",
        ["sample_id", "lhs", "rhs", "ratio"],
        [(r["sample"], r["lhs"], r["rhs"], r["ratio"]) for r in rep["rows"]],
    )
    _emit_weights_profile(problem, ws, out)
    reporting.write_summary(
        os.path.join(out, "summary.csv"),
        [
            ("max_ratio", rep["max_ratio"]),
            ("num_samples", rep["num_samples"]),
            ("violations", len(rep["violations"])),
            ("seed", rep["seed"]),
        ],
    )
    return 0


def _emit_weights_profile(problem, ws, out):
    T = ws.horizon
    ts = np.linspace(0.005 * T, 0.995 * T, 199)
    rows = []
    for t in ts:
        _, logr = eval_rho(ws, float(t))
        rows.append(
            (
                float(t),
                float(ws.ell(t)),
                float(ws.alpha_bar_star(t)),
                float(ws.phi_bar_star(t)),
                logr,
            )
        )
    reporting.write_csv(
        os.path.join(out, "weights.csv"), "weights-profile",
        ["t", "ell", "alpha_bar_star", "phi_bar_star", "log_rho"], rows,
    )


def _cmd_control(problem, ws, run, cfg, out):
    res = compute_leader_controls(problem, ws)
    reporting.write_csv(
        os.path.join(out, "trace.csv"), "control-trace",
        ["iter", "J_eps", "grad_norm", "terminal_norm_sq"], res.J_eps_trace,
    )
    reporting.write_summary(
        os.path.join(out, "summary.csv"),
        [
            ("terminal_norm_sq", res.terminal_norm_sq),
            ("control_norm_sq", res.control_norm_sq),
            ("iterations", res.iterations),
            ("converged", res.converged),
            ("grad_norm", res.grad_norm),
            ("duality_residual", res.duality_residual),
            ("observability_violation", res.observability_violation),
            ("eps", res.eps),
            ("penalty", res.penalty),
        ],
    )
    return 0


def _cmd_verify(problem, ws, run, cfg, out):
    rng = np.random.default_rng(run["seed"])
    mesh, op, tree = problem.mesh, problem.op, problem.tree
    checks = []

    def add(name, value, tol):
        checks.append((name, float(value), tol, bool(value <= tol)))

    sym = dis = 0.0
    for _ in range(20):
        U, V = rng.standard_normal((2, mesh.n_dof))
        nU = np.sqrt(inner_product(mesh, U, U))
        nV = np.sqrt(inner_product(mesh, V, V))
        sym = max(sym, abs(inner_product(mesh, op.apply(U), V) - inner_product(mesh, U, op.apply(V))) / (nU * nV))
        dis = max(dis, inner_product(mesh, op.apply(U), U) / (nU * nU))
    add("operator_symmetry", sym, 1e-12)
    add("operator_dissipativity", dis, 1e-12)
    add("operator_constants_kernel", np.abs(op.apply(np.ones(mesh.n_dof))).max(), 1e-12)

    mom1 = max(abs(float(tree.increments(k).mean())) for k in range(tree.num_steps))
    mom2 = max(abs(float((tree.increments(k) ** 2).mean()) - tree.dt) for k in range(tree.num_steps))
    add("tree_increment_mean", mom1, 1e-14)
    add("tree_increment_variance", mom2, 1e-14)

    nleaf = 1 << tree.num_steps
    xT = rng.standard_normal((nleaf, mesh.n_dof))
    from .problem import ControlTriple

    u = ControlTriple(
        u1=[rng.standard_normal((1 << k, mesh.n_bulk)) * problem.masks["g0"].indicator for k in range(tree.num_steps)],
        u2=[rng.standard_normal((1 << k, mesh.n_bulk)) for k in range(tree.num_steps)],
        u3=[rng.standard_normal((1 << k, mesh.n_boundary)) for k in range(tree.num_steps)],
    )
    opt = solve_optimality(problem, u)
    adj = solve_adjoint(problem, xT)
    add("duality_residual", duality_residual(problem, u, opt, adj, xT)["residual"], 1e-9)

    x0 = rng.standard_normal((nleaf, mesh.n_dof))
    g = grad_J_eps(problem, None, x0)
    fd_err = 0.0
    for _ in range(2):
        d = rng.standard_normal(x0.shape)
        d /= np.sqrt(tdot(problem, d, d))
        h = 1e-5
        fd = (eval_J_eps(problem, None, x0 + h * d) - eval_J_eps(problem, None, x0 - h * d)) / (2 * h)
        fd_err = max(fd_err, abs(fd - tdot(problem, g, d)) / (1 + abs(fd)))
    add("hum_gradient_fd", fd_err, 1e-5)

    v = solve_nash(problem, u)
    rep = verify_nash_stationarity(problem, u, v, num_directions=4, seed=run["seed"])
    add("nash_stationarity", rep["max_rel_derivative"], 1e-6)

    add("eta_certificate", 0.0 if all(
        ws.certificate[k] for k in ("eta_positive_in_bulk", "eta_zero_on_boundary", "grad_positive_off_gprime")
    ) else 1.0, 0.5)
    T = ws.horizon
    add("ell_continuity", abs(float(ws.ell(T / 2)) - T * T / 4.0), 0.0)
    wv = eval_weights(ws, 0.8 * T)
    add("theta_equals_theta_bar_late", float(np.max(np.abs(wv.theta - wv.theta_bar))), 1e-15)
    t_probe = T * (1 - 1e-3)
    closed = ws.lam * (np.exp(2 * ws.mu * ws.eta_max) - 1.0) / (t_probe * (T - t_probe))
    add("log_rho_closed_form", abs(eval_rho(ws, t_probe)[1] - closed) / closed, 1e-12)

    from .weights import validate_targets

    va = validate_targets(ws, tree, problem.cost.targets)
    add("targets_admissible", 0.0 if va["ok"] else 1.0, 0.5)

    reporting.write_csv(
        os.path.join(out, "checks.csv"), "verify-checks",
        ["check", "value", "tolerance", "pass"], checks,
    )
    _emit_weights_profile(problem, ws, out)
    failed = [c for c in checks if not c[3]]
    reporting.write_summary(
        os.path.join(out, "summary.csv"),
        [("checks", len(checks)), ("failed", len(failed)), ("ok", not failed)],
    )
    for name, value, tol, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {value:.3e} (tol {tol:.1e})")
    return 0 if not failed else 1


_COMMANDS = {
    "forward": _cmd_forward,
    "nash": _cmd_nash,
    "observability": _cmd_observability,
    "control": _cmd_control,
    "verify": _cmd_verify,
}


def run_experiment(subcommand: str, config_path=None, out=None, seed=None, overrides=None) -> int:
    """Programmatic entry point; returns the exit status."""
    if subcommand not in _COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; choose from {sorted(_COMMANDS)}")
    overrides = list(overrides or [])
    if seed is not None:
        overrides.append(f"run.seed={seed}")
    if out is not None:
        overrides.append(f"run.out={out}")
    cfg = cfgmod.parse_config(config_path, overrides)
    problem, ws, run = cfgmod.build_problem(cfg)
    outdir = run["out"]
    os.makedirs(outdir, exist_ok=True)
    _emit_meta(outdir, cfg, run["seed"])
    return _COMMANDS[subcommand](problem, ws, run, cfg, outdir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stacknash",
        description="Stackelberg-Nash control experiments for stochastic parabolic "
        "equations with dynamic boundary conditions",
    )
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="INI config (defaults used if omitted)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override a config entry (repeatable)",
    )
    parser.add_argument("--print-default-config", action="store_true")
    args = parser.parse_args(argv)
    if args.print_default_config:
        print(cfgmod.DEFAULT_CONFIG, end="")
        return 0
    try:
        return run_experiment(
            args.subcommand, args.config, out=args.out, seed=args.seed, overrides=args.override
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StacknashError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        outdir = args.out or "."
        try:
            os.makedirs(outdir, exist_ok=True)
            with open(os.path.join(outdir, "error.txt"), "w") as fh:
                fh.write(f"{type(exc).__name__}: {exc}\n")
        except OSError:
            pass
        return 1


if __name__ == "__main__":
    sys.exit(main())
