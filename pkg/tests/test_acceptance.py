"""Acceptance suite: one test per criterion, each printing a PASS line.

Every tolerance and instance size is pinned here; run with
``pytest tests/test_acceptance.py -v -s`` to see the per-criterion lines.
"""

import time

import numpy as np
import pytest
from scipy.linalg import cho_factor, cho_solve

from conftest import build_problem, full_regions, random_leaders
from stacknash.config import build_problem as build_from_config
from stacknash.config import parse_config
from stacknash.coupled import duality_residual, solve_adjoint, solve_optimality
from stacknash.forward import Coefficients, ForwardSources, solve_forward
from stacknash.geometry import assemble_generator, build_mesh, inner_product
from stacknash.hum import compute_leader_controls, eval_J_eps, grad_J_eps, tdot
from stacknash.nash import solve_nash, verify_nash_stationarity
from stacknash.tree import build_tree
from stacknash.weights import build_weights, eval_rho, eval_weights, validate_targets


def test_criterion_1_operator_structure():
    t0 = time.time()
    rng = np.random.default_rng(101)
    for kind, n in (("interval", 8), ("interval", 32), ("interval", 128), ("rectangle", 8)):
        mesh = build_mesh(kind, n)
        op = assemble_generator(mesh)
        for _ in range(100):
            U, V = rng.standard_normal((2, mesh.n_dof))
            nU2 = inner_product(mesh, U, U)
            nV2 = inner_product(mesh, V, V)
            sym = abs(inner_product(mesh, op.apply(U), V) - inner_product(mesh, U, op.apply(V)))
            assert sym <= 1e-12 * np.sqrt(nU2 * nV2)
            assert inner_product(mesh, op.apply(U), U) <= 1e-12 * nU2
    elapsed = time.time() - t0
    assert elapsed < 5.0
    print(f"criterion 1 (operator structure): PASS in {elapsed:.2f}s")


def test_criterion_2_tree_exactness():
    t0 = time.time()
    tree = build_tree(10, 1.0)
    leaves = tree.n_nodes(10)
    reps = [np.repeat(tree.increments(k), leaves // tree.n_nodes(k + 1)) for k in range(10)]
    for k in range(10):
        assert abs(reps[k].mean()) <= 1e-14
        assert abs((reps[k] ** 2).mean() - tree.dt) <= 1e-14
        for j in range(k):
            assert abs((reps[j] * reps[k]).mean()) <= 1e-14
    elapsed = time.time() - t0
    assert elapsed < 1.0
    print(f"criterion 2 (tree exactness): PASS in {elapsed:.2f}s")


def test_criterion_3_no_noise_reduction():
    t0 = time.time()
    mesh = build_mesh("interval", 16)
    op = assemble_generator(mesh)
    tree = build_tree(8, 1.0)
    co = Coefficients(a1=1.0, a2=0.0, b1=1.0, b2=0.0)
    rng = np.random.default_rng(31)
    Y0 = rng.standard_normal(mesh.n_dof)
    f1 = [np.broadcast_to(rng.standard_normal(mesh.n_bulk), (1 << k, mesh.n_bulk)).copy()
          for k in range(8)]
    proc = solve_forward(mesh, op, tree, co, Y0, ForwardSources(f1=f1))

    chol = cho_factor(np.diag(mesh.mass) + tree.dt * op.stiffness)
    y = Y0.copy()
    worst = 0.0
    for k in range(8):
        rhs = y + tree.dt * y
        rhs[: mesh.n_bulk] += tree.dt * f1[k][0]
        y = cho_solve(chol, mesh.mass * rhs)
        lv = proc.level(k + 1)
        assert np.max(np.mean((lv - lv[:1]) ** 2, axis=0)) == 0.0
        worst = max(worst, float(np.max(np.abs(lv - y))))
    assert worst <= 1e-10
    elapsed = time.time() - t0
    assert elapsed < 5.0
    print(f"criterion 3 (no-noise reduction): PASS, oracle gap {worst:.2e}, in {elapsed:.2f}s")


def test_criterion_4_duality_identity():
    t0 = time.time()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(400 + seed)
        prob = build_problem(n=8, num_steps=6, beta=(10 ** rng.uniform(3, 5),) * 2,
                             target_seed=seed)
        leaders = random_leaders(prob, seed=seed)
        opt = solve_optimality(prob, leaders)
        xT = rng.standard_normal((1 << 6, prob.mesh.n_dof))
        adj = solve_adjoint(prob, xT)
        worst = max(worst, duality_residual(prob, leaders, opt, adj, xT)["residual"])
    assert worst <= 1e-9
    elapsed = time.time() - t0
    assert elapsed < 30.0
    print(f"criterion 4 (duality identity): PASS, max residual {worst:.2e}, in {elapsed:.2f}s")


def test_criterion_5_nash_stationarity_and_oracle():
    t0 = time.time()
    prob = build_problem(n=16, num_steps=5)
    leaders = random_leaders(prob, seed=50)
    v = solve_nash(prob, leaders)
    rep = verify_nash_stationarity(prob, leaders, v, num_directions=10, seed=5)
    assert rep["max_rel_derivative"] <= 1e-6

    tiny = build_problem(n=3, num_steps=2, beta=(500.0, 800.0), alpha=(1.0, 2.0),
                         regions=full_regions)
    tiny_leaders = random_leaders(tiny, seed=51)
    v_cg = solve_nash(tiny, tiny_leaders)
    gap = _dense_nash_gap(tiny, tiny_leaders, v_cg)
    assert gap <= 1e-8
    elapsed = time.time() - t0
    assert elapsed < 60.0
    print(
        f"criterion 5 (nash stationarity): PASS, stationarity {rep['max_rel_derivative']:.2e}, "
        f"dense-oracle gap {gap:.2e}, in {elapsed:.2f}s"
    )


def _dense_nash_gap(prob, leaders, v_cg):
    from stacknash.nash import _VSpace, _ell_adjoint_bulk, _ell_state_bulk, state_under_controls

    V = _VSpace(prob)
    tree, nb = prob.tree, prob.mesh.n_bulk

    def pack(pair):
        return np.concatenate([np.concatenate([a.ravel() for a in pair[i]]) for i in (0, 1)])

    def unpack(vec):
        out, pos = V.zeros(), 0
        for i in (0, 1):
            for k in range(tree.num_steps):
                m = out[i][k].size
                out[i][k] = vec[pos : pos + m].reshape(out[i][k].shape)
                pos += m
        return out

    def apply_M(pair):
        back = _ell_adjoint_bulk(prob, _ell_state_bulk(prob, pair))
        return [
            [prob.cost.beta[i] / prob.cost.alpha[i] * pair[i][k] + V.chi[i] * back[k]
             for k in range(tree.num_steps)]
            for i in (0, 1)
        ]

    q_levels = state_under_controls(prob, leaders, None)
    rhs_w = [[], []]
    for k in range(tree.num_steps):
        qb = prob.mesh.split(q_levels[k])[0]
        for i in (0, 1):
            tgt = prob.target_dof(i, k)
            tb = tgt[:, :nb] if tgt is not None else 0.0
            rhs_w[i].append(tb - qb)
    b = pack([[V.chi[i] * a for a in _ell_adjoint_bulk(prob, rhs_w[i])] for i in (0, 1)])
    dim = b.size
    M = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        M[:, j] = pack(apply_M(unpack(e)))
    dense = unpack(np.linalg.solve(M, b))
    gap = 0.0
    for i, vs in enumerate((v_cg.v1, v_cg.v2)):
        for k in range(tree.num_steps):
            scale = 1.0 + np.max(np.abs(dense[i][k]))
            gap = max(gap, float(np.max(np.abs(vs[k] - dense[i][k]))) / scale)
    return gap


def test_criterion_6_equilibrium_bound():
    t0 = time.time()
    prob = build_problem(n=8, num_steps=4)
    base = random_leaders(prob, seed=3)
    from stacknash.nash import _VSpace, eval_J
    from stacknash.problem import ControlTriple

    V = _VSpace(prob)

    def vnorm(v):
        return np.sqrt(V.dot([list(v.v1), list(v.v2)], [list(v.v1), list(v.v2)]))

    nb = np.sqrt(2.0 * eval_J(prob, base))
    ratios = []
    for c in (0.0, 1.0, 1e3):
        u = None if c == 0.0 else ControlTriple(
            u1=[c / nb * a for a in base.u1],
            u2=[c / nb * a for a in base.u2],
            u3=[c / nb * a for a in base.u3],
        )
        ratios.append(vnorm(solve_nash(prob, u)) / (1.0 + c))
    assert all(np.isfinite(r) and r > 0 for r in ratios)
    assert max(ratios) <= 2.0 * min(ratios)

    ua, ub = random_leaders(prob, seed=61), random_leaders(prob, seed=62)
    uab = ControlTriple(
        u1=[a + b for a, b in zip(ua.u1, ub.u1)],
        u2=[a + b for a, b in zip(ua.u2, ub.u2)],
        u3=[a + b for a, b in zip(ua.u3, ub.u3)],
    )
    v0, va, vb, vab = (solve_nash(prob, u) for u in (None, ua, ub, uab))
    aff = 0.0
    for attr in ("v1", "v2"):
        for k in range(prob.tree.num_steps):
            lhs = getattr(vab, attr)[k] - getattr(v0, attr)[k]
            rhs = (getattr(va, attr)[k] - getattr(v0, attr)[k]) + (
                getattr(vb, attr)[k] - getattr(v0, attr)[k]
            )
            aff = max(aff, float(np.max(np.abs(lhs - rhs))) / (1.0 + float(np.max(np.abs(rhs)))))
    assert aff <= 1e-8
    elapsed = time.time() - t0
    assert elapsed < 60.0
    print(
        f"criterion 6 (equilibrium bound): PASS, ratios {['%.3e' % r for r in ratios]}, "
        f"affinity gap {aff:.2e}, in {elapsed:.2f}s"
    )


@pytest.mark.parametrize("penalty", ["quadratic", "norm"])
def test_criterion_7_dual_gradient(penalty):
    import dataclasses

    t0 = time.time()
    prob = build_problem(n=8, num_steps=6)
    prob.options = dataclasses.replace(prob.options, penalty=penalty)
    rng = np.random.default_rng(70)
    x = rng.standard_normal((1 << 6, prob.mesh.n_dof))
    g = grad_J_eps(prob, None, x)
    h = 1e-5
    worst = 0.0
    for _ in range(10):
        d = rng.standard_normal(x.shape)
        d /= np.sqrt(tdot(prob, d, d))
        fd = (eval_J_eps(prob, None, x + h * d) - eval_J_eps(prob, None, x - h * d)) / (2 * h)
        an = tdot(prob, g, d)
        worst = max(worst, abs(fd - an) / (1.0 + abs(an)))
    assert worst <= 1e-5
    elapsed = time.time() - t0
    assert elapsed < 60.0
    print(f"criterion 7 (dual gradient, {penalty}): PASS, max FD error {worst:.2e}, in {elapsed:.2f}s")


def test_criterion_8_null_control_pipeline():
    t0 = time.time()
    cfg = parse_config(None)  # the shipped default instance: n=16, N_t=8
    problem, ws, run = build_from_config(cfg)
    assert problem.options.penalty == "quadratic"
    res = compute_leader_controls(problem, ws)
    assert res.iterations <= 500
    assert res.terminal_norm_sq <= 1e-3
    Js = [row[1] for row in res.J_eps_trace]
    assert all(b <= a + 1e-13 * (1.0 + abs(a)) for a, b in zip(Js, Js[1:]))
    assert res.duality_residual <= 1e-8
    elapsed = time.time() - t0
    assert elapsed < 300.0
    print(
        f"criterion 8 (null-control pipeline): PASS, terminal {res.terminal_norm_sq:.2e} "
        f"in {res.iterations} iterations, duality {res.duality_residual:.2e}, in {elapsed:.1f}s"
    )


def test_criterion_9_observability_report(tmp_path):
    from stacknash.cli import run_experiment

    t0 = time.time()
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        rc = run_experiment("observability", out=str(out))
        assert rc == 0
        outs.append(out)
    with open(outs[0] / "samples.csv", "rb") as fa, open(outs[1] / "samples.csv", "rb") as fb:
        assert fa.read() == fb.read()
    with open(outs[0] / "samples.csv") as fh:
        lines = fh.read().splitlines()
    assert len(lines) == 2 + 200
    ratios = [float(ln.split(",")[3]) for ln in lines[2:]]
    assert all(np.isfinite(r) and r > 0 for r in ratios)

    # quadratic-scaling invariance of a single ratio
    prob, ws, _ = build_from_config(parse_config(None))
    rng = np.random.default_rng(90)
    xT = rng.standard_normal((1 << 8, prob.mesh.n_dof))
    r1 = _obs_ratio(prob, ws, xT)
    r2 = _obs_ratio(prob, ws, 11.0 * xT)
    assert abs(r1 - r2) <= 1e-12 * r1
    elapsed = time.time() - t0
    assert elapsed < 300.0
    print(
        f"criterion 9 (observability report): PASS, max ratio {max(ratios):.4e}, "
        f"scale gap {abs(r1 - r2):.2e}, in {elapsed:.1f}s"
    )


def _obs_ratio(prob, ws, xT):
    from stacknash.quadrature import time_expect_sqnorm

    adj = solve_adjoint(prob, xT)
    mesh, tree = prob.mesh, prob.tree
    mids = (np.arange(tree.num_steps) + 0.5) * tree.dt
    r2 = np.exp(-2.0 * np.array([ws.log_rho(t) for t in mids]))
    root = adj.phi.root
    lhs = float(np.sum(root[: mesh.n_bulk] ** 2 * mesh.bulk_weights))
    lhs += float(np.sum(root[mesh.n_bulk:] ** 2 * mesh.boundary_weights))
    for i in (0, 1):
        for k in range(tree.num_steps):
            psi = adj.psi[i].level(k)
            lhs += tree.dt * r2[k] * float(np.mean(np.sum(psi**2 * mesh.mass, axis=-1)))
    rhs = time_expect_sqnorm(mesh, tree, adj.phi.z.values, weight=prob.mask_dof("g0"))
    rhs += time_expect_sqnorm(mesh, tree, adj.phi.zhat.values)
    return lhs / rhs


def test_criterion_10_weight_machinery():
    t0 = time.time()
    mesh = build_mesh("interval", 16)
    from stacknash.geometry import mask_from_interval

    gp = mask_from_interval(mesh, "gprime", 0.45, 0.55)
    ws = build_weights(mesh, gp, 1.0, bounds=(0.45, 0.55))
    cert = ws.certificate
    assert cert["eta_positive_in_bulk"]
    assert cert["eta_zero_on_boundary"]
    assert cert["grad_positive_off_gprime"]

    assert float(ws.ell(0.5)) == 0.25  # exact continuity at T/2

    for t in (0.51, 0.7, 0.9, 0.999):
        wv = eval_weights(ws, t)
        assert np.array_equal(wv.theta, wv.theta_bar)

    t = 1.0 - 1e-3
    closed = ws.lam * (np.exp(2.0 * ws.mu * ws.eta_max) - 1.0) / (t * (1.0 - t))
    assert abs(eval_rho(ws, t)[1] - closed) <= 1e-12 * closed

    tree = build_tree(8, 1.0)
    gd = mask_from_interval(mesh, "gd", 0.35, 0.65)

    def tgt(frac):
        return [gd.indicator * (1.0 if (k + 1) * tree.dt <= frac + 1e-12 else 0.0)
                for k in range(8)]

    assert validate_targets(ws, tree, (tgt(0.75), tgt(0.75)))["ok"]
    assert not validate_targets(ws, tree, (tgt(1.0), tgt(1.0)))["ok"]
    elapsed = time.time() - t0
    assert elapsed < 5.0
    print(f"criterion 10 (weight machinery): PASS in {elapsed:.2f}s")
