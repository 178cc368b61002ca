import numpy as np
import pytest

from conftest import build_problem
from stacknash.coupled import solve_adjoint
from stacknash.errors import ConstructionError
from stacknash.geometry import build_mesh, mask_from_interval
from stacknash.tree import build_tree
from stacknash.weights import (
    build_eta,
    build_weights,
    carleman_functional,
    check_carleman,
    check_observability,
    eval_rho,
    eval_weights,
    validate_targets,
)


def _ws(n=16, lam=2.0, mu=2.0, horizon=1.0):
    mesh = build_mesh("interval", n)
    gp = mask_from_interval(mesh, "gprime", 0.45, 0.55)
    return build_weights(mesh, gp, horizon, lam=lam, mu=mu, bounds=(0.45, 0.55)), mesh


def test_eta_profile_values():
    ws, mesh = _ws()
    pts = np.array([[0.0], [1.0], [0.5]])
    vals = ws.eta_fn(pts)
    assert vals[0] == 0.0 and vals[1] == 0.0
    assert np.isclose(vals[2], 0.25, rtol=1e-15)
    assert ws.certificate["eta_positive_in_bulk"]
    assert ws.certificate["eta_zero_on_boundary"]
    assert ws.certificate["grad_positive_off_gprime"]
    assert ws.certificate["min_grad_off_gprime"] > 0


def test_eta_rejects_offcenter_core():
    mesh = build_mesh("interval", 16)
    gp = mask_from_interval(mesh, "gprime", 0.1, 0.2)
    with pytest.raises(ConstructionError):
        build_eta(mesh, gp, bounds=(0.1, 0.2))


def test_eta_rectangle_product_profile():
    mesh = build_mesh("rectangle", 8)
    gp = mask_from_interval(mesh, "gprime", 0.4, 0.6)
    eta, fn, cert = build_eta(mesh, gp, bounds=(0.4, 0.6))
    assert cert["eta_positive_in_bulk"]
    assert cert["eta_zero_on_boundary"]
    assert np.isclose(fn(np.array([[0.5, 0.5]]))[0], 0.25, rtol=1e-15)


def test_weight_signs_and_limits():
    ws, _ = _ws()
    for t in (0.05, 0.3, 0.5, 0.77, 0.95):
        wv = eval_weights(ws, t)
        assert np.all(wv.alpha < 0)
        assert np.all((wv.theta > 0) & (wv.theta < 1))
    # theta -> 0 at both endpoints (log theta -> -inf)
    early = eval_weights(ws, 1e-9).log_theta.max()
    late = eval_weights(ws, 1.0 - 1e-9).log_theta.max()
    assert early < -1e6 and late < -1e6
    with pytest.raises(ValueError):
        eval_weights(ws, 0.0)
    with pytest.raises(ValueError):
        eval_weights(ws, 1.0)


def test_time_reparametrization_values():
    ws, _ = _ws()
    assert float(ws.ell(0.25)) == 0.25
    assert float(ws.ell(0.75)) == 0.1875
    assert float(ws.ell(0.5)) == 0.25  # exact continuity at T/2


def test_theta_bar_equals_theta_late():
    ws, _ = _ws()
    for t in (0.51, 0.6, 0.8, 0.99):
        wv = eval_weights(ws, t)
        assert np.array_equal(wv.theta, wv.theta_bar)
        assert np.array_equal(wv.log_theta, wv.log_theta_bar)


def test_rho_monotone_blowup_and_floor():
    ws, _ = _ws()
    ts = np.linspace(0.51, 1.0 - 1e-9, 200)
    logs = [eval_rho(ws, t)[1] for t in ts]
    assert all(b >= a for a, b in zip(logs, logs[1:]))
    assert logs[-1] > 1e6  # blow-up approaching the horizon
    for t in (0.1, 0.4, 0.9):
        assert eval_rho(ws, t)[0] >= 1.0


def test_log_rho_closed_form():
    # lambda = mu = 2, |eta|_inf = 1/4, T = 1:
    # log rho(1 - 1e-3) = 2 (e - 1) / ell(t) ~ 3.44e3.
    ws, _ = _ws()
    t = 1.0 - 1e-3
    closed = 2.0 * (np.e - 1.0) / (t * (1.0 - t))
    assert closed > 3.4e3
    assert abs(eval_rho(ws, t)[1] - closed) <= 1e-12 * closed


def test_rho_theta_bar_boundary_identity():
    # log rho + lambda alpha_bar at eta = 0 vanishes identically.
    ws, _ = _ws()
    for t in (0.2, 0.5, 0.9):
        wv = eval_weights(ws, t)
        boundary_log_theta_bar = ws.lam * (1.0 - np.exp(2 * ws.mu * ws.eta_max)) / float(ws.ell(t))
        assert abs(eval_rho(ws, t)[1] + boundary_log_theta_bar) <= 1e-12


def test_functional_zero_and_quadratic():
    ws, mesh = _ws(n=10)
    tree = build_tree(4, 1.0)
    zero = [np.zeros((1 << k, mesh.n_dof)) for k in range(4)]
    assert carleman_functional(ws, tree, zero) == 0.0
    rng = np.random.default_rng(0)
    X = [rng.standard_normal((1 << k, mesh.n_dof)) for k in range(4)]
    I1 = carleman_functional(ws, tree, X)
    I3 = carleman_functional(ws, tree, [3.0 * x for x in X])
    assert I1 > 0
    assert np.isclose(I3, 9.0 * I1, rtol=1e-12)
    Ibar = carleman_functional(ws, tree, X, modified=True)
    assert Ibar > 0


def test_zeroth_order_weight_decay_dominates_lambda_growth():
    # On any fixed grid the theta^2 = exp(2 lambda alpha) factor (alpha < 0,
    # |lambda alpha| >> 1) collapses far faster than lambda^3 grows, so the
    # functional decreases along lambda in {2, 4, 8}.
    mesh = build_mesh("interval", 10)
    gp = mask_from_interval(mesh, "gprime", 0.45, 0.55)
    tree = build_tree(4, 1.0)
    rng = np.random.default_rng(1)
    X = [rng.standard_normal((1 << k, mesh.n_dof)) for k in range(4)]
    vals = []
    for lam in (2.0, 4.0, 8.0):
        ws = build_weights(mesh, gp, 1.0, lam=lam, bounds=(0.45, 0.55))
        vals.append(carleman_functional(ws, tree, X))
    assert vals[0] > vals[1] > vals[2] > 0


def test_validate_targets_cases():
    ws, mesh = _ws()
    tree = build_tree(8, 1.0)
    gd = mask_from_interval(mesh, "gd", 0.35, 0.65)

    def tgt(frac):
        return [
            gd.indicator * (1.0 if (k + 1) * tree.dt <= frac + 1e-12 else 0.0)
            for k in range(8)
        ]

    zero = validate_targets(ws, tree, (None, None))
    assert zero["ok"] and zero["norms"] == [0.0, 0.0]
    good = validate_targets(ws, tree, (tgt(0.75), tgt(0.75)))
    assert good["ok"] and all(np.isfinite(v) for v in good["norms"])
    bad = validate_targets(ws, tree, (tgt(1.0), tgt(1.0)))
    assert not bad["ok"]
    assert bad["blocked_cells"]


def test_observability_report_small():
    prob = build_problem(n=8, num_steps=4)
    ws = build_weights(prob.mesh, prob.masks["gprime"], 1.0, bounds=(0.45, 0.55))
    rep = check_observability(prob, ws, num_samples=12, seed=7)
    assert len(rep["rows"]) == 12
    assert not rep["violations"]
    assert all(np.isfinite(r["ratio"]) and r["ratio"] > 0 for r in rep["rows"])
    # deterministic rerun
    rep2 = check_observability(prob, ws, num_samples=12, seed=7)
    assert rep["max_ratio"] == rep2["max_ratio"]


def test_observability_ratio_scale_invariant():
    prob = build_problem(n=8, num_steps=4)
    rng = np.random.default_rng(3)
    xT = rng.standard_normal((1 << 4, prob.mesh.n_dof))
    ws = build_weights(prob.mesh, prob.masks["gprime"], 1.0, bounds=(0.45, 0.55))

    def ratio(x):
        from stacknash.quadrature import time_expect_sqnorm

        adj = solve_adjoint(prob, x)
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

    r1, r2 = ratio(xT), ratio(37.0 * xT)
    assert abs(r1 - r2) <= 1e-12 * r1


def test_full_observation_gives_smaller_ratio():
    def wide(mesh):
        return {
            "g0": mask_from_interval(mesh, "g0", 0.0, 1.0),
            "g1": mask_from_interval(mesh, "g1", 0.1, 0.4),
            "g2": mask_from_interval(mesh, "g2", 0.6, 0.9),
            "gd": mask_from_interval(mesh, "gd", 0.35, 0.65),
            "gprime": mask_from_interval(mesh, "gprime", 0.45, 0.55),
        }

    small = build_problem(n=8, num_steps=4)
    full = build_problem(n=8, num_steps=4, regions=wide)
    ws = build_weights(small.mesh, small.masks["gprime"], 1.0, bounds=(0.45, 0.55))
    rep_small = check_observability(small, ws, num_samples=10, seed=5)
    rep_full = check_observability(full, ws, num_samples=10, seed=5)
    for a, b in zip(rep_full["rows"], rep_small["rows"]):
        assert a["ratio"] <= b["ratio"] + 1e-12
    assert rep_full["max_ratio"] <= rep_small["max_ratio"]


def test_carleman_sanity_report():
    prob = build_problem(n=8, num_steps=4)
    ws = build_weights(prob.mesh, prob.masks["gprime"], 1.0, bounds=(0.45, 0.55))
    rep = check_carleman(prob, ws, num_samples=50, seed=1)
    assert len(rep["rows"]) == 50
    assert all(np.isfinite(r["ratio"]) for r in rep["rows"])
    print(f"empirical coupled-system estimate: max ratio = {rep['max_ratio']:.3e}")
