"""Follower game: cost functionals, Nash equilibrium, stationarity checks.

For fixed leaders the two followers play a quadratic tracking game.  The
equilibrium is characterized by a linear operator equation

    alpha_i l_i^* [ chi_d (l_1 v1 + l_2 v2 - ytilde_{i,d}) ] + beta_i v_i = 0,

where l_i maps a follower control to the bulk state of the homogeneous
forward equation and l_i^* is its exact discrete adjoint (a transpose
backward solve).  Row-scaling by 1/alpha_i symmetrizes the system, so it
is solved by conjugate gradients in the control-space inner product; the
resulting equilibrium matches the costate formula v_i = -(1/beta_i) z^i
of the optimality system to solver precision.
"""

from __future__ import annotations

import numpy as np

from ._stepping import forward_sweep, transpose_sweep
from .errors import CoercivityError
from .problem import ControlTriple, FollowerPair, Problem
from .quadrature import time_expect_sqnorm
__all__ = [
    "ControlTriple",
    "FollowerPair",
    "eval_J",
    "eval_Ji",
    "solve_nash",
    "verify_nash_stationarity",
    "state_under_controls",
]


def _dof_levels(problem, bulk_levels=None, bdry_levels=None, mask=None):
    """Lift per-level block arrays to full-DOF arrays (None stays None)."""
    mesh, tree = problem.mesh, problem.tree
    out = []
    for k in range(tree.num_steps):
        b = None if bulk_levels is None else bulk_levels[k]
        g = None if bdry_levels is None else bdry_levels[k]
        if b is None and g is None:
            out.append(None)
            continue
        nodes = 1 << k
        arr = np.zeros((nodes, mesh.n_dof))
        if b is not None:
            bb = b if mask is None else mask * b
            arr[:, : mesh.n_bulk] = bb
        if g is not None:
            arr[:, mesh.n_bulk :] = g
        out.append(arr)
    return out


def _merge(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return [
        x if y is None else (y if x is None else x + y) for x, y in zip(a, b)
    ]


def state_under_controls(problem: Problem, u: ControlTriple | None, v: FollowerPair | None, Y0=None):
    """Forward state levels under leaders u and followers v."""
    p = problem
    drift = None
    noise = None
    if u is not None:
        drift = _dof_levels(p, u.u1, None, mask=p.masks["g0"].indicator)
        noise = _dof_levels(p, u.u2, u.u3)
    if v is not None:
        drift = _merge(drift, _dof_levels(p, v.v1, None, mask=p.masks["g1"].indicator))
        drift = _merge(drift, _dof_levels(p, v.v2, None, mask=p.masks["g2"].indicator))
    y0 = p.Y0 if Y0 is None else np.asarray(Y0, dtype=float)
    return forward_sweep(p.stepper(), p.coeffs, y0, drift, noise)


def eval_J(problem: Problem, u: ControlTriple | None) -> float:
    """Leader cost: (1/2) E int |chi_0 u1|^2 + |u2|^2 dx dt + (1/2) E int |u3|^2 dsigma dt."""
    if u is None:
        return 0.0
    p = problem
    total = time_expect_sqnorm(
        p.mesh, p.tree, _dof_levels(p, u.u1, None, mask=p.masks["g0"].indicator)
    )
    total += time_expect_sqnorm(p.mesh, p.tree, _dof_levels(p, u.u2, None))
    total += time_expect_sqnorm(p.mesh, p.tree, _dof_levels(p, None, u.u3))
    return 0.5 * total


def eval_Ji(problem: Problem, i: int, u: ControlTriple | None, v: FollowerPair | None, Y0=None) -> float:
    """Follower i cost: tracking on G_d plus control energy on G_i."""
    if i not in (1, 2):
        raise ValueError("follower index must be 1 or 2")
    p = problem
    idx = i - 1
    levels = state_under_controls(p, u, v, Y0=Y0)
    chid = p.mask_dof("gd")
    track = 0.0
    err_levels = []
    for k in range(p.tree.num_steps):
        err = levels[k].copy()
        tgt = p.target_dof(idx, k)
        if tgt is not None:
            err = err - tgt
        err_levels.append(err)
    track = time_expect_sqnorm(p.mesh, p.tree, err_levels, weight=chid)
    v_levels = None if v is None else (v.v1, v.v2)[idx]
    mask = p.masks[f"g{i}"].indicator
    energy = time_expect_sqnorm(p.mesh, p.tree, _dof_levels(p, v_levels, None, mask=mask))
    return 0.5 * p.cost.alpha[idx] * track + 0.5 * p.cost.beta[idx] * energy


class _VSpace:
    """The product follower-control space with its quadrature inner product."""

    def __init__(self, problem):
        self.p = problem
        self.chi = [problem.masks["g1"].indicator, problem.masks["g2"].indicator]

    def zeros(self):
        tree, nb = self.p.tree, self.p.mesh.n_bulk
        return [[np.zeros((1 << k, nb)) for k in range(tree.num_steps)] for _ in (0, 1)]

    def dot(self, a, b) -> float:
        p = self.p
        total = 0.0
        w = p.mesh.bulk_weights
        for i in (0, 1):
            for k in range(p.tree.num_steps):
                total += float(np.mean(np.sum(a[i][k] * b[i][k] * w, axis=-1)))
        return p.tree.dt * total

    def axpy(self, alpha, x, y):
        return [[y[i][k] + alpha * x[i][k] for k in range(len(x[i]))] for i in (0, 1)]

    def scale(self, alpha, x):
        return [[alpha * x[i][k] for k in range(len(x[i]))] for i in (0, 1)]


def _ell_state_bulk(problem, v_pair_levels):
    """Bulk state levels of the homogeneous equation driven by chi_i v_i."""
    p = problem
    chi = [p.masks["g1"].indicator, p.masks["g2"].indicator]
    drift = []
    for k in range(p.tree.num_steps):
        arr = np.zeros(((1 << k), p.mesh.n_dof))
        arr[:, : p.mesh.n_bulk] = chi[0] * v_pair_levels[0][k] + chi[1] * v_pair_levels[1][k]
        drift.append(arr)
    levels = forward_sweep(p.stepper(), p.coeffs, np.zeros(p.mesh.n_dof), drift, None)
    return [p.mesh.split(lv)[0] for lv in levels[:-1]]


def _ell_adjoint_bulk(problem, w_bulk_levels):
    """m-trace of the transpose solve with dual source chi_d w (bulk levels)."""
    p = problem
    chid = p.masks["gd"].indicator
    duals = []
    for k in range(p.tree.num_steps):
        arr = np.zeros((w_bulk_levels[k].shape[0], p.mesh.n_dof))
        arr[:, : p.mesh.n_bulk] = chid * w_bulk_levels[k]
        duals.append(arr)
    terminal = np.zeros((1 << p.tree.num_steps, p.mesh.n_dof))
    m, _, _ = transpose_sweep(p.stepper(), p.coeffs, terminal, duals)
    return [p.mesh.split(mk)[0] for mk in m]


def solve_nash(
    problem: Problem, u: ControlTriple | None = None, x0: FollowerPair | None = None
) -> FollowerPair:
    """Nash equilibrium of the follower game for fixed leaders, via CG.

    Solves the row-scaled symmetric system
    (beta_i/alpha_i) v_i + l_i^*[chi_d (l_1 v1 + l_2 v2)] = l_i^*[chi_d ytilde_{i,d}]
    in the control-space inner product.  Raises CoercivityError when beta_i
    sit below the configured floor or CG fails to converge.
    """
    p = problem
    floor = p.beta_floor()
    if min(p.cost.beta) < floor:
        raise CoercivityError(
            f"beta = {p.cost.beta} below the coercivity floor {floor:.3g}; "
            "increase the follower control weights"
        )
    V = _VSpace(p)
    tree, nb = p.tree, p.mesh.n_bulk

    # Right-hand side: l_i^* of chi_d (y_{i,d} - leaders-only state).
    q_levels = state_under_controls(p, u, None)
    rhs_w = [[], []]
    for k in range(tree.num_steps):
        qb = p.mesh.split(q_levels[k])[0]
        for i in (0, 1):
            tgt = p.target_dof(i, k)
            tb = 0.0 if tgt is None else tgt[:, :nb]
            rhs_w[i].append(tb - qb)
    b = [
        [V.chi[i] * arr for arr in _ell_adjoint_bulk(p, rhs_w[i])] for i in (0, 1)
    ]

    ratio = [p.cost.beta[i] / p.cost.alpha[i] for i in (0, 1)]

    def apply_M(v):
        s = _ell_state_bulk(p, v)
        back = _ell_adjoint_bulk(p, s)
        return [
            [ratio[i] * v[i][k] + V.chi[i] * back[k] for k in range(tree.num_steps)]
            for i in (0, 1)
        ]

    x = V.zeros() if x0 is None else [[m.copy() for m in x0.v1], [m.copy() for m in x0.v2]]
    r = V.axpy(-1.0, apply_M(x), b)
    d = [[m.copy() for m in r[i]] for i in (0, 1)]
    rs = V.dot(r, r)
    tol2 = (p.options.tol_cg * max(1.0, np.sqrt(V.dot(b, b)))) ** 2
    for _ in range(p.options.max_cg):
        if rs <= tol2:
            return FollowerPair(v1=x[0], v2=x[1])
        Md = apply_M(d)
        alpha = rs / V.dot(d, Md)
        x = V.axpy(alpha, d, x)
        r = V.axpy(-alpha, Md, r)
        rs_new = V.dot(r, r)
        d = V.axpy(rs_new / rs, d, r)
        rs = rs_new
    if rs <= tol2:
        return FollowerPair(v1=x[0], v2=x[1])
    raise CoercivityError(
        f"CG on the follower system did not converge in {p.options.max_cg} "
        f"iterations (residual {np.sqrt(rs):.3g}); try larger beta_i"
    )


def verify_nash_stationarity(
    problem: Problem,
    u: ControlTriple | None,
    v: FollowerPair,
    num_directions: int = 10,
    step: float = 1e-5,
    seed: int = 0,
) -> dict:
    """Central-difference probe of the first-order conditions at v.

    Reports max |directional derivative| / (1 + |J_i|) over random
    unit directions in each follower's control space.
    """
    p = problem
    rng = np.random.default_rng(seed)
    V = _VSpace(p)
    base = V.zeros()
    if v is not None and v.v1 is not None:
        base[0] = [np.asarray(a, dtype=float) for a in v.v1]
    if v is not None and v.v2 is not None:
        base[1] = [np.asarray(a, dtype=float) for a in v.v2]
    report = {"per_follower": [], "J": []}
    worst = 0.0
    for i in (0, 1):
        Ji = eval_Ji(p, i + 1, u, v)
        report["J"].append(Ji)
        worst_i = 0.0
        for _ in range(num_directions):
            delta = [
                V.chi[i] * rng.standard_normal((1 << k, p.mesh.n_bulk))
                for k in range(p.tree.num_steps)
            ]
            pair = V.zeros()
            pair[i] = delta
            nrm = np.sqrt(V.dot(pair, pair))
            if nrm == 0.0:
                continue
            pair = V.scale(1.0 / nrm, pair)

            def shifted(sign):
                vs = [
                    [base[j][k] + sign * step * pair[j][k] for k in range(p.tree.num_steps)]
                    for j in (0, 1)
                ]
                return FollowerPair(v1=vs[0], v2=vs[1])

            deriv = (eval_Ji(p, i + 1, u, shifted(+1)) - eval_Ji(p, i + 1, u, shifted(-1))) / (2 * step)
            worst_i = max(worst_i, abs(deriv) / (1.0 + abs(Ji)))
        report["per_follower"].append(worst_i)
        worst = max(worst, worst_i)
    report["max_rel_derivative"] = worst
    return report
