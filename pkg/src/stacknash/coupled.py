"""The two coupled forward-backward systems of the hierarchical game.

``solve_optimality`` computes the state/costate system in which the
followers have been eliminated through their equilibrium formula
v_i = -(1/beta_i) z^i on G_i: a forward state driven by the leaders and
the costates, coupled to two backward equations driven by the tracking
error on the observation region G_d.

``solve_adjoint`` computes the dual of that system: a backward variable
(phi, phi_Gamma, Phi, Phihat) whose observation-region trace defines the
leader controls in the dual method, coupled to two forward variables
psi^i started at zero and driven by phi on the follower regions.

Both are fixed points of a decoupling (Picard) map, which contracts when
the beta_i are large; a directly assembled linear solve over the whole
tree is available as a fallback and as a test oracle.  The backward
passes use the exact-transpose propagation so that the duality identity

    E<Y(T), phi_T> - <Y_0, phi(0)>
        = E int_{Q0} u1 phi + E int_Q u2 Phi + E int_Sigma u3 Phihat
          + sum_i alpha_i E int_{(0,T) x G_d} y_{i,d} psi^i

holds to rounding between the two solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._stepping import forward_sweep, transpose_sweep
from .backward import BackwardSolution
from .errors import PicardDivergenceError, ResourceLimitError
from .problem import ControlTriple, FollowerPair, Problem
from .quadrature import expect_inner, time_expect_inner
from .tree import AdaptedProcess

__all__ = [
    "OptimalityBundle",
    "AdjointBundle",
    "solve_optimality",
    "solve_adjoint",
    "duality_residual",
]


@dataclass
class PicardInfo:
    iterations: int
    history: list
    used_fallback: bool = False


@dataclass
class OptimalityBundle:
    Y: AdaptedProcess
    Z: tuple
    info: PicardInfo

    def followers(self, problem: Problem) -> FollowerPair:
        """Equilibrium followers recovered via v_i = -(1/beta_i) z^i on G_i."""
        out = []
        for i in (0, 1):
            chi = problem.masks[f"g{i + 1}"].indicator
            beta = problem.cost.beta[i]
            levels = [
                -(chi * problem.mesh.split(self.Z[i].z_level(k))[0]) / beta
                for k in range(problem.tree.num_steps)
            ]
            out.append(levels)
        return FollowerPair(v1=out[0], v2=out[1])


@dataclass
class AdjointBundle:
    phi: BackwardSolution
    psi: tuple
    info: PicardInfo


def _leader_sources(problem: Problem, leaders: ControlTriple | None):
    """Per-level drift/noise source arrays over DOFs from the leader triple."""
    mesh, tree = problem.mesh, problem.tree
    if leaders is None:
        return [None] * tree.num_steps, [None] * tree.num_steps
    chi0 = problem.masks["g0"].indicator
    drift, noise = [], []
    for k in range(tree.num_steps):
        nodes = 1 << k
        d = None
        if leaders.u1 is not None and leaders.u1[k] is not None:
            d = np.zeros((nodes, mesh.n_dof))
            d[:, : mesh.n_bulk] = chi0 * leaders.u1[k]
        w = None
        if (leaders.u2 is not None and leaders.u2[k] is not None) or (
            leaders.u3 is not None and leaders.u3[k] is not None
        ):
            w = np.zeros((nodes, mesh.n_dof))
            if leaders.u2 is not None and leaders.u2[k] is not None:
                w[:, : mesh.n_bulk] = leaders.u2[k]
            if leaders.u3 is not None and leaders.u3[k] is not None:
                w[:, mesh.n_bulk :] = leaders.u3[k]
        drift.append(d)
        noise.append(w)
    return drift, noise


def _zeros_like_levels(problem, batch):
    tree, nd = problem.tree, problem.mesh.n_dof
    return [np.zeros((batch, 1 << k, nd)) for k in range(tree.num_steps)]


def _stack_rel_change(new, old):
    # Purely relative so the iteration count (hence every reported ratio)
    # is invariant under rescaling of the data.
    num, den = 0.0, 0.0
    for a, b in zip(new, old):
        num += float(np.sum((a - b) ** 2))
        den += float(np.sum(a**2))
    if den == 0.0:
        return np.sqrt(num)
    return np.sqrt(num / den)


class _OptimalityMap:
    """One decoupling sweep: costate pairing values -> state -> new costates."""

    def __init__(self, problem, leaders, Y0):
        self.p = problem
        self.Y0 = problem.Y0 if Y0 is None else np.asarray(Y0, dtype=float)
        self.drift_u, self.noise_u = _leader_sources(problem, leaders)
        self.chi = [problem.masks["g1"].indicator, problem.masks["g2"].indicator]
        self.chid = problem.masks["gd"].indicator

    def state(self, mz):
        """Forward solve with followers substituted from the costate trace."""
        p = self.p
        drift = []
        for k in range(p.tree.num_steps):
            d = self.drift_u[k]
            add = None
            for i in (0, 1):
                zb = p.mesh.split(mz[k][i])[0]
                term = -(self.chi[i] * zb) / p.cost.beta[i]
                add = term if add is None else add + term
            arr = np.zeros((1 << k, p.mesh.n_dof))
            arr[:, : p.mesh.n_bulk] = add
            if d is not None:
                arr = arr + d
            drift.append(arr)
        return forward_sweep(p.stepper(), p.coeffs, self.Y0, drift, self.noise_u)

    def costates(self, Y_levels):
        """Batched transpose solve driven by the tracking error on G_d."""
        p = self.p
        duals = []
        for k in range(p.tree.num_steps):
            yb = p.mesh.split(Y_levels[k])[0]
            pair = np.zeros((2, Y_levels[k].shape[0], p.mesh.n_dof))
            for i in (0, 1):
                err = yb.copy()
                tgt = p.target_dof(i, k)
                if tgt is not None:
                    err = err - tgt[:, : p.mesh.n_bulk]
                pair[i, :, : p.mesh.n_bulk] = p.cost.alpha[i] * (self.chid * err)
            duals.append(pair)
        terminal = np.zeros((2, 1 << p.tree.num_steps, p.mesh.n_dof))
        m, zhat, root = transpose_sweep(p.stepper(), p.coeffs, terminal, duals)
        return m, zhat, root

    def sweep(self, mz):
        Y = self.state(mz)
        m, zhat, root = self.costates(Y)
        return m, (Y, zhat, root)


class _AdjointMap:
    """One decoupling sweep: phi trace -> psi states -> new phi."""

    def __init__(self, problem, terminal):
        self.p = problem
        self.terminal = np.asarray(terminal, dtype=float)
        self.chi = [problem.masks["g1"].indicator, problem.masks["g2"].indicator]
        self.chid = problem.masks["gd"].indicator

    def psi_states(self, mphi):
        p = self.p
        drift = []
        for k in range(p.tree.num_steps):
            phib = p.mesh.split(mphi[k])[0]
            arr = np.zeros((2, mphi[k].shape[0], p.mesh.n_dof))
            for i in (0, 1):
                arr[i, :, : p.mesh.n_bulk] = (self.chi[i] * phib) / p.cost.beta[i]
            drift.append(arr)
        Y0 = np.zeros((2, p.mesh.n_dof))
        return forward_sweep(p.stepper(), p.coeffs, Y0, drift, None)

    def phi(self, psi_levels):
        p = self.p
        duals = []
        for k in range(p.tree.num_steps):
            psib = [p.mesh.split(psi_levels[k][i])[0] for i in (0, 1)]
            h = p.cost.alpha[0] * psib[0] + p.cost.alpha[1] * psib[1]
            arr = np.zeros((psi_levels[k].shape[1], p.mesh.n_dof))
            arr[:, : p.mesh.n_bulk] = -(self.chid * h)
            duals.append(arr)
        return transpose_sweep(p.stepper(), p.coeffs, self.terminal, duals)

    def sweep(self, mphi):
        psi = self.psi_states(mphi)
        m, zhat, root = self.phi(psi)
        return m, (psi, zhat, root)


def _picard(map_obj, x0, tol, max_iter):
    """Iterate x -> sweep(x) to a fixed point; returns (x, extras, info)."""
    x = x0
    history = []
    grow = 0
    for it in range(1, max_iter + 1):
        x_new, extras = map_obj.sweep(x)
        dist = _stack_rel_change(x_new, x)
        history.append(dist)
        if len(history) > 1 and dist > history[-2]:
            grow += 1
            if grow >= 5:
                raise PicardDivergenceError(
                    "decoupling iteration diverged (distance grew for 5 "
                    "consecutive sweeps); increase beta_i", history
                )
        else:
            grow = 0
        x = x_new
        if dist <= tol:
            return x, extras, PicardInfo(iterations=it, history=history)
    return None, None, PicardInfo(iterations=max_iter, history=history)


def _pack(levels):
    return np.concatenate([lv.ravel() for lv in levels])


def _unpack_like(vec, template):
    out, pos = [], 0
    for lv in template:
        n = lv.size
        out.append(vec[pos : pos + n].reshape(lv.shape))
        pos += n
    return out


def _assembled_fixed_point(map_obj, x0, budget):
    """Dense solve of (I - L) x = c for the affine sweep x -> L x + c.

    Exactness reference for small instances; cost grows with the square
    of the unknown count, so it is guarded by ``assembled_budget``.
    """
    c_levels, _ = map_obj.sweep(x0)
    dim = sum(lv.size for lv in c_levels)
    if dim > budget:
        raise ResourceLimitError(
            f"assembled fallback needs {dim} unknowns, budget is {budget}"
        )
    c = _pack(c_levels)
    L = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        col, _ = map_obj.sweep(_unpack_like(e, c_levels))
        L[:, j] = _pack(col) - c
    x = np.linalg.solve(np.eye(dim) - L, c)
    x_levels = _unpack_like(x, c_levels)
    _, extras = map_obj.sweep(x_levels)
    return x_levels, extras


def solve_optimality(
    problem: Problem, leaders: ControlTriple | None = None, Y0=None, assembled: bool = False
) -> OptimalityBundle:
    """Solve the optimality system for given leaders (followers eliminated)."""
    opts = problem.options
    omap = _OptimalityMap(problem, leaders, Y0)
    x0 = _zeros_like_levels(problem, 2)
    used_fallback = False
    if assembled:
        mz, extras = _assembled_fixed_point(omap, x0, opts.assembled_budget)
        info = PicardInfo(iterations=0, history=[])
        used_fallback = True
    else:
        mz, extras, info = _picard(omap, x0, opts.tol_picard, opts.max_picard)
        if mz is None:  # stalled: fall back to the assembled solve
            mz, extras = _assembled_fixed_point(omap, x0, opts.assembled_budget)
            used_fallback = True
    _, zhat, root = extras
    Y_final = omap.state(mz)  # state consistent with the returned costates
    info.used_fallback = used_fallback

    N = problem.tree.num_steps
    terminal_zero = np.zeros((1 << N, problem.mesh.n_dof))
    zs = tuple(
        BackwardSolution(
            z=AdaptedProcess(problem.tree, [mz[k][i] for k in range(N)] + [terminal_zero], "coupled"),
            zhat=AdaptedProcess(problem.tree, [zhat[k][i] for k in range(N)], "coupled"),
            root=root[i],
        )
        for i in (0, 1)
    )
    return OptimalityBundle(
        Y=AdaptedProcess(problem.tree, Y_final, "coupled"), Z=zs, info=info
    )


def solve_adjoint(problem: Problem, terminal, assembled: bool = False) -> AdjointBundle:
    """Solve the adjoint system for a terminal pair given per leaf node."""
    opts = problem.options
    amap = _AdjointMap(problem, terminal)
    nd = problem.mesh.n_dof
    x0 = [np.zeros((1 << k, nd)) for k in range(problem.tree.num_steps)]
    used_fallback = False
    if assembled:
        mphi, extras = _assembled_fixed_point(amap, x0, opts.assembled_budget)
        info = PicardInfo(iterations=0, history=[])
        used_fallback = True
    else:
        mphi, extras, info = _picard(amap, x0, opts.tol_picard, opts.max_picard)
        if mphi is None:
            mphi, extras = _assembled_fixed_point(amap, x0, opts.assembled_budget)
            used_fallback = True
    psi_levels, zhat, root = extras
    info.used_fallback = used_fallback

    N = problem.tree.num_steps
    phi = BackwardSolution(
        z=AdaptedProcess(problem.tree, list(mphi) + [np.asarray(terminal, dtype=float)], "coupled"),
        zhat=AdaptedProcess(problem.tree, list(zhat), "coupled"),
        root=root,
    )
    psis = tuple(
        AdaptedProcess(problem.tree, [psi_levels[k][i] for k in range(N + 1)], "coupled")
        for i in (0, 1)
    )
    return AdjointBundle(phi=phi, psi=psis, info=info)


def duality_residual(
    problem: Problem,
    leaders: ControlTriple | None,
    opt: OptimalityBundle,
    adj: AdjointBundle,
    terminal,
) -> dict:
    """Evaluate both sides of the duality identity; returns terms and residual."""
    mesh, tree = problem.mesh, problem.tree
    N = tree.num_steps
    lhs = expect_inner(mesh, opt.Y.level(N), np.asarray(terminal, dtype=float))
    lhs -= expect_inner(mesh, problem.Y0, adj.phi.root)

    drift_u, noise_u = _leader_sources(problem, leaders)
    term_u1 = time_expect_inner(mesh, tree, drift_u, adj.phi.z.values)
    term_u23 = time_expect_inner(mesh, tree, noise_u, adj.phi.zhat.values)
    term_targets = 0.0
    for i in (0, 1):
        tgt_levels = [problem.target_dof(i, k) for k in range(N)]
        term_targets += problem.cost.alpha[i] * time_expect_inner(
            mesh, tree, tgt_levels, adj.psi[i].values, weight=problem.mask_dof("gd")
        )
    rhs = term_u1 + term_u23 + term_targets
    scale = 1.0 + abs(lhs) + abs(term_u1) + abs(term_u23) + abs(term_targets)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "residual": abs(lhs - rhs) / scale,
        "terms": {"u1": term_u1, "u23": term_u23, "targets": term_targets},
    }
