"""Carleman weight families and the empirical observability machinery.

The weights are built from an auxiliary profile eta, positive inside the
domain, vanishing on the boundary, with nonvanishing gradient away from a
core subdomain G' (inside the observation region).  With parameters
lambda, mu > 1 and the time factors

    that(t) = t (T - t),
    ell(t)  = T^2/4 on (0, T/2],  t (T - t) on (T/2, T),

the weight families are

    alpha = (e^{mu eta} - e^{2 mu |eta|_inf}) / that,  phi = e^{mu eta} / that,
    theta = e^{lambda alpha},

their "modified" counterparts with ell in place of that (bounded near
t = 0), and the purely temporal blow-up weight

    rho(t) = exp(-lambda alphabar*(t)),
    alphabar*(t) = min_x alphabar(t, x) = (1 - e^{2 mu |eta|_inf}) / ell(t),

which explodes as t -> T.  All evaluations are carried in log space with
a clamped exponential, since log rho reaches thousands near the horizon.

None of the continuum inequalities are proved here; the checkers report
empirical ratios on sampled adjoint solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupled import solve_adjoint
from .errors import ConstructionError
from .geometry import SpatialMesh, SubdomainMask
from .quadrature import time_expect_sqnorm
from .tree import ScenarioTree

__all__ = [
    "WeightSet",
    "WeightValues",
    "build_eta",
    "build_weights",
    "eval_weights",
    "eval_rho",
    "carleman_functional",
    "check_observability",
    "check_carleman",
    "validate_targets",
]


@dataclass
class WeightValues:
    alpha: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    alpha_bar: np.ndarray
    phi_bar: np.ndarray
    theta_bar: np.ndarray
    log_theta: np.ndarray
    log_theta_bar: np.ndarray


@dataclass
class WeightSet:
    """Weight family bound to one mesh: profile, parameters, evaluators."""

    mesh: SpatialMesh
    horizon: float
    lam: float
    mu: float
    eta: np.ndarray  # nodal values over the DOF layout
    eta_max: float
    eta_fn: callable
    gprime: SubdomainMask
    certificate: dict
    log_budget: float = 500.0

    def ell(self, t):
        """Time reparametrization: constant plateau, then t(T - t)."""
        t = np.asarray(t, dtype=float)
        T = self.horizon
        return np.where(t <= T / 2, T * T / 4.0, t * (T - t))

    def that(self, t):
        t = np.asarray(t, dtype=float)
        return t * (self.horizon - t)

    def alpha_bar_star(self, t):
        """min_x of the modified alpha; attained on the boundary (eta = 0)."""
        return (1.0 - np.exp(2.0 * self.mu * self.eta_max)) / self.ell(t)

    def phi_bar_star(self, t):
        return np.exp(self.mu * self.eta_max) / self.ell(t)

    def log_rho(self, t):
        """log rho(t) = lambda (e^{2 mu |eta|_inf} - 1) / ell(t); +inf at t = T."""
        t = np.asarray(t, dtype=float)
        c = self.lam * (np.exp(2.0 * self.mu * self.eta_max) - 1.0)
        ell = self.ell(t)
        with np.errstate(divide="ignore"):
            return np.where(ell > 0, c / np.where(ell > 0, ell, 1.0), np.inf)

    def clamped_exp(self, logv):
        return np.exp(np.minimum(logv, self.log_budget))


def build_eta(mesh: SpatialMesh, gprime: SubdomainMask, bounds=None):
    """Construct the auxiliary profile and certify its defining properties.

    Interval: eta(x) = x (L - x) / L^2, normalized sup 1/4, vertex at the
    midpoint.  Rectangle: the normalized product of the per-axis profiles.
    ``bounds`` optionally gives the (lo, hi) interval of G' for an exact
    vertex-containment check.

    Returns (nodal values over DOFs, callable profile, certificate dict);
    raises ConstructionError naming the violated property.
    """
    L = mesh.extent

    if mesh.geometry_kind == "interval":

        def eta_fn(coords):
            x = np.asarray(coords)[..., 0]
            return x * (L - x) / L**2

        center = (L / 2.0,)
    else:

        def eta_fn(coords):
            c = np.asarray(coords)
            x, y = c[..., 0], c[..., 1]
            return 4.0 * (x * (L - x) / L**2) * (y * (L - y) / L**2)

        center = (L / 2.0, L / 2.0)

    if bounds is not None:
        lo, hi = bounds
        if not all(lo < c < hi for c in center):
            raise ConstructionError(
                f"profile vertex {center} lies outside G' = ({lo}, {hi}); "
                "the gradient would vanish away from the core subdomain"
            )

    coords = mesh.all_coords
    eta = eta_fn(coords)

    cert = {}
    cert["eta_positive_in_bulk"] = bool(np.all(eta[: mesh.n_bulk] > 0))
    cert["eta_zero_on_boundary"] = bool(np.all(eta[mesh.n_bulk :] == 0.0))
    # The sup norm entering the weights is the analytic one (attained at the
    # profile vertex, which need not be a mesh node): exactly 1/4 by the
    # normalization of both profiles.
    cert["eta_sup"] = 0.25

    grad = _discrete_gradient_norm(mesh, eta)
    outside = gprime.indicator == 0
    min_grad = float(grad[outside].min()) if np.any(outside) else np.inf
    cert["grad_positive_off_gprime"] = bool(min_grad > 1e-12)
    cert["min_grad_off_gprime"] = min_grad
    cert["eta_max"] = float(eta.max())

    for key in ("eta_positive_in_bulk", "eta_zero_on_boundary", "grad_positive_off_gprime"):
        if not cert[key]:
            raise ConstructionError(f"auxiliary profile violates property {key}")
    return eta, eta_fn, cert


def _discrete_gradient_norm(mesh: SpatialMesh, values: np.ndarray) -> np.ndarray:
    """|grad| at bulk nodes from lattice differences (central where possible)."""
    nd = mesh.n_dof
    sums = np.zeros((nd, mesh.bulk_coords.shape[1]))
    counts = np.zeros(nd)
    coords = mesh.all_coords
    for a, b in mesh.bulk_edges:
        d = coords[b] - coords[a]
        h2 = float(d @ d)
        g = (values[b] - values[a]) / h2 * d
        sums[a] += g
        sums[b] += g
        counts[a] += 1
        counts[b] += 1
    counts[counts == 0] = 1
    grad = sums / counts[:, None]
    return np.sqrt(np.sum(grad[: mesh.n_bulk] ** 2, axis=1))


def build_weights(
    mesh: SpatialMesh,
    gprime: SubdomainMask,
    horizon: float,
    lam: float = 2.0,
    mu: float = 2.0,
    bounds=None,
    log_budget: float = 500.0,
) -> WeightSet:
    eta, eta_fn, cert = build_eta(mesh, gprime, bounds=bounds)
    return WeightSet(
        mesh=mesh,
        horizon=horizon,
        lam=lam,
        mu=mu,
        eta=eta,
        eta_max=cert["eta_sup"],
        eta_fn=eta_fn,
        gprime=gprime,
        certificate=cert,
        log_budget=log_budget,
    )


def _eta_values(ws: WeightSet, x):
    if x is None:
        return ws.eta
    return ws.eta_fn(np.atleast_2d(np.asarray(x, dtype=float)))


def eval_weights(ws: WeightSet, t: float, x=None) -> WeightValues:
    """Evaluate the plain and modified weight families at time t.

    ``x``: coordinate rows, or None for every mesh DOF.  Exponentials are
    clamped; log values are returned alongside.
    """
    if not 0.0 < t < ws.horizon:
        raise ValueError(f"t = {t} outside the open time interval (0, {ws.horizon})")
    eta = _eta_values(ws, x)
    emu = np.exp(ws.mu * eta)
    top = emu - np.exp(2.0 * ws.mu * ws.eta_max)
    that = float(ws.that(t))
    ell = float(ws.ell(t))
    alpha = top / that
    alpha_bar = top / ell
    phi = emu / that
    phi_bar = emu / ell
    log_theta = ws.lam * alpha
    log_theta_bar = ws.lam * alpha_bar
    return WeightValues(
        alpha=alpha,
        phi=phi,
        theta=ws.clamped_exp(log_theta),
        alpha_bar=alpha_bar,
        phi_bar=phi_bar,
        theta_bar=ws.clamped_exp(log_theta_bar),
        log_theta=log_theta,
        log_theta_bar=log_theta_bar,
    )


def eval_rho(ws: WeightSet, t: float):
    """The temporal blow-up weight: returns (clamped value, log value)."""
    logr = float(ws.log_rho(t))
    return float(ws.clamped_exp(logr)), logr


def _theta2_phi_pow(ws, t, power, modified=False):
    """theta^2 phi^power over all DOFs at time t, computed in log space."""
    eta = ws.eta
    emu_log = ws.mu * eta
    top = np.exp(emu_log) - np.exp(2.0 * ws.mu * ws.eta_max)
    denom = float(ws.ell(t) if modified else ws.that(t))
    log_theta = ws.lam * top / denom
    log_phi = emu_log - np.log(denom)
    return ws.clamped_exp(2.0 * log_theta + power * log_phi)


def carleman_functional(ws: WeightSet, tree: ScenarioTree, levels, modified: bool = False) -> float:
    """Evaluate the weighted space-time functional of a process pair.

    Plain form: lambda^3 (bulk + boundary zeroth-order integrals with
    theta^2 phi^3) + lambda (bulk + boundary gradient integrals with
    theta^2 phi).  Modified form: zeroth-order only, with the modified
    weights and no lambda factors.  Time quadrature is the midpoint rule
    on the tree cells (the endpoints, where the weights degenerate, carry
    no nodes); the process enters with its level-k (left endpoint) value.
    """
    mesh, lam = ws.mesh, ws.lam
    dt = tree.dt
    mids = (np.arange(tree.num_steps) + 0.5) * dt
    total = 0.0
    coords = mesh.all_coords
    if not modified:
        emid = ws.eta_fn(0.5 * (coords[mesh.bulk_edges[:, 0]] + coords[mesh.bulk_edges[:, 1]]))
        if len(mesh.boundary_edges):
            ebmid = ws.eta_fn(
                0.5 * (coords[mesh.boundary_edges[:, 0]] + coords[mesh.boundary_edges[:, 1]])
            )
    for k, tm in enumerate(mids):
        X = np.asarray(levels[k], dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        w0 = _theta2_phi_pow(ws, tm, 3.0, modified=modified)
        zero_quad = float(np.mean(np.sum(X * X * (w0 * mesh.mass), axis=-1)))
        if modified:
            total += dt * zero_quad
            continue
        total += dt * lam**3 * zero_quad
        # Gradient terms: edge differences against theta^2 phi at edge midpoints.
        w1e = _w_at_eta(ws, tm, emid, 1.0)
        dif = X[:, mesh.bulk_edges[:, 0]] - X[:, mesh.bulk_edges[:, 1]]
        grad_quad = float(np.mean(np.sum(dif * dif * (w1e * mesh.bulk_conductances), axis=-1)))
        if len(mesh.boundary_edges):
            w1b = _w_at_eta(ws, tm, ebmid, 1.0)
            difb = X[:, mesh.boundary_edges[:, 0]] - X[:, mesh.boundary_edges[:, 1]]
            grad_quad += float(
                np.mean(np.sum(difb * difb * (w1b * mesh.boundary_conductances), axis=-1))
            )
        total += dt * lam * grad_quad
    return total


def _w_at_eta(ws, t, eta, power):
    emu_log = ws.mu * eta
    top = np.exp(emu_log) - np.exp(2.0 * ws.mu * ws.eta_max)
    denom = float(ws.that(t))
    return ws.clamped_exp(2.0 * ws.lam * top / denom + power * (emu_log - np.log(denom)))


def check_observability(problem, ws: WeightSet, num_samples: int = 200, seed: int = 0) -> dict:
    """Empirical observability study over random Gaussian terminal data.

    Per sample: LHS = E|phi(0)|^2 (bulk and boundary parts) plus the
    rho^{-2}-weighted energies of psi^1, psi^2; RHS = the observation
    terms E int_{Q0} phi^2 + E int_Q Phi^2 + E int_Sigma Phihat^2.
    Reports every ratio and the maximum (the empirical constant); a
    vanishing RHS against a positive LHS is flagged, not raised.
    """
    mesh, tree = problem.mesh, problem.tree
    rng = np.random.default_rng(seed)
    nleaf = 1 << tree.num_steps
    mids = (np.arange(tree.num_steps) + 0.5) * tree.dt
    rho2inv = np.exp(-2.0 * np.asarray([ws.log_rho(t) for t in mids]))
    chi0 = problem.mask_dof("g0")
    rows, violations = [], []
    for s in range(num_samples):
        xT = rng.standard_normal((nleaf, mesh.n_dof))
        adj = solve_adjoint(problem, xT)
        root = adj.phi.root
        lhs = float(np.sum(root[: mesh.n_bulk] ** 2 * mesh.bulk_weights))
        lhs += float(np.sum(root[mesh.n_bulk :] ** 2 * mesh.boundary_weights))
        for i in (0, 1):
            for k in range(tree.num_steps):
                psi = adj.psi[i].level(k)
                lhs += (
                    tree.dt
                    * rho2inv[k]
                    * float(np.mean(np.sum(psi * psi * mesh.mass, axis=-1)))
                )
        rhs = time_expect_sqnorm(mesh, tree, adj.phi.z.values, weight=chi0)
        rhs += time_expect_sqnorm(mesh, tree, adj.phi.zhat.values)
        if rhs == 0.0:
            violations.append(s)
            ratio = np.inf if lhs > 0 else 0.0
        else:
            ratio = lhs / rhs
        rows.append({"sample": s, "lhs": lhs, "rhs": rhs, "ratio": ratio})
    finite = [r["ratio"] for r in rows if np.isfinite(r["ratio"])]
    return {
        "rows": rows,
        "max_ratio": max(finite) if finite else np.inf,
        "violations": violations,
        "num_samples": num_samples,
        "seed": seed,
    }


def check_carleman(problem, ws: WeightSet, num_samples: int = 50, seed: int = 0) -> dict:
    """Desk-scale stand-in for the coupled-system Carleman estimate.

    Per sample compares LHS = E|phi(0)|^2 + modified functional of phi +
    plain functional of h = alpha_1 psi^1 + alpha_2 psi^2 against
    RHS = lambda^7 E int_{Q0} theta^2 phi_w^7 phi^2
        + lambda^2 E int_Q theta^2 phi_w^2 Phi^2
        + lambda^2 E int_Sigma theta^2 phi_w Phihat^2,
    reporting the ratio (no bound is asserted: the constants are not
    quantitative at this scale).
    """
    mesh, tree = problem.mesh, problem.tree
    rng = np.random.default_rng(seed)
    nleaf = 1 << tree.num_steps
    mids = (np.arange(tree.num_steps) + 0.5) * tree.dt
    chi0 = problem.mask_dof("g0")
    a1, a2 = problem.cost.alpha
    rows = []
    for s in range(num_samples):
        xT = rng.standard_normal((nleaf, mesh.n_dof))
        adj = solve_adjoint(problem, xT)
        root = adj.phi.root
        lhs = float(np.sum(root**2 * mesh.mass))
        lhs += carleman_functional(ws, tree, adj.phi.z.values, modified=True)
        h_levels = [
            a1 * adj.psi[0].level(k) + a2 * adj.psi[1].level(k)
            for k in range(tree.num_steps)
        ]
        lhs += carleman_functional(ws, tree, h_levels)
        rhs = 0.0
        for k, tm in enumerate(mids):
            w7 = _theta2_phi_pow(ws, tm, 7.0)
            w2 = _theta2_phi_pow(ws, tm, 2.0)
            w1 = _theta2_phi_pow(ws, tm, 1.0)
            phi = adj.phi.z.values[k]
            zh = adj.phi.zhat.values[k]
            rhs += tree.dt * ws.lam**7 * float(
                np.mean(np.sum(phi * phi * (w7 * mesh.mass * chi0), axis=-1))
            )
            zb, zg = mesh.split(zh)
            rhs += tree.dt * ws.lam**2 * float(
                np.mean(np.sum(zb * zb * (w2[: mesh.n_bulk] * mesh.bulk_weights), axis=-1))
            )
            rhs += tree.dt * ws.lam**2 * float(
                np.mean(np.sum(zg * zg * (w1[mesh.n_bulk :] * mesh.boundary_weights), axis=-1))
            )
        ratio = lhs / rhs if rhs > 0 else (np.inf if lhs > 0 else 0.0)
        rows.append({"sample": s, "lhs": lhs, "rhs": rhs, "ratio": ratio})
    finite = [r["ratio"] for r in rows if np.isfinite(r["ratio"])]
    return {"rows": rows, "max_ratio": max(finite) if finite else np.inf, "seed": seed}


def validate_targets(ws: WeightSet, tree: ScenarioTree, targets) -> dict:
    """Admissibility of the targets under the blow-up weight.

    Computes E int rho^2 |y_{i,d}|^2 by midpoint quadrature in log space.
    A target is admissible iff it vanishes on every time cell where
    2 log rho exceeds the overflow budget anywhere on the cell (log rho is
    increasing late in the horizon, so the cell supremum sits at the right
    endpoint, which is +inf on the final cell).
    """
    mesh = ws.mesh
    dt = tree.dt
    out = {"ok": True, "norms": [], "blocked_cells": []}
    for i, tgt in enumerate(targets):
        norm = 0.0
        blocked = []
        for k in range(tree.num_steps):
            val = None if tgt is None else tgt[k]
            cell_e = 0.0
            if val is not None:
                arr = np.asarray(val, dtype=float)
                if arr.ndim == 1:
                    arr = arr[None, :]
                cell_e = float(np.mean(np.sum(arr * arr * mesh.bulk_weights, axis=-1)))
            if cell_e == 0.0:
                continue
            sup_log = 2.0 * float(ws.log_rho((k + 1) * dt))  # +inf on the final cell
            if not np.isfinite(sup_log) or sup_log > ws.log_budget:
                blocked.append(k)
                continue
            mid_log = 2.0 * float(ws.log_rho((k + 0.5) * dt))
            norm += dt * float(ws.clamped_exp(mid_log + np.log(cell_e)))
        out["norms"].append(norm)
        if blocked:
            out["ok"] = False
            out["blocked_cells"].append({"target": i + 1, "cells": blocked})
    return out
