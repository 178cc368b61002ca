"""Leader level: penalized dual minimization and the full control pipeline.

The leaders are recovered from the adjoint system evaluated at the
minimizer of the penalized dual functional over terminal pairs x:

    J_eps(x) = 1/2 ( E int_{Q0} phi^2 + E int_Q Phi^2 + E int_Sigma Phihat^2 )
               + eps p(||x||) + < Y_0, phi(0) >
               + sum_i alpha_i E int_{(0,T) x G_d} y_{i,d} psi^i,

with (phi, Phi, Phihat, psi^i) = adjoint bundle of x.  Because the
adjoint/optimality pair satisfies an exact discrete duality, the Riesz
gradient of the smooth part is literally the terminal state of the
optimality system driven by the extracted leaders (chi_0 phi, Phi,
Phihat); the quadratic part's Hessian is the observability Gramian plus
eps times the identity (quadratic penalty mode), so conjugate-gradient
descent with exact line searches converges with a monotone value trace.

Penalty modes: 'quadratic' is p(s) = s^2/2 (classical Tikhonov-penalized
dual method, linear normal equations); 'norm' is the smoothed norm
penalty p(s) = sqrt(s^2 + delta^2), which yields the terminal bound
sqrt(E ||Y(T)||^2) <= eps at the exact minimizer.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .coupled import duality_residual, solve_adjoint, solve_optimality
from .errors import CoercivityError, ConfigError, StacknashError
from .nash import eval_J
from .problem import ControlTriple, FollowerPair, Problem
from .quadrature import expect_inner, time_expect_inner, time_expect_sqnorm
from .weights import WeightSet, validate_targets

__all__ = [
    "HumResult",
    "tdot",
    "leaders_from_adjoint",
    "eval_J_eps",
    "grad_J_eps",
    "minimize_J_eps",
    "compute_leader_controls",
]


@dataclass
class HumResult:
    controls: ControlTriple
    followers: FollowerPair
    terminal_norm_sq: float
    control_norm_sq: float
    iterations: int
    J_eps_trace: list
    grad_norm: float
    converged: bool
    observability_violation: bool
    duality_residual: float
    eps: float
    penalty: str


def tdot(problem: Problem, a: np.ndarray, b: np.ndarray) -> float:
    """E < a, b > over terminal pairs (one field per leaf node)."""
    return float(np.mean(np.sum(a * b * problem.mesh.mass, axis=-1)))


def _zero_terminal(problem) -> np.ndarray:
    return np.zeros((1 << problem.tree.num_steps, problem.mesh.n_dof))


def leaders_from_adjoint(problem: Problem, adj) -> ControlTriple:
    """Extract (chi_0 phi, Phi, Phihat) as the leader triple."""
    mesh, N = problem.mesh, problem.tree.num_steps
    chi0 = problem.masks["g0"].indicator
    u1, u2, u3 = [], [], []
    for k in range(N):
        mb, _ = mesh.split(adj.phi.z_level(k))
        zb, zg = mesh.split(adj.phi.zhat_level(k))
        u1.append(chi0 * mb)
        u2.append(zb.copy())
        u3.append(zg.copy())
    return ControlTriple(u1=u1, u2=u2, u3=u3)


def _penalty(problem, eps, x, mode):
    s2 = tdot(problem, x, x)
    delta = problem.options.penalty_delta
    if mode == "quadratic":
        return 0.5 * eps * s2, eps * x
    if mode == "norm":
        r = np.sqrt(s2 + delta * delta)
        return eps * r, (eps / r) * x
    raise ConfigError(f"unknown penalty mode {mode!r}")


def _quadratic_terms(problem, adj):
    """Observation energy 1/2 (phi on Q0, Phi, Phihat) of an adjoint bundle."""
    mesh, tree = problem.mesh, problem.tree
    chi0 = problem.mask_dof("g0")
    q = time_expect_sqnorm(mesh, tree, adj.phi.z.values, weight=chi0)
    q += time_expect_sqnorm(mesh, tree, adj.phi.zhat.values)
    return 0.5 * q


def _linear_terms(problem, adj):
    val = expect_inner(problem.mesh, problem.Y0, adj.phi.root)
    for i in (0, 1):
        tgt_levels = [problem.target_dof(i, k) for k in range(problem.tree.num_steps)]
        val += problem.cost.alpha[i] * time_expect_inner(
            problem.mesh, problem.tree, tgt_levels, adj.psi[i].values,
            weight=problem.mask_dof("gd"),
        )
    return val


def eval_J_eps(problem: Problem, eps: float | None, xT: np.ndarray, ws: WeightSet | None = None) -> float:
    """Evaluate the penalized dual functional at a terminal pair."""
    opts = problem.options
    eps = opts.eps if eps is None else eps
    if eps <= 0:
        raise ConfigError("penalty strength eps must be positive")
    adj = solve_adjoint(problem, xT)
    pen, _ = _penalty(problem, eps, np.asarray(xT, dtype=float), opts.penalty)
    return _quadratic_terms(problem, adj) + pen + _linear_terms(problem, adj)


def grad_J_eps(problem: Problem, eps: float | None, xT: np.ndarray, ws: WeightSet | None = None) -> np.ndarray:
    """Riesz gradient: terminal optimality state plus the penalty gradient."""
    opts = problem.options
    eps = opts.eps if eps is None else eps
    xT = np.asarray(xT, dtype=float)
    adj = solve_adjoint(problem, xT)
    leaders = leaders_from_adjoint(problem, adj)
    opt = solve_optimality(problem, leaders)
    _, dpen = _penalty(problem, eps, xT, opts.penalty)
    return opt.Y.level(problem.tree.num_steps) + dpen


def _homogeneous(problem: Problem) -> Problem:
    """Copy of the problem with zero initial state and zero targets."""
    if getattr(problem, "_homog", None) is None:
        cost = dataclasses.replace(problem.cost, targets=(None, None))
        homog = dataclasses.replace(
            problem, cost=cost, Y0=np.zeros(problem.mesh.n_dof)
        )
        homog._stepper = problem.stepper()
        problem._homog = homog
    return problem._homog


def apply_gramian(problem: Problem, d: np.ndarray) -> np.ndarray:
    """The observability Gramian: terminal state of the homogeneous pipeline."""
    homog = _homogeneous(problem)
    adj = solve_adjoint(homog, d)
    leaders = leaders_from_adjoint(homog, adj)
    opt = solve_optimality(homog, leaders)
    return opt.Y.level(problem.tree.num_steps)


def minimize_J_eps(
    problem: Problem,
    eps: float | None = None,
    x0: np.ndarray | None = None,
    callback=None,
):
    """Conjugate-gradient minimization of the penalized dual functional.

    Polak-Ribiere directions with restarts and an exact line search on the
    closed-form 1D restriction (the quadratic part is tracked through the
    Gramian recurrence, so one Gramian application per iteration); the
    value trace is monotone by construction.  Stops when the gradient norm
    falls below grad_tol_scale * (1 + ||Y_0||) or at max_grad_iters.

    Returns (x, trace, info) where trace rows are
    (iteration, J_eps, grad_norm, terminal_norm_sq).
    """
    opts = problem.options
    eps = opts.eps if eps is None else eps
    mode = opts.penalty
    nrm_y0 = np.sqrt(expect_inner(problem.mesh, problem.Y0, problem.Y0))
    tol = opts.grad_tol_scale * (1.0 + nrm_y0)

    x = _zero_terminal(problem) if x0 is None else np.asarray(x0, dtype=float).copy()
    b = grad_J_eps(problem, eps, _zero_terminal(problem))  # = Y_N of the free system
    Gx = apply_gramian(problem, x) if np.any(x) else np.zeros_like(x)

    def value_and_grad(x, Gx):
        pen, dpen = _penalty(problem, eps, x, mode)
        J = 0.5 * tdot(problem, Gx, x) + tdot(problem, b, x) + pen
        g = Gx + b + dpen
        return J, g

    J, g = value_and_grad(x, Gx)
    gnorm = np.sqrt(tdot(problem, g, g))
    terminal_sq = tdot(problem, Gx + b, Gx + b)
    trace = [(0, J, gnorm, terminal_sq)]
    d = -g
    gg = gnorm**2
    converged = gnorm <= tol
    it = 0
    while not converged and it < opts.max_grad_iters:
        it += 1
        Gd = apply_gramian(problem, d)
        dGd = tdot(problem, d, Gd)
        gd = tdot(problem, g, d)
        if gd >= 0:  # not a descent direction: restart on steepest descent
            d = -g
            Gd = apply_gramian(problem, d)
            dGd = tdot(problem, d, Gd)
            gd = tdot(problem, g, d)
        alpha = _line_search(problem, eps, mode, x, d, gd, dGd)
        x = x + alpha * d
        Gx = Gx + alpha * Gd
        if it % 25 == 0:  # periodic refresh against recurrence drift
            Gx = apply_gramian(problem, x)
        J_new, g_new = value_and_grad(x, Gx)
        beta = max(0.0, tdot(problem, g_new, g_new - g) / gg)
        if it % 50 == 0:
            beta = 0.0
        d = -g_new + beta * d
        g, J = g_new, J_new
        gg = tdot(problem, g, g)
        gnorm = np.sqrt(gg)
        terminal_sq = tdot(problem, Gx + b, Gx + b)
        trace.append((it, J, gnorm, terminal_sq))
        if callback is not None:
            callback(it, x, g)
        converged = gnorm <= tol
    info = {"converged": converged, "iterations": it, "grad_norm": gnorm}
    return x, trace, info


def _line_search(problem, eps, mode, x, d, gd, dGd):
    """Exact minimizer of the 1D restriction J(x + alpha d)."""
    delta = problem.options.penalty_delta
    dd = tdot(problem, d, d)
    if mode == "quadratic":
        return -gd / (dGd + eps * dd)
    xd = tdot(problem, x, d)
    xx = tdot(problem, x, x)
    # gd already contains the penalty slope at alpha = 0; remove it to get
    # the slope of the quadratic part alone.
    r0 = np.sqrt(xx + delta * delta)
    gq_d = gd - eps * xd / r0

    def slope(a):
        r = np.sqrt(xx + 2 * a * xd + a * a * dd + delta * delta)
        return gq_d + a * dGd + eps * (xd + a * dd) / r

    lo, hi = 0.0, max(1.0, -gq_d / max(dGd, 1e-300))
    for _ in range(400):
        if slope(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise StacknashError(
            "dual functional appears unbounded along a descent direction; "
            "the instance seems to lack discrete observability"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if slope(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def compute_leader_controls(
    problem: Problem, ws: WeightSet, eps: float | None = None
) -> HumResult:
    """Run the full pipeline: minimize the dual functional, extract leaders,
    recover the follower equilibrium and audit the duality identity."""
    opts = problem.options
    eps = opts.eps if eps is None else eps
    floor = problem.beta_floor()
    if min(problem.cost.beta) < floor:
        raise CoercivityError(
            f"beta = {problem.cost.beta} below the coercivity floor {floor:.3g}"
        )
    va = validate_targets(ws, problem.tree, problem.cost.targets)
    if not va["ok"]:
        raise ConfigError(
            "targets are inadmissible under the blow-up weight: nonzero on "
            f"late time cells {va['blocked_cells']}"
        )

    xT, trace, info = minimize_J_eps(problem, eps)
    adj = solve_adjoint(problem, xT)
    leaders = leaders_from_adjoint(problem, adj)
    opt = solve_optimality(problem, leaders)
    followers = opt.followers(problem)

    N = problem.tree.num_steps
    YN = opt.Y.level(N)
    terminal_norm_sq = tdot(problem, YN, YN)
    control_norm_sq = 2.0 * eval_J(problem, leaders)
    dres = duality_residual(problem, leaders, opt, adj, xT)["residual"]
    if dres > 1e-8:
        raise StacknashError(
            f"duality identity failed at the final iterate (residual {dres:.3g})"
        )
    violation = info["converged"] and terminal_norm_sq > 10.0 * opts.eps_target
    return HumResult(
        controls=leaders,
        followers=followers,
        terminal_norm_sq=terminal_norm_sq,
        control_norm_sq=control_norm_sq,
        iterations=info["iterations"],
        J_eps_trace=trace,
        grad_norm=info["grad_norm"],
        converged=info["converged"],
        observability_violation=violation,
        duality_residual=dres,
        eps=eps,
        penalty=opts.penalty,
    )
