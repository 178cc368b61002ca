"""Shared level-synchronous stepping primitives.

All tree sweeps live here: the semi-implicit forward step, the
martingale-representation backward step, and the exact transpose of the
forward one-step map.  Arrays carry an optional leading batch axis, so a
pair of equations with identical homogeneous parts (the two follower
adjoint states, say) costs one sweep.

Array shapes: level-k values are (B, 2^k, n_dof); child ordering matches
the tree convention (up child at 2j, down child at 2j+1).

The one-step forward map, with A the coupled generator, B1/B2 the
diagonal reaction/noise coefficients, s/w the drift/noise sources and
e = +-1 the increment sign, is

    Y_child = (I - dt A)^{-1} [ (I + dt B1) Y + dt s + e sqrt(dt) (B2 Y + w) ].

Its exact adjoint with respect to the tree expectation and the weighted
spatial inner product propagates a dual variable zeta from the leaves:

    zv = (I - dt A)^{-1} zeta_child        (per child; A is self-adjoint)
    m = (zv_up + zv_down) / 2,   zhat = (zv_up - zv_down) / (2 sqrt(dt))
    zeta = (I + dt B1) m + dt B2 zhat + dt r

with r an optional dual source.  The pairing values are m (against drift
sources) and zhat (against noise sources); the root zeta pairs against
the initial state.  These identities hold to rounding, which is what
makes all dual-based gradients in the package trustworthy.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import CoupledOperator, SpatialMesh
from .tree import ScenarioTree

__all__ = ["Stepper", "forward_sweep", "transpose_sweep", "backward_sweep"]


class Stepper:
    """Caches the Cholesky factor of (M + dt K) for one mesh/tree pair."""

    def __init__(self, mesh: SpatialMesh, op: CoupledOperator, tree: ScenarioTree):
        self.mesh = mesh
        self.op = op
        self.tree = tree
        self.dt = tree.dt
        self.sqrt_dt = tree.sqrt_dt
        self.mass = mesh.mass
        self._chol = cho_factor(np.diag(self.mass) + self.dt * op.stiffness)

    def implicit_solve(self, X: np.ndarray) -> np.ndarray:
        """Solve (I - dt A) out = X, i.e. (M + dt K) out = M X, along the last axis."""
        flat = (X * self.mass).reshape(-1, self.mesh.n_dof)
        out = cho_solve(self._chol, flat.T).T
        return out.reshape(X.shape)


def _coef_diag(mesh: SpatialMesh, a, b, k: int):
    """Combine bulk/boundary coefficients into a DOF-diagonal for level k.

    Each of ``a``/``b`` may be a scalar, a spatial array, or a per-level
    list of per-node arrays (adapted coefficients).  Returns an array
    broadcastable against (B, 2^k, n_dof), or a scalar when possible.
    """
    av = a[k] if isinstance(a, (list, tuple)) else a
    bv = b[k] if isinstance(b, (list, tuple)) else b
    if np.isscalar(av) and np.isscalar(bv) and av == bv:
        return float(av)
    av = np.broadcast_to(np.asarray(av, dtype=float), _blk_shape(av, mesh.n_bulk))
    bv = np.broadcast_to(np.asarray(bv, dtype=float), _blk_shape(bv, mesh.n_boundary))
    if av.ndim == 1 and bv.ndim == 1:
        return np.concatenate([av, bv])
    nodes = 1 << k
    out = np.empty((nodes, mesh.n_dof))
    out[:, : mesh.n_bulk] = av
    out[:, mesh.n_bulk :] = bv
    return out


def _blk_shape(v, n):
    v = np.asarray(v)
    if v.ndim <= 1:
        return (n,)
    return (v.shape[0], n)


def forward_sweep(stepper, coeffs, Y0, drift_sources=None, noise_sources=None):
    """Propagate the semi-implicit scheme from the root; returns all levels.

    ``Y0``: (B, n_dof) or (n_dof,).  Sources: lists over levels 0..N-1 of
    arrays broadcastable to (B, 2^k, n_dof), or None.  Output: list over
    levels 0..N of (B, 2^k, n_dof) arrays (B inserted if absent).
    """
    mesh, tree, dt, sdt = stepper.mesh, stepper.tree, stepper.dt, stepper.sqrt_dt
    Y0 = np.asarray(Y0, dtype=float)
    squeeze = Y0.ndim == 1
    if squeeze:
        Y0 = Y0[None, :]
    B = Y0.shape[0]
    levels = [np.broadcast_to(Y0[:, None, :], (B, 1, mesh.n_dof)).copy()]
    for k in range(tree.num_steps):
        Y = levels[k]
        d1 = _coef_diag(mesh, coeffs.a1, coeffs.b1, k)
        d2 = _coef_diag(mesh, coeffs.a2, coeffs.b2, k)
        common = Y + dt * (d1 * Y)
        if drift_sources is not None and drift_sources[k] is not None:
            common = common + dt * drift_sources[k]
        noise = d2 * Y
        if noise_sources is not None and noise_sources[k] is not None:
            noise = noise + noise_sources[k]
        # Solving the drift and noise parts separately keeps the two
        # children bitwise identical when the noise vanishes.
        zc = stepper.implicit_solve(common)
        if np.any(noise):
            zn = stepper.implicit_solve(
                np.broadcast_to(noise, common.shape).copy()
            )
            s = sdt * zn
        else:
            s = np.zeros_like(zc)
        nxt = np.empty((B, 1 << (k + 1), mesh.n_dof))
        nxt[:, 0::2, :] = zc + s
        nxt[:, 1::2, :] = zc - s
        levels.append(nxt)
    if squeeze:
        levels = [lv[0] for lv in levels]
    return levels


def transpose_sweep(stepper, coeffs, terminal, dual_sources=None):
    """Exact adjoint of ``forward_sweep``; leaves to root.

    ``terminal``: (B, 2^N, n_dof) or (2^N, n_dof).  ``dual_sources``: list
    over levels 0..N-1 (pairing against the primal state at that level) or
    None.  Returns (m_levels, zhat_levels, root): the pairing traces for
    levels 0..N-1 and the root dual value pairing against the initial state.
    """
    mesh, tree, dt, sdt = stepper.mesh, stepper.tree, stepper.dt, stepper.sqrt_dt
    N = tree.num_steps
    zeta = np.asarray(terminal, dtype=float)
    squeeze = zeta.ndim == 2
    if squeeze:
        zeta = zeta[None, ...]
    B = zeta.shape[0]
    m_levels = [None] * N
    zhat_levels = [None] * N
    for k in range(N - 1, -1, -1):
        zv = stepper.implicit_solve(zeta)
        up, down = zv[:, 0::2, :], zv[:, 1::2, :]
        m = 0.5 * (up + down)
        zhat = (up - down) / (2.0 * sdt)
        d1 = _coef_diag(mesh, coeffs.a1, coeffs.b1, k)
        d2 = _coef_diag(mesh, coeffs.a2, coeffs.b2, k)
        zeta = m + dt * (d1 * m) + dt * (d2 * zhat)
        if dual_sources is not None and dual_sources[k] is not None:
            zeta = zeta + dt * dual_sources[k]
        m_levels[k] = m
        zhat_levels[k] = zhat
    root = zeta[:, 0, :]
    if squeeze:
        m_levels = [v[0] for v in m_levels]
        zhat_levels = [v[0] for v in zhat_levels]
        root = root[0]
    return m_levels, zhat_levels, root


def backward_sweep(stepper, coeffs, terminal, sources=None):
    """Martingale-representation scheme for the backward equation.

    Scheme per node, children z_up/z_down known:

        zhat_k = (z_up - z_down) / (2 sqrt(dt))
        mean   = (z_up + z_down) / 2
        (I - dt A + dt B3) z_k = mean - dt (B4 zhat_k + F3_k)

    ``coeffs`` carries (a3, a4, b3, b4) in its (a1, a2, b1, b2) slots; the
    implicit reaction requires non-adapted (scalar or spatial) a3/b3 so a
    single factorization serves the whole run.
    """
    mesh, tree, dt, sdt = stepper.mesh, stepper.tree, stepper.dt, stepper.sqrt_dt
    if isinstance(coeffs.a1, (list, tuple)) or isinstance(coeffs.b1, (list, tuple)):
        raise ValueError("backward reaction coefficients must not be adapted (single factorization per run)")
    N = tree.num_steps
    z = np.asarray(terminal, dtype=float)
    squeeze = z.ndim == 2
    if squeeze:
        z = z[None, ...]
    B = z.shape[0]

    d3 = _coef_diag(mesh, coeffs.a1, coeffs.b1, 0)
    diag = stepper.mass * (1.0 + dt * np.broadcast_to(d3, (mesh.n_dof,)))
    if np.any(diag <= 0):
        raise ValueError("implicit backward matrix lost positive definiteness; reduce dt or the reaction size")
    chol = cho_factor(np.diag(diag) + dt * stepper.op.stiffness)

    z_levels = [None] * (N + 1)
    zhat_levels = [None] * N
    z_levels[N] = z
    for k in range(N - 1, -1, -1):
        up, down = z[:, 0::2, :], z[:, 1::2, :]
        mean = 0.5 * (up + down)
        zhat = (up - down) / (2.0 * sdt)
        d4 = _coef_diag(mesh, coeffs.a2, coeffs.b2, k)
        rhs = mean - dt * (d4 * zhat)
        if sources is not None and sources[k] is not None:
            rhs = rhs - dt * sources[k]
        flat = (rhs * stepper.mass).reshape(-1, mesh.n_dof)
        z = cho_solve(chol, flat.T).T.reshape(rhs.shape)
        z_levels[k] = z
        zhat_levels[k] = zhat
    if squeeze:
        z_levels = [v[0] for v in z_levels]
        zhat_levels = [v[0] for v in zhat_levels]
    return z_levels, zhat_levels
