"""Semi-implicit propagation of the controlled forward equation on the tree.

One step solves

    (I - dt A) Y_{k+1} = Y_k + dt (B1 Y_k + F1_k) + (B2 Y_k + F2_k) dW_k,

implicit only in the stiff coupled generator A, so the per-step matrix is
a single SPD factorization shared by every node of the run, while the
reaction and multiplicative-noise terms stay adapted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _stepping
from .geometry import CoupledField, CoupledOperator, SpatialMesh
from .tree import AdaptedProcess, ScenarioTree

__all__ = ["Coefficients", "ForwardSources", "step_forward", "solve_forward"]


@dataclass
class Coefficients:
    """Reaction (a1, b1) and noise (a2, b2) coefficients, bulk/boundary.

    Each entry is a scalar, a spatial array over its block, or a list of
    per-level per-node arrays for adapted coefficients.  All must be
    essentially bounded (finite sup norm).
    """

    a1: object = 0.0
    a2: object = 0.0
    b1: object = 0.0
    b2: object = 0.0

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            v = getattr(self, name)
            vals = v if isinstance(v, (list, tuple)) else [v]
            for item in vals:
                if not np.all(np.isfinite(item)):
                    raise ValueError(f"coefficient {name} is not essentially bounded")

    def sup_drift(self) -> float:
        out = 0.0
        for v in (self.a1, self.b1):
            vals = v if isinstance(v, (list, tuple)) else [v]
            out = max(out, max(float(np.max(np.abs(item))) for item in vals))
        return out


@dataclass
class ForwardSources:
    """Drift sources (f1 bulk, g1 boundary) and noise sources (f2, g2).

    Each is None or a list over levels 0..N-1 of per-node arrays on its
    block ((2^k, n_bulk) for f's, (2^k, n_boundary) for g's).
    """

    f1: list | None = None
    f2: list | None = None
    g1: list | None = None
    g2: list | None = None

    def dof_lists(self, mesh: SpatialMesh, tree: ScenarioTree):
        """Assemble (drift, noise) per-level lists over the full DOF layout."""
        drift = _combine(mesh, tree, self.f1, self.g1)
        noise = _combine(mesh, tree, self.f2, self.g2)
        return drift, noise


def _combine(mesh, tree, bulk_list, bdry_list):
    if bulk_list is None and bdry_list is None:
        return None
    out = []
    for k in range(tree.num_steps):
        nodes = 1 << k
        fb = None if bulk_list is None else bulk_list[k]
        gb = None if bdry_list is None else bdry_list[k]
        if fb is None and gb is None:
            out.append(None)
            continue
        arr = np.zeros((nodes, mesh.n_dof))
        if fb is not None:
            arr[:, : mesh.n_bulk] = fb
        if gb is not None:
            arr[:, mesh.n_bulk :] = gb
        out.append(arr)
    return out


def _check_dt_sanity(dt: float, coeffs: Coefficients):
    if dt * coeffs.sup_drift() >= 1.0:
        raise ValueError(
            f"dt * sup|reaction| = {dt * coeffs.sup_drift():.3g} >= 1; refine the time grid"
        )


def step_forward(
    mesh: SpatialMesh,
    op: CoupledOperator,
    dt: float,
    coeffs: Coefficients,
    Y_k,
    sources_k=None,
    dW: float = 0.0,
) -> CoupledField:
    """Single node-to-child step (mainly a contract for tests; sweeps are batched).

    ``sources_k``: optional (f1, f2, g1, g2) arrays on their blocks for this
    level.  ``dW`` is the realized increment (+-sqrt(dt) on the tree).
    """
    from scipy.linalg import cho_factor, cho_solve

    _check_dt_sanity(dt, coeffs)
    y = Y_k.data if isinstance(Y_k, CoupledField) else np.asarray(Y_k, dtype=float)
    d1 = np.broadcast_to(_stepping._coef_diag(mesh, coeffs.a1, coeffs.b1, 0), (mesh.n_dof,))
    d2 = np.broadcast_to(_stepping._coef_diag(mesh, coeffs.a2, coeffs.b2, 0), (mesh.n_dof,))
    f1, f2, g1, g2 = sources_k if sources_k is not None else (None, None, None, None)
    drift = d1 * y + _blocks(mesh, f1, g1)
    noise = d2 * y + _blocks(mesh, f2, g2)
    rhs = y + dt * drift + dW * noise
    chol = cho_factor(np.diag(mesh.mass) + dt * op.stiffness)
    out = cho_solve(chol, mesh.mass * rhs)
    return CoupledField(mesh, out)


def _blocks(mesh, bulk, bdry):
    arr = np.zeros(mesh.n_dof)
    if bulk is not None:
        arr[: mesh.n_bulk] = bulk
    if bdry is not None:
        arr[mesh.n_bulk :] = bdry
    return arr


def solve_forward(
    mesh: SpatialMesh,
    op: CoupledOperator,
    tree: ScenarioTree,
    coeffs: Coefficients,
    Y0,
    sources: ForwardSources | None = None,
) -> AdaptedProcess:
    """Propagate a deterministic initial pair through the whole tree."""
    _check_dt_sanity(tree.dt, coeffs)
    y0 = Y0.data if isinstance(Y0, CoupledField) else np.asarray(Y0, dtype=float)
    drift, noise = (None, None) if sources is None else sources.dof_lists(mesh, tree)
    stepper = _stepping.Stepper(mesh, op, tree)
    levels = _stepping.forward_sweep(stepper, coeffs, y0, drift, noise)
    return AdaptedProcess(tree=tree, values=levels, kind="coupled")
