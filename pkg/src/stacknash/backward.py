"""Backward stochastic parabolic equations on the tree.

Two routes are provided.  ``solve_backward`` implements the backward
equation literally: the diffusion component comes from the martingale
representation (exact on a binary tree) and the drift solve moves the
generator and the reaction to the left-hand side.  ``solve_backward_transpose``
propagates the algebraic adjoint of the forward one-step map instead; its
pairing values make every discrete duality identity hold to rounding, so
all gradient computations in the package ride on it, while the literal
scheme remains an independent O(dt) cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _stepping
from .forward import Coefficients
from .geometry import CoupledOperator, SpatialMesh
from .tree import AdaptedProcess, ScenarioTree

__all__ = ["BackwardSolution", "solve_backward", "solve_backward_transpose"]


@dataclass
class BackwardSolution:
    """Solution pair (z, zhat) of a backward equation.

    ``z``: AdaptedProcess over levels 0..N (level N holds the terminal
    datum exactly).  ``zhat``: AdaptedProcess over levels 0..N-1 (the
    diffusion components, one per non-terminal node).  ``root`` is the
    dual value at time zero that pairs exactly against the initial state
    in the duality identity; for the literal scheme it equals z at the
    root, for the transpose route it carries the final reaction update.
    """

    z: AdaptedProcess
    zhat: AdaptedProcess
    root: np.ndarray

    def z_level(self, k: int) -> np.ndarray:
        return self.z.level(k)

    def zhat_level(self, k: int) -> np.ndarray:
        return self.zhat.level(k)


def solve_backward(
    mesh: SpatialMesh,
    op: CoupledOperator,
    tree: ScenarioTree,
    coeffs: Coefficients,
    terminal: np.ndarray,
    sources=None,
) -> BackwardSolution:
    """Solve the backward equation with coefficients (a3, a4, b3, b4).

    ``coeffs`` carries a3/b3 in the reaction slots and a4/b4 in the noise
    slots.  ``terminal``: (2^N, n_dof) leaf values.  ``sources``: optional
    list over levels 0..N-1 of (2^k, n_dof) drift sources F3.
    """
    terminal = np.asarray(terminal, dtype=float)
    if terminal.shape != (tree.n_nodes(tree.num_steps), mesh.n_dof):
        raise ValueError(
            f"terminal datum must have shape {(tree.n_nodes(tree.num_steps), mesh.n_dof)},"
            f" got {terminal.shape}"
        )
    stepper = _stepping.Stepper(mesh, op, tree)
    z_levels, zhat_levels = _stepping.backward_sweep(stepper, coeffs, terminal, sources)
    return BackwardSolution(
        z=AdaptedProcess(tree=tree, values=z_levels, kind="coupled"),
        zhat=AdaptedProcess(tree=tree, values=zhat_levels, kind="coupled"),
        root=z_levels[0][0].copy(),
    )


def solve_backward_transpose(
    mesh: SpatialMesh,
    op: CoupledOperator,
    tree: ScenarioTree,
    coeffs: Coefficients,
    terminal: np.ndarray,
    dual_sources=None,
) -> BackwardSolution:
    """Exact-transpose dual propagation of the forward scheme.

    ``coeffs`` are the *forward* coefficients (a1, a2, b1, b2) of the map
    being transposed.  ``dual_sources``: optional list over levels 0..N-1
    of arrays pairing against the primal state at that level.  The stored
    z-levels are the pairing traces (they pair with drift sources), zhat
    pairs with noise sources, and ``root`` pairs with the initial state.
    """
    terminal = np.asarray(terminal, dtype=float)
    if terminal.shape != (tree.n_nodes(tree.num_steps), mesh.n_dof):
        raise ValueError(
            f"terminal datum must have shape {(tree.n_nodes(tree.num_steps), mesh.n_dof)},"
            f" got {terminal.shape}"
        )
    stepper = _stepping.Stepper(mesh, op, tree)
    m_levels, zhat_levels, root = _stepping.transpose_sweep(
        stepper, coeffs, terminal, dual_sources
    )
    z_levels = list(m_levels) + [terminal]
    return BackwardSolution(
        z=AdaptedProcess(tree=tree, values=z_levels, kind="coupled"),
        zhat=AdaptedProcess(tree=tree, values=zhat_levels, kind="coupled"),
        root=np.asarray(root, dtype=float),
    )
