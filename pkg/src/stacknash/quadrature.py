"""Space-time-probability quadratures over adapted level arrays.

Time integrals of adapted quantities use the left-endpoint rule on the
tree grid (dt times the sum over levels 0..N-1), matching the time slots
where controls, sources and dual pairing values live; this alignment is
what keeps the discrete duality identities exact.
"""

from __future__ import annotations

import numpy as np

from .geometry import SpatialMesh
from .tree import ScenarioTree

__all__ = [
    "expect_inner",
    "expect_sqnorm",
    "time_expect_inner",
    "time_expect_sqnorm",
    "sup_expect_sqnorm",
]


def expect_inner(mesh: SpatialMesh, a: np.ndarray, b: np.ndarray, weight=None) -> float:
    """E < a, b > at one level: mean over nodes of the weighted spatial dot.

    ``a``/``b``: (nodes, n_dof) or (n_dof,).  ``weight``: optional extra
    diagonal (a mask indicator expanded to DOFs, say).
    """
    w = mesh.mass if weight is None else mesh.mass * weight
    prod = np.asarray(a) * np.asarray(b) * w
    if prod.ndim == 1:
        return float(prod.sum())
    return float(prod.sum(axis=-1).mean(axis=0))


def expect_sqnorm(mesh: SpatialMesh, a: np.ndarray, weight=None) -> float:
    return expect_inner(mesh, a, a, weight=weight)


def time_expect_inner(mesh, tree: ScenarioTree, A_levels, B_levels, weight=None) -> float:
    """dt * sum over levels 0..N-1 of E < A_k, B_k > (left-endpoint rule)."""
    total = 0.0
    for k in range(tree.num_steps):
        a, b = A_levels[k], B_levels[k]
        if a is None or b is None:
            continue
        nodes = 1 << k
        a = np.broadcast_to(np.asarray(a, dtype=float), (nodes, mesh.n_dof))
        b = np.broadcast_to(np.asarray(b, dtype=float), (nodes, mesh.n_dof))
        total += expect_inner(mesh, a, b, weight=weight)
    return tree.dt * total


def time_expect_sqnorm(mesh, tree, A_levels, weight=None) -> float:
    return time_expect_inner(mesh, tree, A_levels, A_levels, weight=weight)


def sup_expect_sqnorm(mesh, tree, levels) -> float:
    """max over levels of E ||Y_k||^2 (the discrete sup-in-time energy)."""
    return max(expect_sqnorm(mesh, lv) for lv in levels)
