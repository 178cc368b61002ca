"""Binary scenario tree: a discrete Brownian filtration with exact moments.

Level k of the tree has 2^k equally likely nodes; each node branches into
an "up" child (Brownian increment +sqrt(dt)) and a "down" child
(-sqrt(dt)).  Child ordering is fixed: node j at level k has children
2j (up) and 2j+1 (down) at level k+1.  Increments are exactly centered
with variance dt, and conditional expectations are plain child averages,
which is what makes backward equations solvable without regression.

Adapted processes are stored as one array per level with the node index
along the first axis, so adaptedness is structural.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ResourceLimitError

__all__ = [
    "ScenarioTree",
    "AdaptedProcess",
    "build_tree",
    "expectation",
    "conditional_expectation",
    "check_adapted",
]


@dataclass(frozen=True)
class ScenarioTree:
    """Complete binary tree over [0, T] with N_t steps of size dt = T/N_t."""

    num_steps: int
    horizon: float

    @property
    def dt(self) -> float:
        return self.horizon / self.num_steps

    @property
    def sqrt_dt(self) -> float:
        return float(np.sqrt(self.dt))

    def n_nodes(self, level: int) -> int:
        if not 0 <= level <= self.num_steps:
            raise ValueError(f"level {level} outside 0..{self.num_steps}")
        return 1 << level

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.num_steps + 1)

    def increments(self, level: int) -> np.ndarray:
        """Increment dW_level seen by each node at level+1 (alternating sign)."""
        if not 0 <= level < self.num_steps:
            raise ValueError(f"increment level {level} outside 0..{self.num_steps - 1}")
        dw = np.empty(self.n_nodes(level + 1))
        dw[0::2] = self.sqrt_dt
        dw[1::2] = -self.sqrt_dt
        return dw

    def brownian(self, level: int) -> np.ndarray:
        """W(t_level) per node: cumulative sum of increments along each path."""
        w = np.zeros(1)
        for k in range(level):
            w = np.repeat(w, 2) + self.increments(k)
        return w


@dataclass
class AdaptedProcess:
    """One payload array per time level, node index along the first axis."""

    tree: ScenarioTree
    values: list
    kind: str = "coupled"

    def level(self, k: int) -> np.ndarray:
        return self.values[k]

    @property
    def num_levels(self) -> int:
        return len(self.values)


def build_tree(num_steps: int, horizon: float, budget: int = 2_000_000) -> ScenarioTree:
    """Build the tree, guarding against exponential blow-up."""
    if num_steps < 1:
        raise ConfigError(f"tree needs at least one step, got {num_steps}")
    if horizon <= 0:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    cost = num_steps * (1 << num_steps)
    if cost > budget:
        raise ResourceLimitError(
            f"tree cost N_t*2^N_t = {cost} exceeds budget {budget}"
        )
    return ScenarioTree(num_steps=num_steps, horizon=horizon)


def expectation(tree: ScenarioTree, X, level: int | None = None) -> np.ndarray:
    """Probability-weighted average over the nodes of one level.

    ``X`` may be an AdaptedProcess (then ``level`` selects the payload) or a
    raw per-node array.  Nodes at a level are equally likely, so this is a
    plain mean along the node axis.
    """
    if isinstance(X, AdaptedProcess):
        if level is None:
            raise ValueError("level required when passing an AdaptedProcess")
        vals = X.level(level)
    else:
        vals = np.asarray(X, dtype=float)
    return vals.mean(axis=0)


def conditional_expectation(tree: ScenarioTree, X, node: int | None = None, level: int | None = None):
    """Conditional expectation one step back: the average of the two children.

    With ``node`` given, returns the scalar/payload for that parent; without
    it, returns the full parent-level array.  ``X`` holds child-level values
    (level k+1) either raw or as an AdaptedProcess with ``level`` = k+1.
    """
    if isinstance(X, AdaptedProcess):
        if level is None:
            raise ValueError("level (of the child values) required for AdaptedProcess")
        vals = X.level(level)
    else:
        vals = np.asarray(X, dtype=float)
    if len(vals) < 2 or len(vals) % 2:
        raise ValueError("child level must contain an even number of nodes (leaf nodes have no children)")
    parents = 0.5 * (vals[0::2] + vals[1::2])
    if node is None:
        return parents
    return parents[node]


def check_adapted(X: AdaptedProcess) -> bool:
    """True iff every level is present and indexed per node (2^k entries)."""
    if X.values is None or len(X.values) == 0:
        return False
    for k, v in enumerate(X.values):
        if v is None:
            return False
        v = np.asarray(v)
        if v.ndim == 0 or v.shape[0] != (1 << k):
            return False
    return True
