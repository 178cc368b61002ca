"""Problem container: discretization, control/cost data, solver options.

Collects everything the game-level solvers need: the spatial mesh with
its coupled generator, the scenario tree, coefficients, subdomain masks
(leader region G0, follower regions G1/G2, the shared observation region
G_d and the weight-profile core G'), the cost parameters, the initial
state and the solver tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._stepping import Stepper
from .errors import ConfigError
from .forward import Coefficients
from .geometry import CoupledOperator, SpatialMesh
from .tree import ScenarioTree

__all__ = ["ControlTriple", "FollowerPair", "CostParams", "SolverOptions", "Problem"]


@dataclass
class ControlTriple:
    """Leader controls: u1 on G0 (drift), u2 on G and u3 on Gamma (noise).

    Each entry is None (zero control) or a list over levels 0..N-1 of
    per-node arrays on its block; u1 must vanish off G0.
    """

    u1: list | None = None
    u2: list | None = None
    u3: list | None = None


@dataclass
class FollowerPair:
    """Follower controls: v1 on G1 and v2 on G2 (bulk drift)."""

    v1: list | None = None
    v2: list | None = None


@dataclass
class CostParams:
    """Tracking weights alpha_i, control weights beta_i and targets on G_d."""

    alpha: tuple = (1.0, 1.0)
    beta: tuple = (1.0, 1.0)
    targets: tuple = (None, None)  # per-level bulk arrays, already G_d-supported

    def __post_init__(self):
        if min(self.alpha) <= 0 or min(self.beta) <= 0:
            raise ConfigError("cost weights alpha_i, beta_i must be positive")


@dataclass
class SolverOptions:
    tol_picard: float = 1e-10
    max_picard: int = 200
    tol_cg: float = 1e-10
    max_cg: int = 500
    grad_tol_scale: float = 1e-8
    max_grad_iters: int = 500
    eps: float = 1e-3
    penalty: str = "quadratic"  # 'quadratic' or 'norm'
    eps_target: float = 1e-3
    penalty_delta: float = 1e-8
    beta_floor: float | None = None  # None => 100 * max(alpha) * T * |G|
    assembled_budget: int = 50_000
    log_budget: float = 500.0

    def __post_init__(self):
        for name in ("tol_picard", "tol_cg", "grad_tol_scale", "eps", "eps_target"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"tolerance {name} must be positive")


@dataclass
class Problem:
    mesh: SpatialMesh
    op: CoupledOperator
    tree: ScenarioTree
    coeffs: Coefficients
    masks: dict
    cost: CostParams
    Y0: np.ndarray
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        self.Y0 = np.asarray(self.Y0, dtype=float)
        self._stepper = None
        self._mask_dof = {}
        for key in ("g0", "g1", "g2", "gd"):
            if key not in self.masks:
                raise ConfigError(f"problem is missing the {key!r} subdomain mask")
        for key, mask in self.masks.items():
            if key in ("g0", "g1", "g2", "gd") and mask.is_empty:
                raise ConfigError(f"subdomain {key!r} contains no mesh node")
        shared = self.masks["gd"].indicator * self.masks["g0"].indicator
        if not np.any(shared > 0):
            raise ConfigError(
                "shared-observation assumption violated: G_d (single observation "
                "region for both followers) must intersect the leader region G0"
            )

    def stepper(self) -> Stepper:
        if self._stepper is None:
            self._stepper = Stepper(self.mesh, self.op, self.tree)
        return self._stepper

    def mask_dof(self, key: str) -> np.ndarray:
        """Mask indicator expanded over the full DOF layout (cached)."""
        if key not in self._mask_dof:
            self._mask_dof[key] = self.masks[key].expand(self.mesh)
        return self._mask_dof[key]

    def beta_floor(self) -> float:
        opts = self.options
        if opts.beta_floor is not None:
            return opts.beta_floor
        volume = float(self.mesh.bulk_weights.sum())
        return 100.0 * max(self.cost.alpha) * self.tree.horizon * volume

    def target_dof(self, i: int, k: int):
        """Target of follower i at level k over the DOF layout, or None."""
        tgt = self.cost.targets[i]
        if tgt is None or tgt[k] is None:
            return None
        arr = np.asarray(tgt[k], dtype=float)
        nodes = arr.shape[0] if arr.ndim == 2 else 1
        out = np.zeros((nodes, self.mesh.n_dof))
        out[:, : self.mesh.n_bulk] = arr
        return out
