"""Stackelberg-Nash null control of stochastic parabolic equations with
dynamic boundary conditions, discretized on binary scenario trees.

Followers play a quadratic tracking game whose Nash equilibrium is
computed by conjugate gradients on an operator equation; leaders steer
the resulting optimality system to (approximately) zero terminal state by
minimizing a penalized dual functional over adjoint terminal data.  The
Carleman/observability machinery behind the continuum theory is audited
numerically at desk scale.
"""

from .backward import BackwardSolution, solve_backward, solve_backward_transpose
from .coupled import (
    AdjointBundle,
    OptimalityBundle,
    duality_residual,
    solve_adjoint,
    solve_optimality,
)
from .errors import (
    CoercivityError,
    ConfigError,
    ConstructionError,
    PicardDivergenceError,
    ResourceLimitError,
    StacknashError,
)
from .forward import Coefficients, ForwardSources, solve_forward, step_forward
from .geometry import (
    CoupledField,
    CoupledOperator,
    SpatialMesh,
    SubdomainMask,
    apply_mask,
    assemble_generator,
    build_mesh,
    inner_product,
    mask_from_interval,
)
from .hum import (
    HumResult,
    compute_leader_controls,
    eval_J_eps,
    grad_J_eps,
    minimize_J_eps,
)
from .nash import eval_J, eval_Ji, solve_nash, verify_nash_stationarity
from .problem import ControlTriple, CostParams, FollowerPair, Problem, SolverOptions
from .tree import (
    AdaptedProcess,
    ScenarioTree,
    build_tree,
    check_adapted,
    conditional_expectation,
    expectation,
)
from .weights import (
    WeightSet,
    build_eta,
    build_weights,
    carleman_functional,
    check_carleman,
    check_observability,
    eval_rho,
    eval_weights,
    validate_targets,
)

__version__ = "0.1.0"
