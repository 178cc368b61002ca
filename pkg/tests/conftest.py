import numpy as np
import pytest

from stacknash.forward import Coefficients
from stacknash.geometry import assemble_generator, build_mesh, mask_from_interval
from stacknash.problem import CostParams, Problem, SolverOptions
from stacknash.tree import build_tree


def _default_regions(mesh):
    return {
        "g0": mask_from_interval(mesh, "g0", 0.3, 0.7),
        "g1": mask_from_interval(mesh, "g1", 0.1, 0.4),
        "g2": mask_from_interval(mesh, "g2", 0.6, 0.9),
        "gd": mask_from_interval(mesh, "gd", 0.35, 0.65),
        "gprime": mask_from_interval(mesh, "gprime", 0.45, 0.55),
    }


def full_regions(mesh):
    # single-interior-node meshes: every region is the whole domain
    return {key: mask_from_interval(mesh, key, 0.0, 1.0)
            for key in ("g0", "g1", "g2", "gd", "gprime")}


def build_problem(
    n=8,
    num_steps=4,
    horizon=1.0,
    coeffs=None,
    alpha=(1.0, 1.0),
    beta=(1e4, 1e4),
    with_targets=True,
    target_seed=0,
    y0="sin",
    options=None,
    regions=None,
):
    mesh = build_mesh("interval", n, 1.0)
    op = assemble_generator(mesh)
    tree = build_tree(num_steps, horizon)
    masks = regions(mesh) if regions is not None else _default_regions(mesh)
    targets = (None, None)
    if with_targets:
        rng = np.random.default_rng(target_seed)
        chid = masks["gd"].indicator
        prof1 = np.exp(-20.0 * (mesh.bulk_coords[:, 0] - 0.45) ** 2) * chid
        prof2 = np.exp(-20.0 * (mesh.bulk_coords[:, 0] - 0.55) ** 2) * chid
        support = [1.0 if (k + 1) * tree.dt <= 0.75 * horizon + 1e-12 else 0.0
                   for k in range(num_steps)]
        targets = (
            [prof1 * s for s in support],
            [0.8 * prof2 * s for s in support],
        )
    if y0 == "sin":
        x = mesh.bulk_coords[:, 0]
        Y0 = np.concatenate([np.sin(np.pi * x), np.zeros(mesh.n_boundary)])
    elif y0 == "zero":
        Y0 = np.zeros(mesh.n_dof)
    else:
        Y0 = np.asarray(y0, dtype=float)
    return Problem(
        mesh=mesh,
        op=op,
        tree=tree,
        coeffs=coeffs if coeffs is not None else Coefficients(1.0, 0.5, 1.0, 0.5),
        masks=masks,
        cost=CostParams(alpha=alpha, beta=beta, targets=targets),
        Y0=Y0,
        options=options if options is not None else SolverOptions(),
    )


def random_leaders(problem, seed=0, scale=1.0):
    from stacknash.problem import ControlTriple

    rng = np.random.default_rng(seed)
    mesh, N = problem.mesh, problem.tree.num_steps
    chi0 = problem.masks["g0"].indicator
    return ControlTriple(
        u1=[scale * rng.standard_normal((1 << k, mesh.n_bulk)) * chi0 for k in range(N)],
        u2=[scale * rng.standard_normal((1 << k, mesh.n_bulk)) for k in range(N)],
        u3=[scale * rng.standard_normal((1 << k, mesh.n_boundary)) for k in range(N)],
    )


@pytest.fixture
def make_problem():
    return build_problem


@pytest.fixture
def make_leaders():
    return random_leaders
