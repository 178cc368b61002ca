"""Bulk-surface spatial discretization and the coupled generator.

The state space is the product L2(G, dx) x L2(Gamma, dsigma): a bulk
function together with its value on the boundary, which carries its own
dynamics (a dynamic / Wentzell boundary condition).  Degrees of freedom
are nodal values on a uniform lattice; interior nodes are the "bulk"
unknowns, boundary nodes carry the boundary unknowns, and the boundary
node itself plays the role of the trace of the bulk function (shared-node
convention, so trace consistency is structural).

The generator

    A = [ Laplacian         0               ]
        [ -normal flux      Laplace-Beltrami]

is assembled as A = -M^{-1} K with M the diagonal quadrature mass (bulk
weights summing to |G|, boundary weights to |Gamma|) and K a symmetric
positive-semidefinite graph stiffness built from edge conductances.  This
makes A exactly self-adjoint and dissipative in the weighted inner
product, with constants in the kernel: the discrete counterparts of the
generation properties of the continuous operator.  The bulk/surface
integration-by-parts (surface divergence) identity holds to rounding
because the same edge set carries both the normal coupling and the
tangential boundary Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "SpatialMesh",
    "CoupledField",
    "CoupledOperator",
    "SubdomainMask",
    "build_mesh",
    "assemble_generator",
    "inner_product",
    "apply_mask",
    "mask_from_interval",
]


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform lattice on an interval or a square, with split bulk/boundary DOFs.

    Attributes
    ----------
    geometry_kind : 'interval' or 'rectangle'
    bulk_coords : (n_bulk, dim) coordinates of interior nodes
    boundary_coords : (n_boundary, dim) coordinates of boundary nodes
    h : lattice spacing
    bulk_weights : dx-quadrature weights per bulk node, summing to |G|
    boundary_weights : dsigma-quadrature weights per boundary node, summing to |Gamma|
    bulk_edges : (m, 2) index pairs into the global DOF vector, with
        conductances ``bulk_conductances`` (edges incident to at least one
        interior node; they realize the bulk Laplacian and the normal coupling)
    boundary_edges : (mb, 2) boundary-chain edges with conductances
        ``boundary_conductances`` (they realize the Laplace-Beltrami term;
        empty on the interval, where the boundary is two isolated points)
    boundary_adjacent_bulk : for each boundary node, the index (into the
        global DOF vector) of its unique interior neighbour, or -1 for
        rectangle corners (which are ordinary nodes of the boundary chain)

    Global DOF layout: [bulk..., boundary...]; ``n_dof = n_bulk + n_boundary``.
    """

    geometry_kind: str
    bulk_coords: np.ndarray
    boundary_coords: np.ndarray
    h: float
    bulk_weights: np.ndarray
    boundary_weights: np.ndarray
    bulk_edges: np.ndarray
    bulk_conductances: np.ndarray
    boundary_edges: np.ndarray
    boundary_conductances: np.ndarray
    boundary_adjacent_bulk: np.ndarray
    extent: float = 1.0

    @property
    def n_bulk(self) -> int:
        return len(self.bulk_weights)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_weights)

    @property
    def n_dof(self) -> int:
        return self.n_bulk + self.n_boundary

    @property
    def mass(self) -> np.ndarray:
        """Diagonal of the coupled quadrature mass (bulk then boundary)."""
        return np.concatenate([self.bulk_weights, self.boundary_weights])

    @property
    def all_coords(self) -> np.ndarray:
        """Coordinates of every DOF in global layout."""
        return np.concatenate([self.bulk_coords, self.boundary_coords])

    def field(self, bulk=0.0, boundary=0.0) -> "CoupledField":
        """Build a CoupledField from bulk/boundary values (scalars broadcast)."""
        data = np.empty(self.n_dof)
        data[: self.n_bulk] = bulk
        data[self.n_bulk :] = boundary
        return CoupledField(self, data)

    def split(self, data: np.ndarray):
        """Split a (..., n_dof) array into bulk and boundary parts (views)."""
        return data[..., : self.n_bulk], data[..., self.n_bulk :]


@dataclass
class CoupledField:
    """A bulk function paired with its dynamic-boundary value.

    The backing storage is one flat vector in global DOF layout.  Under the
    shared-node convention the boundary entry at a boundary node *is* the
    trace degree of freedom of the piecewise-linear bulk interpolant, so no
    separate trace-consistency constraint links the two blocks.
    """

    mesh: SpatialMesh
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.mesh.n_dof,):
            raise ValueError(
                f"field has shape {self.data.shape}, mesh expects ({self.mesh.n_dof},)"
            )

    @property
    def bulk(self) -> np.ndarray:
        return self.data[: self.mesh.n_bulk]

    @property
    def boundary(self) -> np.ndarray:
        return self.data[self.mesh.n_bulk :]


@dataclass(frozen=True)
class CoupledOperator:
    """The discrete coupled generator, kept in stiffness/mass form.

    ``stiffness`` is symmetric positive semidefinite with constants in its
    kernel; ``mass`` is the diagonal quadrature weight vector.  The
    generator acts as A Y = -M^{-1} K Y.
    """

    stiffness: np.ndarray
    mass: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """Dense matrix of the generator A (rows scaled by 1/mass)."""
        return -self.stiffness / self.mass[:, None]

    def apply(self, Y: np.ndarray) -> np.ndarray:
        """Apply A to fields stored along the last axis."""
        return -(Y @ self.stiffness) / self.mass


@dataclass(frozen=True)
class SubdomainMask:
    """0/1 indicator over bulk nodes (or boundary nodes for Gamma masks)."""

    name: str
    indicator: np.ndarray
    component: str = "bulk"  # 'bulk' or 'boundary'

    def expand(self, mesh: SpatialMesh) -> np.ndarray:
        """Indicator over the full DOF vector (zeros on the other block)."""
        full = np.zeros(mesh.n_dof)
        if self.component == "bulk":
            full[: mesh.n_bulk] = self.indicator
        else:
            full[mesh.n_bulk :] = self.indicator
        return full

    @property
    def is_empty(self) -> bool:
        return not np.any(self.indicator > 0)


def build_mesh(geometry_kind: str, n: int, extent: float = 1.0) -> SpatialMesh:
    """Build a uniform mesh with ``n`` nodes per direction on (0, extent)^d.

    Interval: nodes x_j = j*h with h = extent/(n-1); the two endpoints are
    the boundary.  Rectangle: the n x n lattice; the boundary is the closed
    chain of perimeter nodes (corners are ordinary chain nodes).

    Bulk dx-weights follow trapezoidal lumping with the boundary nodes'
    bulk mass reassigned to their interior neighbours (diagonal neighbour
    for corners), so they sum to |G| exactly while the dsigma-weights of
    the boundary nodes sum to |Gamma| exactly.
    """
    if n < 3:
        raise ConfigError(f"mesh needs n >= 3 nodes per direction, got n={n}")
    if extent <= 0:
        raise ConfigError(f"domain extent must be positive, got {extent}")
    if geometry_kind == "interval":
        return _build_interval(n, extent)
    if geometry_kind == "rectangle":
        return _build_rectangle(n, extent)
    raise ConfigError(f"unknown geometry kind {geometry_kind!r}")


def _build_interval(n: int, L: float) -> SpatialMesh:
    h = L / (n - 1)
    nodes = np.linspace(0.0, L, n)
    bulk_coords = nodes[1:-1][:, None]
    boundary_coords = nodes[[0, -1]][:, None]
    nb = n - 2

    bulk_w = np.full(nb, h)
    bulk_w[0] += 0.5 * h
    bulk_w[-1] += 0.5 * h
    boundary_w = np.array([1.0, 1.0])  # counting measure on two points

    # Global DOF order: interior nodes 0..nb-1, then left/right boundary.
    left, right = nb, nb + 1
    edges = [(j, j + 1) for j in range(nb - 1)]
    edges.append((left, 0))
    edges.append((right, nb - 1))
    bulk_edges = np.array(edges, dtype=int)
    bulk_cond = np.full(len(edges), 1.0 / h)

    return SpatialMesh(
        geometry_kind="interval",
        bulk_coords=bulk_coords,
        boundary_coords=boundary_coords,
        h=h,
        bulk_weights=bulk_w,
        boundary_weights=boundary_w,
        bulk_edges=bulk_edges,
        bulk_conductances=bulk_cond,
        boundary_edges=np.zeros((0, 2), dtype=int),
        boundary_conductances=np.zeros(0),
        boundary_adjacent_bulk=np.array([0, nb - 1]),
        extent=L,
    )


def _build_rectangle(n: int, L: float) -> SpatialMesh:
    h = L / (n - 1)
    xs = np.linspace(0.0, L, n)

    def is_boundary(i, j):
        return i == 0 or j == 0 or i == n - 1 or j == n - 1

    interior = [(i, j) for i in range(1, n - 1) for j in range(1, n - 1)]
    # Closed boundary chain, counter-clockwise from the origin corner.
    chain = (
        [(i, 0) for i in range(n - 1)]
        + [(n - 1, j) for j in range(n - 1)]
        + [(i, n - 1) for i in range(n - 1, 0, -1)]
        + [(0, j) for j in range(n - 1, 0, -1)]
    )
    bulk_index = {ij: k for k, ij in enumerate(interior)}
    nb = len(interior)
    bdry_index = {ij: nb + k for k, ij in enumerate(chain)}

    bulk_coords = np.array([(xs[i], xs[j]) for i, j in interior])
    boundary_coords = np.array([(xs[i], xs[j]) for i, j in chain])

    # Trapezoidal bulk masses; boundary-node bulk mass is pushed inward.
    def trap(i):
        return 0.5 * h if i in (0, n - 1) else h

    bulk_w = np.zeros(nb)
    for (i, j), k in bulk_index.items():
        bulk_w[k] = trap(i) * trap(j)
    for i, j in chain:
        m = trap(i) * trap(j)
        ii = min(max(i, 1), n - 2)
        jj = min(max(j, 1), n - 2)
        bulk_w[bulk_index[(ii, jj)]] += m

    # dsigma weights: half the length of the two adjacent chain edges.
    boundary_w = np.full(len(chain), h)
    for k, (i, j) in enumerate(chain):
        if (i in (0, n - 1)) and (j in (0, n - 1)):
            boundary_w[k] = h  # corner: h/2 + h/2

    def gid(i, j):
        return bdry_index[(i, j)] if is_boundary(i, j) else bulk_index[(i, j)]

    bulk_edges, bulk_cond = [], []
    for i in range(n):
        for j in range(n):
            for di, dj in ((1, 0), (0, 1)):
                i2, j2 = i + di, j + dj
                if i2 >= n or j2 >= n:
                    continue
                if is_boundary(i, j) and is_boundary(i2, j2):
                    continue  # chain edge, handled below
                bulk_edges.append((gid(i, j), gid(i2, j2)))
                bulk_cond.append(1.0)  # square cells: h/h

    chain_edges, chain_cond = [], []
    m = len(chain)
    for k in range(m):
        a = bdry_index[chain[k]]
        b = bdry_index[chain[(k + 1) % m]]
        chain_edges.append((a, b))
        chain_cond.append(1.0 / h)

    adj = np.full(len(chain), -1, dtype=int)
    for k, (i, j) in enumerate(chain):
        if (i in (0, n - 1)) and (j in (0, n - 1)):
            continue
        ii = min(max(i, 1), n - 2)
        jj = min(max(j, 1), n - 2)
        adj[k] = bulk_index[(ii, jj)]

    return SpatialMesh(
        geometry_kind="rectangle",
        bulk_coords=bulk_coords,
        boundary_coords=boundary_coords,
        h=h,
        bulk_weights=bulk_w,
        boundary_weights=boundary_w,
        bulk_edges=np.array(bulk_edges, dtype=int),
        bulk_conductances=np.array(bulk_cond),
        boundary_edges=np.array(chain_edges, dtype=int),
        boundary_conductances=np.array(chain_cond),
        boundary_adjacent_bulk=adj,
        extent=L,
    )


def assemble_generator(mesh: SpatialMesh) -> CoupledOperator:
    """Assemble the coupled generator in stiffness/mass form.

    Every edge contributes c (e_a - e_b)(e_a - e_b)^T to the stiffness, so
    K is symmetric PSD with constants in its kernel by construction.  The
    boundary row therefore reads (normal flux + tangential second
    difference) / dsigma-weight: the discrete dynamic boundary operator.
    """
    nd = mesh.n_dof
    K = np.zeros((nd, nd))
    for (a, b), c in zip(mesh.bulk_edges, mesh.bulk_conductances):
        K[a, a] += c
        K[b, b] += c
        K[a, b] -= c
        K[b, a] -= c
    for (a, b), c in zip(mesh.boundary_edges, mesh.boundary_conductances):
        K[a, a] += c
        K[b, b] += c
        K[a, b] -= c
        K[b, a] -= c
    return CoupledOperator(stiffness=K, mass=mesh.mass)


def _as_data(F) -> np.ndarray:
    return F.data if isinstance(F, CoupledField) else np.asarray(F, dtype=float)


def inner_product(mesh: SpatialMesh, A, B) -> float:
    """Weighted inner product: bulk dx-quadrature plus boundary dsigma-quadrature.

    Summed exactly (compensated), so adjointness identities of the
    generator hold to elementwise rounding even on fine meshes.
    """
    import math

    a, b = _as_data(A), _as_data(B)
    if a.shape != (mesh.n_dof,) or b.shape != (mesh.n_dof,):
        raise ValueError(
            f"inner_product expects shape ({mesh.n_dof},), got {a.shape} and {b.shape}"
        )
    return math.fsum(a * mesh.mass * b)


def apply_mask(mask: SubdomainMask, F):
    """Pointwise product of a field with the subdomain indicator (idempotent)."""
    if isinstance(F, CoupledField):
        full = mask.expand(F.mesh)
        return CoupledField(F.mesh, F.data * full)
    f = np.asarray(F, dtype=float)
    if f.shape[-1] != mask.indicator.shape[0]:
        raise ValueError(
            f"mask {mask.name!r} has {mask.indicator.shape[0]} entries, "
            f"field has trailing dimension {f.shape[-1]}"
        )
    return f * mask.indicator


def mask_from_interval(
    mesh: SpatialMesh, name: str, lo: float, hi: float, component: str = "bulk"
) -> SubdomainMask:
    """Indicator of the box [lo, hi]^d on bulk (or boundary) nodes."""
    coords = mesh.bulk_coords if component == "bulk" else mesh.boundary_coords
    tol = 1e-12 * max(1.0, mesh.extent)
    inside = np.all((coords >= lo - tol) & (coords <= hi + tol), axis=1)
    return SubdomainMask(name=name, indicator=inside.astype(float), component=component)
