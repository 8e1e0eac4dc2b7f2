"""
Finite element spaces, discrete fields, vertex interpolation and lumping
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.linalg import eigh

from oldroyd_fem.errors import InvalidInputError, SpaceMismatchError
from oldroyd_fem.mesh import LOCAL_EDGES, SimplicialMesh
from oldroyd_fem.quadrature import FACET_RULE, TriangleRule, triangle_rule
from oldroyd_fem.tensor import SymMat, pack, sym_eigh, unpack

logger = logging.getLogger(__name__)


class SpaceTag(Enum):
    VEL_P2 = "P2"
    VEL_P2_REDUCED = "P2-reduced"
    VEL_MINI = "MINI"
    PRES_P0 = "P0"
    PRES_P1 = "P1"
    STRESS_P0 = "S0"
    STRESS_P1 = "S1"


VELOCITY_TAGS = (SpaceTag.VEL_P2, SpaceTag.VEL_P2_REDUCED, SpaceTag.VEL_MINI)
PRESSURE_TAGS = (SpaceTag.PRES_P0, SpaceTag.PRES_P1)

LBB_PAIRS = frozenset(
    {
        (SpaceTag.VEL_P2, SpaceTag.PRES_P0),
        (SpaceTag.VEL_P2_REDUCED, SpaceTag.PRES_P0),
        (SpaceTag.VEL_P2, SpaceTag.PRES_P1),
        (SpaceTag.VEL_MINI, SpaceTag.PRES_P1),
    }
)


def check_pair(velocity: SpaceTag, pressure: SpaceTag) -> None:
    if (velocity, pressure) not in LBB_PAIRS:
        allowed = ", ".join(sorted(f"{v.value}/{p.value}" for v, p in LBB_PAIRS))
        raise SpaceMismatchError(
            f"velocity/pressure pair {velocity.value}/{pressure.value} is not inf-sup stable "
            f"(allowed: {allowed})"
        )


def velocity_tag(name: Union[str, SpaceTag]) -> SpaceTag:
    if isinstance(name, SpaceTag):
        tag = name
    else:
        try:
            tag = SpaceTag(name)
        except ValueError as e:
            raise InvalidInputError(f"unknown velocity space {name!r}") from e
    if tag not in VELOCITY_TAGS:
        raise InvalidInputError(f"{tag.value} is not a velocity space")
    return tag


# ---------------------------------------------------------------------------
# Scalar shape functions in barycentric coordinates
# ---------------------------------------------------------------------------


def _p1_shapes(bary: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    nq = len(bary)
    return bary.copy(), np.broadcast_to(np.eye(3), (nq, 3, 3)).copy()


def _p2_shapes(bary: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    nq = len(bary)
    values = np.empty((nq, 6))
    dvals = np.zeros((nq, 6, 3))
    for i in range(3):
        values[:, i] = bary[:, i] * (2.0 * bary[:, i] - 1.0)
        dvals[:, i, i] = 4.0 * bary[:, i] - 1.0
    for i, (j, k) in enumerate(LOCAL_EDGES):
        values[:, 3 + i] = 4.0 * bary[:, j] * bary[:, k]
        dvals[:, 3 + i, j] = 4.0 * bary[:, k]
        dvals[:, 3 + i, k] = 4.0 * bary[:, j]
    return values, dvals


def _mini_shapes(bary: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values1, dvals1 = _p1_shapes(bary)
    l0, l1, l2 = bary.T
    bubble = 27.0 * l0 * l1 * l2
    dbubble = 27.0 * np.column_stack([l1 * l2, l0 * l2, l0 * l1])
    return (
        np.column_stack([values1, bubble]),
        np.concatenate([dvals1, dbubble[:, None, :]], axis=1),
    )


def _edge_bubble_shapes(bary: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """lambda_j lambda_k for each local edge (j, k)"""
    nq = len(bary)
    values = np.empty((nq, 3))
    dvals = np.zeros((nq, 3, 3))
    for i, (j, k) in enumerate(LOCAL_EDGES):
        values[:, i] = bary[:, j] * bary[:, k]
        dvals[:, i, j] = bary[:, k]
        dvals[:, i, k] = bary[:, j]
    return values, dvals


@dataclass(frozen=True, eq=False)
class BasisValues:
    """Vector basis functions of every element at a set of barycentric points"""

    dofs: np.ndarray  # (ne, nloc)
    values: np.ndarray  # (ne, nloc, nq, 2)
    gradients: np.ndarray  # (ne, nloc, nq, 2, 2), [..., i, j] = d v_i / d x_j
    weights: np.ndarray  # (ne, nq) physical quadrature weights

    @property
    def divergence(self) -> np.ndarray:
        return np.trace(self.gradients, axis1=-2, axis2=-1)


class VelocitySpace:
    """
    Continuous velocity spaces with homogeneous boundary values

    Degrees of freedom are numbered component-major for the Lagrange parts:
    dof = c * n_scalar + node. The reduced space appends one coefficient per
    edge multiplying n_E lambda_j lambda_k, where n_E is the global edge
    normal of the mesh.
    """

    def __init__(self, mesh: SimplicialMesh, tag: Union[str, SpaceTag] = SpaceTag.VEL_P2):
        self.mesh = mesh
        self.tag = velocity_tag(tag)
        nv, ne = mesh.n_vertices, mesh.n_elements
        boundary_edges = mesh.edge_elements[:, 1] < 0

        if self.tag is SpaceTag.VEL_P2:
            self._shapes = _p2_shapes
            nodes = np.hstack([mesh.elements, nv + mesh.element_edges])
            self.n_scalar = nv + mesh.n_edges
            scalar_boundary = np.concatenate([mesh.boundary_vertex_flags, boundary_edges])
        elif self.tag is SpaceTag.VEL_MINI:
            self._shapes = _mini_shapes
            nodes = np.hstack([mesh.elements, nv + np.arange(ne)[:, None]])
            self.n_scalar = nv + ne
            scalar_boundary = np.concatenate([mesh.boundary_vertex_flags, np.zeros(ne, dtype=bool)])
        else:
            self._shapes = _p1_shapes
            nodes = np.array(mesh.elements)
            self.n_scalar = nv
            scalar_boundary = np.array(mesh.boundary_vertex_flags)

        ns = nodes.shape[1]
        lagrange = np.hstack([c * self.n_scalar + nodes for c in range(2)])
        boundary = np.concatenate([scalar_boundary, scalar_boundary])
        if self.tag is SpaceTag.VEL_P2_REDUCED:
            lagrange = np.hstack([lagrange, 2 * nv + mesh.element_edges])
            boundary = np.concatenate([boundary, boundary_edges])
            self.n_dofs = 2 * nv + mesh.n_edges
        else:
            self.n_dofs = 2 * self.n_scalar

        self._n_lagrange_scalar = ns
        self.local_dofs = lagrange
        self.boundary_mask = boundary
        self.free_dofs = np.flatnonzero(~boundary)
        self._cache: Dict[bytes, BasisValues] = {}

    @property
    def n_local(self) -> int:
        return self.local_dofs.shape[1]

    def evaluate(self, rule: TriangleRule) -> BasisValues:
        key = rule.barycentric.tobytes()
        if key not in self._cache:
            self._cache[key] = self._evaluate(rule)
        return self._cache[key]

    def _evaluate(self, rule: TriangleRule) -> BasisValues:
        mesh = self.mesh
        ne, nq = mesh.n_elements, rule.size
        bary = rule.barycentric
        grad_lambda = mesh.barycentric_gradients  # (ne, 3, 2)

        phi, dphi = self._shapes(bary)
        gphi = np.einsum("qsa,kad->ksqd", dphi, grad_lambda)  # (ne, ns, nq, 2)
        ns = self._n_lagrange_scalar

        nloc = self.n_local
        values = np.zeros((ne, nloc, nq, 2))
        grads = np.zeros((ne, nloc, nq, 2, 2))
        for c in range(2):
            block = slice(c * ns, (c + 1) * ns)
            values[:, block, :, c] = phi.T[None, :, :]
            grads[:, block, :, c, :] = gphi

        if self.tag is SpaceTag.VEL_P2_REDUCED:
            bphi, dbphi = _edge_bubble_shapes(bary)
            gb = np.einsum("qsa,kad->ksqd", dbphi, grad_lambda)  # (ne, 3, nq, 2)
            normals = mesh.edge_normals[mesh.element_edges]  # (ne, 3, 2)
            values[:, 2 * ns :, :, :] = normals[:, :, None, :] * bphi.T[None, :, :, None]
            grads[:, 2 * ns :, :, :, :] = normals[:, :, None, :, None] * gb[:, :, :, None, :]

        weights = mesh.areas[:, None] * rule.weights[None, :]
        return BasisValues(dofs=self.local_dofs, values=values, gradients=grads, weights=weights)

    def interpolate(self, fn: Callable[[np.ndarray], np.ndarray]) -> "VelocityField":
        """
        Nodal interpolant of fn(points (..., 2)) -> (..., 2), ignoring boundary values

        Bubble coefficients are set so that the interpolant matches fn at the
        element centroids (MINI) or the normal component at edge midpoints
        (reduced P2).
        """
        mesh = self.mesh
        coeffs = np.zeros(self.n_dofs)
        vertex_values = np.asarray(fn(mesh.vertices), dtype=float)
        if self.tag is SpaceTag.VEL_P2:
            mid = np.asarray(fn(mesh.edge_midpoints), dtype=float)
            nodal = np.vstack([vertex_values, mid])
            coeffs[: self.n_scalar] = nodal[:, 0]
            coeffs[self.n_scalar :] = nodal[:, 1]
        elif self.tag is SpaceTag.VEL_MINI:
            centroids = mesh.vertices[mesh.elements].mean(axis=1)
            linear = vertex_values[mesh.elements].mean(axis=1)
            bubble = np.asarray(fn(centroids), dtype=float) - linear
            nodal = np.vstack([vertex_values, bubble])
            coeffs[: self.n_scalar] = nodal[:, 0]
            coeffs[self.n_scalar :] = nodal[:, 1]
        else:
            nv = mesh.n_vertices
            coeffs[:nv] = vertex_values[:, 0]
            coeffs[nv : 2 * nv] = vertex_values[:, 1]
            mid = np.asarray(fn(mesh.edge_midpoints), dtype=float)
            linear = vertex_values[mesh.edges].mean(axis=1)
            # the edge bubble equals 1/4 at the edge midpoint
            coeffs[2 * nv :] = 4.0 * np.einsum("ei,ei->e", mid - linear, mesh.edge_normals)
        return VelocityField(self, coeffs)

    def zeros(self) -> "VelocityField":
        return VelocityField(self, np.zeros(self.n_dofs))

    def __repr__(self) -> str:
        return f"VelocitySpace({self.tag.value}, n_dofs={self.n_dofs}, free={len(self.free_dofs)})"


class PressureSpace:
    """Discontinuous P0 or continuous P1 pressure"""

    def __init__(self, mesh: SimplicialMesh, tag: Union[str, SpaceTag] = SpaceTag.PRES_P0):
        self.mesh = mesh
        self.tag = SpaceTag(tag) if not isinstance(tag, SpaceTag) else tag
        if self.tag not in PRESSURE_TAGS:
            raise InvalidInputError(f"{self.tag.value} is not a pressure space")
        if self.tag is SpaceTag.PRES_P0:
            self.n_dofs = mesh.n_elements
            self.local_dofs = np.arange(mesh.n_elements)[:, None]
        else:
            self.n_dofs = mesh.n_vertices
            self.local_dofs = np.array(mesh.elements)

    def values(self, rule: TriangleRule) -> np.ndarray:
        """Basis values (nq, nloc), identical on every element"""
        if self.tag is SpaceTag.PRES_P0:
            return np.ones((rule.size, 1))
        return np.array(rule.barycentric)

    def zeros(self) -> "PressureField":
        return PressureField(self, np.zeros(self.n_dofs))

    def __repr__(self) -> str:
        return f"PressureSpace({self.tag.value}, n_dofs={self.n_dofs})"


# ---------------------------------------------------------------------------
# Discrete fields
# ---------------------------------------------------------------------------


def _finite_vector(values, size: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (size,):
        raise InvalidInputError(f"{what} needs {size} coefficients, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} coefficients must be finite")
    return arr


@dataclass(eq=False)
class VelocityField:
    space: VelocitySpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = _finite_vector(self.coefficients, self.space.n_dofs, "velocity")

    @property
    def mesh(self) -> SimplicialMesh:
        return self.space.mesh

    def local(self) -> np.ndarray:
        return self.coefficients[self.space.local_dofs]

    def values(self, rule: TriangleRule) -> np.ndarray:
        """Values (ne, nq, 2) at the rule's points"""
        basis = self.space.evaluate(rule)
        return np.einsum("kl,klqi->kqi", self.local(), basis.values)

    def gradients(self, rule: TriangleRule) -> np.ndarray:
        """Gradients (ne, nq, 2, 2) at the rule's points"""
        basis = self.space.evaluate(rule)
        return np.einsum("kl,klqij->kqij", self.local(), basis.gradients)

    def at(self, element: int, barycentric: np.ndarray) -> np.ndarray:
        """Values (nq, 2) on one element at barycentric points (nq, 3)"""
        bary = np.atleast_2d(np.asarray(barycentric, dtype=float))
        basis = _pointwise_basis(self.space, np.full(len(bary), element), bary)
        return np.einsum("l,qli->qi", self.local()[element], basis)

    def boundary_values(self) -> np.ndarray:
        return self.coefficients[self.space.boundary_mask]

    def copy(self) -> "VelocityField":
        return VelocityField(self.space, self.coefficients.copy())


@dataclass(eq=False)
class PressureField:
    space: PressureSpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = _finite_vector(self.coefficients, self.space.n_dofs, "pressure")

    def copy(self) -> "PressureField":
        return PressureField(self.space, self.coefficients.copy())


def _packed_field(entries, size: int, what: str) -> np.ndarray:
    arr = np.array(entries, dtype=float)
    if arr.shape == (size, 2, 2):
        arr = pack(0.5 * (arr + np.swapaxes(arr, -1, -2)))
    if arr.shape != (size, 3):
        raise InvalidInputError(f"{what} needs {size} symmetric matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} entries must be finite")
    return arr


@dataclass(eq=False)
class StressFieldP0:
    """One symmetric matrix per element, stored packed (xx, xy, yy)"""

    mesh: SimplicialMesh
    entries: np.ndarray

    tag = SpaceTag.STRESS_P0

    def __post_init__(self):
        self.entries = _packed_field(self.entries, self.mesh.n_elements, "P0 stress")

    @classmethod
    def constant(cls, mesh: SimplicialMesh, value: Union[SymMat, np.ndarray]) -> "StressFieldP0":
        arr = value.to_array() if isinstance(value, SymMat) else np.asarray(value, dtype=float)
        return cls(mesh, np.broadcast_to(arr, (mesh.n_elements, 2, 2)))

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_elements

    @property
    def matrices(self) -> np.ndarray:
        return unpack(self.entries, 2)

    def __getitem__(self, k: int) -> SymMat:
        return SymMat(2, tuple(float(v) for v in self.entries[k]))

    def eigenvalues(self) -> np.ndarray:
        return sym_eigh(self.matrices)[0]

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues().min())

    def copy(self) -> "StressFieldP0":
        return StressFieldP0(self.mesh, self.entries.copy())


@dataclass(eq=False)
class StressFieldP1:
    """One symmetric matrix per vertex, continuous piecewise linear"""

    mesh: SimplicialMesh
    entries: np.ndarray

    tag = SpaceTag.STRESS_P1

    def __post_init__(self):
        self.entries = _packed_field(self.entries, self.mesh.n_vertices, "P1 stress")

    @classmethod
    def constant(cls, mesh: SimplicialMesh, value: Union[SymMat, np.ndarray]) -> "StressFieldP1":
        arr = value.to_array() if isinstance(value, SymMat) else np.asarray(value, dtype=float)
        return cls(mesh, np.broadcast_to(arr, (mesh.n_vertices, 2, 2)))

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_vertices

    @property
    def matrices(self) -> np.ndarray:
        return unpack(self.entries, 2)

    def __getitem__(self, a: int) -> SymMat:
        return SymMat(2, tuple(float(v) for v in self.entries[a]))

    def eigenvalues(self) -> np.ndarray:
        return sym_eigh(self.matrices)[0]

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues().min())

    def spd_at_vertices(self) -> bool:
        return bool(np.all(self.eigenvalues() > 0.0))

    def values(self, rule: TriangleRule) -> np.ndarray:
        """Matrices (ne, nq, 2, 2) at the rule's points"""
        local = self.matrices[self.mesh.elements]  # (ne, 3, 2, 2)
        return np.einsum("qa,kaij->kqij", rule.barycentric, local)

    def gradients(self) -> np.ndarray:
        """Elementwise constant gradients (ne, 2, 2, 2): [k, p] = d sigma / d x_p"""
        local = self.matrices[self.mesh.elements]
        return np.einsum("kap,kaij->kpij", self.mesh.barycentric_gradients, local)

    def copy(self) -> "StressFieldP1":
        return StressFieldP1(self.mesh, self.entries.copy())


StressField = Union[StressFieldP0, StressFieldP1]


@dataclass(eq=False)
class ScalarFieldP1:
    mesh: SimplicialMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = _finite_vector(self.values, self.mesh.n_vertices, "P1 scalar")

    def gradients(self) -> np.ndarray:
        """Elementwise constant gradients (ne, 2)"""
        return np.einsum("kad,ka->kd", self.mesh.barycentric_gradients, self.values[self.mesh.elements])

    def at(self, rule: TriangleRule) -> np.ndarray:
        return self.values[self.mesh.elements] @ rule.barycentric.T


# ---------------------------------------------------------------------------
# Vertex interpolation and lumping
# ---------------------------------------------------------------------------


def interpolate_vertexwise(
    mesh: SimplicialMesh, values: np.ndarray
) -> Union[StressFieldP1, ScalarFieldP1]:
    """pi_h: the P1 field with exactly the given vertex values"""
    arr = np.asarray(values, dtype=float)
    if len(arr) != mesh.n_vertices:
        raise InvalidInputError(f"expected {mesh.n_vertices} vertex values, got {len(arr)}")
    if arr.ndim == 1:
        return ScalarFieldP1(mesh, arr)
    return StressFieldP1(mesh, arr)


def vertex_weights(mesh: SimplicialMesh) -> np.ndarray:
    """m_a = sum over elements containing a of |K| / 3"""
    return np.bincount(
        mesh.elements.ravel(),
        weights=np.repeat(mesh.areas / 3.0, 3),
        minlength=mesh.n_vertices,
    )


def lumped_integral(
    chi: Union[StressFieldP1, ScalarFieldP1], phi: Union[StressFieldP1, ScalarFieldP1]
) -> float:
    """int_D pi_h[chi : phi] by the vertex rule"""
    if chi.mesh is not phi.mesh:
        raise SpaceMismatchError("lumped integral of fields on different meshes")
    if type(chi) is not type(phi):
        raise SpaceMismatchError("lumped integral needs two scalar or two tensor fields")
    weights = vertex_weights(chi.mesh)
    if isinstance(chi, ScalarFieldP1):
        pointwise = chi.values * phi.values
    else:
        pointwise = np.einsum("aij,aij->a", chi.matrices, phi.matrices)
    return float(np.dot(weights, pointwise))


# ---------------------------------------------------------------------------
# Facet upwinding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UpwindTrace:
    downstream: SymMat
    upstream: SymMat
    jump: SymMat
    speed: float


@dataclass(frozen=True, eq=False)
class FacetFlux:
    """Normal velocity w.n at the Gauss nodes of every internal facet"""

    facets: np.ndarray  # (nf,) edge indices
    left: np.ndarray  # (nf,)
    right: np.ndarray  # (nf,)
    normal_velocity: np.ndarray  # (nf, nq), normal from left to right
    weights: np.ndarray  # (nf, nq) physical facet quadrature weights

    @property
    def speed(self) -> np.ndarray:
        return np.abs(self.normal_velocity)

    @property
    def right_is_downstream(self) -> np.ndarray:
        """Where w.n = 0 the facet carries no weight; the right side is used"""
        return self.normal_velocity >= 0.0


def facet_flux(velocity: VelocityField, params: Optional[np.ndarray] = None) -> FacetFlux:
    mesh = velocity.mesh
    if params is None:
        params, weights = FACET_RULE.points, FACET_RULE.weights
    else:
        params = np.asarray(params, dtype=float)
        weights = np.full(len(params), 1.0 / len(params))
    facets = mesh.internal_facets
    left = mesh.edge_elements[facets, 0]
    right = mesh.edge_elements[facets, 1]
    points = mesh.facet_points(facets, params)  # (nf, nq, 2)
    bary = mesh.barycentric_of(left, points)  # (nf, nq, 3)

    nf, nq = points.shape[:2]
    if nf == 0:
        empty = np.zeros((0, nq))
        return FacetFlux(facets, left, right, empty, empty)
    # left trace, each facet at its own barycentric points
    values = np.empty((nf, nq, 2))
    local = velocity.local()
    for q in range(nq):
        basis = _pointwise_basis(velocity.space, left, bary[:, q, :])
        values[:, q, :] = np.einsum("fl,fli->fi", local[left], basis)
    normals = mesh.edge_normals[facets]
    wn = np.einsum("fqi,fi->fq", values, normals)
    phys_weights = mesh.edge_lengths[facets][:, None] * weights[None, :]
    return FacetFlux(facets, left, right, wn, phys_weights)


def _pointwise_basis(space: VelocitySpace, elements: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Basis values (n, nloc, 2) of elements[i] at its own barycentric point bary[i]"""
    # shape functions act row by row, so each row is its own point
    n = len(elements)
    ns = space._n_lagrange_scalar
    out = np.zeros((n, space.n_local, 2))
    phi = space._shapes(bary)[0]
    for c in range(2):
        out[:, c * ns : (c + 1) * ns, c] = phi
    if space.tag is SpaceTag.VEL_P2_REDUCED:
        bphi = _edge_bubble_shapes(bary)[0]
        normals = space.mesh.edge_normals[space.mesh.element_edges[elements]]
        out[:, 2 * ns :, :] = normals * bphi[:, :, None]
    return out


def facet_upwind_trace(
    velocity: VelocityField, stress: StressFieldP0, facet: int, quad_point: int
) -> UpwindTrace:
    """Downstream/upstream traces of a P0 field at one Gauss node of an internal facet"""
    mesh = velocity.mesh
    if stress.mesh is not mesh:
        raise SpaceMismatchError("velocity and stress live on different meshes")
    if not 0 <= facet < mesh.n_edges or mesh.edge_elements[facet, 1] < 0:
        raise InvalidInputError(f"facet {facet} is not an internal facet")
    if not 0 <= quad_point < len(FACET_RULE.points):
        raise InvalidInputError(f"facet quadrature node {quad_point} out of range")
    left, right = (int(v) for v in mesh.edge_elements[facet])
    point = mesh.facet_points(np.array([facet]), FACET_RULE.points[quad_point : quad_point + 1])
    bary = mesh.barycentric_of(np.array([left]), point)[0, 0]
    w = velocity.at(left, bary)[0]
    wn = float(np.dot(w, mesh.edge_normals[facet]))
    down, up = (right, left) if wn >= 0.0 else (left, right)
    jump = stress[down] - stress[up]
    return UpwindTrace(downstream=stress[down], upstream=stress[up], jump=jump, speed=abs(wn))


# ---------------------------------------------------------------------------
# Inverse inequality measurements
# ---------------------------------------------------------------------------


def measure_inverse_constants(
    mesh: SimplicialMesh,
    space: Optional[VelocitySpace] = None,
    samples: int = 64,
    seed: int = 0,
) -> Dict[str, float]:
    """
    Measured constants of the local inverse inequalities

    ``p1_linf_l1``: max ||q||_{L^inf(K)} |K| / int_K |q| over sampled P1 q.
    ``velocity_grad``: max h_K sqrt(lambda_max) of the local generalized
    eigenproblem stiffness v = lambda mass v.
    ``lumping``: max eigenvalue of the lumped against the consistent P1 mass.
    """
    space = space or VelocitySpace(mesh, SpaceTag.VEL_P2)
    rng = np.random.default_rng(seed)
    rule = triangle_rule(6)

    q = rng.standard_normal((samples, 3))
    at_points = q @ rule.barycentric.T  # (samples, nq)
    mean_abs = np.abs(at_points) @ rule.weights
    # reference-invariant: the ratio does not depend on the element
    p1_const = float(np.max(np.max(np.abs(q), axis=1) / mean_abs))

    basis = space.evaluate(triangle_rule(4))
    mass = np.einsum("kq,kaqi,kbqi->kab", basis.weights, basis.values, basis.values)
    stiff = np.einsum("kq,kaqij,kbqij->kab", basis.weights, basis.gradients, basis.gradients)
    grad_const = 0.0
    for k in range(mesh.n_elements):
        top = eigh(stiff[k], mass[k], eigvals_only=True)[-1]
        grad_const = max(grad_const, float(mesh.diameters[k] * np.sqrt(max(top, 0.0))))

    consistent = (np.ones((3, 3)) + np.eye(3)) / 12.0
    lumped = np.eye(3) / 3.0
    lumping = float(eigh(lumped, consistent, eigvals_only=True)[-1])

    result = {"p1_linf_l1": p1_const, "velocity_grad": grad_const, "lumping": lumping}
    logger.info("inverse constants on %r: %s", mesh, result)
    return result
