"""
Element-local integrals and their global sparse assembly
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from oldroyd_fem.linsolve import SparseMatrix
from oldroyd_fem.mesh import SimplicialMesh
from oldroyd_fem.quadrature import triangle_rule
from oldroyd_fem.spaces import PressureSpace, VelocityField, VelocitySpace, check_pair

logger = logging.getLogger(__name__)

# Exact for P2 convection (degree 5) and the MINI mass matrix (degree 6).
VOLUME_RULE = triangle_rule(6)

DEFAULT_CHUNK = 512
DEFAULT_THREADS = 4


def element_map(
    fn: Callable[[np.ndarray], np.ndarray],
    n_elements: int,
    parallel: bool = False,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = DEFAULT_THREADS,
) -> np.ndarray:
    """
    Evaluate fn on element index chunks and concatenate in element order

    The reduction order is fixed by the chunk order, so serial and threaded
    runs give the same arrays.
    """
    elements = np.arange(n_elements)
    if not parallel or n_elements <= chunk_size:
        return fn(elements)
    chunks = [elements[s : s + chunk_size] for s in range(0, n_elements, chunk_size)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=0)


def scatter(
    row_dofs: np.ndarray, col_dofs: np.ndarray, local: np.ndarray, shape: Sequence[int]
) -> sp.csc_matrix:
    return SparseMatrix((shape[0], shape[1])).add_block(row_dofs, col_dofs, local).compile()


def scatter_vector(dofs: np.ndarray, local: np.ndarray, size: int) -> np.ndarray:
    return np.bincount(np.asarray(dofs).ravel(), weights=np.asarray(local).ravel(), minlength=size)


# ---------------------------------------------------------------------------
# Velocity forms
# ---------------------------------------------------------------------------


def velocity_mass(space: VelocitySpace) -> sp.csc_matrix:
    b = space.evaluate(VOLUME_RULE)
    local = np.einsum("kq,kaqi,kbqi->kab", b.weights, b.values, b.values)
    return scatter(b.dofs, b.dofs, local, (space.n_dofs, space.n_dofs))


def velocity_stiffness(space: VelocitySpace) -> sp.csc_matrix:
    b = space.evaluate(VOLUME_RULE)
    local = np.einsum("kq,kaqij,kbqij->kab", b.weights, b.gradients, b.gradients)
    return scatter(b.dofs, b.dofs, local, (space.n_dofs, space.n_dofs))


def divergence_matrix(vspace: VelocitySpace, pspace: PressureSpace) -> sp.csc_matrix:
    """B[q, i] = int q div v_i"""
    b = vspace.evaluate(VOLUME_RULE)
    q = pspace.values(VOLUME_RULE)  # (nq, np_loc)
    local = np.einsum("kq,qa,klq->kal", b.weights, q, b.divergence)
    return scatter(pspace.local_dofs, b.dofs, local, (pspace.n_dofs, vspace.n_dofs))


def pressure_mean(pspace: PressureSpace) -> np.ndarray:
    """int q_a for every pressure basis function"""
    mesh = pspace.mesh
    if pspace.local_dofs.shape[1] == 1:
        return np.array(mesh.areas)
    return scatter_vector(mesh.elements, np.repeat(mesh.areas[:, None] / 3.0, 3, axis=1), pspace.n_dofs)


def convection_matrix(wind: VelocityField, parallel: bool = False) -> sp.csc_matrix:
    """
    N[i, j] = 1/2 int ((w.grad) v_j).v_i - v_j.((w.grad) v_i)

    Skew-symmetric for every wind w, so u^T N u = 0 exactly.
    """
    space = wind.space
    b = space.evaluate(VOLUME_RULE)
    w_local = wind.local()

    def local_block(ks: np.ndarray) -> np.ndarray:
        wq = np.einsum("kl,klqi->kqi", w_local[ks], b.values[ks])
        transported = np.einsum("kqd,kjqid->kjqi", wq, b.gradients[ks])
        half = np.einsum("kq,kaqc,kbqc->kab", b.weights[ks], transported, b.values[ks])
        # half[k, a, b] = int ((w.grad) v_a) . v_b
        return 0.5 * (np.swapaxes(half, 1, 2) - half)

    local = element_map(local_block, space.mesh.n_elements, parallel)
    return scatter(b.dofs, b.dofs, local, (space.n_dofs, space.n_dofs))


def load_vector(space: VelocitySpace, body_force: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """int f . v_i for f given as points (..., 2) -> values (..., 2)"""
    b = space.evaluate(VOLUME_RULE)
    points = space.mesh.element_points(VOLUME_RULE.barycentric)
    f = np.asarray(body_force(points), dtype=float)
    local = np.einsum("kq,kqi,klqi->kl", b.weights, f, b.values)
    return scatter_vector(b.dofs, local, space.n_dofs)


def element_gradient_integrals(space: VelocitySpace) -> np.ndarray:
    """G[k, l] = int_K grad v_l, shape (ne, nloc, 2, 2)"""
    b = space.evaluate(VOLUME_RULE)
    return np.einsum("kq,klqij->klij", b.weights, b.gradients)


def vertex_gradient_integrals(space: VelocitySpace) -> np.ndarray:
    """D[k, a, l] = int_K lambda_a grad v_l, shape (ne, 3, nloc, 2, 2)"""
    b = space.evaluate(VOLUME_RULE)
    return np.einsum("kq,qa,klqij->kalij", b.weights, VOLUME_RULE.barycentric, b.gradients)


def vertex_velocity_moments(wind: VelocityField) -> np.ndarray:
    """W[k, a] = int_K lambda_a w, shape (ne, 3, 2)"""
    b = wind.space.evaluate(VOLUME_RULE)
    wq = np.einsum("kl,klqi->kqi", wind.local(), b.values)
    return np.einsum("kq,qa,kqi->kai", b.weights, VOLUME_RULE.barycentric, wq)


# ---------------------------------------------------------------------------
# Scalar P1 forms
# ---------------------------------------------------------------------------


def p1_local_stiffness(mesh: SimplicialMesh) -> np.ndarray:
    g = mesh.barycentric_gradients
    return mesh.areas[:, None, None] * np.einsum("kad,kbd->kab", g, g)


def p1_stiffness(mesh: SimplicialMesh) -> sp.csc_matrix:
    n = mesh.n_vertices
    return scatter(mesh.elements, mesh.elements, p1_local_stiffness(mesh), (n, n))


def p1_mass(mesh: SimplicialMesh) -> sp.csc_matrix:
    """Consistent P1 mass: |K| (1 + delta_ab) / 12"""
    n = mesh.n_vertices
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = mesh.areas[:, None, None] * ref[None]
    return scatter(mesh.elements, mesh.elements, local, (n, n))


def p1_load(
    mesh: SimplicialMesh, fn: Callable[[np.ndarray], np.ndarray], degree: Optional[int] = 4
) -> np.ndarray:
    """int f lambda_a for f: points (ne, nq, 2) -> values (ne, nq, ...), positive-weight rule"""
    rule = triangle_rule(4 if degree is None else degree)
    points = mesh.element_points(rule.barycentric)
    f = np.asarray(fn(points), dtype=float)
    weights = mesh.areas[:, None] * rule.weights[None, :]
    local = np.einsum("kq,qa,kq...->ka...", weights, rule.barycentric, f)
    trailing = f.shape[2:]
    out = np.zeros((mesh.n_vertices,) + trailing)
    np.add.at(out, mesh.elements, local)
    return out


def discrete_divfree_residual(velocity: VelocityField, pressure_tag) -> np.ndarray:
    """int q_i div u_h for every pressure basis function q_i"""
    pspace = PressureSpace(velocity.mesh, pressure_tag)
    check_pair(velocity.space.tag, pspace.tag)
    return divergence_matrix(velocity.space, pspace) @ velocity.coefficients
