"""
Conforming triangulations, reference maps, mesh audits and the mesh text format

Mesh text format (0-based indices, '#' starts a comment)::

    d nv ne nf
    x y                      (nv vertex lines)
    i j k                    (ne element lines)
    a b left right           (nf internal facet lines, left < right)

``nf`` may be 0, in which case facets are derived from the elements; when
given, the listed internal facets must match the derived ones.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from oldroyd_fem.errors import InvalidInputError, MeshFormatError, SingularMapError
from oldroyd_fem.models import MeshAudit
from oldroyd_fem.tensor import TOLERANCES

logger = logging.getLogger(__name__)

# Local edge i is opposite local vertex i.
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True)
class AffineMap:
    """x = P0 + B xhat, mapping the reference triangle onto an element"""

    origin: np.ndarray
    matrix: np.ndarray
    determinant: float

    def apply(self, xhat: np.ndarray) -> np.ndarray:
        return self.origin + np.asarray(xhat, dtype=float) @ self.matrix.T

    @property
    def inverse_transpose(self) -> np.ndarray:
        return np.linalg.inv(self.matrix).T

    def physical_gradient(self, reference_gradient: np.ndarray) -> np.ndarray:
        """grad eta(B xhat + P0) = B^{-T} grad_hat eta_hat(xhat)"""
        return self.inverse_transpose @ np.asarray(reference_gradient, dtype=float)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class SimplicialMesh:
    """An immutable conforming 2D triangulation with facet topology"""

    dim = 2

    def __init__(self, vertices: np.ndarray, elements: np.ndarray):
        vertices = np.array(vertices, dtype=float)
        elements = np.array(elements, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise InvalidInputError(f"vertices must have shape (nv, 2), got {vertices.shape}")
        if elements.ndim != 2 or elements.shape[1] != 3 or len(elements) == 0:
            raise InvalidInputError(f"elements must have shape (ne, 3), got {elements.shape}")
        if elements.min() < 0 or elements.max() >= len(vertices):
            raise InvalidInputError("element vertex index out of range")
        if not np.all(np.isfinite(vertices)):
            raise InvalidInputError("vertex coordinates must be finite")
        unused = np.setdiff1d(np.arange(len(vertices)), elements)
        if len(unused):
            raise InvalidInputError(f"vertices {unused.tolist()} belong to no element")

        signed = self._signed_areas(vertices, elements)
        scale = np.max(np.ptp(vertices, axis=0)) ** 2
        degenerate = np.abs(signed) <= 1e-14 * scale
        if np.any(degenerate):
            k = int(np.flatnonzero(degenerate)[0])
            raise SingularMapError(k, 2.0 * float(signed[k]))
        flipped = signed < 0
        if np.any(flipped):
            logger.debug("reorienting %d clockwise elements", int(flipped.sum()))
            elements[flipped] = elements[flipped][:, [0, 2, 1]]
            signed = np.abs(signed)

        self.vertices = _readonly(vertices)
        self.elements = _readonly(elements)
        self.areas = _readonly(signed)
        self._build_topology()
        self._build_geometry()

    # -- construction ---------------------------------------------------------

    @staticmethod
    def _signed_areas(vertices: np.ndarray, elements: np.ndarray) -> np.ndarray:
        p = vertices[elements]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def _build_topology(self) -> None:
        local = self.elements[:, LOCAL_EDGES]  # (ne, 3, 2)
        keys = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        element_edges = inverse.reshape(-1, 3)

        edge_elements = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_local = np.full((len(edges), 2), -1, dtype=np.int64)
        for k in range(len(self.elements)):
            for i in range(3):
                e = element_edges[k, i]
                if edge_elements[e, 0] < 0:
                    edge_elements[e, 0] = k
                    edge_local[e, 0] = i
                elif edge_elements[e, 1] < 0:
                    edge_elements[e, 1] = k
                    edge_local[e, 1] = i
                else:
                    raise InvalidInputError(f"edge {edges[e].tolist()} is shared by more than 2 elements")

        # Unit normals: internal facets point from the lower element index to
        # the higher one, boundary facets point outward.
        p = self.vertices[edges]
        tangent = p[:, 1] - p[:, 0]
        lengths = np.linalg.norm(tangent, axis=1)
        normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / lengths[:, None]
        centroids = self.vertices[self.elements].mean(axis=1)
        midpoints = p.mean(axis=1)
        outward = np.einsum("ij,ij->i", normals, midpoints - centroids[edge_elements[:, 0]])
        normals[outward < 0] *= -1.0

        internal = edge_elements[:, 1] >= 0
        boundary_vertices = np.zeros(len(self.vertices), dtype=bool)
        boundary_vertices[edges[~internal].ravel()] = True

        self.edges = _readonly(edges)
        self.element_edges = _readonly(element_edges)
        self.edge_elements = _readonly(edge_elements)
        self.edge_local = _readonly(edge_local)
        self.edge_lengths = _readonly(lengths)
        self.edge_normals = _readonly(normals)
        self.edge_midpoints = _readonly(midpoints)
        self.internal_facets = _readonly(np.flatnonzero(internal))
        self.boundary_facets = _readonly(np.flatnonzero(~internal))
        self.boundary_vertex_flags = _readonly(boundary_vertices)

        # Element-wise orientation of each local edge relative to the global
        # normal: +1 when the global normal is outward for that element.
        sign = np.ones((len(self.elements), 3))
        right = edge_elements[:, 1]
        for e in np.flatnonzero(internal):
            sign[right[e], edge_local[e, 1]] = -1.0
        self.edge_signs = _readonly(sign)

    def _build_geometry(self) -> None:
        p = self.vertices[self.elements]
        b = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns P_j - P_0
        binv = np.linalg.inv(b)
        # grad lambda_j = B^{-T} grad_hat lambda_hat_j
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        grads = np.einsum("kji,aj->kai", binv, ref)
        self.jacobians = _readonly(b)
        self.barycentric_gradients = _readonly(grads)
        edge_len = np.linalg.norm(p[:, LOCAL_EDGES[:, 1]] - p[:, LOCAL_EDGES[:, 0]], axis=2)
        self.diameters = _readonly(edge_len.max(axis=1))
        self.inradii = _readonly(2.0 * self.areas / edge_len.sum(axis=1))

    # -- queries --------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def measure(self) -> float:
        return float(self.areas.sum())

    def element_points(self, barycentric: np.ndarray) -> np.ndarray:
        """Physical coordinates (ne, nq, 2) of barycentric points (nq, 3)"""
        return np.einsum("qa,kad->kqd", barycentric, self.vertices[self.elements])

    def facet_points(self, facets: np.ndarray, params: np.ndarray) -> np.ndarray:
        """Physical points (nf, nq, 2) at parameters t in [0, 1] along the facets"""
        p = self.vertices[self.edges[facets]]
        return p[:, None, 0, :] + params[None, :, None] * (p[:, None, 1, :] - p[:, None, 0, :])

    def barycentric_of(self, k: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of points (n, nq, 2) in elements k (n,)"""
        p0 = self.vertices[self.elements[k, 0]]
        binv = np.linalg.inv(self.jacobians[k])
        xhat = np.einsum("kij,kqj->kqi", binv, points - p0[:, None, :])
        return np.concatenate([1.0 - xhat.sum(axis=2, keepdims=True), xhat], axis=2)

    def __repr__(self) -> str:
        return (
            f"SimplicialMesh(nv={self.n_vertices}, ne={self.n_elements}, "
            f"internal_facets={len(self.internal_facets)})"
        )


def reference_map(mesh: SimplicialMesh, k: int) -> AffineMap:
    if not 0 <= k < mesh.n_elements:
        raise InvalidInputError(f"element index {k} out of range")
    b = np.array(mesh.jacobians[k])
    det = float(np.linalg.det(b))
    scale = float(np.sum(b * b))
    if abs(det) <= 1e-14 * scale:
        raise SingularMapError(k, det)
    origin = np.array(mesh.vertices[mesh.elements[k, 0]])
    return AffineMap(origin=origin, matrix=b, determinant=det)


def build_structured_mesh(
    nx: int,
    ny: int,
    domain: Sequence[float] = (0.0, 1.0, 0.0, 1.0),
) -> SimplicialMesh:
    """
    Right-triangle subdivision of the rectangle (x0, x1, y0, y1)

    Each cell is split along one diagonal. The diagonal direction flips
    across the mid-lines of the rectangle so the mesh is symmetric and every
    corner cell is cut through its corner vertex.
    """
    if nx < 1 or ny < 1:
        raise InvalidInputError(f"nx and ny must be >= 1, got ({nx}, {ny})")
    x0, x1, y0, y1 = (float(v) for v in domain)
    if not (x1 > x0 and y1 > y0):
        raise InvalidInputError(f"degenerate domain {tuple(domain)}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            left = 2 * i + 1 < nx
            bottom = 2 * j + 1 < ny
            if left == bottom:
                elements.append((a, b, c))
                elements.append((a, c, d))
            else:
                elements.append((a, b, d))
                elements.append((b, c, d))
    return SimplicialMesh(vertices, np.array(elements))


def element_angles(mesh: SimplicialMesh) -> np.ndarray:
    """Interior angles (ne, 3) in radians, angle i at local vertex i"""
    p = mesh.vertices[mesh.elements]
    angles = np.empty((mesh.n_elements, 3))
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cos = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles[:, i] = np.arccos(np.clip(cos, -1.0, 1.0))
    return angles


def audit_mesh(mesh: SimplicialMesh) -> MeshAudit:
    """Shape regularity, quasi-uniformity and the non-obtuse test"""
    p = mesh.vertices[mesh.elements]
    angles = element_angles(mesh)
    violations: List[Tuple[int, float]] = []
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        # obtuse at vertex i iff u.v < 0, tested relative to |u||v|
        dots = np.einsum("ij,ij->i", u, v)
        scale = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        bad = dots < -TOLERANCES.right_angle * scale
        violations.extend((int(k), float(angles[k, i])) for k in np.flatnonzero(bad))
    violations.sort()

    boundary_only = np.all(mesh.boundary_vertex_flags[mesh.elements], axis=1)
    h = mesh.h
    return MeshAudit(
        max_shape_ratio=float(np.max(mesh.diameters / (2.0 * mesh.inradii))),
        quasi_uniformity=float(np.min(mesh.diameters) / h),
        non_obtuse=not violations,
        violations=violations,
        max_angle=float(angles.max()),
        min_angle=float(angles.min()),
        h=h,
        boundary_only_elements=[int(k) for k in np.flatnonzero(boundary_only)],
    )


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def _data_lines(path: Union[str, Path]) -> List[Tuple[int, List[str]]]:
    lines = []
    with open(path, encoding="utf-8") as f:
        for number, raw in enumerate(f, 1):
            text = raw.split("#", 1)[0].strip()
            if text:
                lines.append((number, text.split()))
    return lines


def read_mesh(path: Union[str, Path]) -> SimplicialMesh:
    lines = _data_lines(path)
    if not lines:
        raise MeshFormatError("empty mesh file")
    number, header = lines[0]
    if len(header) != 4:
        raise MeshFormatError("header must read 'd nv ne nf'", number)
    try:
        d, nv, ne, nf = (int(v) for v in header)
    except ValueError as e:
        raise MeshFormatError(f"non-integer header: {e}", number) from e
    if d != 2:
        raise MeshFormatError(f"only d = 2 meshes are supported, got d = {d}", number)
    if len(lines) != 1 + nv + ne + nf:
        raise MeshFormatError(
            f"expected {nv + ne + nf} data lines after the header, found {len(lines) - 1}"
        )

    def parse(chunk, width, kind, conv):
        rows = []
        for number, fields in chunk:
            if len(fields) != width:
                raise MeshFormatError(f"{kind} line needs {width} fields", number)
            try:
                rows.append([conv(v) for v in fields])
            except ValueError as e:
                raise MeshFormatError(f"bad {kind} value: {e}", number) from e
        return rows

    body = lines[1:]
    vertices = parse(body[:nv], 2, "vertex", float)
    elements = parse(body[nv : nv + ne], 3, "element", int)
    facets = parse(body[nv + ne :], 4, "facet", int)
    try:
        mesh = SimplicialMesh(np.array(vertices), np.array(elements))
    except InvalidInputError as e:
        raise MeshFormatError(str(e)) from e

    if facets:
        derived = {
            (tuple(mesh.edges[e]), tuple(mesh.edge_elements[e])) for e in mesh.internal_facets
        }
        listed = {(tuple(sorted(f[:2])), (f[2], f[3])) for f in facets}
        if listed != derived:
            raise MeshFormatError("listed internal facets do not match the element topology")
    logger.info("read mesh %s: %r", path, mesh)
    return mesh


def write_mesh(mesh: SimplicialMesh, path: Union[str, Path]) -> None:
    facets = mesh.internal_facets
    out = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements} {len(facets)}"]
    out.extend(f"{x!r} {y!r}" for x, y in mesh.vertices.tolist())
    out.extend(" ".join(str(v) for v in row) for row in mesh.elements.tolist())
    for e in facets:
        a, b = mesh.edges[e]
        left, right = mesh.edge_elements[e]
        out.append(f"{a} {b} {left} {right}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
