"""
Legacy-ASCII VTK snapshots of a discrete state
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

import meshio
import numpy as np

from oldroyd_fem.quadrature import VERTEX_RULE
from oldroyd_fem.reporters import BaseReporter
from oldroyd_fem.schemes import DiscreteState
from oldroyd_fem.spaces import StressFieldP0

logger = logging.getLogger(__name__)

COMPONENTS = ("xx", "xy", "yy")


def vertex_velocity(state: DiscreteState) -> np.ndarray:
    """Velocity (nv, 3) at the mesh vertices, zero third component"""
    mesh = state.mesh
    values = state.velocity.values(VERTEX_RULE)  # (ne, 3, 2), continuous across elements
    out = np.zeros((mesh.n_vertices, 3))
    out[mesh.elements, :2] = values
    return out


def snapshot_mesh(state: DiscreteState) -> meshio.Mesh:
    mesh = state.mesh
    points = np.column_stack([mesh.vertices, np.zeros(mesh.n_vertices)])
    point_data: Dict[str, np.ndarray] = {"velocity": vertex_velocity(state)}
    cell_data: Dict[str, List[np.ndarray]] = {}
    entries = state.stress.entries
    eig_min = state.stress.eigenvalues().min(axis=1)
    if isinstance(state.stress, StressFieldP0):
        for c, name in enumerate(COMPONENTS):
            cell_data[f"sigma_{name}"] = [np.ascontiguousarray(entries[:, c])]
        cell_data["sigma_min_eig"] = [eig_min]
    else:
        for c, name in enumerate(COMPONENTS):
            point_data[f"sigma_{name}"] = np.ascontiguousarray(entries[:, c])
        point_data["sigma_min_eig"] = eig_min
    return meshio.Mesh(
        points,
        [("triangle", np.asarray(mesh.elements))],
        point_data=point_data,
        cell_data=cell_data,
    )


class VTKReporter(BaseReporter):
    """Velocity vectors at vertices; stress components as point data (P1) or cell data (P0)"""

    def generate(self, result: DiscreteState, output_path: Union[str, Path]) -> None:
        self.ensure_directory(output_path)
        meshio.write(str(output_path), snapshot_mesh(result), file_format="vtk", binary=False)
        logger.info("wrote snapshot %s (t=%g)", output_path, result.time)
