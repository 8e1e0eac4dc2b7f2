"""
Tests for the certificate, trace, JSON, HTML and VTK reporters
"""

import csv
import json
import math

import meshio
import numpy as np
import pytest

from oldroyd_fem.certify import certify
from oldroyd_fem.models import ContinuationReport, RunSummary
from oldroyd_fem.reporters.certificate import CertificateReporter
from oldroyd_fem.reporters.html import HTMLReporter
from oldroyd_fem.reporters.json_reporter import JSONReporter
from oldroyd_fem.reporters.trace import TRACE_COLUMNS, TraceReporter
from oldroyd_fem.reporters.vtk import VTKReporter, snapshot_mesh, vertex_velocity
from oldroyd_fem.properties import lumping_suite
from oldroyd_fem.schemes import make_scheme
from oldroyd_fem.stepper import TimeGrid, run
from oldroyd_fem.tensor import Regularization


@pytest.fixture
def trajectory(coarse_mesh, fluid):
    scheme = make_scheme("dg0", coarse_mesh, fluid, Regularization(0.1))
    state = scheme.equilibrium_state()
    state.stress.entries[:] = [2.0, 0.0, 2.0]
    return run(scheme, state, TimeGrid.uniform(1.0, 2))


@pytest.fixture
def summary(trajectory):
    continuation = ContinuationReport(
        scheme="dg0",
        deltas=[0.5],
        final_energies=[0.1],
        negative_parts=[0.0],
        min_eigenvalues=[1.0],
        state_differences=[],
        unregularized_residual=math.inf,
    )
    return RunSummary(
        config={"scheme": "dg0", "nx": 2},
        certificate=certify(trajectory, config_digest="feed"),
        breakdowns=trajectory.breakdowns,
        continuation=continuation,
    )


class TestTextReports:
    def test_certificate_file(self, trajectory, tmp_path):
        path = tmp_path / "nested" / "certificate.txt"
        CertificateReporter().generate(certify(trajectory), path)
        lines = path.read_text().splitlines()
        assert "verdict = pass" in lines
        assert all(" = " in line for line in lines)

    def test_property_result_renders(self):
        text = CertificateReporter().render(lumping_suite(samples=2, sizes=(2,)))
        assert text.startswith("suite = lumping\n")

    def test_trace_rows(self, trajectory, tmp_path):
        path = tmp_path / "trace.csv"
        TraceReporter().generate(trajectory, path)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == TRACE_COLUMNS
        assert [r[0] for r in rows[1:]] == ["1", "2"]
        assert float(rows[1][1]) == pytest.approx(0.5)
        assert float(rows[2][2]) == pytest.approx(trajectory.breakdowns[1].total, rel=1e-15)

    def test_trace_header_without_steps(self, trajectory, tmp_path):
        trajectory.breakdowns.clear()
        path = tmp_path / "trace.csv"
        TraceReporter().generate(trajectory, path)
        assert path.read_text().strip() == ",".join(TRACE_COLUMNS)


class TestSummaryReports:
    def test_json_replaces_infinities(self, summary, tmp_path):
        path = tmp_path / "summary.json"
        JSONReporter().generate(summary, path)
        data = json.loads(path.read_text())
        assert data["continuation"]["unregularized_residual"] == "inf"
        assert data["certificate"]["config_hash"] == "feed"
        assert len(data["steps"]) == 2
        assert data["mesh_audit"] is None

    def test_html_renders(self, summary, tmp_path):
        path = tmp_path / "report.html"
        HTMLReporter().generate(summary, path)
        html = path.read_text()
        assert html.lstrip().startswith("<!DOCTYPE html>")
        assert "dg0" in html
        assert "pass" in html


class TestSnapshots:
    def test_p0_stress_is_cell_data(self, trajectory):
        mesh = snapshot_mesh(trajectory.final)
        assert set(mesh.cell_data) == {"sigma_xx", "sigma_xy", "sigma_yy", "sigma_min_eig"}
        assert mesh.point_data["velocity"].shape == (9, 3)
        assert len(mesh.cell_data["sigma_xx"][0]) == 8

    def test_p1_stress_is_point_data(self, coarse_mesh, fluid):
        scheme = make_scheme("fem1", coarse_mesh, fluid, Regularization(0.1))
        mesh = snapshot_mesh(scheme.equilibrium_state())
        assert "sigma_xx" in mesh.point_data
        assert np.allclose(mesh.point_data["sigma_min_eig"], 1.0)
        assert not mesh.cell_data

    def test_vertex_velocity_matches_interpolant(self, coarse_mesh, fluid):
        scheme = make_scheme("dg0", coarse_mesh, fluid, Regularization(0.1))
        state = scheme.equilibrium_state()
        state.velocity = scheme.vspace.interpolate(lambda p: np.stack([p[..., 1], -p[..., 0]], -1))
        values = vertex_velocity(state)
        assert np.allclose(values[:, 0], coarse_mesh.vertices[:, 1])
        assert np.allclose(values[:, 1], -coarse_mesh.vertices[:, 0])
        assert not np.any(values[:, 2])

    def test_written_file_reads_back(self, trajectory, tmp_path):
        path = tmp_path / "snap.vtk"
        VTKReporter().generate(trajectory.final, path)
        back = meshio.read(path)
        assert back.points.shape == (9, 3)
        assert "velocity" in back.point_data
