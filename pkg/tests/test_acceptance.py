"""
Acceptance-scale runs: energy stability grids, equilibrium exactness and delta continuation
"""

import numpy as np
import pytest

from oldroyd_fem.certify import certify
from oldroyd_fem.mesh import build_structured_mesh
from oldroyd_fem.models import FluidParams, SolverOpts
from oldroyd_fem.scenarios import cavity_lid_force, equilibrium, lid_driven_cavity, random_spd
from oldroyd_fem.schemes import make_scheme
from oldroyd_fem.stepper import TimeGrid, delta_continuation, run
from oldroyd_fem.tensor import TOLERANCES, Regularization

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def mesh():
    return build_structured_mesh(8, 8)


def assert_stable(scheme, trajectory):
    assert trajectory.complete, trajectory.failure
    certificate = certify(trajectory, TOLERANCES.audit)
    assert certificate.passed, certificate.to_dict()
    energies = [scheme.energy(trajectory.states[0])] + [b.total for b in trajectory.breakdowns]
    assert all(b <= a + TOLERANCES.audit for a, b in zip(energies, energies[1:]))


@pytest.mark.parametrize("dt", [0.01, 0.1, 1.0, 10.0])
def test_dg0_energy_stability(mesh, dt):
    fluid = FluidParams(reynolds=1.0, weissenberg=1.0, viscosity_fraction=0.5)
    scheme = make_scheme("dg0", mesh, fluid, Regularization(0.1), opts=SolverOpts(tol=1e-10))
    initial = random_spd(0.5, 2.0, seed=11)
    grid = TimeGrid.uniform(20 * dt, 20)
    trajectory = run(scheme, scheme.initial_state(initial.velocity, initial.stress, grid.dt0), grid)
    assert_stable(scheme, trajectory)


@pytest.mark.parametrize("cutoff", [10.0, None])
@pytest.mark.parametrize("dt", [0.01, 0.1, 1.0, 10.0])
def test_fem1_energy_stability(mesh, dt, cutoff):
    fluid = FluidParams(reynolds=1.0, weissenberg=1.0, viscosity_fraction=0.5, diffusion=0.01)
    scheme = make_scheme("fem1", mesh, fluid, Regularization(0.1, cutoff), opts=SolverOpts(tol=1e-10))
    initial = random_spd(0.5, 2.0, seed=11)
    grid = TimeGrid.uniform(20 * dt, 20)
    trajectory = run(scheme, scheme.initial_state(initial.velocity, initial.stress, grid.dt0), grid)
    assert_stable(scheme, trajectory)
    for audit in trajectory.breakdowns:
        assert audit.diffusion_dissipation >= 0.0
        assert abs(audit.transport_identity) <= TOLERANCES.telescoping


@pytest.mark.parametrize("name", ["dg0", "fem1"])
@pytest.mark.parametrize("dt", [0.05, 5.0])
def test_equilibrium_is_exact(name, dt):
    mesh = build_structured_mesh(4, 4)
    fluid = FluidParams(diffusion=0.01 if name == "fem1" else 0.0)
    scheme = make_scheme(name, mesh, fluid, Regularization(0.1))
    initial = equilibrium()
    grid = TimeGrid.uniform(50 * dt, 50)
    trajectory = run(scheme, scheme.initial_state(initial.velocity, initial.stress, grid.dt0), grid)
    assert trajectory.complete
    final = trajectory.final
    assert np.max(np.abs(final.velocity.coefficients)) <= 1e-12
    assert np.max(np.abs(final.stress.entries - [1.0, 0.0, 1.0])) <= 1e-12


@pytest.mark.parametrize("name", ["dg0", "fem1"])
def test_delta_continuation(mesh, name):
    fluid = FluidParams(diffusion=0.01 if name == "fem1" else 0.0)
    initial = lid_driven_cavity()
    grid = TimeGrid.uniform(1.0, 10)
    schedule = [2.0**-k for k in range(1, 9)]
    report = delta_continuation(
        lambda reg: make_scheme(name, mesh, fluid, reg),
        lambda s: s.initial_state(initial.velocity, initial.stress, grid.dt0),
        grid,
        schedule,
        cavity_lid_force(10.0),
        unregularized_factory=lambda: make_scheme(f"{name}-unreg", mesh, fluid, Regularization()),
    )
    assert report.deltas == schedule
    negative = report.negative_parts
    assert all(b <= a + 1e-12 for a, b in zip(negative, negative[1:]))
    assert negative[-1] <= 1e-8
    floors = report.min_eigenvalues[-3:]
    assert min(floors) > 0.0
    assert max(floors) - min(floors) <= 0.1 * min(floors)
    assert report.unregularized_residual <= 1e-8
