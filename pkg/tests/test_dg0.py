"""
Tests for the piecewise constant stress scheme
"""

import numpy as np
import pytest

from oldroyd_fem.assembly import discrete_divfree_residual
from oldroyd_fem.errors import DomainError, InvalidInputError, SpaceMismatchError
from oldroyd_fem.models import FluidParams, RegParams, SolverOpts
from oldroyd_fem.scenarios import cavity_lid_force, equilibrium, random_spd
from oldroyd_fem.schemes import make_scheme
from oldroyd_fem.schemes.dg0 import (
    DG0Scheme,
    dg0_energy,
    dg0_energy_audit,
    dg0_residual,
    dg0_step,
)
from oldroyd_fem.spaces import SpaceTag
from oldroyd_fem.stepper import step_load
from oldroyd_fem.tensor import TOLERANCES, Regularization


@pytest.fixture
def scheme(square_mesh, fluid):
    return DG0Scheme(square_mesh, fluid, RegParams(0.1))


def stretched_state(scheme, value=2.0):
    state = scheme.equilibrium_state()
    state.stress.entries[:] = [value, 0.0, value]
    return state


class TestResidual:
    def test_equilibrium_is_a_zero(self, scheme):
        state = scheme.equilibrium_state()
        r = scheme.residual(state, state, None, 0.1)
        assert r.shape == (scheme.size + 1,)
        assert np.max(np.abs(r)) <= 1e-12

    def test_boundary_rows_are_zero(self, scheme, rng):
        prev = scheme.equilibrium_state()
        cand = scheme.from_vector(rng.standard_normal(scheme.size), 0.1)
        r = scheme.residual(prev, cand, None, 0.1)
        assert not np.any(r[: scheme.nu][scheme.vspace.boundary_mask])

    def test_wrapper_matches_scheme(self, scheme, fluid):
        prev = stretched_state(scheme)
        cand = scheme.equilibrium_state()
        direct = scheme.residual(prev, cand, None, 0.5)
        wrapped = dg0_residual(prev, cand, fluid, RegParams(0.1), None, 0.5)
        assert np.allclose(direct, wrapped, atol=1e-14)

    def test_frozen_velocity_reduces_to_relaxation(self, scheme, rng):
        prev = stretched_state(scheme)
        cand = scheme.equilibrium_state()
        cand.stress.entries[:] = rng.uniform(0.5, 2.0, (scheme.mesh.n_elements, 3))
        dt, wi = 0.3, scheme.fluid.weissenberg
        r = scheme.residual(prev, cand, None, dt)
        stress_rows = r[scheme.slices[2]].reshape(-1, 3)
        sigma, sigma_prev = cand.stress.entries, prev.stress.entries
        for k, area in enumerate(scheme.mesh.areas):
            relax = (sigma[k] - sigma_prev[k]) / dt + (sigma[k] - [1.0, 0.0, 1.0]) / wi
            assert np.allclose(stress_rows[k], area * np.array([1.0, 2.0, 1.0]) * relax, atol=1e-13)

    def test_constant_stress_exerts_no_force(self, scheme):
        state = stretched_state(scheme, 3.0)
        r = scheme.residual(state, state, None, 0.1)
        assert np.max(np.abs(r[: scheme.nu])) <= 1e-13

    def test_non_positive_step_rejected(self, scheme):
        state = scheme.equilibrium_state()
        with pytest.raises(InvalidInputError):
            scheme.residual(state, state, None, 0.0)

    def test_forcing_length_checked(self, scheme):
        state = scheme.equilibrium_state()
        with pytest.raises(SpaceMismatchError):
            scheme.residual(state, state, np.zeros(3), 0.1)


class TestStep:
    def test_equilibrium_is_preserved(self, scheme):
        result = scheme.step(scheme.equilibrium_state(), None, 0.1)
        assert np.allclose(result.state.stress.entries, [1.0, 0.0, 1.0], atol=1e-12)
        assert np.max(np.abs(result.state.velocity.coefficients)) <= 1e-12
        assert result.state.time == pytest.approx(0.1)

    def test_relaxation_closed_form(self, scheme):
        # dt = Wi: sigma^1 = (sigma^0 + I) / 2
        result = scheme.step(stretched_state(scheme), None, 1.0)
        assert np.allclose(result.state.stress.entries, [1.5, 0.0, 1.5], atol=1e-10)
        assert np.max(np.abs(result.state.velocity.coefficients)) <= 1e-10
        assert result.residual_norm <= scheme.opts.tol

    def test_wrapper_step(self, square_mesh, fluid):
        prev = stretched_state(DG0Scheme(square_mesh, fluid, RegParams(0.1)))
        result = dg0_step(prev, fluid, RegParams(0.1), None, 1.0, SolverOpts())
        assert np.allclose(result.state.stress.entries, [1.5, 0.0, 1.5], atol=1e-10)

    def test_reduced_velocity_space(self, square_mesh, fluid):
        scheme = DG0Scheme(square_mesh, fluid, RegParams(0.1), SpaceTag.VEL_P2_REDUCED)
        result = scheme.step(stretched_state(scheme), None, 1.0)
        assert np.allclose(result.state.stress.entries, [1.5, 0.0, 1.5], atol=1e-10)

    def test_mini_velocity_is_not_a_pair(self, square_mesh, fluid):
        with pytest.raises(SpaceMismatchError):
            DG0Scheme(square_mesh, fluid, RegParams(0.1), SpaceTag.VEL_MINI)


class TestEnergy:
    def test_equilibrium_energy_is_zero(self, scheme):
        assert scheme.energy(scheme.equilibrium_state()) == 0.0

    def test_stretched_energy(self, scheme, fluid):
        state = stretched_state(scheme)
        assert scheme.energy(state) == pytest.approx(0.1534264097200273, abs=1e-12)
        assert dg0_energy(state, fluid, RegParams(0.1)) == pytest.approx(0.1534264097200273, abs=1e-12)

    def test_parts_add_up(self, scheme, rng):
        state = stretched_state(scheme)
        state.velocity.coefficients[scheme.vspace.free_dofs] = rng.standard_normal(
            len(scheme.vspace.free_dofs)
        )
        assert scheme.energy(state) == pytest.approx(
            scheme.kinetic_energy(state) + scheme.entropy_energy(state)
        )

    def test_unregularized_energy_needs_spd(self, square_mesh, fluid):
        scheme = make_scheme("dg0-unreg", square_mesh, fluid, RegParams(0.1))
        assert scheme.name == "dg0-unreg"
        state = stretched_state(scheme, -1.0)
        with pytest.raises(DomainError):
            scheme.energy(state)

    def test_negative_part(self, scheme):
        state = stretched_state(scheme, -1.0)
        assert scheme.negative_part(state) == pytest.approx(np.sqrt(2.0))


class TestAudit:
    def test_equilibrium_audit_is_all_zero(self, scheme):
        prev = scheme.equilibrium_state()
        result = scheme.step(prev, None, 0.1)
        audit = scheme.energy_audit(prev, result.state, None, 0.1)
        assert abs(audit.total) <= 1e-12
        assert abs(audit.slack) <= 1e-10
        assert audit.diffusion_dissipation == 0.0

    def test_unconverged_state_rejected(self, scheme, rng):
        prev = scheme.equilibrium_state()
        cand = scheme.from_vector(rng.standard_normal(scheme.size), 0.1)
        with pytest.raises(InvalidInputError):
            scheme.energy_audit(prev, cand, None, 0.1)

    def test_slack_is_recomputable(self, scheme):
        prev = stretched_state(scheme)
        result = scheme.step(prev, None, 0.5)
        audit = dg0_energy_audit(prev, result.state, scheme.fluid, scheme.reg, None, 0.5)
        assert audit.slack == audit.recompute_slack()
        assert audit.slack >= -TOLERANCES.audit

    @pytest.mark.parametrize(
        "dt, amplitude", [(0.01, 0.0), (0.1, 0.0), (1.0, 0.0), (10.0, 0.0), (0.1, 10.0)]
    )
    def test_random_run_satisfies_energy_law(self, square_mesh, dt, amplitude):
        fluid = FluidParams(reynolds=1.0, weissenberg=0.5, viscosity_fraction=0.5)
        scheme = DG0Scheme(square_mesh, fluid, Regularization(0.1), opts=SolverOpts(tol=1e-12))
        initial = random_spd(0.5, 2.0, seed=3)
        prev = scheme.initial_state(initial.velocity, initial.stress)
        force = cavity_lid_force(amplitude) if amplitude else None
        for n in range(3):
            load = step_load(scheme, force, n * dt, (n + 1) * dt)
            result = scheme.step(prev, load, dt, step_index=n + 1)
            audit = scheme.energy_audit(prev, result.state, load, dt, step=n + 1)
            assert audit.slack >= -TOLERANCES.audit
            assert abs(audit.transport_identity) <= TOLERANCES.telescoping
            assert abs(audit.convection_skew) <= 1e-12
            divergence = discrete_divfree_residual(result.state.velocity, SpaceTag.PRES_P0)
            assert np.max(np.abs(divergence)) <= TOLERANCES.divfree
            prev = result.state


class TestInitialState:
    def test_identity_stays_identity(self, scheme):
        initial = equilibrium()
        state = scheme.initial_state(initial.velocity, initial.stress)
        assert np.allclose(state.stress.entries, [1.0, 0.0, 1.0], atol=1e-14)
        assert not np.any(state.velocity.coefficients)

    def test_projected_velocity_is_divergence_free(self, scheme):
        def swirl(points):
            x, y = points[..., 0], points[..., 1]
            return np.stack([np.sin(np.pi * x) * y, x * x], axis=-1)

        state = scheme.initial_state(swirl, lambda p: np.broadcast_to(np.eye(2), p.shape[:-1] + (2, 2)))
        divergence = discrete_divfree_residual(state.velocity, SpaceTag.PRES_P0)
        assert np.max(np.abs(divergence)) <= TOLERANCES.divfree
        assert not np.any(state.velocity.boundary_values())

    def test_random_spd_averages_stay_in_range(self, scheme):
        initial = random_spd(0.5, 2.0, seed=1)
        state = scheme.initial_state(initial.velocity, initial.stress)
        eig = state.stress.eigenvalues()
        assert eig.min() >= 0.5 - 1e-12
        assert eig.max() <= 2.0 + 1e-12
