"""
Tests for time grids, forcing averages, the damped Picard driver and the time loop
"""

import math

import numpy as np
import pytest

from oldroyd_fem.errors import (
    DomainError,
    InvalidInputError,
    SingularMatrixError,
    StepFailure,
    TimeGridError,
)
from oldroyd_fem.models import FluidParams, SolverOpts
from oldroyd_fem.scenarios import constant_force, equilibrium, random_spd
from oldroyd_fem.schemes import make_scheme
from oldroyd_fem.stepper import (
    TimeGrid,
    damped_picard,
    delta_continuation,
    run,
    time_average_forcing,
    timestep_restriction_warning,
)
from oldroyd_fem.tensor import TOLERANCES, Regularization


class TestTimeGrid:
    def test_uniform(self):
        grid = TimeGrid.uniform(1.0, 4)
        assert grid.n_steps == 4
        assert np.allclose(grid.steps, 0.25)
        assert grid.dt0 == pytest.approx(0.25)
        assert grid.t_final == 1.0

    def test_from_steps(self):
        grid = TimeGrid.from_steps([0.1, 0.2, 0.2, 0.1])
        assert grid.t_final == pytest.approx(0.6)
        assert grid.n_steps == 4

    def test_growth_beyond_ratio_rejected(self):
        with pytest.raises(TimeGridError, match="exceeds"):
            TimeGrid.from_steps([0.1, 0.3], ratio=2.0)

    def test_growth_within_custom_ratio(self):
        grid = TimeGrid.from_steps([0.1, 0.3], ratio=3.0)
        assert grid.n_steps == 2

    def test_must_start_at_zero(self):
        with pytest.raises(TimeGridError):
            TimeGrid(np.array([0.1, 0.2]))

    def test_must_increase(self):
        with pytest.raises(TimeGridError):
            TimeGrid(np.array([0.0, 0.2, 0.2]))

    def test_needs_a_step(self):
        with pytest.raises(TimeGridError):
            TimeGrid.uniform(1.0, 0)
        with pytest.raises(TimeGridError):
            TimeGrid.from_steps([])

    def test_is_a_value_error(self):
        with pytest.raises(ValueError):
            TimeGrid.from_steps([-0.1])


class TestForcing:
    def test_affine_average_is_exact(self):
        g = np.array([1.0, -2.0, 3.0])
        assert np.allclose(time_average_forcing(lambda t: t * g, 0.0, 1.0), 0.5 * g, atol=1e-15)

    def test_cubic_average_is_exact(self):
        avg = time_average_forcing(lambda t: np.array([t**3]), 1.0, 2.0)
        assert avg[0] == pytest.approx(3.75, abs=1e-14)

    def test_constant_body_force_load(self, square_mesh, fluid):
        scheme = make_scheme("dg0", square_mesh, fluid, Regularization(0.1))
        load = time_average_forcing(constant_force(2.0), 0.0, 0.1, scheme.vspace)
        assert load.shape == (scheme.nu,)
        # P2 basis functions sum to one, so the x-component loads sum to int f_x
        assert load[: scheme.vspace.n_scalar].sum() == pytest.approx(2.0)
        assert load[scheme.vspace.n_scalar :].sum() == pytest.approx(0.0, abs=1e-14)

    def test_empty_interval_rejected(self):
        with pytest.raises(InvalidInputError):
            time_average_forcing(lambda t: np.zeros(2), 1.0, 1.0)

    def test_restriction_warning(self):
        assert timestep_restriction_warning(1.0, 0.01, 0.25)
        assert not timestep_restriction_warning(1e-6, 0.01, 0.25)


class TestDampedPicard:
    @staticmethod
    def newton_cube_root():
        def residual(x):
            return x**3 - 8.0

        def update(x, r, accelerate):
            return -r / (3.0 * x**2)

        return residual, update

    def test_converges(self):
        residual, update = self.newton_cube_root()
        result = damped_picard(residual, update, np.array([3.0]), SolverOpts(tol=1e-12))
        assert result.x[0] == pytest.approx(2.0, abs=1e-12)
        assert result.residual_norm <= 1e-12
        assert len(result.history) == result.iterations + 1
        assert all(b < a for a, b in zip(result.history, result.history[1:]))

    def test_already_converged(self):
        residual, update = self.newton_cube_root()
        result = damped_picard(residual, update, np.array([2.0]), SolverOpts())
        assert result.iterations == 0

    def test_wrong_direction_exhausts_damping(self):
        def update(x, r, accelerate):
            return r

        with pytest.raises(StepFailure, match="damping") as info:
            damped_picard(lambda x: x - 1.0, update, np.array([2.0]), SolverOpts(), step=4)
        assert info.value.step == 4
        assert info.value.residual_history == [1.0]
        assert np.array_equal(info.value.last_iterate, [2.0])

    def test_iteration_cap(self):
        def update(x, r, accelerate):
            return -0.1 * r

        with pytest.raises(StepFailure, match="no convergence"):
            damped_picard(lambda x: x - 1.0, update, np.array([2.0]), SolverOpts(max_iter=3))

    def test_inadmissible_start(self):
        def residual(x):
            raise DomainError("not positive definite", -1.0)

        with pytest.raises(StepFailure, match="inadmissible"):
            damped_picard(residual, lambda x, r, a: -r, np.array([1.0]), SolverOpts())

    def test_singular_update(self):
        def update(x, r, accelerate):
            raise SingularMatrixError("singular", 0)

        with pytest.raises(StepFailure, match="singular"):
            damped_picard(lambda x: x - 1.0, update, np.array([2.0]), SolverOpts())

    def test_inadmissible_trial_is_damped(self):
        def residual(x):
            if np.any(x <= 0.0):
                raise DomainError("negative iterate", float(x.min()))
            return np.log(x)

        def update(x, r, accelerate):
            # four times the Newton step overshoots into x <= 0
            return -4.0 * r * x

        result = damped_picard(residual, update, np.array([3.0]), SolverOpts(tol=1e-12))
        assert result.x[0] == pytest.approx(1.0, abs=1e-11)

    def test_acceleration_switches_on_after_a_decrease(self):
        seen = []

        def update(x, r, accelerate):
            seen.append(accelerate)
            return -r

        damped_picard(lambda x: x - 1.0, update, np.array([2.0]), SolverOpts())
        assert seen[0] is False
        assert all(seen[1:])


class TestRun:
    def test_equilibrium_run(self, square_mesh, fluid):
        scheme = make_scheme("dg0", square_mesh, fluid, Regularization(0.1))
        initial = equilibrium()
        grid = TimeGrid.uniform(1.0, 3)
        state = scheme.initial_state(initial.velocity, initial.stress, grid.dt0)
        trajectory = run(scheme, state, grid)
        assert trajectory.complete
        assert len(trajectory.states) == 4
        assert len(trajectory.breakdowns) == 3
        assert [b.step for b in trajectory.breakdowns] == [1, 2, 3]
        assert all(abs(b.total) <= 1e-12 for b in trajectory.breakdowns)
        assert trajectory.final.time == pytest.approx(1.0)

    def test_energy_does_not_increase_without_forcing(self, square_mesh):
        fluid = FluidParams(weissenberg=0.5, diffusion=0.01)
        scheme = make_scheme("fem1", square_mesh, fluid, Regularization(0.1))
        initial = random_spd(0.5, 2.0, seed=5)
        grid = TimeGrid.uniform(0.5, 5)
        trajectory = run(scheme, scheme.initial_state(None, initial.stress, grid.dt0), grid)
        assert trajectory.complete
        energies = [scheme.energy(trajectory.states[0])] + [b.total for b in trajectory.breakdowns]
        assert all(b <= a + TOLERANCES.audit for a, b in zip(energies, energies[1:]))

    def test_failure_stops_the_run(self, square_mesh, fluid):
        scheme = make_scheme("fem1-unreg", square_mesh, fluid, Regularization(0.1))
        state = scheme.equilibrium_state()
        state.stress.entries[:] = [-1.0, 0.0, 1.0]
        trajectory = run(scheme, state, TimeGrid.uniform(1.0, 2))
        assert not trajectory.complete
        assert trajectory.failure.step == 1
        assert trajectory.breakdowns == []

    def test_indefinite_converged_state_is_a_step_failure(self, square_mesh, fluid):
        scheme = make_scheme("dg0-unreg", square_mesh, fluid, Regularization())
        state = scheme.equilibrium_state()
        state.stress.entries[:] = [-1.0, 0.0, 1.0]
        trajectory = run(scheme, state, TimeGrid.uniform(1.0, 2))
        assert not trajectory.complete
        assert isinstance(trajectory.failure, StepFailure)
        assert trajectory.failure.step == 1
        assert "energy audit" in str(trajectory.failure)
        assert trajectory.failure.residual_history
        # relaxation toward I leaves xx = (-1/dt + 1/Wi) / (1/dt + 1/Wi) < 0
        assert trajectory.failure.last_iterate.min_eigenvalue() == pytest.approx(-1.0 / 3.0)
        assert len(trajectory.states) == 1
        assert trajectory.breakdowns == []


class TestContinuation:
    def test_equilibrium_is_delta_independent(self, square_mesh, fluid):
        initial = equilibrium()
        grid = TimeGrid.uniform(0.2, 2)
        report = delta_continuation(
            lambda reg: make_scheme("dg0", square_mesh, fluid, reg),
            lambda s: s.initial_state(initial.velocity, initial.stress, grid.dt0),
            grid,
            [0.5, 0.25, 0.125],
            unregularized_factory=lambda: make_scheme("dg0-unreg", square_mesh, fluid, Regularization()),
        )
        assert report.deltas == [0.5, 0.25, 0.125]
        assert report.failures == {}
        assert len(report.state_differences) == 2
        assert max(report.state_differences) <= 1e-12
        assert report.unregularized_residual <= 1e-12
        assert all(n == 0.0 for n in report.negative_parts)
        assert all(e == pytest.approx(1.0) for e in report.min_eigenvalues)

    def test_progress_reaches_every_leg(self, square_mesh, fluid, monkeypatch):
        from oldroyd_fem import stepper

        seen = []
        inner = stepper.run

        def recording_run(*args, **kwargs):
            seen.append(kwargs.get("progress"))
            return inner(*args, **kwargs)

        monkeypatch.setattr(stepper, "run", recording_run)
        delta_continuation(
            lambda reg: make_scheme("dg0", square_mesh, fluid, reg),
            lambda s: s.equilibrium_state(),
            TimeGrid.uniform(0.2, 1),
            [0.5, 0.25],
            progress=True,
        )
        assert seen == [True, True]

    @pytest.mark.parametrize("schedule", [[], [0.1, 0.2], [0.6, 0.1]])
    def test_bad_schedules(self, square_mesh, fluid, schedule):
        with pytest.raises(InvalidInputError):
            delta_continuation(
                lambda reg: make_scheme("dg0", square_mesh, fluid, reg),
                lambda s: s.equilibrium_state(),
                TimeGrid.uniform(1.0, 1),
                schedule,
            )

    def test_unregularized_residual_of_indefinite_state_is_infinite(self, square_mesh, fluid):
        state_value = [-0.5, 0.0, 1.0]

        def initial(scheme):
            state = scheme.equilibrium_state()
            state.stress.entries[:] = state_value
            return state

        report = delta_continuation(
            lambda reg: make_scheme("dg0", square_mesh, fluid, reg),
            initial,
            TimeGrid.uniform(0.01, 1),
            [0.5],
            unregularized_factory=lambda: make_scheme("dg0-unreg", square_mesh, fluid, Regularization()),
        )
        assert report.deltas == [0.5]
        assert math.isinf(report.unregularized_residual) or report.unregularized_residual > 0.0
