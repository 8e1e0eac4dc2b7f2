"""
Time loop, forcing averages, the damped Picard driver and delta continuation
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from oldroyd_fem.errors import DomainError, InvalidInputError, SingularMatrixError, StepFailure, TimeGridError
from oldroyd_fem.models import ContinuationReport, EnergyBreakdown, SolverOpts
from oldroyd_fem.quadrature import TIME_RULE

if TYPE_CHECKING:
    from oldroyd_fem.schemes import BaseScheme, DiscreteState
    from oldroyd_fem.spaces import VelocitySpace
    from oldroyd_fem.tensor import Regularization

logger = logging.getLogger(__name__)

# f(t, points (..., 2)) -> body force (..., 2)
Forcing = Callable[[float, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Time partitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """0 = t^0 < ... < t^N = T with dt_n <= ratio * dt_{n-1}"""

    times: np.ndarray
    ratio: float = 2.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or len(times) < 2:
            raise TimeGridError("a time grid needs at least one step")
        if times[0] != 0.0:
            raise TimeGridError(f"time grid must start at 0, got {times[0]}")
        steps = np.diff(times)
        if not np.all(steps > 0.0):
            raise TimeGridError("time levels must be strictly increasing")
        if not self.ratio > 0.0:
            raise TimeGridError(f"step ratio C must be positive, got {self.ratio}")
        growth = steps[1:] > self.ratio * steps[:-1] * (1.0 + 1e-12)
        if np.any(growth):
            n = int(np.flatnonzero(growth)[0]) + 2
            raise TimeGridError(
                f"dt_{n} = {steps[n - 1]:.6g} exceeds {self.ratio} * dt_{n - 1} = "
                f"{self.ratio * steps[n - 2]:.6g}"
            )

    @classmethod
    def uniform(cls, t_final: float, n_steps: int, ratio: float = 2.0) -> "TimeGrid":
        if n_steps < 1 or not t_final > 0.0:
            raise TimeGridError(f"need t_final > 0 and n_steps >= 1, got ({t_final}, {n_steps})")
        return cls(np.linspace(0.0, t_final, n_steps + 1), ratio)

    @classmethod
    def from_steps(cls, steps: Sequence[float], ratio: float = 2.0) -> "TimeGrid":
        steps = np.asarray(steps, dtype=float)
        if steps.ndim != 1 or len(steps) == 0 or not np.all(steps > 0.0):
            raise TimeGridError("time steps must be a non-empty list of positive numbers")
        return cls(np.concatenate([[0.0], np.cumsum(steps)]), ratio)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt0(self) -> float:
        """Smoothing step of the initial projections, dt_0 = dt_1"""
        return float(self.steps[0])

    @property
    def t_final(self) -> float:
        return float(self.times[-1])


def time_average_forcing(
    f: Callable,
    t_a: float,
    t_b: float,
    space: Optional["VelocitySpace"] = None,
) -> np.ndarray:
    """
    f^n = (t_b - t_a)^{-1} int_{t_a}^{t_b} f dt by two-point Gauss in time

    With ``space`` given, f(t, points) is a body force and the result is its
    load vector; otherwise f(t) already returns a load vector. Exact for f
    affine (indeed cubic) in t.
    """
    if not t_b > t_a:
        raise InvalidInputError(f"need t_b > t_a, got [{t_a}, {t_b}]")
    from oldroyd_fem.assembly import load_vector

    total = None
    for tau, weight in zip(TIME_RULE.points, TIME_RULE.weights):
        t = t_a + tau * (t_b - t_a)
        if space is None:
            value = np.asarray(f(t), dtype=float)
        else:
            value = load_vector(space, lambda x, t=t: f(t, x))
        total = weight * value if total is None else total + weight * value
    return total


def timestep_restriction_warning(
    dt: float, alpha: float, h: float, c_star: float = 1.0, zeta: float = 0.0
) -> bool:
    """True when dt > c_star alpha^(1 + zeta) h^2; informational only"""
    return dt > c_star * alpha ** (1.0 + zeta) * h * h


# ---------------------------------------------------------------------------
# Damped Picard
# ---------------------------------------------------------------------------


@dataclass
class PicardResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    history: List[float]


def _inf_norm(r: np.ndarray) -> float:
    value = float(np.max(np.abs(r), initial=0.0))
    return value if np.isfinite(value) else math.inf


def damped_picard(
    residual: Callable[[np.ndarray], np.ndarray],
    update: Callable[[np.ndarray, np.ndarray, bool], np.ndarray],
    x0: np.ndarray,
    opts: SolverOpts,
    step: Optional[int] = None,
    to_state: Optional[Callable[[np.ndarray], object]] = None,
) -> PicardResult:
    """
    x_{k+1} = x_k + theta dx_k with dx_k from the linearized system

    theta starts at 1, halves whenever the trial residual does not decrease
    (the same step is retried) and resets to 1 after two consecutive
    accepted decreases. With ``opts.accelerate`` the linearization switches
    to the Newton form of the production term once a decrease is observed.
    """
    x = np.array(x0, dtype=float)
    wrap = to_state or (lambda v: v)
    try:
        r = residual(x)
    except DomainError as e:
        raise StepFailure(f"initial iterate is inadmissible: {e}", wrap(x), [], step) from e
    norm = _inf_norm(r)
    history = [norm]
    theta, streak, accelerate, iterations = 1.0, 0, False, 0

    while norm > opts.tol:
        if iterations >= opts.max_iter:
            raise StepFailure(
                f"no convergence after {iterations} iterations (residual {norm:.3e})",
                wrap(x), history, step,
            )
        try:
            dx = update(x, r, accelerate)
        except SingularMatrixError as e:
            raise StepFailure(f"linearized system is singular: {e}", wrap(x), history, step) from e

        while True:
            trial = x + theta * dx
            try:
                r_trial = residual(trial)
                trial_norm = _inf_norm(r_trial)
            except DomainError as e:
                logger.debug("iterate rejected: %s", e)
                trial_norm = math.inf
            if trial_norm < norm:
                break
            theta *= 0.5
            streak = 0
            if theta < opts.min_damping:
                raise StepFailure(
                    f"damping fell below {opts.min_damping:.3e} at residual {norm:.3e}",
                    wrap(x), history, step,
                )

        iterations += 1
        x, r, norm = trial, r_trial, trial_norm
        history.append(norm)
        logger.debug("picard it=%d theta=%.4g residual=%.3e", iterations, theta, norm)
        streak += 1
        if streak >= 2:
            theta = 1.0
        if opts.accelerate:
            accelerate = True

    return PicardResult(x, iterations, norm, history)


# ---------------------------------------------------------------------------
# Time loop
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    scheme: str
    grid: TimeGrid
    states: List["DiscreteState"]
    breakdowns: List[EnergyBreakdown] = field(default_factory=list)
    residual_histories: List[List[float]] = field(default_factory=list)
    failure: Optional[StepFailure] = None

    @property
    def complete(self) -> bool:
        return self.failure is None and len(self.states) == self.grid.n_steps + 1

    @property
    def final(self) -> "DiscreteState":
        return self.states[-1]


def step_load(
    scheme: "BaseScheme", forcing: Optional[Forcing], t_a: float, t_b: float
) -> Optional[np.ndarray]:
    if forcing is None:
        return None
    return time_average_forcing(forcing, t_a, t_b, scheme.vspace)


def run(
    scheme: "BaseScheme",
    initial: "DiscreteState",
    grid: TimeGrid,
    forcing: Optional[Forcing] = None,
    progress: bool = False,
    guesses: Optional[Sequence["DiscreteState"]] = None,
) -> Trajectory:
    """March the scheme over the grid, auditing every step; stops at the first failure"""
    trajectory = Trajectory(scheme.name, grid, [initial])
    if scheme.name.startswith("fem1"):
        alpha = scheme.fluid.diffusion
        if alpha == 0.0:
            logger.warning("alpha = 0: %s runs outside the analysed regime", scheme.name)
        elif any(timestep_restriction_warning(dt, alpha, scheme.mesh.h) for dt in grid.steps):
            logger.warning(
                "dt exceeds alpha h^2 on this grid (h = %.4g, alpha = %.4g); "
                "the energy law still holds",
                scheme.mesh.h, alpha,
            )

    steps = range(1, grid.n_steps + 1)
    iterator = tqdm(steps, desc=f"{scheme.name} steps", unit="step", disable=not progress)
    prev = initial
    for n in iterator:
        t_a, t_b = float(grid.times[n - 1]), float(grid.times[n])
        dt = t_b - t_a
        load = step_load(scheme, forcing, t_a, t_b)
        guess = guesses[n] if guesses is not None and n < len(guesses) else None
        try:
            result = scheme.step(prev, load, dt, guess=guess, step_index=n)
        except StepFailure as e:
            e.step = n
            trajectory.failure = e
            logger.warning("step %d of %s failed: %s", n, scheme.name, e)
            break
        try:
            audit = scheme.energy_audit(
                prev, result.state, load, dt, step=n, iterations=result.iterations
            )
        except DomainError as e:
            # converged, but the free energy is undefined at the new state
            trajectory.failure = StepFailure(
                f"energy audit is undefined: {e}", result.state, result.residual_history, n
            )
            logger.warning("step %d of %s failed: %s", n, scheme.name, trajectory.failure)
            break
        trajectory.states.append(result.state)
        trajectory.breakdowns.append(audit)
        trajectory.residual_histories.append(result.residual_history)
        logger.info(
            "step %d t=%.6g F=%.12g slack=%.3e iters=%d",
            n, t_b, audit.total, audit.slack, result.iterations,
        )
        prev = result.state
    return trajectory


# ---------------------------------------------------------------------------
# delta -> 0 continuation
# ---------------------------------------------------------------------------


def delta_continuation(
    scheme_factory: Callable[["Regularization"], "BaseScheme"],
    initial_factory: Callable[["BaseScheme"], "DiscreteState"],
    grid: TimeGrid,
    schedule: Sequence[float],
    forcing: Optional[Forcing] = None,
    unregularized_factory: Optional[Callable[[], "BaseScheme"]] = None,
    cutoff: Optional[float] = None,
    progress: bool = False,
) -> ContinuationReport:
    """
    Run the regularized scheme along a strictly decreasing delta schedule

    Each leg starts every time level from the previous leg's state at that
    level. The smallest-delta final step is finally plugged into the
    unregularized residual.
    """
    from oldroyd_fem.tensor import Regularization

    deltas = [float(d) for d in schedule]
    if not deltas:
        raise InvalidInputError("continuation schedule is empty")
    if any(not (0.0 < d <= 0.5) for d in deltas):
        raise InvalidInputError(f"every delta must lie in (0, 1/2], got {deltas}")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise InvalidInputError(f"delta schedule must be strictly decreasing, got {deltas}")

    report = ContinuationReport(
        scheme="", deltas=[], final_energies=[], negative_parts=[], min_eigenvalues=[],
        state_differences=[], unregularized_residual=math.nan,
    )
    guesses: Optional[List["DiscreteState"]] = None
    last_vector: Optional[np.ndarray] = None
    last_leg = None

    for delta in tqdm(deltas, desc="delta continuation", disable=not progress):
        scheme = scheme_factory(Regularization(delta=delta, cutoff=cutoff))
        report.scheme = scheme.name
        trajectory = run(
            scheme, initial_factory(scheme), grid, forcing, progress=progress, guesses=guesses
        )
        if not trajectory.complete:
            report.failures[delta] = str(trajectory.failure)
            logger.warning("continuation leg delta=%g failed: %s", delta, trajectory.failure)
            continue
        final = trajectory.final
        report.deltas.append(delta)
        report.final_energies.append(scheme.energy(final))
        report.negative_parts.append(scheme.negative_part(final))
        report.min_eigenvalues.append(final.min_eigenvalue())
        report.final_states.append(final)
        vector = scheme.to_vector(final)
        if last_vector is not None:
            report.state_differences.append(float(np.max(np.abs(vector - last_vector))))
        last_vector = vector
        guesses = trajectory.states
        last_leg = (scheme, trajectory)
        logger.info(
            "delta=%g F=%.12g negative part=%.3e min eig=%.6g",
            delta, report.final_energies[-1], report.negative_parts[-1], report.min_eigenvalues[-1],
        )

    if last_leg is not None and unregularized_factory is not None:
        scheme, trajectory = last_leg
        limit = unregularized_factory()
        n = grid.n_steps
        load = step_load(limit, forcing, float(grid.times[n - 1]), float(grid.times[n]))
        try:
            r = limit.residual(trajectory.states[-2], trajectory.states[-1], load, float(grid.steps[-1]))
            report.unregularized_residual = _inf_norm(r)
        except DomainError as e:
            logger.warning("unregularized residual undefined: %s", e)
            report.unregularized_residual = math.inf
    return report
