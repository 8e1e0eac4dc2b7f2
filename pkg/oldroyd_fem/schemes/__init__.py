"""
Scheme base classes and the shared (velocity, pressure) machinery
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Type, Union

import numpy as np
import scipy.sparse as sp

from oldroyd_fem.assembly import (
    convection_matrix,
    divergence_matrix,
    pressure_mean,
    velocity_mass,
    velocity_stiffness,
)
from oldroyd_fem.errors import InvalidInputError, SpaceMismatchError
from oldroyd_fem.linsolve import SparseMatrix, solve
from oldroyd_fem.mesh import SimplicialMesh
from oldroyd_fem.models import EnergyBreakdown, FluidParams, SolverOpts
from oldroyd_fem.spaces import (
    PressureField,
    PressureSpace,
    SpaceTag,
    StressField,
    StressFieldP0,
    StressFieldP1,
    VelocityField,
    VelocitySpace,
    check_pair,
)
from oldroyd_fem.stepper import PicardResult, damped_picard
from oldroyd_fem.tensor import Regularization, as_regularization, contraction_weights

logger = logging.getLogger(__name__)

WEIGHTS = contraction_weights(2)

# Callables of points (..., 2) giving the initial velocity (..., 2) and stress (..., 2, 2).
VelocityData = Callable[[np.ndarray], np.ndarray]
StressData = Callable[[np.ndarray], np.ndarray]


def basis_contract(a: np.ndarray) -> np.ndarray:
    """A : E_c for the packed test basis E_xx, E_xy + E_yx, E_yy; A may be non-symmetric"""
    return np.stack([a[..., 0, 0], a[..., 0, 1] + a[..., 1, 0], a[..., 1, 1]], axis=-1)


def basis_matrices() -> np.ndarray:
    """E_c, c = xx, xy, yy, as (3, 2, 2)"""
    return np.array([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]])


@dataclass(eq=False)
class DiscreteState:
    """One time level: velocity, stress and the pressure of its last solve"""

    velocity: VelocityField
    stress: StressField
    pressure: PressureField
    time: float = 0.0

    def __post_init__(self):
        mesh = self.velocity.mesh
        if self.stress.mesh is not mesh or self.pressure.space.mesh is not mesh:
            raise SpaceMismatchError("state fields live on different meshes")

    @property
    def mesh(self) -> SimplicialMesh:
        return self.velocity.mesh

    def min_eigenvalue(self) -> float:
        return self.stress.min_eigenvalue()

    def copy(self) -> "DiscreteState":
        return DiscreteState(
            self.velocity.copy(), self.stress.copy(), self.pressure.copy(), self.time
        )


@dataclass
class StepResult:
    state: DiscreteState
    iterations: int
    residual_norm: float
    residual_history: List[float] = field(default_factory=list)


@dataclass(eq=False)
class StepContext:
    """Everything a step needs that depends on the previous level only"""

    prev: DiscreteState
    dt: float
    load: np.ndarray
    convection: sp.csc_matrix
    extra: Dict[str, Any] = field(default_factory=dict)


class BaseScheme(ABC):
    """
    A fully discrete Oldroyd-B scheme on a fixed mesh

    Unknowns are packed as x = [u (all velocity dofs), p, sigma (3 per stress
    node)]. Boundary velocity dofs stay zero; their residual rows are zero.
    A mean-zero multiplier fixes the pressure constant and appends one entry
    m . p to every residual.
    """

    name = "base"
    pressure_tag = SpaceTag.PRES_P0
    stress_type: Type = StressFieldP0
    default_velocity = SpaceTag.VEL_P2

    def __init__(
        self,
        mesh: SimplicialMesh,
        fluid: FluidParams,
        reg: Union[Regularization, Any],
        velocity_space: Union[str, SpaceTag, None] = None,
        opts: Optional[SolverOpts] = None,
    ):
        self.mesh = mesh
        self.fluid = fluid
        self.reg = as_regularization(reg)
        self.opts = opts or SolverOpts()
        tag = velocity_space if velocity_space is not None else self.default_velocity
        self.vspace = VelocitySpace(mesh, tag)
        self.pspace = PressureSpace(mesh, self.pressure_tag)
        check_pair(self.vspace.tag, self.pspace.tag)

        self.mass = velocity_mass(self.vspace)
        self.stiffness = velocity_stiffness(self.vspace)
        self.divergence = divergence_matrix(self.vspace, self.pspace)
        self.mean = pressure_mean(self.pspace)

        self.nu = self.vspace.n_dofs
        self.np = self.pspace.n_dofs
        self.n_stress_nodes = self._n_stress_nodes()
        self.ns = 3 * self.n_stress_nodes
        self.size = self.nu + self.np + self.ns
        self.free = np.concatenate(
            [self.vspace.free_dofs, self.nu + np.arange(self.np + self.ns)]
        )
        logger.debug(
            "%s scheme on %r: %s, %s, %d unknowns",
            self.name, mesh, self.vspace, self.pspace, self.size,
        )

    # -- layout ---------------------------------------------------------------

    @abstractmethod
    def _n_stress_nodes(self) -> int:
        pass

    @property
    def slices(self) -> Tuple[slice, slice, slice]:
        return (
            slice(0, self.nu),
            slice(self.nu, self.nu + self.np),
            slice(self.nu + self.np, self.size),
        )

    def to_vector(self, state: DiscreteState) -> np.ndarray:
        self._check_state(state)
        return np.concatenate(
            [state.velocity.coefficients, state.pressure.coefficients, state.stress.entries.ravel()]
        )

    def from_vector(self, x: np.ndarray, time: float) -> DiscreteState:
        su, sp_, ss = self.slices
        return DiscreteState(
            VelocityField(self.vspace, x[su]),
            self.stress_type(self.mesh, x[ss].reshape(-1, 3)),
            PressureField(self.pspace, x[sp_]),
            time,
        )

    def _check_state(self, state: DiscreteState) -> None:
        if state.mesh is not self.mesh:
            raise SpaceMismatchError("state lives on another mesh")
        if state.velocity.space.tag is not self.vspace.tag:
            raise SpaceMismatchError(
                f"state velocity is {state.velocity.space.tag.value}, scheme uses {self.vspace.tag.value}"
            )
        if not isinstance(state.stress, self.stress_type):
            raise SpaceMismatchError(f"{self.name} needs a {self.stress_type.__name__}")

    def zero_state(self, time: float = 0.0) -> DiscreteState:
        return self.from_vector(np.zeros(self.size), time)

    def equilibrium_state(self, time: float = 0.0) -> DiscreteState:
        state = self.zero_state(time)
        state.stress.entries[:] = np.array([1.0, 0.0, 1.0])
        return state

    # -- residual and linearization -------------------------------------------

    def context(self, prev: DiscreteState, load: Optional[np.ndarray], dt: float) -> StepContext:
        if not dt > 0.0:
            raise InvalidInputError(f"time step must be positive, got {dt}")
        self._check_state(prev)
        load = np.zeros(self.nu) if load is None else np.asarray(load, dtype=float)
        if load.shape != (self.nu,):
            raise SpaceMismatchError(f"forcing has {load.shape} entries, expected ({self.nu},)")
        conv = convection_matrix(prev.velocity, self.opts.parallel_assembly)
        ctx = StepContext(prev=prev, dt=dt, load=load, convection=conv)
        self._prepare(ctx)
        return ctx

    def _prepare(self, ctx: StepContext) -> None:
        """Scheme hook for step-level precomputation"""

    def _momentum_residual(self, ctx: StepContext, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        fl = self.fluid
        du = u - ctx.prev.velocity.coefficients
        r = (
            (fl.reynolds / ctx.dt) * (self.mass @ du)
            + fl.reynolds * (ctx.convection @ u)
            + (1.0 - fl.viscosity_fraction) * (self.stiffness @ u)
            - self.divergence.T @ p
            - ctx.load
        )
        return r

    def _momentum_jacobian(self, ctx: StepContext) -> sp.csc_matrix:
        fl = self.fluid
        return (
            (fl.reynolds / ctx.dt) * self.mass
            + fl.reynolds * ctx.convection
            + (1.0 - fl.viscosity_fraction) * self.stiffness
        ).tocsc()

    @abstractmethod
    def _stress_coupling(self, ctx: StepContext, sigma: np.ndarray) -> np.ndarray:
        """(eps / Wi) int beta(sigma) : grad v_i, length nu"""

    @abstractmethod
    def _stress_residual(self, ctx: StepContext, u: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        """Stress equation tested with every (node, component), shape (nodes, 3)"""

    @abstractmethod
    def _coupling_blocks(
        self, ctx: StepContext, x: np.ndarray, accelerate: bool
    ) -> Tuple[sp.csc_matrix, sp.csc_matrix, sp.csc_matrix]:
        """Approximate Jacobian blocks (d r_u / d s, d r_s / d u, d r_s / d s)"""

    def residual_vector(self, ctx: StepContext, x: np.ndarray) -> np.ndarray:
        su, sp_, ss = self.slices
        u, p, s = x[su], x[sp_], x[ss].reshape(-1, 3)
        r_u = self._momentum_residual(ctx, u, p) + self._stress_coupling(ctx, s)
        r_u[self.vspace.boundary_mask] = 0.0
        r_p = self.divergence @ u
        r_s = self._stress_residual(ctx, u, s)
        return np.concatenate([r_u, r_p, r_s.ravel(), [float(self.mean @ p)]])

    def solve_update(self, ctx: StepContext, x: np.ndarray, r: np.ndarray, accelerate: bool) -> np.ndarray:
        """Solve J dx = -r on the free dofs with the pressure multiplier"""
        us, su_s, ss_s = self._coupling_blocks(ctx, x, accelerate)
        a_uu = self._momentum_jacobian(ctx)
        zero_ps = sp.csc_matrix((self.np, self.ns))
        jac = sp.bmat(
            [
                [a_uu, -self.divergence.T, us],
                [self.divergence, None, zero_ps],
                [su_s, zero_ps.T, ss_s],
            ],
            format="csc",
        )
        jac = jac[self.free][:, self.free]
        n = len(self.free)
        mean_col = np.zeros(n)
        n_free_u = len(self.vspace.free_dofs)
        mean_col[n_free_u : n_free_u + self.np] = self.mean
        augmented = sp.bmat(
            [[jac, sp.csc_matrix(mean_col[:, None])], [sp.csc_matrix(mean_col[None, :]), None]],
            format="csc",
        )
        rhs = -np.concatenate([r[:-1][self.free], r[-1:]])
        dx_free = solve(augmented, rhs)[:n]
        dx = np.zeros(self.size)
        dx[self.free] = dx_free
        return dx

    def check_iterate(self, x: np.ndarray) -> None:
        """Scheme hook rejecting inadmissible iterates"""

    def residual(
        self, prev: DiscreteState, cand: DiscreteState, load: Optional[np.ndarray], dt: float
    ) -> np.ndarray:
        """Residual over the velocity, pressure and stress test bases (plus the pressure mean)"""
        ctx = self.context(prev, load, dt)
        return self.residual_vector(ctx, self.to_vector(cand))

    def step(
        self,
        prev: DiscreteState,
        load: Optional[np.ndarray],
        dt: float,
        guess: Optional[DiscreteState] = None,
        step_index: Optional[int] = None,
    ) -> StepResult:
        ctx = self.context(prev, load, dt)
        x0 = self.to_vector(guess if guess is not None else prev)
        x0[: self.nu][self.vspace.boundary_mask] = 0.0

        def residual(x: np.ndarray) -> np.ndarray:
            self.check_iterate(x)
            return self.residual_vector(ctx, x)

        def update(x: np.ndarray, r: np.ndarray, accelerate: bool) -> np.ndarray:
            return self.solve_update(ctx, x, r, accelerate)

        result: PicardResult = damped_picard(
            residual,
            update,
            x0,
            self.opts,
            step=step_index,
            to_state=lambda x: self.from_vector(x, prev.time + dt),
        )
        state = self.from_vector(result.x, prev.time + dt)
        return StepResult(state, result.iterations, result.residual_norm, result.history)

    # -- energies -------------------------------------------------------------

    def kinetic_energy(self, state: DiscreteState) -> float:
        u = state.velocity.coefficients
        return 0.5 * self.fluid.reynolds * float(u @ (self.mass @ u))

    @abstractmethod
    def entropy_energy(self, state: DiscreteState) -> float:
        pass

    def energy(self, state: DiscreteState) -> float:
        return self.kinetic_energy(state) + self.entropy_energy(state)

    @abstractmethod
    def energy_audit(
        self,
        prev: DiscreteState,
        next_state: DiscreteState,
        load: Optional[np.ndarray],
        dt: float,
        step: int = 0,
        iterations: int = 0,
        require_converged: bool = True,
    ) -> EnergyBreakdown:
        pass

    def _common_terms(
        self, ctx: StepContext, next_state: DiscreteState, require_converged: bool
    ) -> Dict[str, float]:
        x = self.to_vector(next_state)
        res = float(np.max(np.abs(self.residual_vector(ctx, x))))
        if require_converged and res > max(100.0 * self.opts.tol, 1e-8):
            raise InvalidInputError(
                f"energy audit needs a converged step, residual is {res:.3e}"
            )
        fl = self.fluid
        u = next_state.velocity.coefficients
        du = u - ctx.prev.velocity.coefficients
        return {
            "velocity_increment": 0.5 * fl.reynolds / ctx.dt * float(du @ (self.mass @ du)),
            "visc_dissipation": (1.0 - fl.viscosity_fraction) * float(u @ (self.stiffness @ u)),
            "forcing_pairing": float(ctx.load @ u),
            "convection_skew": float(u @ (ctx.convection @ u)),
            "residual_norm": res,
        }

    # -- initial data ---------------------------------------------------------

    def _solve_saddle(self, a_uu: sp.spmatrix, rhs_u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """[A -B^T; B 0] (u, p) = (rhs, 0) on the free velocity dofs, mean-zero p"""
        free = self.vspace.free_dofs
        a = sp.csc_matrix(a_uu)[free][:, free]
        b = sp.csc_matrix(self.divergence)[:, free]
        m = sp.csc_matrix(self.mean[None, :])
        system = sp.bmat([[a, -b.T, None], [b, None, m.T], [None, m, None]], format="csc")
        rhs = np.concatenate([rhs_u[free], np.zeros(self.np + 1)])
        sol = solve(system, rhs)
        u = np.zeros(self.nu)
        u[free] = sol[: len(free)]
        return u, sol[len(free) : len(free) + self.np]

    @abstractmethod
    def initial_state(
        self, velocity: Optional[VelocityData], stress: StressData, dt0: float
    ) -> DiscreteState:
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.vspace.tag.value}/{self.pspace.tag.value}, {self.reg.label})"


def scatter_stress_rows(
    nodes: np.ndarray, n_nodes: int, local: np.ndarray
) -> np.ndarray:
    """Sum local (ne, n_loc_nodes, 3) stress contributions into (n_nodes, 3)"""
    out = np.zeros((n_nodes, 3))
    np.add.at(out, nodes, local)
    return out


def stress_dofs(nodes: np.ndarray) -> np.ndarray:
    """Global stress unknown indices (..., 3) of stress nodes (...)"""
    return 3 * np.asarray(nodes)[..., None] + np.arange(3)


def block_matrix(
    row_dofs: np.ndarray, col_dofs: np.ndarray, local: np.ndarray, shape: Tuple[int, int]
) -> sp.csc_matrix:
    """Scatter local[k, ...rows, ...cols] with row/col dof arrays flattened per element"""
    ne = local.shape[0]
    rows = np.asarray(row_dofs).reshape(ne, -1)
    cols = np.asarray(col_dofs).reshape(ne, -1)
    return SparseMatrix(shape).add_block(rows, cols, local.reshape(ne, rows.shape[1], cols.shape[1])).compile()


SCHEME_NAMES = ("dg0", "dg0-unreg", "fem1", "fem1-unreg")


def make_scheme(
    name: str,
    mesh: SimplicialMesh,
    fluid: FluidParams,
    reg: Union[Regularization, Any],
    velocity_space: Union[str, SpaceTag, None] = None,
    opts: Optional[SolverOpts] = None,
) -> BaseScheme:
    from oldroyd_fem.schemes.dg0 import DG0Scheme
    from oldroyd_fem.schemes.fem1 import FEM1Scheme

    reg = as_regularization(reg)
    if name.endswith("-unreg"):
        reg = Regularization.unregularized(reg.cutoff)
    if name.startswith("dg0"):
        return DG0Scheme(mesh, fluid, reg, velocity_space, opts)
    if name.startswith("fem1"):
        return FEM1Scheme(mesh, fluid, reg, velocity_space, opts)
    raise InvalidInputError(f"unknown scheme {name!r} (expected one of {', '.join(SCHEME_NAMES)})")


__all__ = [
    "BaseScheme",
    "DiscreteState",
    "StepContext",
    "StepResult",
    "make_scheme",
    "SCHEME_NAMES",
]
