"""
Piecewise constant stress with upwind facet transport
"""

import logging
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from oldroyd_fem.assembly import element_gradient_integrals, load_vector
from oldroyd_fem.linsolve import SparseMatrix
from oldroyd_fem.models import EnergyBreakdown, FluidParams, RegParams, SolverOpts
from oldroyd_fem.quadrature import triangle_rule
from oldroyd_fem.schemes import (
    WEIGHTS,
    BaseScheme,
    DiscreteState,
    StepContext,
    StepResult,
    StressData,
    VelocityData,
    basis_contract,
    basis_matrices,
    block_matrix,
    stress_dofs,
)
from oldroyd_fem.spaces import (
    PressureField,
    SpaceTag,
    StressFieldP0,
    VelocityField,
    facet_flux,
)
from oldroyd_fem.tensor import Regularization, frobenius, negative_part, unpack

logger = logging.getLogger(__name__)

IDENTITY = np.array([1.0, 0.0, 1.0])


class DG0Scheme(BaseScheme):
    """
    Velocity in P2 (or reduced P2), pressure and stress elementwise constant

    The stress equation is tested elementwise; transport enters only through
    the upwind jump on internal facets, weighted by |u^{n-1}.n|.
    """

    name = "dg0"
    pressure_tag = SpaceTag.PRES_P0
    stress_type = StressFieldP0
    default_velocity = SpaceTag.VEL_P2

    def __init__(self, mesh, fluid, reg, velocity_space=None, opts=None):
        super().__init__(mesh, fluid, reg, velocity_space, opts)
        if not self.reg.regularized:
            self.name = "dg0-unreg"
        if fluid.diffusion != 0.0:
            logger.warning("%s has no stress diffusion; alpha=%g is ignored", self.name, fluid.diffusion)
        self.dofs = self.vspace.local_dofs
        self.grad_integrals = element_gradient_integrals(self.vspace)  # (ne, nloc, 2, 2)
        self.stress_index = stress_dofs(np.arange(mesh.n_elements))

    def _n_stress_nodes(self) -> int:
        return self.mesh.n_elements

    def _beta(self, mats: np.ndarray) -> np.ndarray:
        if not self.reg.regularized and self.reg.cutoff is None:
            return mats
        return self.reg.beta_mat(mats)

    def _prepare(self, ctx: StepContext) -> None:
        flux = facet_flux(ctx.prev.velocity)
        downstream = flux.right_is_downstream
        weighted = flux.weights * flux.speed
        ctx.extra["flux"] = flux
        ctx.extra["omega_right"] = np.sum(np.where(downstream, weighted, 0.0), axis=1)
        ctx.extra["omega_left"] = np.sum(np.where(downstream, 0.0, weighted), axis=1)

    def velocity_gradients(self, u: np.ndarray) -> np.ndarray:
        """int_K grad u per element, (ne, 2, 2)"""
        return np.einsum("kl,klij->kij", u[self.dofs], self.grad_integrals)

    # -- residual -------------------------------------------------------------

    def _stress_coupling(self, ctx: StepContext, sigma: np.ndarray) -> np.ndarray:
        fl = self.fluid
        beta = self._beta(unpack(sigma, 2))
        local = (fl.viscosity_fraction / fl.weissenberg) * np.einsum(
            "kij,klij->kl", beta, self.grad_integrals
        )
        return np.bincount(self.dofs.ravel(), weights=local.ravel(), minlength=self.nu)

    def _stress_residual(self, ctx: StepContext, u: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        fl = self.fluid
        beta = self._beta(unpack(sigma, 2))
        relax = (sigma - ctx.prev.stress.entries) / ctx.dt + (sigma - IDENTITY) / fl.weissenberg
        r = self.mesh.areas[:, None] * WEIGHTS * relax
        r -= 2.0 * basis_contract(self.velocity_gradients(u) @ beta)

        flux = ctx.extra["flux"]
        jump = WEIGHTS * (sigma[flux.right] - sigma[flux.left])
        np.add.at(r, flux.right, ctx.extra["omega_right"][:, None] * jump)
        np.add.at(r, flux.left, -ctx.extra["omega_left"][:, None] * jump)
        return r

    def _coupling_blocks(
        self, ctx: StepContext, x: np.ndarray, accelerate: bool
    ) -> Tuple[sp.csc_matrix, sp.csc_matrix, sp.csc_matrix]:
        fl = self.fluid
        su, _, ss = self.slices
        u, sigma = x[su], x[ss].reshape(-1, 3)
        grads = self.grad_integrals

        # beta(sigma) ~ sigma in the momentum coupling
        us_local = (fl.viscosity_fraction / fl.weissenberg) * basis_contract(grads)
        us = block_matrix(self.dofs, self.stress_index, us_local, (self.nu, self.ns))

        beta = self._beta(unpack(sigma, 2))
        su_local = -2.0 * basis_contract(np.einsum("klij,kjm->klim", grads, beta))
        su_ = block_matrix(
            self.stress_index, self.dofs, np.swapaxes(su_local, 1, 2), (self.ns, self.nu)
        )

        diag = self.mesh.areas * (1.0 / ctx.dt + 1.0 / fl.weissenberg)
        ss_ = SparseMatrix((self.ns, self.ns))
        ss_.add(self.stress_index, self.stress_index, diag[:, None] * WEIGHTS)
        flux = ctx.extra["flux"]
        omega_r, omega_l = ctx.extra["omega_right"], ctx.extra["omega_left"]
        for rows, cols, coef in (
            (flux.right, flux.right, omega_r),
            (flux.right, flux.left, -omega_r),
            (flux.left, flux.left, omega_l),
            (flux.left, flux.right, -omega_l),
        ):
            ss_.add(stress_dofs(rows), stress_dofs(cols), coef[:, None] * WEIGHTS)
        if accelerate:
            gu = self.velocity_gradients(u)
            local = -2.0 * basis_contract(np.einsum("kij,djm->kdim", gu, basis_matrices()))
            ss_.add_block(self.stress_index, self.stress_index, np.swapaxes(local, 1, 2))
        return us, su_, ss_.compile()

    # -- energies -------------------------------------------------------------

    def entropy_energy(self, state: DiscreteState) -> float:
        fl = self.fluid
        density = self.reg.entropy_density(state.stress.matrices)
        return 0.5 * fl.viscosity_fraction / fl.weissenberg * float(self.mesh.areas @ density)

    def negative_part(self, state: DiscreteState) -> float:
        """sum_K |K| ||[sigma_K]_-||"""
        return float(self.mesh.areas @ frobenius(negative_part(state.stress.matrices)))

    def transport_identity(self, ctx: StepContext, state: DiscreteState) -> float:
        """Facet sum of |w.n| times the upwind jump of tr(sigma - G(sigma))"""
        flux = ctx.extra["flux"]
        chi = self.reg.entropy_density(state.stress.matrices)
        # |w.n| [chi] over the upwind orientation is w.n (chi_right - chi_left)
        jump = chi[flux.right] - chi[flux.left]
        return float(np.sum(flux.weights * flux.normal_velocity * jump[:, None]))

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
        ctx = self.context(prev, load, dt)
        common = self._common_terms(ctx, next_state, require_converged)
        fl = self.fluid
        mats = next_state.stress.matrices
        stress_dissipation = (
            0.5 * fl.viscosity_fraction / fl.weissenberg**2
            * float(self.mesh.areas @ self.reg.dissipation_density(mats))
        )
        kinetic = self.kinetic_energy(next_state)
        entropy = self.entropy_energy(next_state)
        breakdown = EnergyBreakdown(
            step=step,
            time=next_state.time,
            dt=dt,
            total=kinetic + entropy,
            kinetic=kinetic,
            entropy=entropy,
            previous_total=self.energy(prev),
            velocity_increment=common["velocity_increment"],
            visc_dissipation=common["visc_dissipation"],
            stress_dissipation=stress_dissipation,
            diffusion_dissipation=0.0,
            forcing_pairing=common["forcing_pairing"],
            slack=0.0,
            transport_identity=self.transport_identity(ctx, next_state),
            convection_skew=common["convection_skew"],
            negative_part=self.negative_part(next_state),
            min_eig_stress=next_state.min_eigenvalue(),
            iterations=iterations,
            residual_norm=common["residual_norm"],
        )
        breakdown.slack = breakdown.recompute_slack()
        return breakdown

    # -- initial data ---------------------------------------------------------

    def initial_state(
        self, velocity: Optional[VelocityData], stress: StressData, dt0: float = 0.0
    ) -> DiscreteState:
        """Element averages of sigma^0 and the L2 projection of u^0 onto the div-free space"""
        rule = triangle_rule(4)
        values = np.asarray(stress(self.mesh.element_points(rule.barycentric)), dtype=float)
        averages = np.einsum("q,kqij->kij", rule.weights, values)
        sigma = StressFieldP0(self.mesh, 0.5 * (averages + np.swapaxes(averages, 1, 2)))
        eig = sigma.eigenvalues()
        logger.debug("initial stress eigenvalues in [%.6g, %.6g]", eig.min(), eig.max())
        if velocity is None:
            u, p = np.zeros(self.nu), np.zeros(self.np)
        else:
            u, p = self._solve_saddle(self.mass, load_vector(self.vspace, velocity))
        return DiscreteState(VelocityField(self.vspace, u), sigma, PressureField(self.pspace, p), 0.0)


def _scheme_for(
    state: DiscreteState, fluid: FluidParams, reg: Union[RegParams, Regularization], opts=None
) -> DG0Scheme:
    return DG0Scheme(state.mesh, fluid, reg, state.velocity.space.tag, opts)


def dg0_residual(
    prev: DiscreteState,
    cand: DiscreteState,
    fluid: FluidParams,
    reg: Union[RegParams, Regularization],
    load: Optional[np.ndarray],
    dt: float,
) -> np.ndarray:
    return _scheme_for(prev, fluid, reg).residual(prev, cand, load, dt)


def dg0_step(
    prev: DiscreteState,
    fluid: FluidParams,
    reg: Union[RegParams, Regularization],
    load: Optional[np.ndarray],
    dt: float,
    opts: Optional[SolverOpts] = None,
) -> StepResult:
    return _scheme_for(prev, fluid, reg, opts).step(prev, load, dt)


def dg0_energy(
    state: DiscreteState, fluid: FluidParams, reg: Union[RegParams, Regularization]
) -> float:
    return _scheme_for(state, fluid, reg).energy(state)


def dg0_energy_audit(
    prev: DiscreteState,
    next_state: DiscreteState,
    fluid: FluidParams,
    reg: Union[RegParams, Regularization],
    load: Optional[np.ndarray],
    dt: float,
) -> EnergyBreakdown:
    return _scheme_for(prev, fluid, reg).energy_audit(prev, next_state, load, dt)

