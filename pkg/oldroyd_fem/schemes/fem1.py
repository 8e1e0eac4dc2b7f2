"""
Continuous piecewise linear stress with diffusion, lumping and the Lambda transport tensor

Every pi_h[.] product is evaluated by the vertex rule, so the stress
unknowns only ever meet the regularized functions at mesh vertices.
"""

import logging
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from oldroyd_fem.assembly import (
    load_vector,
    p1_load,
    p1_mass,
    p1_stiffness,
    vertex_gradient_integrals,
    vertex_velocity_moments,
)
from oldroyd_fem.errors import DomainError, InvalidInputError
from oldroyd_fem.linsolve import Factorization, SparseMatrix
from oldroyd_fem.mesh import SimplicialMesh
from oldroyd_fem.models import EnergyBreakdown, FluidParams, RegParams, SolverOpts
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
    ScalarFieldP1,
    SpaceTag,
    StressFieldP1,
    VelocityField,
    vertex_weights,
)
from oldroyd_fem.tensor import (
    TOLERANCES,
    Regularization,
    SymMat,
    as_regularization,
    ddot,
    frobenius,
    negative_part,
    pack,
    sym_eigh,
    unpack,
)

logger = logging.getLogger(__name__)

IDENTITY = np.array([1.0, 0.0, 1.0])


def _batch(phi: Union[SymMat, np.ndarray]) -> np.ndarray:
    if isinstance(phi, SymMat):
        return phi.to_array()
    return np.asarray(phi, dtype=float)


def lambda_weight(
    phi_j: Union[SymMat, np.ndarray],
    phi_0: Union[SymMat, np.ndarray],
    reg: Union[RegParams, Regularization],
) -> np.ndarray:
    """
    The secant weight lambda of the convex combination (1 - lambda) beta(phi_j) + lambda beta(phi_0)

    Chosen so that the combination contracted with G'(phi_j) - G'(phi_0)
    reproduces tr H(G'(phi_j)) - tr H(G'(phi_0)). When the denominator is
    lost in roundoff the weight is 0, which is then exact.
    """
    reg = as_regularization(reg)
    a, b = _batch(phi_j), _batch(phi_0)
    beta_j, beta_0 = reg.beta_mat(a), reg.beta_mat(b)
    dg = reg.g_prime_mat(a) - reg.g_prime_mat(b)
    dh = reg.trace_h_of_g_prime(a) - reg.trace_h_of_g_prime(b)
    den = ddot(beta_0 - beta_j, dg)
    num = dh - ddot(beta_j, dg)
    guard = TOLERANCES.lambda_guard * (1.0 + frobenius(beta_j) * frobenius(dg))
    safe = np.abs(den) > guard
    return np.where(safe, num / np.where(safe, den, 1.0), 0.0)


def lambda_hat(
    phi_j: Union[SymMat, np.ndarray],
    phi_0: Union[SymMat, np.ndarray],
    reg: Union[RegParams, Regularization],
) -> Union[SymMat, np.ndarray]:
    reg = as_regularization(reg)
    a, b = _batch(phi_j), _batch(phi_0)
    beta_j, beta_0 = reg.beta_mat(a), reg.beta_mat(b)
    lam = np.asarray(lambda_weight(a, b, reg))
    out = beta_j + lam[..., None, None] * (beta_0 - beta_j)
    if isinstance(phi_j, SymMat):
        return SymMat.from_array(out)
    return out


def lambda_tensor(
    mesh: SimplicialMesh,
    stress: StressFieldP1,
    reg: Union[RegParams, Regularization],
    elements: Union[int, np.ndarray, None] = None,
) -> np.ndarray:
    """
    Lambda_{m,p} per element, shape (n, 2, 2, 2, 2) indexed [k, m, p]

    Lambda_{m,p} = sum_j (B^-T)_{mj} hat-Lambda_j (B^T)_{jp}, with hat-Lambda_j
    built from the stress at local vertex j against local vertex 0.
    """
    if stress.mesh is not mesh:
        raise InvalidInputError("stress lives on another mesh")
    sel = np.arange(mesh.n_elements) if elements is None else np.atleast_1d(elements)
    mats = stress.matrices[mesh.elements[sel]]  # (n, 3, 2, 2)
    hat = lambda_hat(mats[:, 1:], np.broadcast_to(mats[:, :1], mats[:, 1:].shape), reg)
    b = mesh.jacobians[sel]
    binv_t = np.swapaxes(np.linalg.inv(b), -1, -2)
    return np.einsum("kmj,kjab,kpj->kmpab", binv_t, hat, b)


def chain_identity_residual(
    mesh: SimplicialMesh, stress: StressFieldP1, reg: Union[RegParams, Regularization]
) -> float:
    """max |sum_p Lambda_{m,p} : d_p pi_h[G'(sigma)] - d_m pi_h[tr H(G'(sigma))]| over elements and m"""
    reg = as_regularization(reg)
    mats = stress.matrices
    lam = lambda_tensor(mesh, stress, reg)
    g_grad = StressFieldP1(mesh, pack(reg.g_prime_mat(mats))).gradients()  # (ne, p, 2, 2)
    h_grad = ScalarFieldP1(mesh, reg.trace_h_of_g_prime(mats)).gradients()  # (ne, m)
    lhs = np.einsum("kmpab,kpab->km", lam, g_grad)
    return float(np.max(np.abs(lhs - h_grad), initial=0.0))


class FEM1Scheme(BaseScheme):
    """
    Velocity in P2 or MINI against P1 pressure, stress continuous P1

    The stress equation carries lumped time and relaxation terms, a
    consistent alpha-diffusion and the Lambda convection form.
    """

    name = "fem1"
    pressure_tag = SpaceTag.PRES_P1
    stress_type = StressFieldP1
    default_velocity = SpaceTag.VEL_P2

    def __init__(self, mesh, fluid, reg, velocity_space=None, opts=None):
        super().__init__(mesh, fluid, reg, velocity_space, opts)
        if not self.reg.regularized:
            self.name = "fem1-unreg"
        self.dofs = self.vspace.local_dofs
        self.vertex_grads = vertex_gradient_integrals(self.vspace)  # (ne, 3, nloc, 2, 2)
        self.vertex_mass = vertex_weights(mesh)
        self.p1_stiffness = p1_stiffness(mesh)
        self.diffusion_matrix = sp.kron(self.p1_stiffness, sp.diags(WEIGHTS), format="csc")
        self.element_index = stress_dofs(mesh.elements)  # (ne, 3, 3)
        self.vertex_index = stress_dofs(np.arange(mesh.n_vertices))

    def _n_stress_nodes(self) -> int:
        return self.mesh.n_vertices

    def _prepare(self, ctx: StepContext) -> None:
        moments = vertex_velocity_moments(ctx.prev.velocity)
        ctx.extra["moments"] = moments
        ctx.extra["wind"] = moments.sum(axis=1)  # int_K u^{n-1}, (ne, 2)

    def check_iterate(self, x: np.ndarray) -> None:
        if self.reg.regularized:
            return
        w, _ = sym_eigh(unpack(x[self.slices[2]].reshape(-1, 3), 2))
        bad = np.flatnonzero(w.min(axis=1) <= 0.0)
        if len(bad):
            value = float(w[bad[0]].min())
            raise DomainError(f"stress is not positive definite at vertex {bad[0]} ({value:.3e})", value)

    def vertex_velocity_gradients(self, u: np.ndarray) -> np.ndarray:
        """int lambda_a grad u for every vertex a, (nv, 2, 2)"""
        local = np.einsum("kl,kalij->kaij", u[self.dofs], self.vertex_grads)
        out = np.zeros((self.mesh.n_vertices, 2, 2))
        np.add.at(out, self.mesh.elements, local)
        return out

    # -- residual -------------------------------------------------------------

    def _stress_coupling(self, ctx: StepContext, sigma: np.ndarray) -> np.ndarray:
        fl = self.fluid
        beta = self.reg.beta_mat(unpack(sigma, 2))[self.mesh.elements]
        local = (fl.viscosity_fraction / fl.weissenberg) * np.einsum(
            "kaij,kalij->kl", beta, self.vertex_grads
        )
        return np.bincount(self.dofs.ravel(), weights=local.ravel(), minlength=self.nu)

    def _stress_residual(self, ctx: StepContext, u: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        fl = self.fluid
        mesh = self.mesh
        mats = unpack(sigma, 2)
        relax = (sigma - ctx.prev.stress.entries) / ctx.dt + (sigma - IDENTITY) / fl.weissenberg
        r = self.vertex_mass[:, None] * WEIGHTS * relax
        if fl.diffusion:
            r += fl.diffusion * WEIGHTS * (self.p1_stiffness @ sigma)
        r -= 2.0 * basis_contract(self.vertex_velocity_gradients(u) @ self.reg.beta_mat(mats))

        lam = lambda_tensor(mesh, StressFieldP1(mesh, sigma), self.reg)
        convection = -np.einsum(
            "km,kap,kmpc->kac", ctx.extra["wind"], mesh.barycentric_gradients, basis_contract(lam)
        )
        np.add.at(r, mesh.elements, convection)
        return r

    def _coupling_blocks(
        self, ctx: StepContext, x: np.ndarray, accelerate: bool
    ) -> Tuple[sp.csc_matrix, sp.csc_matrix, sp.csc_matrix]:
        fl = self.fluid
        mesh = self.mesh
        su, _, ss = self.slices
        u, sigma = x[su], x[ss].reshape(-1, 3)
        grads = self.vertex_grads

        us_local = (fl.viscosity_fraction / fl.weissenberg) * basis_contract(grads)  # (ne, a, l, c)
        us = block_matrix(
            self.dofs, self.element_index, np.transpose(us_local, (0, 2, 1, 3)), (self.nu, self.ns)
        )

        beta = self.reg.beta_mat(unpack(sigma, 2))[mesh.elements]
        su_local = -2.0 * basis_contract(np.einsum("kalij,kajm->kalim", grads, beta))  # (ne, a, l, c)
        su_ = block_matrix(
            self.element_index, self.dofs, np.transpose(su_local, (0, 1, 3, 2)), (self.ns, self.nu)
        )

        # Galerkin transport with Lambda_{m,p} ~ sigma delta_{mp}
        transport = -np.einsum(
            "kbm,kam->kab", ctx.extra["moments"], mesh.barycentric_gradients
        )
        conv_local = transport[:, :, None, :, None] * np.diag(WEIGHTS)[None, None, :, None, :]
        lumped = self.vertex_mass * (1.0 / ctx.dt + 1.0 / fl.weissenberg)
        ss_ = (
            block_matrix(self.element_index, self.element_index, conv_local, (self.ns, self.ns))
            + sp.diags((lumped[:, None] * WEIGHTS).ravel())
            + fl.diffusion * self.diffusion_matrix
        )
        if accelerate:
            gu = self.vertex_velocity_gradients(u)
            local = -2.0 * basis_contract(np.einsum("aij,djm->adim", gu, basis_matrices()))
            newton = SparseMatrix((self.ns, self.ns))
            newton.add_block(self.vertex_index, self.vertex_index, np.swapaxes(local, 1, 2))
            ss_ = ss_ + newton.compile()
        return us, su_, sp.csc_matrix(ss_)

    # -- energies -------------------------------------------------------------

    def entropy_energy(self, state: DiscreteState) -> float:
        fl = self.fluid
        density = self.reg.entropy_density(state.stress.matrices)
        return 0.5 * fl.viscosity_fraction / fl.weissenberg * float(self.vertex_mass @ density)

    def negative_part(self, state: DiscreteState) -> float:
        """Lumped int pi_h ||[sigma]_-||"""
        return float(self.vertex_mass @ frobenius(negative_part(state.stress.matrices)))

    def diffusion_dissipation(self, state: DiscreteState) -> float:
        """(alpha eps delta^2 / 2 Wi) int ||grad pi_h[G'(sigma)]||^2; zero without regularization"""
        fl = self.fluid
        if not self.reg.regularized or fl.diffusion == 0.0:
            return 0.0
        g = pack(self.reg.g_prime_mat(state.stress.matrices))
        energy = float(np.sum(WEIGHTS * np.einsum("ac,ac->c", g, self.p1_stiffness @ g)))
        return fl.diffusion * fl.viscosity_fraction * self.reg.delta**2 / (2.0 * fl.weissenberg) * energy

    def transport_identity(self, ctx: StepContext, state: DiscreteState) -> float:
        """int u^{n-1} . grad pi_h[tr H(G'(sigma))]"""
        chi = ScalarFieldP1(self.mesh, self.reg.trace_h_of_g_prime(state.stress.matrices))
        return float(np.sum(ctx.extra["wind"] * chi.gradients()))

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
            * float(self.vertex_mass @ self.reg.dissipation_density(mats))
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
            diffusion_dissipation=self.diffusion_dissipation(next_state),
            forcing_pairing=common["forcing_pairing"],
            slack=0.0,
            transport_identity=self.transport_identity(ctx, next_state),
            convection_skew=common["convection_skew"],
            negative_part=self.negative_part(next_state),
            min_eig_stress=next_state.min_eigenvalue(),
            iterations=iterations,
            residual_norm=common["residual_norm"],
            in_analyzed_regime=fl.diffusion > 0.0,
        )
        breakdown.slack = breakdown.recompute_slack()
        return breakdown

    # -- initial data ---------------------------------------------------------

    def initial_state(
        self, velocity: Optional[VelocityData], stress: StressData, dt0: float
    ) -> DiscreteState:
        return project_initial_fields(self, velocity, stress, dt0)

    def projection_bound(self, state: DiscreteState, dt0: float) -> float:
        """int |u|^2 + |sigma|^2 + dt0 (|grad u|^2 + |grad sigma|^2) of the initial projections"""
        u = state.velocity.coefficients
        s = state.stress.entries
        mass = p1_mass(self.mesh)
        stress_l2 = float(np.sum(WEIGHTS * np.einsum("ac,ac->c", s, mass @ s)))
        stress_h1 = float(np.sum(WEIGHTS * np.einsum("ac,ac->c", s, self.p1_stiffness @ s)))
        return (
            float(u @ (self.mass @ u))
            + stress_l2
            + dt0 * (float(u @ (self.stiffness @ u)) + stress_h1)
        )


def project_stress(mesh: SimplicialMesh, stress: StressData, dt0: float) -> StressFieldP1:
    """(pi_h[sigma : chi]) + dt0 (grad sigma, grad chi) = (sigma^0, chi) for every P1 chi"""
    if not dt0 > 0.0:
        raise InvalidInputError(f"projection step dt0 must be positive, got {dt0}")

    def symmetric(points: np.ndarray) -> np.ndarray:
        values = np.asarray(stress(points), dtype=float)
        return 0.5 * (values + np.swapaxes(values, -1, -2))

    rhs = pack(p1_load(mesh, symmetric))  # (nv, 3)
    system = Factorization(sp.diags(vertex_weights(mesh)) + dt0 * p1_stiffness(mesh))
    entries = np.column_stack([system.solve(rhs[:, c]) for c in range(3)])
    return StressFieldP1(mesh, entries)


def project_initial_fields(
    scheme: FEM1Scheme,
    velocity: Optional[VelocityData],
    stress: StressData,
    dt0: float,
) -> DiscreteState:
    """
    Smoothed projections of (u^0, sigma^0) onto the discrete spaces

    u_h^0 solves (u, v) + dt0 (grad u, grad v) = (u^0, v) over the
    discretely div-free velocities; sigma_h^0 solves the lumped mass plus
    dt0-stiffness system componentwise. Vertex eigenvalues of sigma_h^0
    stay inside the eigenvalue range of sigma^0.
    """
    if not dt0 > 0.0:
        raise InvalidInputError(f"projection step dt0 must be positive, got {dt0}")
    mesh = scheme.mesh
    if velocity is None:
        u, p = np.zeros(scheme.nu), np.zeros(scheme.np)
    else:
        u, p = scheme._solve_saddle(
            scheme.mass + dt0 * scheme.stiffness, load_vector(scheme.vspace, velocity)
        )

    state = DiscreteState(
        VelocityField(scheme.vspace, u),
        project_stress(mesh, stress, dt0),
        PressureField(scheme.pspace, p),
        0.0,
    )
    logger.debug(
        "initial projections: bound %.6g, min vertex eigenvalue %.6g",
        scheme.projection_bound(state, dt0),
        state.min_eigenvalue(),
    )
    return state


def _scheme_for(
    state: DiscreteState, fluid: FluidParams, reg: Union[RegParams, Regularization], opts=None
) -> FEM1Scheme:
    return FEM1Scheme(state.mesh, fluid, reg, state.velocity.space.tag, opts)


def fem1_residual(
    prev: DiscreteState,
    cand: DiscreteState,
    fluid: FluidParams,
    reg: Union[RegParams, Regularization],
    load: Optional[np.ndarray],
    dt: float,
) -> np.ndarray:
    return _scheme_for(prev, fluid, reg).residual(prev, cand, load, dt)


def fem1_step(
    prev: DiscreteState,
    fluid: FluidParams,
    reg: Union[RegParams, Regularization],
    load: Optional[np.ndarray],
    dt: float,
    opts: Optional[SolverOpts] = None,
) -> StepResult:
    return _scheme_for(prev, fluid, reg, opts).step(prev, load, dt)


def fem1_energy(
    state: DiscreteState, fluid: FluidParams, reg: Union[RegParams, Regularization]
) -> float:
    return _scheme_for(state, fluid, reg).energy(state)


def fem1_energy_audit(
    prev: DiscreteState,
    next_state: DiscreteState,
    fluid: FluidParams,
    reg: Union[RegParams, Regularization],
    load: Optional[np.ndarray],
    dt: float,
) -> EnergyBreakdown:
    return _scheme_for(prev, fluid, reg).energy_audit(prev, next_state, load, dt)
