"""
Named property suites: randomized checks of the inequalities the energy law rests on

Every suite returns a PropertyResult whose worst slack is the smallest
normalized margin observed; a suite passes when each of its checks stays
above minus its tolerance.
"""

import logging
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np

from oldroyd_fem.assembly import p1_local_stiffness, p1_mass
from oldroyd_fem.errors import InvalidInputError
from oldroyd_fem.mesh import SimplicialMesh, audit_mesh, build_structured_mesh
from oldroyd_fem.models import PropertyResult
from oldroyd_fem.quadrature import triangle_rule
from oldroyd_fem.scenarios import random_spd_stress
from oldroyd_fem.schemes.fem1 import chain_identity_residual, lambda_tensor, lambda_weight, project_stress
from oldroyd_fem.spaces import StressFieldP1, measure_inverse_constants, vertex_weights
from oldroyd_fem.tensor import (
    TOLERANCES,
    Regularization,
    contraction_weights,
    ddot,
    frobenius,
    negative_part,
    pack,
    sym_apply,
    sym_eigh,
)

logger = logging.getLogger(__name__)

LEMMA_DELTAS = (0.5, 0.1, 0.01)
LEMMA_CUTOFFS = (2.0, 10.0, None)


class _Ledger:
    """Worst normalized slack per named check"""

    def __init__(self):
        self.worst: Dict[str, float] = {}
        self.tolerance: Dict[str, float] = {}

    def record(self, name: str, slack: np.ndarray, tol: float = TOLERANCES.inequality) -> None:
        value = float(np.min(slack, initial=np.inf))
        self.worst[name] = min(self.worst.get(name, np.inf), value)
        self.tolerance[name] = tol

    @property
    def passed(self) -> bool:
        return all(self.worst[k] >= -self.tolerance[k] for k in self.worst)

    @property
    def worst_slack(self) -> float:
        return min(self.worst.values(), default=0.0)

    def result(self, name: str, samples: int, **details) -> PropertyResult:
        return PropertyResult(
            name=name,
            samples=samples,
            worst_slack=self.worst_slack,
            passed=self.passed,
            details={**{f"worst_{k}": v for k, v in self.worst.items()}, **details},
        )


def random_symmetric(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Symmetric matrices with entries of varying scale, some indefinite"""
    x = rng.standard_normal((n, dim, dim)) * rng.uniform(0.01, 10.0, size=(n, 1, 1))
    return 0.5 * (x + np.swapaxes(x, 1, 2))


def random_spd(rng: np.random.Generator, n: int, low: float, high: float) -> np.ndarray:
    theta = rng.uniform(0.0, np.pi, n)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    eig = np.exp(rng.uniform(np.log(low), np.log(high), size=(n, 2)))
    return np.einsum("nik,nk,njk->nij", rot, eig, rot)


def _trace_g(reg: Regularization, arr: np.ndarray) -> np.ndarray:
    w, _ = sym_eigh(arr)
    return np.sum(np.asarray(reg.g(w)), axis=-1)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def lemma_suite(samples: int = 1000, seed: int = 0) -> PropertyResult:
    """Identities and inequalities of the regularized logarithm family, d in {2, 3}"""
    rng = np.random.default_rng(seed)
    ledger = _Ledger()
    for dim in (2, 3):
        eye = np.eye(dim)
        for delta in LEMMA_DELTAS:
            for cutoff in LEMMA_CUTOFFS:
                reg = Regularization(delta=delta, cutoff=cutoff)
                phi = random_symmetric(rng, samples, dim)
                psi = random_symmetric(rng, samples, dim)
                n_phi, n_psi = frobenius(phi), frobenius(psi)

                beta, gp = reg.beta_mat(phi), reg.g_prime_mat(phi)
                gp_psi = reg.g_prime_mat(psi)
                ledger.record(
                    "inverse_identity",
                    -frobenius(beta @ gp - eye),
                    TOLERANCES.inverse_identity,
                )
                ledger.record("dissipation", reg.dissipation_density(phi), TOLERANCES.reconstruction)
                entropy = reg.entropy_density(phi)
                ledger.record("entropy", entropy, TOLERANCES.reconstruction)
                ledger.record("relaxation", ddot(phi - beta, eye - gp) / (1.0 + n_phi))

                concavity = ddot(phi - psi, gp_psi) - (_trace_g(reg, phi) - _trace_g(reg, psi))
                ledger.record("concavity", concavity / (1.0 + n_phi + n_psi))

                dgp = gp - gp_psi
                monotone = -ddot(phi - psi, dgp) - delta**2 * ddot(dgp, dgp)
                ledger.record("strong_monotonicity", monotone / (1.0 + frobenius(phi - psi) * frobenius(dgp)))

                free = entropy + dim  # tr(phi - G(phi))
                ledger.record("entropy_norm", (free - 0.5 * n_phi) / (1.0 + n_phi))
                ledger.record(
                    "entropy_negative_part",
                    (free - frobenius(negative_part(phi)) / (2.0 * delta)) / (1.0 + n_phi / delta),
                )
                ledger.record("relaxation_norm", (ddot(phi, eye - gp) - 0.5 * n_phi + dim) / (1.0 + n_phi))

                lip_scale = 1.0 + frobenius(phi - psi)
                ledger.record(
                    "beta_lipschitz",
                    (frobenius(phi - psi) - frobenius(beta - reg.beta_mat(psi))) / lip_scale,
                )
                ledger.record(
                    "negative_part_lipschitz",
                    (frobenius(phi - psi) - frobenius(negative_part(phi) - negative_part(psi))) / lip_scale,
                )

                w, _ = sym_eigh(phi)
                abs_trace = np.sum(np.abs(w), axis=-1)
                sq = n_phi**2
                scale = 1.0 + abs_trace**2
                ledger.record("norm_sandwich_lower", (sq - abs_trace**2 / dim) / scale)
                ledger.record("norm_sandwich_upper", (abs_trace**2 - sq) / scale)

    # g(cI) = g(c) I exactly
    c = rng.uniform(-5.0, 5.0, samples)
    scalar = np.einsum("n,ij->nij", c, np.eye(2))
    reg = Regularization(delta=0.1, cutoff=10.0)
    exact = np.einsum("n,ij->nij", np.asarray(reg.g_prime(c)), np.eye(2))
    ledger.record("scalar_invariance", -np.max(np.abs(reg.g_prime_mat(scalar) - exact), axis=(1, 2)), 0.0)
    return ledger.result("lemma", samples * 2 * len(LEMMA_DELTAS) * len(LEMMA_CUTOFFS))


def _element_forms(
    k_local: np.ndarray, mesh: SimplicialMesh, g_values: np.ndarray, q_values: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Per element (int grad g . grad q, int |grad g|^2) for vertex values (nv,) or (nv, 3) packed"""
    weights = contraction_weights(2)
    g = g_values[mesh.elements]
    q = q_values[mesh.elements]
    if g.ndim == 2:
        cross = np.einsum("ka,kab,kb->k", g, k_local, q)
        square = np.einsum("ka,kab,kb->k", g, k_local, g)
    else:
        cross = np.einsum("c,kac,kab,kbc->k", weights, g, k_local, q)
        square = np.einsum("c,kac,kab,kbc->k", weights, g, k_local, g)
    return cross, square


def nonobtuse_suite(samples: int = 200, nx: int = 8, seed: int = 0, delta: float = 0.1) -> PropertyResult:
    """
    g_Lip grad pi_h[g(q)] . grad q >= |grad pi_h[g(q)]|^2 elementwise on non-obtuse meshes

    Tested with g = [.]_- (Lipschitz 1) and g = -G'_delta (Lipschitz delta^-2)
    for scalar and tensor P1 fields.
    """
    mesh = build_structured_mesh(nx, nx)
    audit = audit_mesh(mesh)
    if not audit.non_obtuse:
        raise InvalidInputError(f"{nx}x{nx} structured mesh is unexpectedly obtuse")
    k_local = p1_local_stiffness(mesh)
    reg = Regularization(delta=delta)
    scalar_fns: List[Tuple[str, Callable[[np.ndarray], np.ndarray], float]] = [
        ("negative_part", lambda s: np.minimum(s, 0.0), 1.0),
        ("minus_g_prime", lambda s: -np.asarray(reg.g_prime(s)), reg.g_prime_lipschitz),
    ]
    rng = np.random.default_rng(seed)
    ledger = _Ledger()
    for _ in range(samples):
        q = 2.0 * rng.standard_normal(mesh.n_vertices)
        sigma = random_symmetric(rng, mesh.n_vertices, 2)
        for name, fn, lip in scalar_fns:
            cross, square = _element_forms(k_local, mesh, fn(q), q)
            ledger.record(f"scalar_{name}", (lip * cross - square) / (1.0 + lip * np.abs(cross) + square))
            g_sigma = pack(sym_apply(sigma, fn))
            cross, square = _element_forms(k_local, mesh, g_sigma, pack(sigma))
            ledger.record(f"tensor_{name}", (lip * cross - square) / (1.0 + lip * np.abs(cross) + square))
    return ledger.result("nonobtuse", samples, mesh_elements=mesh.n_elements)


def lambda_chain_suite(samples: int = 200, nx: int = 8, seed: int = 0, delta: float = 0.1) -> PropertyResult:
    """Chain identity of the Lambda tensor and the range of its secant weights"""
    mesh = build_structured_mesh(nx, nx)
    rng = np.random.default_rng(seed)
    ledger = _Ledger()
    for cutoff in (10.0, None):
        reg = Regularization(delta=delta, cutoff=cutoff)
        for _ in range(samples):
            stress = StressFieldP1(mesh, pack(random_spd(rng, mesh.n_vertices, 0.2 * delta, 2.0 / delta)))
            ledger.record("chain_identity", -chain_identity_residual(mesh, stress, reg), TOLERANCES.lambda_chain)
            mats = stress.matrices[mesh.elements]
            lam = lambda_weight(mats[:, 1:], np.broadcast_to(mats[:, :1], mats[:, 1:].shape), reg)
            ledger.record("lambda_lower", lam, TOLERANCES.lambda_guard)
            ledger.record("lambda_upper", 1.0 - lam, TOLERANCES.lambda_guard)
    return ledger.result("lambda-chain", 2 * samples)


def lambda_gap(mesh: SimplicialMesh, field: Callable, reg: Regularization) -> Tuple[float, float]:
    """
    (||Lambda_{m,p} - beta(sigma) delta_{mp}||_{L2}, ||pi_h[beta(sigma)] - beta(sigma)||_{L2}^2)
    for the vertex interpolant of a smooth field
    """
    stress = StressFieldP1(mesh, pack(field(mesh.vertices)))
    lam = lambda_tensor(mesh, stress, reg)  # (ne, m, p, 2, 2)
    rule = triangle_rule(4)
    exact = reg.beta_mat(np.asarray(field(mesh.element_points(rule.barycentric))))  # (ne, nq, 2, 2)
    weights = mesh.areas[:, None] * rule.weights[None, :]
    eye = np.eye(2)
    diff = lam[:, None] - np.einsum("mp,kqab->kqmpab", eye, exact)
    gap = float(np.sqrt(np.einsum("kq,kqmpab,kqmpab->", weights, diff, diff)))
    beta_vertex = reg.beta_mat(stress.matrices)[mesh.elements]
    interp = np.einsum("qa,kaij->kqij", rule.barycentric, beta_vertex) - exact
    return gap, float(np.einsum("kq,kqij,kqij->", weights, interp, interp))


def lambda_slope_suite(
    sizes: Iterable[int] = (4, 8, 16, 32), seed: int = 7, delta: float = 0.1, min_order: float = 0.9
) -> PropertyResult:
    """Observed order in h of the Lambda consistency gap for a fixed smooth SPD field"""
    field = random_spd_stress(0.5, 2.0, seed)
    reg = Regularization(delta=delta)
    sizes = list(sizes)
    hs, gaps, interp = [], [], []
    for n in sizes:
        mesh = build_structured_mesh(n, n)
        gap, beta_gap = lambda_gap(mesh, field, reg)
        hs.append(mesh.h)
        gaps.append(gap)
        interp.append(beta_gap)
    order = float(np.polyfit(np.log(hs), np.log(gaps), 1)[0])
    ledger = _Ledger()
    ledger.record("order", np.array([order - min_order]), 0.0)
    return ledger.result(
        "lambda-slope", len(sizes), order=order, sizes=sizes, gaps=gaps, interpolation_gaps=interp
    )


def projection_spd_suite(samples: int = 50, nx: int = 8, seed: int = 0, dt0: float = 0.1) -> PropertyResult:
    """Vertex eigenvalues of the smoothed stress projection stay inside the data's range"""
    mesh = build_structured_mesh(nx, nx)
    rng = np.random.default_rng(seed)
    ledger = _Ledger()
    for i in range(samples):
        low = float(rng.uniform(0.2, 1.0))
        high = float(rng.uniform(low, 5.0))
        stress = project_stress(mesh, random_spd_stress(low, high, seed + i), dt0)
        eig = stress.eigenvalues()
        ledger.record("lower_bound", eig.min(axis=1) - low, TOLERANCES.reconstruction)
        ledger.record("upper_bound", high - eig.max(axis=1), TOLERANCES.reconstruction)
    identity = project_stress(mesh, lambda x: np.broadcast_to(np.eye(2), np.shape(x)[:-1] + (2, 2)), dt0)
    ledger.record(
        "identity", -np.abs(identity.entries - np.array([1.0, 0.0, 1.0])).ravel(), TOLERANCES.reconstruction
    )
    return ledger.result("projection-spd", samples)


def lumping_suite(samples: int = 100, sizes: Iterable[int] = (4, 8, 16), seed: int = 0) -> PropertyResult:
    """int |chi|^2 <= int pi_h[|chi|^2] <= (d + 2) int |chi|^2 for P1 chi, plus the unit-triangle values"""
    sizes = list(sizes)
    ledger = _Ledger()
    unit = SimplicialMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    q = np.array([1.0, 2.0, 3.0])
    lumped_unit = float(vertex_weights(unit) @ q**2)
    exact_unit = float(q @ (p1_mass(unit) @ q))
    ledger.record("unit_lumped", np.array([-abs(lumped_unit - 7.0 / 3.0)]), TOLERANCES.reconstruction)
    ledger.record("unit_exact", np.array([-abs(exact_unit - 25.0 / 12.0)]), TOLERANCES.reconstruction)

    rng = np.random.default_rng(seed)
    ratios = []
    for n in sizes:
        mesh = build_structured_mesh(n, n)
        mass = p1_mass(mesh)
        weights = vertex_weights(mesh)
        for _ in range(samples):
            q = rng.standard_normal(mesh.n_vertices)
            exact = float(q @ (mass @ q))
            lumped = float(weights @ q**2)
            ratios.append(lumped / exact)
            ledger.record("sandwich_lower", np.array([(lumped - exact) / (1.0 + exact)]))
            ledger.record("sandwich_upper", np.array([(4.0 * exact - lumped) / (1.0 + exact)]))
    constants = measure_inverse_constants(build_structured_mesh(4, 4))
    return ledger.result(
        "lumping",
        samples * len(sizes),
        unit_lumped=lumped_unit,
        unit_exact=exact_unit,
        max_ratio=max(ratios),
        **{f"inverse_{k}": v for k, v in constants.items()},
    )


SUITES: Dict[str, Callable[..., PropertyResult]] = {
    "lemma": lemma_suite,
    "nonobtuse": nonobtuse_suite,
    "lambda-chain": lambda_chain_suite,
    "lambda-slope": lambda_slope_suite,
    "projection-spd": projection_spd_suite,
    "lumping": lumping_suite,
}


def run_suite(name: str, **kwargs) -> PropertyResult:
    try:
        suite = SUITES[name]
    except KeyError:
        raise InvalidInputError(f"unknown property suite {name!r} (expected one of {', '.join(SUITES)})")
    result = suite(**kwargs)
    logger.info("suite %s: worst slack %.3e, %s", name, result.worst_slack, "pass" if result.passed else "FAIL")
    return result
