"""
Data models for oldroyd-fem with type hints
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from oldroyd_fem.errors import InvalidInputError


@dataclass(frozen=True)
class RegParams:
    """Regularization knobs: lower knot delta and optional cut-off L"""

    delta: float
    cutoff: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.delta <= 0.5):
            raise InvalidInputError(f"delta must lie in (0, 1/2], got {self.delta}")
        if self.cutoff is not None and not self.cutoff >= 2.0:
            raise InvalidInputError(f"cutoff L must satisfy L >= 2, got {self.cutoff}")

    def to_dict(self) -> Dict[str, Any]:
        return {"delta": self.delta, "cutoff": self.cutoff}


@dataclass(frozen=True)
class FluidParams:
    """Physical parameters of the Oldroyd-B model"""

    reynolds: float = 1.0
    weissenberg: float = 1.0
    viscosity_fraction: float = 0.5
    diffusion: float = 0.0

    def __post_init__(self):
        if not self.reynolds > 0.0:
            raise InvalidInputError(f"Re must be positive, got {self.reynolds}")
        if not self.weissenberg > 0.0:
            raise InvalidInputError(f"Wi must be positive, got {self.weissenberg}")
        if not (0.0 < self.viscosity_fraction < 1.0):
            raise InvalidInputError(
                f"viscosity fraction eps must lie in (0, 1), got {self.viscosity_fraction}"
            )
        if not self.diffusion >= 0.0:
            raise InvalidInputError(f"diffusion alpha must be >= 0, got {self.diffusion}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "re": self.reynolds,
            "wi": self.weissenberg,
            "eps": self.viscosity_fraction,
            "alpha": self.diffusion,
        }


@dataclass(frozen=True)
class SolverOpts:
    """Options of the damped Picard step solver"""

    tol: float = 1e-10
    max_iter: int = 200
    audit_tol: float = 1e-9
    min_damping: float = 2.0**-12
    accelerate: bool = True
    parallel_assembly: bool = False

    def __post_init__(self):
        if not self.tol > 0.0:
            raise InvalidInputError(f"solver tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidInputError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.audit_tol >= 0.0:
            raise InvalidInputError(f"audit_tol must be >= 0, got {self.audit_tol}")
        if not (0.0 < self.min_damping <= 1.0):
            raise InvalidInputError(f"min_damping must lie in (0, 1], got {self.min_damping}")


@dataclass
class MeshAudit:
    """Certification of the mesh hypotheses"""

    max_shape_ratio: float
    quasi_uniformity: float
    non_obtuse: bool
    violations: List[Tuple[int, float]]
    max_angle: float
    min_angle: float
    h: float
    boundary_only_elements: List[int] = field(default_factory=list)

    @property
    def taylor_hood_ok(self) -> bool:
        """Every element has at least one vertex inside the domain"""
        return not self.boundary_only_elements

    def to_dict(self) -> Dict[str, Any]:
        return {
            "max_shape_ratio": self.max_shape_ratio,
            "quasi_uniformity": self.quasi_uniformity,
            "non_obtuse": self.non_obtuse,
            "violations": [[k, a] for k, a in self.violations],
            "max_angle": self.max_angle,
            "min_angle": self.min_angle,
            "h": self.h,
            "boundary_only_elements": list(self.boundary_only_elements),
            "taylor_hood_ok": self.taylor_hood_ok,
        }


@dataclass
class EnergyBreakdown:
    """Terms of the discrete free-energy inequality for one time step"""

    step: int
    time: float
    dt: float
    total: float
    kinetic: float
    entropy: float
    previous_total: float
    velocity_increment: float
    visc_dissipation: float
    stress_dissipation: float
    diffusion_dissipation: float
    forcing_pairing: float
    slack: float
    transport_identity: float = 0.0
    convection_skew: float = 0.0
    negative_part: float = 0.0
    min_eig_stress: float = math.nan
    iterations: int = 0
    residual_norm: float = 0.0
    in_analyzed_regime: bool = True

    @property
    def left_side(self) -> float:
        """Everything the inequality bounds by the forcing pairing"""
        return (
            (self.total - self.previous_total) / self.dt
            + self.velocity_increment
            + self.visc_dissipation
            + self.stress_dissipation
            + self.diffusion_dissipation
        )

    def recompute_slack(self) -> float:
        return self.forcing_pairing - self.left_side

    def passes(self, audit_tol: float) -> bool:
        return self.slack >= -audit_tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "time": self.time,
            "dt": self.dt,
            "total": self.total,
            "kinetic": self.kinetic,
            "entropy": self.entropy,
            "previous_total": self.previous_total,
            "velocity_increment": self.velocity_increment,
            "visc_dissipation": self.visc_dissipation,
            "stress_dissipation": self.stress_dissipation,
            "diffusion_dissipation": self.diffusion_dissipation,
            "forcing_pairing": self.forcing_pairing,
            "slack": self.slack,
            "transport_identity": self.transport_identity,
            "convection_skew": self.convection_skew,
            "negative_part": self.negative_part,
            "min_eig_stress": self.min_eig_stress,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "in_analyzed_regime": self.in_analyzed_regime,
        }


@dataclass
class RunCertificate:
    """Aggregated verdict on the energy audits of one run"""

    scheme: str
    config_hash: str
    slacks: List[float]
    min_slack: float
    cumulative_residual: float
    ledger_gap: float
    min_eig_timeline: List[float]
    converged_steps: int
    total_steps: int
    complete: bool
    audit_tol: float
    verdict: str
    failed_steps: List[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme,
            "config_hash": self.config_hash,
            "slacks": list(self.slacks),
            "min_slack": self.min_slack,
            "cumulative_residual": self.cumulative_residual,
            "ledger_gap": self.ledger_gap,
            "min_eig_timeline": list(self.min_eig_timeline),
            "converged_steps": self.converged_steps,
            "total_steps": self.total_steps,
            "complete": self.complete,
            "audit_tol": self.audit_tol,
            "verdict": self.verdict,
            "failed_steps": list(self.failed_steps),
        }


@dataclass
class ContinuationReport:
    """Diagnostics of a delta -> 0 continuation"""

    scheme: str
    deltas: List[float]
    final_energies: List[float]
    negative_parts: List[float]
    min_eigenvalues: List[float]
    state_differences: List[float]
    unregularized_residual: float
    failures: Dict[float, str] = field(default_factory=dict)
    final_states: List[Any] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme,
            "deltas": list(self.deltas),
            "final_energies": list(self.final_energies),
            "negative_parts": list(self.negative_parts),
            "min_eigenvalues": list(self.min_eigenvalues),
            "state_differences": list(self.state_differences),
            "unregularized_residual": self.unregularized_residual,
            "failures": {str(k): v for k, v in self.failures.items()},
        }


@dataclass
class PropertyResult:
    """Outcome of one named property suite"""

    name: str
    samples: int
    worst_slack: float
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suite": self.name,
            "samples": self.samples,
            "worst_slack": self.worst_slack,
            "passed": self.passed,
            **self.details,
        }


@dataclass
class RunSummary:
    """Everything one CLI run produced, for the JSON and HTML reports"""

    config: Dict[str, Any]
    certificate: RunCertificate
    breakdowns: List[EnergyBreakdown] = field(default_factory=list)
    mesh_audit: Optional[MeshAudit] = None
    continuation: Optional[ContinuationReport] = None
    failure: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": dict(self.config),
            "certificate": self.certificate.to_dict(),
            "steps": [b.to_dict() for b in self.breakdowns],
            "mesh_audit": self.mesh_audit.to_dict() if self.mesh_audit else None,
            "continuation": self.continuation.to_dict() if self.continuation else None,
            "failure": self.failure,
        }
