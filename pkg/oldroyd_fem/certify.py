"""
Aggregation of per-step energy audits into a run certificate
"""

import hashlib
import json
import logging
import math
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Tuple

from oldroyd_fem.models import EnergyBreakdown, RunCertificate
from oldroyd_fem.stepper import Trajectory
from oldroyd_fem.tensor import TOLERANCES

logger = logging.getLogger(__name__)

VERDICT_PASS = "pass"
VERDICT_FAIL = "fail"
VERDICT_INCOMPLETE = "incomplete"


def config_hash(config: Mapping[str, Any]) -> str:
    """sha256 of the canonical JSON form of a configuration mapping"""
    canonical = json.dumps(dict(config), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def cumulative_ledger(breakdowns: Sequence[EnergyBreakdown]) -> Tuple[float, float]:
    """
    Cumulative form of the energy inequality over a run

    Returns (residual, gap). The residual is
    F^N - F^0 + sum dt_n (dissipation terms)_n - sum dt_n <f^n, u^n>, which
    is non-positive for a stable run. The gap compares it against
    -sum dt_n slack_n; the two agree up to roundoff when every step's
    previous energy is the energy reported by the step before.
    """
    if not breakdowns:
        return 0.0, 0.0
    dissipated = 0.0
    forcing = 0.0
    weighted_slack = 0.0
    for b in breakdowns:
        dissipated += b.dt * (
            b.velocity_increment + b.visc_dissipation + b.stress_dissipation + b.diffusion_dissipation
        )
        forcing += b.dt * b.forcing_pairing
        weighted_slack += b.dt * b.slack
    residual = breakdowns[-1].total - breakdowns[0].previous_total + dissipated - forcing
    return residual, abs(residual + weighted_slack)


def certify(
    trajectory: Trajectory,
    audit_tol: float = TOLERANCES.audit,
    config_digest: str = "",
    breakdowns: Optional[Sequence[EnergyBreakdown]] = None,
) -> RunCertificate:
    """
    Verdict on a run: pass iff it is complete and every slack is >= -audit_tol

    ``breakdowns`` replaces the trajectory's own audits, so a recomputed or
    tampered ledger can be judged against the same run.
    """
    audits = list(trajectory.breakdowns if breakdowns is None else breakdowns)
    slacks = [b.slack for b in audits]
    min_slack = min(slacks) if slacks else 0.0
    residual, gap = cumulative_ledger(audits)

    failed = [b.step for b in audits if not b.passes(audit_tol)]
    if trajectory.failure is not None and trajectory.failure.step is not None:
        failed.append(int(trajectory.failure.step))

    initial = trajectory.states[0].min_eigenvalue() if trajectory.states else math.nan
    timeline = [initial] + [b.min_eig_stress for b in audits]

    complete = trajectory.complete and len(audits) == trajectory.grid.n_steps
    if not complete:
        verdict = VERDICT_INCOMPLETE
    elif failed:
        verdict = VERDICT_FAIL
    else:
        verdict = VERDICT_PASS

    certificate = RunCertificate(
        scheme=trajectory.scheme,
        config_hash=config_digest,
        slacks=slacks,
        min_slack=min_slack,
        cumulative_residual=residual,
        ledger_gap=gap,
        min_eig_timeline=timeline,
        converged_steps=len(audits),
        total_steps=trajectory.grid.n_steps,
        complete=complete,
        audit_tol=audit_tol,
        verdict=verdict,
        failed_steps=sorted(set(failed)),
    )
    logger.info(
        "certificate for %s: %s (min slack %.3e over %d/%d steps)",
        certificate.scheme, verdict, min_slack, certificate.converged_steps, certificate.total_steps,
    )
    return certificate


def format_value(value: Any) -> str:
    """Floats with 17 significant digits, sequences comma separated"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, dict):
        return ", ".join(f"{k}: {format_value(v)}" for k, v in value.items())
    if value is None:
        return "none"
    return str(value)


def certificate_lines(items: Iterable[Tuple[str, Any]]) -> List[str]:
    return [f"{key} = {format_value(value)}" for key, value in items]


def format_certificate(certificate: RunCertificate) -> str:
    return "\n".join(certificate_lines(certificate.to_dict().items())) + "\n"
