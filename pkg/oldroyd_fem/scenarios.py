"""
Initial conditions and body forces selectable from a run configuration
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from oldroyd_fem.errors import InvalidInputError

logger = logging.getLogger(__name__)

Domain = Sequence[float]  # (x0, x1, y0, y1)
UNIT_SQUARE = (0.0, 1.0, 0.0, 1.0)

INITIAL_CONDITIONS = ("equilibrium", "random-spd", "lid-driven-cavity")
FORCINGS = ("zero", "constant", "cavity-lid")


@dataclass(frozen=True)
class InitialCondition:
    """u^0 (None for rest) and sigma^0 as callables of points (..., 2)"""

    name: str
    velocity: Optional[Callable[[np.ndarray], np.ndarray]]
    stress: Callable[[np.ndarray], np.ndarray]
    lambda_min: float = 1.0
    lambda_max: float = 1.0


def identity_stress(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return np.broadcast_to(np.eye(2), points.shape[:-1] + (2, 2)).copy()


def random_spd_stress(
    lambda_min: float, lambda_max: float, seed: int = 0
) -> Callable[[np.ndarray], np.ndarray]:
    """
    A smooth SPD field with every eigenvalue in [lambda_min, lambda_max]

    Eigenvalues and the eigenframe angle are random low-frequency sinusoids,
    so the field is reproducible from the seed alone.
    """
    if not 0.0 < lambda_min <= lambda_max:
        raise InvalidInputError(
            f"need 0 < lambda_min <= lambda_max, got ({lambda_min}, {lambda_max})"
        )
    rng = np.random.default_rng(seed)
    freq = rng.uniform(0.5, 3.0, size=(3, 2))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=3)

    def field(points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        waves = np.sin(np.einsum("...i,ji->...j", x, freq) + phase)  # (..., 3)
        eig = lambda_min + (lambda_max - lambda_min) * 0.5 * (1.0 + waves[..., :2])
        theta = np.pi * waves[..., 2]
        c, s = np.cos(theta), np.sin(theta)
        rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
        return np.einsum("...ik,...k,...jk->...ij", rot, eig, rot)

    return field


def equilibrium() -> InitialCondition:
    return InitialCondition("equilibrium", None, identity_stress)


def random_spd(lambda_min: float, lambda_max: float, seed: int = 0) -> InitialCondition:
    return InitialCondition(
        "random-spd", None, random_spd_stress(lambda_min, lambda_max, seed), lambda_min, lambda_max
    )


def lid_driven_cavity() -> InitialCondition:
    """Fluid at rest with sigma^0 = I; the flow is driven by the cavity-lid body force"""
    return InitialCondition("lid-driven-cavity", None, identity_stress)


def make_initial(
    name: str, lambda_min: float = 0.5, lambda_max: float = 2.0, seed: int = 0
) -> InitialCondition:
    if name == "equilibrium":
        return equilibrium()
    if name == "random-spd":
        return random_spd(lambda_min, lambda_max, seed)
    if name == "lid-driven-cavity":
        return lid_driven_cavity()
    raise InvalidInputError(
        f"unknown initial condition {name!r} (expected one of {', '.join(INITIAL_CONDITIONS)})"
    )


# ---------------------------------------------------------------------------
# Body forces f(t, points) -> (..., 2)
# ---------------------------------------------------------------------------


def constant_force(amplitude: float) -> Callable[[float, np.ndarray], np.ndarray]:
    def force(t: float, points: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(points))
        out[..., 0] = amplitude
        return out

    return force


def cavity_lid_force(
    amplitude: float, domain: Domain = UNIT_SQUARE
) -> Callable[[float, np.ndarray], np.ndarray]:
    """A (16 xi^2 (1 - xi)^2 eta^4, 0) in domain-scaled coordinates (xi, eta)"""
    x0, x1, y0, y1 = domain

    def force(t: float, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        xi = (p[..., 0] - x0) / (x1 - x0)
        eta = (p[..., 1] - y0) / (y1 - y0)
        out = np.zeros(p.shape)
        out[..., 0] = amplitude * 16.0 * xi**2 * (1.0 - xi) ** 2 * eta**4
        return out

    return force


def make_forcing(
    name: str, amplitude: float = 1.0, domain: Domain = UNIT_SQUARE
) -> Optional[Callable[[float, np.ndarray], np.ndarray]]:
    """None stands for f = 0, which skips load assembly entirely"""
    if name == "zero":
        return None
    if name == "constant":
        return constant_force(amplitude)
    if name == "cavity-lid":
        return cavity_lid_force(amplitude, domain)
    raise InvalidInputError(f"unknown forcing {name!r} (expected one of {', '.join(FORCINGS)})")
