"""
Quadrature rules on the reference triangle and on facets

Triangle rules are stored in barycentric coordinates with weights that sum
to one, so that the integral over an element K is |K| * sum_q w_q f(x_q).
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from oldroyd_fem.errors import InvalidInputError

MAX_DEGREE = 6


@dataclass(frozen=True)
class TriangleRule:
    degree: int
    barycentric: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,)

    @property
    def size(self) -> int:
        return len(self.weights)


def _orbit3(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


def _orbit6(a: float, b: float) -> np.ndarray:
    c = 1.0 - a - b
    return np.array([[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]])


def _build_rules() -> Dict[int, TriangleRule]:
    rules = {}

    rules[1] = TriangleRule(1, np.array([[1.0 / 3.0] * 3]), np.array([1.0]))

    rules[2] = TriangleRule(2, _orbit3(1.0 / 6.0), np.full(3, 1.0 / 3.0))

    # Degree 4 (Dunavant, 6 points); also serves requests for degree 3 since
    # the 4-point degree-3 rule carries a negative weight.
    a4 = 0.445948490915965
    b4 = 0.091576213509771
    rule4 = TriangleRule(
        4,
        np.vstack([_orbit3(a4), _orbit3(b4)]),
        np.concatenate([np.full(3, 0.223381589678011), np.full(3, 0.109951743655322)]),
    )
    rules[3] = rule4
    rules[4] = rule4

    s15 = math.sqrt(15.0)
    a5 = (6.0 - s15) / 21.0
    b5 = (6.0 + s15) / 21.0
    rules[5] = TriangleRule(
        5,
        np.vstack([[[1.0 / 3.0] * 3], _orbit3(a5), _orbit3(b5)]),
        np.concatenate(
            [[9.0 / 40.0], np.full(3, (155.0 - s15) / 1200.0), np.full(3, (155.0 + s15) / 1200.0)]
        ),
    )

    rules[6] = TriangleRule(
        6,
        np.vstack(
            [
                _orbit3(0.249286745170910),
                _orbit3(0.063089014491502),
                _orbit6(0.053145049844817, 0.310352451033784),
            ]
        ),
        np.concatenate(
            [
                np.full(3, 0.116786275726379),
                np.full(3, 0.050844906370207),
                np.full(6, 0.082851075618374),
            ]
        ),
    )
    return rules


_RULES = _build_rules()

# Vertex sampling: the lumping rule behind every pi_h[...] term.
VERTEX_RULE = TriangleRule(1, np.eye(3), np.full(3, 1.0 / 3.0))


def triangle_rule(degree: int) -> TriangleRule:
    if degree < 0 or degree > MAX_DEGREE:
        raise InvalidInputError(
            f"unsupported quadrature degree {degree} (supported: 0..{MAX_DEGREE})"
        )
    return _RULES[max(degree, 1)]


@dataclass(frozen=True)
class LineRule:
    points: np.ndarray  # parameters in [0, 1]
    weights: np.ndarray  # sum to one


def gauss_line(npoints: int = 2) -> LineRule:
    """Gauss-Legendre on [0, 1]; two points are exact to degree 3"""
    x, w = np.polynomial.legendre.leggauss(npoints)
    return LineRule(points=0.5 * (x + 1.0), weights=0.5 * w)


FACET_RULE = gauss_line(2)
TIME_RULE = gauss_line(2)


def quadrature_integral(
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
    element: np.ndarray,
    degree: int,
) -> float:
    """
    Integrate integrand(x, y) over one triangle given by its (3, 2) vertex array

    The rule is exact for polynomials up to ``degree``.
    """
    rule = triangle_rule(degree)
    vertices = np.asarray(element, dtype=float)
    if vertices.shape != (3, 2):
        raise InvalidInputError(f"element must be a (3, 2) vertex array, got {vertices.shape}")
    e1 = vertices[1] - vertices[0]
    e2 = vertices[2] - vertices[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    points = rule.barycentric @ vertices
    values = np.asarray(integrand(points[:, 0], points[:, 1]), dtype=float)
    values = np.broadcast_to(values, rule.weights.shape)
    return float(area * np.dot(rule.weights, values))
