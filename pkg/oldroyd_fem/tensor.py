"""
Symmetric matrix calculus and the regularized logarithm family

Scalar functions act on matrices spectrally: g(phi) = O^T g(D) O for any
diagonal decomposition phi = O^T D O. The regularizations are

    G_a^b(s) = s / c + ln c - 1,  c = min(max(s, a), b)

with an absent knot meaning "no clamp on that side". G_delta^(L) uses the
knots (delta, L), beta_delta^(L) = 1 / G' is the clamp itself and
H_delta^(L) is G with the knots (1/L, 1/delta), so that H'(G'(s)) = beta(s).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from oldroyd_fem.errors import DomainError, InvalidInputError
from oldroyd_fem.models import RegParams

logger = logging.getLogger(__name__)

Scalar = Union[float, np.ndarray]


@dataclass(frozen=True)
class Tolerances:
    """Every numerical tolerance the audits and tests compare against"""

    orthogonality: float = 1e-13
    reconstruction: float = 1e-12
    inverse_identity: float = 1e-12
    inequality: float = 1e-10
    lambda_chain: float = 1e-10
    lambda_guard: float = 1e-12
    right_angle: float = 1e-12
    unit_normal: float = 1e-14
    divfree: float = 1e-11
    solve_residual: float = 1e-11
    telescoping: float = 1e-10
    audit: float = 1e-9


TOLERANCES = Tolerances()


# ---------------------------------------------------------------------------
# Symmetric matrices
# ---------------------------------------------------------------------------


def packed_size(dim: int) -> int:
    return dim * (dim + 1) // 2


def upper_indices(dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row-major upper triangle: (00, 01, 11) in 2D"""
    return np.triu_indices(dim)


def contraction_weights(dim: int) -> np.ndarray:
    """Weights turning a packed dot product into the Frobenius product ':'"""
    rows, cols = upper_indices(dim)
    return np.where(rows == cols, 1.0, 2.0)


def pack(arr: np.ndarray) -> np.ndarray:
    """(..., d, d) symmetric arrays -> (..., d(d+1)/2) packed upper triangles"""
    arr = np.asarray(arr, dtype=float)
    rows, cols = upper_indices(arr.shape[-1])
    return arr[..., rows, cols]


def unpack(packed: np.ndarray, dim: int) -> np.ndarray:
    packed = np.asarray(packed, dtype=float)
    rows, cols = upper_indices(dim)
    out = np.zeros(packed.shape[:-1] + (dim, dim))
    out[..., rows, cols] = packed
    out[..., cols, rows] = packed
    return out


@dataclass(frozen=True)
class SymMat:
    """A small symmetric matrix stored as its packed upper triangle"""

    dim: int
    entries: Tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidInputError(f"SymMat dimension must be 2 or 3, got {self.dim}")
        entries = tuple(float(x) for x in self.entries)
        if len(entries) != packed_size(self.dim):
            raise InvalidInputError(
                f"a {self.dim}x{self.dim} SymMat needs {packed_size(self.dim)} entries, "
                f"got {len(entries)}"
            )
        if not all(math.isfinite(x) for x in entries):
            raise InvalidInputError(f"SymMat entries must be finite, got {entries}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SymMat":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidInputError(f"expected a square matrix, got shape {arr.shape}")
        sym = 0.5 * (arr + arr.T)
        return cls(arr.shape[0], tuple(pack(sym)))

    @classmethod
    def identity(cls, dim: int = 2) -> "SymMat":
        return cls.from_array(np.eye(dim))

    @classmethod
    def diag(cls, values: Sequence[float]) -> "SymMat":
        return cls.from_array(np.diag(np.asarray(values, dtype=float)))

    def to_array(self) -> np.ndarray:
        return unpack(np.array(self.entries), self.dim)

    @property
    def trace(self) -> float:
        return float(np.trace(self.to_array()))

    def ddot(self, other: "SymMat") -> float:
        """Frobenius inner product phi : psi"""
        return float(np.sum(self.to_array() * other.to_array()))

    def norm(self) -> float:
        return math.sqrt(self.ddot(self))

    def __add__(self, other: "SymMat") -> "SymMat":
        return SymMat.from_array(self.to_array() + other.to_array())

    def __sub__(self, other: "SymMat") -> "SymMat":
        return SymMat.from_array(self.to_array() - other.to_array())

    def __mul__(self, scale: float) -> "SymMat":
        return SymMat(self.dim, tuple(scale * x for x in self.entries))

    __rmul__ = __mul__

    def __neg__(self) -> "SymMat":
        return self * -1.0


@dataclass(frozen=True)
class SpectralPair:
    """phi = O^T D O with orthogonal O (rows are eigenvectors)"""

    rotation: np.ndarray
    eigenvalues: Tuple[float, ...]

    def reconstruct(self) -> np.ndarray:
        o = self.rotation
        return o.T @ np.diag(self.eigenvalues) @ o


def _as_array(phi: Union[SymMat, np.ndarray]) -> np.ndarray:
    if isinstance(phi, SymMat):
        return phi.to_array()
    arr = np.asarray(phi, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {arr.shape}")
    return 0.5 * (arr + arr.T)


def sym_eigh(arr: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched eigendecomposition arr = V diag(w) V^T of (..., d, d) symmetric arrays

    Exactly diagonal matrices bypass LAPACK so that g(cI) = g(c) I holds bitwise.
    Eigenvalues of diagonal inputs keep their diagonal order.
    """
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("matrix entries must be finite")
    w, v = np.linalg.eigh(arr)
    dim = arr.shape[-1]
    off = arr * (1.0 - np.eye(dim))
    diagonal = np.all(off == 0.0, axis=(-2, -1))
    if np.any(diagonal):
        w[diagonal] = np.diagonal(arr, axis1=-2, axis2=-1)[diagonal]
        v[diagonal] = np.eye(dim)
    return w, v


def sym_compose(v: np.ndarray, values: np.ndarray) -> np.ndarray:
    """V diag(values) V^T, symmetrized"""
    out = np.einsum("...ik,...k,...jk->...ij", v, values, v)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def sym_apply(arr: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    w, v = sym_eigh(arr)
    return sym_compose(v, fn(w))


def ddot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ij->...", a, b)


def frobenius(a: np.ndarray) -> np.ndarray:
    return np.sqrt(ddot(a, a))


def negative_part(arr: np.ndarray) -> np.ndarray:
    """[phi]_- = phi with its positive eigenvalues zeroed"""
    return sym_apply(arr, lambda w: np.minimum(w, 0.0))


def spectral_decompose(phi: Union[SymMat, np.ndarray]) -> SpectralPair:
    arr = _as_array(phi)
    w, v = sym_eigh(arr)
    order = np.argsort(w, kind="stable")
    w = w[order]
    rotation = v[:, order].T
    return SpectralPair(rotation=rotation, eigenvalues=tuple(float(x) for x in w))


def matrix_fn(phi: Union[SymMat, np.ndarray], g: Callable[[np.ndarray], Scalar]) -> SymMat:
    """Apply the scalar function g spectrally: g(phi) = O^T g(D) O"""
    arr = _as_array(phi)
    pair = spectral_decompose(arr)
    lam = np.array(pair.eigenvalues)
    values = np.asarray(g(lam), dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        offending = float(lam[bad][0])
        raise DomainError(f"function undefined at eigenvalue {offending!r}", value=offending)
    o = pair.rotation
    out = o.T @ np.diag(values) @ o
    return SymMat.from_array(out)


# ---------------------------------------------------------------------------
# The regularized logarithm family
# ---------------------------------------------------------------------------


def _clamp(s: Scalar, lower: Optional[float], upper: Optional[float], name: str) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if lower is None:
        if np.any(~(s > 0.0)):
            offending = float(np.atleast_1d(s)[np.atleast_1d(~(s > 0.0))][0])
            raise DomainError(
                f"{name} is only defined for positive arguments, got eigenvalue {offending!r}",
                value=offending,
            )
        c = s
    else:
        c = np.maximum(s, lower)
    if upper is not None:
        c = np.minimum(c, upper)
    return c


def _log_knotted(s: Scalar, lower: Optional[float], upper: Optional[float], name: str) -> Scalar:
    s_arr = np.asarray(s, dtype=float)
    c = _clamp(s_arr, lower, upper, name)
    interior = c == s_arr
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(interior, np.log(np.where(interior, s_arr, 1.0)), s_arr / c + np.log(c) - 1.0)
    return _like(s, value)


def _like(template: Scalar, value: np.ndarray) -> Scalar:
    if np.ndim(template) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class Regularization:
    """
    The functions G, G', beta, H of one regularization regime

    ``delta`` is the lower knot (None for the unregularized limit, whose
    functions are only defined on positive arguments) and ``cutoff`` the
    optional upper knot L.
    """

    delta: Optional[float] = None
    cutoff: Optional[float] = None

    @classmethod
    def from_params(cls, params: RegParams) -> "Regularization":
        return cls(delta=params.delta, cutoff=params.cutoff)

    @classmethod
    def unregularized(cls, cutoff: Optional[float] = None) -> "Regularization":
        return cls(delta=None, cutoff=cutoff)

    @property
    def regularized(self) -> bool:
        return self.delta is not None

    @property
    def label(self) -> str:
        parts = [f"delta={self.delta}" if self.regularized else "unregularized"]
        if self.cutoff is not None:
            parts.append(f"L={self.cutoff}")
        return ", ".join(parts)

    def beta(self, s: Scalar) -> Scalar:
        return _like(s, _clamp(s, self.delta, self.cutoff, "beta"))

    def g(self, s: Scalar) -> Scalar:
        return _log_knotted(s, self.delta, self.cutoff, "G")

    def g_prime(self, s: Scalar) -> Scalar:
        return _like(s, 1.0 / _clamp(s, self.delta, self.cutoff, "G'"))

    @property
    def _h_knots(self) -> Tuple[Optional[float], Optional[float]]:
        lower = None if self.cutoff is None else 1.0 / self.cutoff
        upper = None if self.delta is None else 1.0 / self.delta
        return lower, upper

    def h(self, y: Scalar) -> Scalar:
        lower, upper = self._h_knots
        return _log_knotted(y, lower, upper, "H")

    def h_prime(self, y: Scalar) -> Scalar:
        lower, upper = self._h_knots
        return _like(y, 1.0 / _clamp(y, lower, upper, "H'"))

    @property
    def g_prime_lipschitz(self) -> float:
        """Lipschitz constant of -G' (1/delta^2), infinite without regularization"""
        return math.inf if self.delta is None else self.delta**-2

    # batched matrix versions -------------------------------------------------

    def beta_mat(self, arr: np.ndarray) -> np.ndarray:
        return sym_apply(arr, self.beta)

    def g_prime_mat(self, arr: np.ndarray) -> np.ndarray:
        return sym_apply(arr, self.g_prime)

    def entropy_density(self, arr: np.ndarray) -> np.ndarray:
        """tr(phi - G(phi) - I) for a batch of matrices"""
        w, _ = sym_eigh(arr)
        return np.sum(w - np.asarray(self.g(w)) - 1.0, axis=-1)

    def dissipation_density(self, arr: np.ndarray) -> np.ndarray:
        """tr(beta(phi) + beta(phi)^{-1} - 2I)"""
        w, _ = sym_eigh(arr)
        b = np.asarray(self.beta(w))
        return np.sum(b + 1.0 / b - 2.0, axis=-1)

    def trace_h_of_g_prime(self, arr: np.ndarray) -> np.ndarray:
        """tr H(G'(phi)), computed eigenvalue by eigenvalue"""
        w, _ = sym_eigh(arr)
        return np.sum(np.asarray(self.h(np.asarray(self.g_prime(w)))), axis=-1)


def as_regularization(p: Union[RegParams, Regularization]) -> Regularization:
    if isinstance(p, Regularization):
        return p
    return Regularization.from_params(p)


# Scalar entry points ----------------------------------------------------------


def g_reg(s: Scalar, p: Union[RegParams, Regularization], derivative: bool = False) -> Scalar:
    """G_delta or G_delta^L (or its derivative 1 / beta)"""
    reg = as_regularization(p)
    return reg.g_prime(s) if derivative else reg.g(s)


def g_reg_prime(s: Scalar, p: Union[RegParams, Regularization]) -> Scalar:
    return as_regularization(p).g_prime(s)


def beta_reg(s: Scalar, p: Union[RegParams, Regularization]) -> Scalar:
    return as_regularization(p).beta(s)


def h_reg(y: Scalar, p: Union[RegParams, Regularization], derivative: bool = False) -> Scalar:
    reg = as_regularization(p)
    return reg.h_prime(y) if derivative else reg.h(y)


def entropy_trace(phi: Union[SymMat, np.ndarray], p: Union[RegParams, Regularization]) -> float:
    """tr(phi - G(phi) - I) >= 0"""
    reg = as_regularization(p)
    lam = np.array(spectral_decompose(phi).eigenvalues)
    return float(np.sum(lam - np.asarray(reg.g(lam)) - 1.0))


def negative_part_scalar(s: Scalar) -> Scalar:
    return _like(s, np.minimum(np.asarray(s, dtype=float), 0.0))
