"""
Tests for the symmetric matrix helpers and the regularized logarithm family
"""

import math

import numpy as np
import pytest

from oldroyd_fem.errors import DomainError, InvalidInputError
from oldroyd_fem.models import RegParams
from oldroyd_fem.tensor import (
    TOLERANCES,
    Regularization,
    SymMat,
    beta_reg,
    entropy_trace,
    g_reg,
    h_reg,
    matrix_fn,
    negative_part,
    pack,
    spectral_decompose,
    sym_eigh,
    unpack,
)


class TestSymMat:
    def test_pack_order_is_xx_xy_yy(self):
        arr = np.array([[1.0, 2.0], [2.0, 3.0]])
        assert pack(arr).tolist() == [1.0, 2.0, 3.0]
        assert np.array_equal(unpack(pack(arr), 2), arr)

    def test_from_array_symmetrizes(self):
        m = SymMat.from_array(np.array([[1.0, 1.0], [3.0, 2.0]]))
        assert m.entries == (1.0, 2.0, 2.0)

    def test_wrong_entry_count_rejected(self):
        with pytest.raises(InvalidInputError):
            SymMat(2, (1.0, 2.0))

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            SymMat(2, (1.0, math.nan, 1.0))

    def test_arithmetic_and_inner_product(self):
        a = SymMat.diag([1.0, 2.0])
        b = SymMat.identity()
        assert (a + b).entries == (2.0, 0.0, 3.0)
        assert (a - b).entries == (0.0, 0.0, 1.0)
        assert (2.0 * a).entries == (2.0, 0.0, 4.0)
        assert a.ddot(b) == 3.0
        assert a.trace == 3.0


class TestSpectral:
    def test_decomposition_is_orthogonal_and_reconstructs(self, rng):
        for _ in range(50):
            x = rng.standard_normal((2, 2))
            phi = x + x.T
            pair = spectral_decompose(phi)
            o = pair.rotation
            assert np.max(np.abs(o @ o.T - np.eye(2))) <= TOLERANCES.orthogonality * 10
            scale = max(1.0, np.max(np.abs(phi)))
            assert np.max(np.abs(pair.reconstruct() - phi)) <= TOLERANCES.reconstruction * scale

    def test_matrix_sqrt_of_diagonal(self):
        root = matrix_fn(SymMat.diag([4.0, 9.0]), np.sqrt)
        assert np.allclose(root.to_array(), np.diag([2.0, 3.0]), atol=1e-14)

    def test_function_of_scaled_identity_is_exact(self):
        reg = Regularization(delta=0.1)
        out = reg.g_prime_mat(np.array([3.0 * np.eye(2)]))[0]
        assert out[0, 0] == 1.0 / 3.0
        assert out[0, 1] == 0.0

    def test_undefined_values_raise_domain_error(self):
        with pytest.raises(DomainError) as info:
            matrix_fn(SymMat.diag([-1.0, 2.0]), np.log)
        assert info.value.value == -1.0

    def test_batched_eigenvalues(self):
        w, _ = sym_eigh(np.array([np.diag([2.0, 1.0]), [[2.0, 1.0], [1.0, 2.0]]]))
        assert w[0].tolist() == [2.0, 1.0]
        assert np.allclose(w[1], [1.0, 3.0])

    def test_negative_part_keeps_negative_eigenvalues(self):
        out = negative_part(np.array([np.diag([-2.0, 3.0])]))[0]
        assert np.allclose(out, np.diag([-2.0, 0.0]))


class TestRegularizedFunctions:
    def test_g_below_delta_is_linearized(self):
        assert g_reg(0.25, RegParams(0.5)) == pytest.approx(0.5 - math.log(2.0) - 1.0, abs=1e-15)
        assert g_reg(0.25, RegParams(0.5)) == pytest.approx(-1.1931471805599454, abs=1e-15)

    def test_g_matches_log_above_delta(self):
        assert g_reg(2.0, RegParams(0.5)) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_g_derivative_is_reciprocal_beta(self):
        p = RegParams(0.5, cutoff=2.0)
        for s in (-3.0, 0.1, 0.5, 1.3, 2.0, 7.0):
            assert g_reg(s, p, derivative=True) * beta_reg(s, p) == pytest.approx(1.0, abs=1e-15)

    def test_h_above_inverse_delta(self):
        assert h_reg(4.0, RegParams(0.5)) == pytest.approx(1.6931471805599454, abs=1e-15)

    def test_beta_clamps(self):
        assert beta_reg(-1.0, RegParams(0.5)) == 0.5
        assert beta_reg(3.0, RegParams(0.5, cutoff=2.0)) == 2.0
        assert beta_reg(1.3, RegParams(0.5, cutoff=2.0)) == 1.3

    def test_entropy_trace_values(self):
        p = RegParams(0.5)
        assert entropy_trace(SymMat.diag([2.0, 2.0]), p) == pytest.approx(0.6137056388801094, abs=1e-14)
        assert entropy_trace(SymMat.diag([-1.0, 3.0]), p) == pytest.approx(2.5945349, abs=1e-7)

    def test_entropy_trace_vanishes_at_identity(self):
        assert entropy_trace(SymMat.identity(), RegParams(0.1)) == 0.0

    def test_inverse_identity(self, rng):
        reg = Regularization(delta=0.1, cutoff=10.0)
        x = rng.standard_normal((200, 2, 2)) * 5.0
        phi = x + np.swapaxes(x, 1, 2)
        product = reg.g_prime_mat(phi) @ reg.beta_mat(phi)
        assert np.max(np.abs(product - np.eye(2))) <= TOLERANCES.inverse_identity * 10

    def test_unregularized_rejects_non_positive(self):
        reg = Regularization.unregularized()
        assert not reg.regularized
        with pytest.raises(DomainError):
            reg.g(-1.0)
        with pytest.raises(DomainError):
            entropy_trace(SymMat.diag([0.0, 1.0]), reg)

    def test_unregularized_matches_log(self):
        reg = Regularization.unregularized()
        assert reg.g(math.e) == pytest.approx(1.0, abs=1e-15)
        assert reg.g_prime_lipschitz == math.inf

    def test_invalid_params(self):
        with pytest.raises(InvalidInputError):
            RegParams(0.9)
        with pytest.raises(InvalidInputError):
            RegParams(0.1, cutoff=1.5)
        with pytest.raises(ValueError):
            RegParams(0.0)

    def test_label(self):
        assert Regularization(0.1, 10.0).label == "delta=0.1, L=10.0"
        assert Regularization.unregularized().label == "unregularized"
