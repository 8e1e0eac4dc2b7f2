"""
Tests for the named property suites
"""

import pytest

from oldroyd_fem.errors import InvalidInputError
from oldroyd_fem.properties import (
    SUITES,
    lambda_chain_suite,
    lemma_suite,
    lumping_suite,
    nonobtuse_suite,
    projection_spd_suite,
    run_suite,
)


def test_suite_names():
    assert set(SUITES) == {
        "lemma",
        "nonobtuse",
        "lambda-chain",
        "lambda-slope",
        "projection-spd",
        "lumping",
    }


def test_lemma_suite_small_sample():
    result = lemma_suite(samples=50, seed=1)
    assert result.passed
    assert result.samples == 50 * 2 * 3 * 3
    assert result.details["worst_inverse_identity"] >= -1e-12
    assert result.details["worst_scalar_invariance"] == 0.0


def test_nonobtuse_suite_small_sample():
    result = nonobtuse_suite(samples=5, nx=4)
    assert result.passed
    assert result.details["mesh_elements"] == 32


def test_lambda_chain_suite_small_sample():
    result = lambda_chain_suite(samples=3, nx=4)
    assert result.passed
    assert result.samples == 6


def test_projection_suite_small_sample():
    result = projection_spd_suite(samples=3, nx=4)
    assert result.passed
    assert result.details["worst_identity"] >= -1e-12


def test_lumping_suite_reproduces_unit_triangle():
    result = lumping_suite(samples=10, sizes=(2, 4))
    assert result.passed
    assert result.details["unit_lumped"] == pytest.approx(7.0 / 3.0, abs=1e-12)
    assert result.details["unit_exact"] == pytest.approx(25.0 / 12.0, abs=1e-12)
    assert 1.0 <= result.details["max_ratio"] <= 4.0


def test_unknown_suite():
    with pytest.raises(InvalidInputError, match="unknown property suite"):
        run_suite("maximum-principle")


def test_run_suite_forwards_arguments():
    assert run_suite("lumping", samples=2, sizes=(2,)).samples == 2


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(SUITES))
def test_full_suites_pass(name):
    result = run_suite(name)
    assert result.passed, result.to_dict()


@pytest.mark.slow
def test_lambda_gap_decays_linearly():
    result = run_suite("lambda-slope")
    assert result.details["order"] >= 0.9
    gaps = result.details["gaps"]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
