"""Tests for exact_lp.py — phase-one simplex over Fraction, quantization
and exact row reduction."""

from fractions import Fraction

import numpy as np
import pytest

from errors import QuantizationError
from exact_lp import nullspace, phase_one, quantize, rank, rref

F = Fraction


# ── Phase one ────────────────────────────────────────────────────────

def test_feasible_system_returns_its_solution():
    result = phase_one([{0: 1, 1: 1}, {0: 1}], [F(3), F(1)], 2)
    assert result.feasible
    assert result.optimum == 0
    assert result.x == {0: F(1), 1: F(2)}
    assert result.pivots >= 2


def test_infeasible_system_carries_a_farkas_vector():
    rows = [{0: 1}, {0: 1}]
    rhs = [F(1), F(2)]
    result = phase_one(rows, rhs, 1)
    assert not result.feasible
    assert result.optimum == 1
    z = [-y for y in result.y]
    column = sum(z[i] * rows[i].get(0, 0) for i in range(2))
    assert column >= 0
    assert sum(b * zi for b, zi in zip(rhs, z)) < 0


def test_rows_may_leave_columns_unused():
    result = phase_one([{2: 1}, {0: 1, 2: 1}], [F(1, 2), F(1)], 3)
    assert result.feasible
    assert result.x == {0: F(1, 2), 2: F(1, 2)}


def test_phase_one_input_checks():
    with pytest.raises(ValueError):
        phase_one([{0: 1}], [F(1), F(2)], 1)
    with pytest.raises(ValueError):
        phase_one([{0: 1}], [F(-1)], 1)


# ── Quantization ─────────────────────────────────────────────────────

def test_dyadic_values_quantize_losslessly():
    counts, lossless = quantize(np.array([0.5, 0.25, 0.25]), 4)
    assert counts == [2, 1, 1]
    assert lossless


def test_largest_remainder_fills_the_denominator():
    counts, lossless = quantize(np.full(3, 1 / 3), 10)
    assert counts == [4, 3, 3]
    assert not lossless


def test_overfull_values_are_trimmed():
    counts, lossless = quantize(np.array([0.6, 0.6]), 10)
    assert sum(counts) == 10
    assert not lossless


@pytest.mark.parametrize("values", [[np.nan, 1.0], [1.5, -0.5], [np.inf, 0.0]])
def test_bad_values_cannot_be_quantized(values):
    with pytest.raises(QuantizationError):
        quantize(np.array(values), 16)


# ── Row reduction ────────────────────────────────────────────────────

def test_rank_and_nullspace():
    m = [[1, 2], [2, 4]]
    assert rank(m) == 1
    assert nullspace(m) == [[F(-2), F(1)]]


def test_rref_of_full_rank_matrix():
    rows, pivots = rref([[2, 1], [1, 1]])
    assert pivots == [0, 1]
    assert rows == [[1, 0], [0, 1]]
    assert nullspace([[2, 1], [1, 1]]) == []
