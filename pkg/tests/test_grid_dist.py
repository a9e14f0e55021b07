"""Tests for grid_dist.py — labelled factors, grids, marginalization and
the pairwise compatibility check."""

import math

import numpy as np
import pytest

from chain_graph import ChainGraph, parse_type
from errors import DimensionMismatch, IncompatibleChain, NormalizationError, ShapeMismatch
from grid_dist import (
    Chain,
    Factor,
    GridSpec,
    MarginalTensor,
    PhaseTensor,
    centered_labels,
    chain_from_phase,
    check_compatibility,
    integrated_distribution,
    marginalize,
    phase_letters,
    random_chain,
    random_phase_tensor,
)


def t(text: str, n: int):
    return parse_type(text, n)


def perturbed(chain: Chain, a, delta: float) -> Chain:
    """Move `delta` of mass between the first two cells of member a."""
    members = {b: m.values.copy() for b, m in chain.members.items()}
    flat = members[a].reshape(-1)
    flat[0] += delta
    flat[1] -= delta
    return Chain.from_tensors(chain.grid, members)


# ── Factors ──────────────────────────────────────────────────────────

def test_factor_product_is_canonical_and_broadcasts():
    x = Factor("b", np.array([1.0, 2.0]))
    y = Factor("Aa", np.arange(6.0).reshape(3, 2))
    prod = x * y
    assert prod.letters == "abA"
    assert prod.values.shape == (2, 2, 3)
    assert prod.values[1, 1, 2] == 2.0 * y.values[2, 1]


def test_factor_sum_out_and_keep():
    f = Factor("aB", np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.allclose(f.sum_out("a").values, [4.0, 6.0])
    assert f.keep("a").letters == "a"
    assert np.allclose(f.keep("a").values, [3.0, 7.0])
    with pytest.raises(ShapeMismatch):
        f.keep("c")


def test_factor_rejects_bad_shapes():
    with pytest.raises(ShapeMismatch):
        Factor("ab", np.zeros(3))
    with pytest.raises(ShapeMismatch):
        Factor("aa", np.zeros((2, 2)))


def test_reciprocal_zeroes_below_relative_threshold():
    f = Factor("a", np.array([0.25, 0.75, 1e-15, 0.0]))
    assert np.allclose(f.reciprocal().values, [4.0, 4.0 / 3.0, 0.0, 0.0])


def test_aligned_transposes_by_letter():
    f = Factor("ab", np.arange(6.0).reshape(2, 3))
    assert f.aligned("ba").shape == (3, 2)
    with pytest.raises(ShapeMismatch):
        f.aligned("ac")


# ── Grids ────────────────────────────────────────────────────────────

def test_centered_labels_are_symmetric_about_zero():
    labels = centered_labels(4)
    step = math.sqrt(2 * math.pi / 4)
    assert labels == pytest.approx((-2 * step, -step, 0.0, step))
    assert centered_labels(3)[1] == 0.0


def test_grid_shapes():
    grid = GridSpec.uniform(2, [2, 3])
    assert grid.phase_shape == (2, 3, 2, 3)
    assert grid.cell_count == 36
    assert grid.shape_for(t("1'2", 2)) == (2, 3)
    assert grid.letter_sizes == {"a": 2, "A": 2, "b": 3, "B": 3}
    assert phase_letters(2) == "abAB"


def test_grid_restrict_and_dimension_check():
    grid = GridSpec.uniform(3, [2, 3, 4])
    assert grid.restrict([1, 3]).phase_shape == (2, 4, 2, 4)
    with pytest.raises(DimensionMismatch):
        grid.check_dim(2)
    with pytest.raises(DimensionMismatch):
        GridSpec.uniform(3, [2, 2])


def test_two_point_grid_labels():
    grid = GridSpec.two_point(2)
    assert grid.q_labels == ((-1.0, 1.0), (-1.0, 1.0))


# ── Distributions ────────────────────────────────────────────────────

def test_marginalize_sums_the_conjugate_variables(rng):
    grid = GridSpec.uniform(2, [2, 3])
    rho = random_phase_tensor(grid, rng)
    member = marginalize(rho, t("12'", 2))
    # (q1, q2, p1, p2) -> keep q1 and p2
    assert np.allclose(member.values, rho.values.sum(axis=(1, 2)))
    assert member.values.shape == (2, 3)


def test_random_phase_tensor_is_positive_and_dyadic(rng):
    grid = GridSpec.uniform(2, 3)
    rho = random_phase_tensor(grid, rng)
    assert rho.values.min() > 0
    assert rho.values.sum() == 1.0
    total = 2 ** 20
    assert np.array_equal(rho.values * total, np.round(rho.values * total))


def test_random_chain_is_reproducible(tree4):
    grid = GridSpec.two_point(4)
    first = random_chain(tree4, grid, seed=5)
    second = random_chain(tree4, grid, seed=5)
    for a in tree4.vertices:
        assert np.array_equal(first[a].values, second[a].values)
    assert first.graph == tree4


def test_chain_orders_members_canonically():
    grid = GridSpec.two_point(2)
    members = {t("1'2", 2): np.full((2, 2), 0.25), t("12", 2): np.full((2, 2), 0.25)}
    chain = Chain.from_tensors(grid, members)
    assert [str(a) for a in chain.types] == ["12", "1'2"]
    assert t("12", 2) in chain and len(chain) == 2


def test_chain_rejects_wrong_member_shape():
    grid = GridSpec.uniform(2, [2, 3])
    with pytest.raises(ShapeMismatch):
        Chain.from_tensors(grid, {t("12", 2): np.full((3, 2), 1 / 6)})
    with pytest.raises(ShapeMismatch):
        MarginalTensor(t("12", 2), np.ones(4))


def test_validate_catches_negative_and_unnormalized():
    grid = GridSpec.two_point(1)
    with pytest.raises(NormalizationError):
        Chain.from_tensors(grid, {t("1", 1): np.array([1.2, -0.2])}).validate()
    with pytest.raises(NormalizationError):
        PhaseTensor(grid, np.full((2, 2), 0.3)).validate()
    PhaseTensor.uniform(grid).validate()


# ── Compatibility ────────────────────────────────────────────────────

def test_marginals_of_one_density_are_compatible(tree4, rng):
    grid = GridSpec.uniform(4, 3)
    chain = chain_from_phase(random_phase_tensor(grid, rng), tree4)
    report = check_compatibility(chain)
    assert report.passed
    assert report.max_deviation <= 1e-15
    assert len(report.deviations) == 10


def test_perturbed_chain_fails_by_the_moved_mass():
    g = ChainGraph.from_types(["12", "1'2"], 2)
    chain = perturbed(random_chain(g, GridSpec.two_point(2), seed=1), t("12", 2), 1e-6)
    report = check_compatibility(chain)
    assert not report.passed
    assert report.max_deviation == pytest.approx(1e-6, rel=1e-6)
    assert report.violations() == [(t("12", 2), t("1'2", 2))]
    assert report.to_json()["compatible"] is False


def test_compatibility_ignores_pairs_far_apart_only_through_conflicts():
    # 12 and 1'2' conflict on both axes: nothing is shared, any pair agrees
    grid = GridSpec.two_point(2)
    members = {t("12", 2): np.array([[1.0, 0.0], [0.0, 0.0]]), t("1'2'", 2): np.full((2, 2), 0.25)}
    assert check_compatibility(Chain.from_tensors(grid, members)).passed


def test_integrated_distribution_of_a_link(tree4):
    chain = random_chain(tree4, GridSpec.uniform(4, 3), seed=3)
    a, b = t("1234", 4), t("1'234", 4)
    sigma = integrated_distribution(chain[a], chain[b])
    assert sigma.letters == "bcd"
    assert np.allclose(sigma.values, chain[a].values.sum(axis=0))
    assert np.allclose(sigma.values, chain[b].values.sum(axis=0))


def test_integrated_distribution_of_a_composite_link(simple4):
    chain = random_chain(simple4, GridSpec.two_point(4), seed=4)
    a, b = t("1'234", 4), t("1'23'4'", 4)
    sigma = integrated_distribution(chain[a], chain[b])
    assert sigma.letters == "bA"
    assert np.allclose(sigma.aligned("Ab"), chain[a].values.sum(axis=(2, 3)))


def test_integrated_distribution_errors(tree4):
    chain = random_chain(tree4, GridSpec.two_point(4), seed=2)
    a, b = t("1234", 4), t("1'234", 4)
    with pytest.raises(DimensionMismatch):
        integrated_distribution(chain[a], chain[a])
    bad = perturbed(chain, a, 1e-4)
    with pytest.raises(IncompatibleChain) as excinfo:
        integrated_distribution(bad[a], bad[b])
    assert excinfo.value.deviation == pytest.approx(1e-4, rel=1e-6)
