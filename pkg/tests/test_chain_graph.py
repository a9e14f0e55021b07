"""Tests for chain_graph.py — types, derived links, properness, components
and critical quartets."""

import itertools

import pytest

from chain_graph import (
    AxisAssignment,
    ChainGraph,
    all_types,
    connected_components,
    contiguity_index,
    find_critical_quartet,
    is_proper,
    parse_any,
    parse_type,
    var_letter,
)
from errors import DimensionMismatch, TypeParseError


def t(text: str, n: int) -> AxisAssignment:
    return parse_type(text, n)


# ── Types and parsing ────────────────────────────────────────────────

def test_parse_type_primed_shorthand():
    a = parse_type("12'3", 3)
    assert a.flags == (False, True, False)
    assert a.to_qp() == "qpq"
    assert str(a) == "12'3"


def test_parse_type_accepts_unicode_primes_and_any_axis_order():
    assert parse_type("1′2’3", 3) == parse_type("1'2'3", 3)
    assert parse_type("3'21", 3) == parse_type("123'", 3)


def test_parse_type_brackets_axes_above_nine():
    text = "123456789[10]'"
    a = parse_type(text, 10)
    assert a.is_momentum(10) and not a.is_momentum(9)
    assert a.to_type_string() == text


@pytest.mark.parametrize("text", ["", "12", "1123", "124", "1''23", "x23", "1$'$23"])
def test_parse_type_rejects_malformed(text):
    with pytest.raises(TypeParseError):
        parse_type(text, 3)


def test_parse_any_takes_both_forms():
    assert parse_any("pqp", 3) == parse_type("1'23'", 3)
    assert parse_any("1'23'", 3) == parse_type("1'23'", 3)
    with pytest.raises(TypeParseError):
        AxisAssignment.from_qp("pqx")


def test_canonical_order_reads_axis_one_as_high_bit():
    assert [a.to_qp() for a in all_types(2)] == ["qq", "qp", "pq", "pp"]
    assert parse_type("1'23", 3).key == 4
    assert parse_type("123'", 3).key == 1
    assert sorted([t("1'23", 3), t("123'", 3), t("12'3", 3)]) == [t("123'", 3), t("12'3", 3), t("1'23", 3)]


def test_letters_follow_axis_and_variable():
    assert var_letter(1, False) == "a"
    assert var_letter(3, True) == "C"
    assert t("1'23'4", 4).letters() == "AbCd"
    with pytest.raises(DimensionMismatch):
        var_letter(27, False)


def test_distance_needs_equal_dimension():
    with pytest.raises(DimensionMismatch):
        t("12", 2).distance(t("123", 3))


# ── Links ────────────────────────────────────────────────────────────

def test_links_are_derived_from_contiguity(tree4):
    indices = sorted(link.index for link in tree4.links)
    assert indices == [1, 2, 3, 4]
    assert contiguity_index(t("1234", 4), t("1'234", 4)) == 1
    assert contiguity_index(t("1234", 4), t("1'2'34", 4)) is None


def test_graph_deduplicates_and_sorts_vertices():
    g = ChainGraph.from_types(["1'2", "12", "1'2"], 2)
    assert g.type_strings() == ["12", "1'2"]
    assert len(g) == 2


def test_graph_rejects_mixed_dimensions():
    with pytest.raises(DimensionMismatch):
        ChainGraph(3, (t("123", 3), t("12", 2)))


def test_properness(square, quartet4, tree4):
    assert not is_proper(square)
    assert is_proper(quartet4)
    assert is_proper(tree4)


def test_hub3_has_no_links_at_all(hub3):
    assert hub3.links == ()
    assert is_proper(hub3)
    assert len(connected_components(hub3)) == 3


# ── Components ───────────────────────────────────────────────────────

def test_components_start_from_smallest_vertex(quartet4):
    comps = connected_components(quartet4)
    assert len(comps) == 2
    assert comps[0] == (t("1234", 4), t("1'234", 4), t("1'2'34", 4))
    assert comps[1] == (t("12'3'4'", 4),)
    assert not quartet4.is_connected()


def test_connected_graph_is_one_component(tree4):
    assert tree4.is_connected()
    assert tree4.legs(t("1'234", 4)) == 3


# ── Critical quartets ────────────────────────────────────────────────

def test_quartet4_quartet():
    g = ChainGraph.from_types(["1234", "1'234", "1'2'34", "12'3'4'"], 4)
    quartet = find_critical_quartet(g)
    assert quartet is not None
    assert quartet.axes == (1, 2)
    assert {str(v) for v in quartet.vertices} == {"1234", "1'234", "1'2'34", "12'3'4'"}


def test_simple4_has_no_quartet(simple4):
    assert find_critical_quartet(simple4) is None


def test_quartet_json_lists_type_strings(square):
    payload = find_critical_quartet(square).to_json()
    assert payload["axes"] == [1, 2]
    assert payload["vertices"] == ["12", "12'", "1'2", "1'2'"]


@pytest.mark.parametrize("n", [2, 3])
def test_every_non_proper_graph_holds_a_quartet(n):
    types = all_types(n)
    for size in range(1, len(types) + 1):
        for verts in itertools.combinations(types, size):
            g = ChainGraph(n, verts)
            if not is_proper(g):
                assert find_critical_quartet(g) is not None, str(g)


def test_connected_proper_graphs_are_quartet_free():
    # Every connected proper graph grows from a single vertex by adding
    # one neighbor at a time over an unused link index
    n = 4
    seen = set()
    frontier = [(v.key,) for v in all_types(n)]
    by_key = {v.key: v for v in all_types(n)}
    while frontier:
        keys = frontier.pop()
        if keys in seen:
            continue
        seen.add(keys)
        g = ChainGraph(n, tuple(by_key[k] for k in keys))
        if not is_proper(g):
            continue
        assert find_critical_quartet(g) is None, str(g)
        for k in keys:
            for bit in range(n):
                w = k ^ (1 << bit)
                if w not in keys:
                    frontier.append(tuple(sorted(keys + (w,))))
    assert len(seen) > len(all_types(n))
