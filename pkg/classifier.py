"""
PhaseMarginals — admissibility classification of chain graphs.

Verdicts for a graph G of CCS types:
  - non proper                          -> NonAdmissible (critical quartet)
  - proper and connected                -> FullyAdmissible
  - proper, disconnected, with quartet  -> NonAdmissible
  - proper, disconnected, quartet-free  -> connectify into a proper
    connected G_c; FullyAdmissible if every insertion has two legs
    (G-simple), QuantumAdmissible otherwise.

Connectification grows a tree diagram Γ from the component holding the
canonically smallest vertex, each step attaching the nearest remaining
component through a shortest segment of inserted vertices. Segment flips
prefer momentum->position axes (ascending), then position->momentum axes
(ascending). The link indices of a segment may be reordered freely, so when
that preferred construction ends non-proper the other minimal attachment
pairs and flip orders are searched depth-first (non-proper prefixes pruned)
before giving up.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field

from chain_graph import (
    AxisAssignment,
    ChainGraph,
    CriticalQuartet,
    Link,
    all_types,
    connected_components,
    derive_links,
    find_critical_quartet,
    is_proper,
)
from config import ENUM_GUARD
from errors import ContainmentError, EnumerationGuardExceeded, InternalConsistencyError

logger = logging.getLogger("mf.classifier")

# Backtracking budget (diagram states visited) before the preferred
# construction is returned as-is
SEARCH_NODE_BUDGET = 200_000


class Verdict(enum.Enum):
    FULLY = "fully"
    QUANTUM = "quantum"
    NON = "non"


@dataclass(frozen=True)
class Segment:
    """Linear chain start -> insertions... -> end; `indices` are the flipped axes in order."""

    start: AxisAssignment
    end: AxisAssignment
    insertions: tuple[AxisAssignment, ...]
    indices: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.indices)

    def path(self) -> tuple[AxisAssignment, ...]:
        return (self.start, *self.insertions, self.end)


@dataclass(frozen=True)
class ConnectifiedDiagram:
    graph: ChainGraph
    tree_vertices: tuple[AxisAssignment, ...]
    tree_edges: tuple[Link, ...]
    segments: tuple[Segment, ...]
    gc: ChainGraph

    @property
    def insertions(self) -> tuple[AxisAssignment, ...]:
        return tuple(v for v in self.gc.vertices if v not in self.graph)


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    graph: ChainGraph
    gc: ChainGraph | None = None
    diagram: ConnectifiedDiagram | None = None
    quartet: CriticalQuartet | None = None
    non_proper: bool = False
    non_simple_insertions: tuple[AxisAssignment, ...] = field(default=())

    def evidence_json(self) -> dict:
        evidence: dict = {}
        if self.verdict is Verdict.NON:
            if self.quartet is not None:
                evidence["quartet"] = self.quartet.to_json()
            evidence["non_proper"] = self.non_proper
        else:
            evidence["gc"] = self.gc.type_strings() if self.gc is not None else []
            if self.diagram is not None:
                evidence["insertions"] = [v.to_type_string() for v in self.diagram.insertions]
            if self.verdict is Verdict.QUANTUM:
                evidence["non_simple_insertions"] = [
                    v.to_type_string() for v in self.non_simple_insertions
                ]
        return evidence

    def to_json(self) -> dict:
        return {"verdict": self.verdict.value, "evidence": self.evidence_json()}


# ── Connectification ─────────────────────────────────────────────────

def _preferred_flip_order(u: AxisAssignment, v: AxisAssignment) -> tuple[int, ...]:
    diff = u.differing_axes(v)
    to_position = [i for i in diff if u.is_momentum(i)]
    to_momentum = [i for i in diff if not u.is_momentum(i)]
    return tuple(to_position + to_momentum)


def _flip_orders(u: AxisAssignment, v: AxisAssignment):
    preferred = _preferred_flip_order(u, v)
    yield preferred
    for order in itertools.permutations(sorted(preferred)):
        if order != preferred:
            yield order


def _minimal_pairs(gamma: list[AxisAssignment], remaining: list[tuple[AxisAssignment, ...]]):
    best = None
    pairs = []
    for u in gamma:
        for comp in remaining:
            for v in comp:
                d = u.distance(v)
                if best is None or d < best:
                    best, pairs = d, [(u, v)]
                elif d == best:
                    pairs.append((u, v))
    return sorted(pairs)


@dataclass
class _Diagram:
    """Mutable Γ_k under construction."""

    vertices: list[AxisAssignment]
    edges: list[Link]
    segments: list[Segment]
    remaining: list[tuple[AxisAssignment, ...]]

    def attach(self, u: AxisAssignment, v: AxisAssignment, order: tuple[int, ...]) -> "_Diagram":
        comp = next(c for c in self.remaining if v in c)
        path = [u]
        for axis in order:
            path.append(path[-1].flip(axis))
        insertions = tuple(path[1:-1])
        edges = [Link(*sorted((a, b)), axis) for a, b, axis in zip(path, path[1:], order)]
        return _Diagram(
            vertices=self.vertices + list(insertions) + list(comp),
            edges=self.edges + edges + list(derive_links(comp)),
            segments=self.segments + [Segment(u, v, insertions, tuple(order))],
            remaining=[c for c in self.remaining if c is not comp],
        )

    def freeze(self, graph: ChainGraph) -> ConnectifiedDiagram:
        return ConnectifiedDiagram(
            graph=graph,
            tree_vertices=tuple(sorted(self.vertices)),
            tree_edges=tuple(sorted(self.edges)),
            segments=tuple(self.segments),
            gc=ChainGraph(graph.n, tuple(self.vertices)),
        )


def _initial_diagram(graph: ChainGraph) -> _Diagram:
    components = connected_components(graph)
    first = components[0]
    return _Diagram(
        vertices=list(first),
        edges=list(derive_links(first)),
        segments=[],
        remaining=list(components[1:]),
    )


def _greedy(diagram: _Diagram) -> _Diagram:
    while diagram.remaining:
        u, v = _minimal_pairs(diagram.vertices, diagram.remaining)[0]
        diagram = diagram.attach(u, v, _preferred_flip_order(u, v))
    return diagram


def _search(diagram: _Diagram, n: int, budget: list[int]) -> _Diagram | None:
    if not diagram.remaining:
        return diagram
    for u, v in _minimal_pairs(diagram.vertices, diagram.remaining):
        for order in _flip_orders(u, v):
            budget[0] -= 1
            if budget[0] < 0:
                return None
            nxt = diagram.attach(u, v, order)
            if not is_proper(ChainGraph(n, tuple(nxt.vertices))):
                continue
            found = _search(nxt, n, budget)
            if found is not None:
                return found
    return None


def connectify(graph: ChainGraph) -> ConnectifiedDiagram:
    """Connect the components of G through shortest segments into a tree Γ_c.

    G_c is the vertex set of Γ_c with derived links. The result is proper
    whenever any construction with this shape can be; otherwise the
    preferred (non-proper) construction is returned.
    """
    start = _initial_diagram(graph)
    if not start.remaining:
        return start.freeze(graph)

    budget = [SEARCH_NODE_BUDGET]
    found = _search(start, graph.n, budget)
    if found is not None:
        diagram = found.freeze(graph)
    else:
        logger.debug("no proper connectification of %s (budget left %d)", graph, budget[0])
        diagram = _greedy(start).freeze(graph)

    logger.debug(
        "connectified %s -> G_c %s with %d segment(s)",
        graph, diagram.gc, len(diagram.segments),
    )
    return diagram


def is_g_simple(graph: ChainGraph, gc: ChainGraph) -> bool:
    """Every insertion of G_c (vertex not in G) has exactly two legs."""
    if not graph.vertex_set <= gc.vertex_set:
        raise ContainmentError(f"{graph} is not contained in {gc}")
    return all(gc.legs(v) == 2 for v in gc.vertices if v not in graph)


def non_simple_insertions(graph: ChainGraph, gc: ChainGraph) -> tuple[AxisAssignment, ...]:
    return tuple(v for v in gc.vertices if v not in graph and gc.legs(v) != 2)


# ── Exhaustive supergraph search (ground truth at small N) ──────────

def _popcount(x: int) -> int:
    return bin(x).count("1")


def _keys_connected(keys: list[int]) -> bool:
    seen = {keys[0]}
    stack = [keys[0]]
    while stack:
        k = stack.pop()
        for other in keys:
            if other not in seen and _popcount(k ^ other) == 1:
                seen.add(other)
                stack.append(other)
    return len(seen) == len(keys)


def iter_proper_supergraphs(graph: ChainGraph, guard: int = ENUM_GUARD):
    """Every connected proper graph whose vertex set contains G's.

    Supersets are grown by adding candidate types in canonical order; a
    non-proper set is pruned since adding vertices only adds links.
    Yields in (size, canonical vertex tuple) order.
    """
    n = graph.n
    if n > guard:
        raise EnumerationGuardExceeded(f"exhaustive search needs N <= {guard}, got N = {n}")
    if not is_proper(graph):
        return

    by_key = {v.key: v for v in all_types(n)}
    base = [v.key for v in graph.vertices]
    candidates = sorted(k for k in by_key if k not in set(base))
    used: set[int] = set()
    for a, b in itertools.combinations(base, 2):
        if _popcount(a ^ b) == 1:
            used.add(a ^ b)

    found: list[tuple[int, ...]] = []

    def grow(keys: list[int], used_bits: set[int], start: int) -> None:
        if _keys_connected(keys):
            found.append(tuple(sorted(keys)))
        if len(keys) >= n + 1:
            return
        for pos in range(start, len(candidates)):
            w = candidates[pos]
            new_bits = [k ^ w for k in keys if _popcount(k ^ w) == 1]
            if len(set(new_bits)) != len(new_bits) or used_bits.intersection(new_bits):
                continue
            grow(keys + [w], used_bits | set(new_bits), pos + 1)

    grow(base, used, 0)
    for keys in sorted(found, key=lambda ks: (len(ks), ks)):
        yield ChainGraph(n, tuple(by_key[k] for k in keys))


def find_proper_supergraph_exhaustive(graph: ChainGraph, guard: int = ENUM_GUARD) -> ChainGraph | None:
    """First connected proper supergraph of G in canonical order, or None."""
    return next(iter_proper_supergraphs(graph, guard), None)


def classify_exhaustive(graph: ChainGraph, guard: int = ENUM_GUARD) -> Verdict:
    """Verdict recomputed from the exhaustive supergraph search alone."""
    if not is_proper(graph):
        return Verdict.NON
    gc = find_proper_supergraph_exhaustive(graph, guard)
    if gc is None:
        return Verdict.NON
    return Verdict.FULLY if is_g_simple(graph, gc) else Verdict.QUANTUM


# ── Classification ───────────────────────────────────────────────────

def classify(graph: ChainGraph) -> Classification:
    if not is_proper(graph):
        quartet = find_critical_quartet(graph)
        logger.info("%s is not proper -> non admissible", graph)
        return Classification(Verdict.NON, graph, quartet=quartet, non_proper=True)

    components = connected_components(graph)
    if len(components) == 1:
        logger.info("%s is proper and connected -> fully admissible", graph)
        return Classification(Verdict.FULLY, graph, gc=graph)

    quartet = find_critical_quartet(graph)
    if quartet is not None:
        logger.info("%s holds critical quartet on axes %s -> non admissible", graph, quartet.axes)
        return Classification(Verdict.NON, graph, quartet=quartet)

    diagram = connectify(graph)
    if not is_proper(diagram.gc):
        raise InternalConsistencyError(
            f"quartet-free proper graph {graph} connectified into non-proper {diagram.gc}"
        )

    bad = non_simple_insertions(graph, diagram.gc)
    if not bad:
        logger.info("%s has G-simple G_c %s -> fully admissible", graph, diagram.gc)
        return Classification(Verdict.FULLY, graph, gc=diagram.gc, diagram=diagram)
    logger.info(
        "%s has non G-simple G_c %s (insertions %s) -> quantum admissible",
        graph, diagram.gc, ", ".join(map(str, bad)),
    )
    return Classification(
        Verdict.QUANTUM, graph, gc=diagram.gc, diagram=diagram, non_simple_insertions=bad
    )
