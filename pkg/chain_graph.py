"""
PhaseMarginals — CCS types and chain graphs.

A CCS type picks, for every axis i = 1..N, either the position q_i or the
momentum p_i. Types are the vertices of the N-dimensional assignment
hypercube; two types are contiguous when they differ on exactly one axis,
and that axis is the index of the link joining them.

A ChainGraph is fully determined by (N, vertex set): links are always
derived from contiguity, never supplied.

Canonical order: a type is read as an N-bit integer with momentum = 1 and
axis 1 as the most significant bit. Every "first found" result (components,
quartets, supergraphs) follows this order so runs are reproducible.

Type-strings use the primed shorthand: "12'3" means (q1, p2, q3);
axes above 9 are bracketed, e.g. "[10]'". The JSON form is a q/p string
such as "qpq".
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from errors import DimensionMismatch, TypeParseError

Q, P = False, True

# One axis token: a digit or a bracketed number, optionally primed
RE_AXIS_TOKEN = re.compile(r"(\d|\[\d+\])('?)")
PRIMES = ("’", "′")  # accepted as apostrophes


@dataclass(frozen=True, order=True)
class AxisAssignment:
    """Per-axis position/momentum flags; True means momentum."""

    flags: tuple[bool, ...]

    def __post_init__(self):
        if len(self.flags) < 1:
            raise DimensionMismatch("an AxisAssignment needs N >= 1 axes")

    @property
    def n(self) -> int:
        return len(self.flags)

    @property
    def key(self) -> int:
        """Canonical integer: momentum = 1, axis 1 is the most significant bit."""
        value = 0
        for flag in self.flags:
            value = (value << 1) | int(flag)
        return value

    def is_momentum(self, axis: int) -> bool:
        return self.flags[axis - 1]

    def letter(self, axis: int) -> str:
        """Variable label of this type on `axis` (see grid_dist.var_letter)."""
        return var_letter(axis, self.flags[axis - 1])

    def letters(self) -> str:
        return "".join(self.letter(i) for i in range(1, self.n + 1))

    def flip(self, axis: int) -> "AxisAssignment":
        flags = list(self.flags)
        flags[axis - 1] = not flags[axis - 1]
        return AxisAssignment(tuple(flags))

    def differing_axes(self, other: "AxisAssignment") -> tuple[int, ...]:
        _check_dims(self, other)
        return tuple(i + 1 for i, (a, b) in enumerate(zip(self.flags, other.flags)) if a != b)

    def distance(self, other: "AxisAssignment") -> int:
        return len(self.differing_axes(other))

    def restrict(self, axes: Iterable[int]) -> "AxisAssignment":
        return AxisAssignment(tuple(self.flags[i - 1] for i in axes))

    def to_qp(self) -> str:
        return "".join("p" if f else "q" for f in self.flags)

    def to_type_string(self) -> str:
        parts = []
        for i, flag in enumerate(self.flags, start=1):
            token = str(i) if i < 10 else f"[{i}]"
            parts.append(token + ("'" if flag else ""))
        return "".join(parts)

    def __str__(self) -> str:
        return self.to_type_string()

    @classmethod
    def from_qp(cls, text: str) -> "AxisAssignment":
        text = text.strip().lower()
        if not text or set(text) - {"q", "p"}:
            raise TypeParseError(f"not a q/p type string: {text!r}")
        return cls(tuple(c == "p" for c in text))


def var_letter(axis: int, momentum: bool) -> str:
    """Single-character variable label: q_i -> 'a','b',..; p_i -> 'A','B',.."""
    if not 1 <= axis <= 26:
        raise DimensionMismatch(f"axis {axis} outside the supported range 1..26")
    base = ord("A") if momentum else ord("a")
    return chr(base + axis - 1)


def _check_dims(a: AxisAssignment, b: AxisAssignment) -> None:
    if a.n != b.n:
        raise DimensionMismatch(f"types of dimension {a.n} and {b.n} cannot be compared")


# ── Parsing ──────────────────────────────────────────────────────────

def parse_type(text: str, n: int) -> AxisAssignment:
    """Parse "12'3"-style shorthand into an AxisAssignment of dimension n.

    Every axis 1..n must appear exactly once; a trailing apostrophe marks
    the momentum variable.
    """
    s = text.strip()
    for prime in PRIMES:
        s = s.replace(prime, "'")
    if not s:
        raise TypeParseError("empty type string")

    flags: dict[int, bool] = {}
    pos = 0
    while pos < len(s):
        m = RE_AXIS_TOKEN.match(s, pos)
        if not m:
            raise TypeParseError(f"malformed type string {text!r} at position {pos}")
        axis = int(m.group(1).strip("[]"))
        if not 1 <= axis <= n:
            raise TypeParseError(f"axis {axis} out of range 1..{n} in {text!r}")
        if axis in flags:
            raise TypeParseError(f"axis {axis} listed twice in {text!r}")
        flags[axis] = m.group(2) == "'"
        pos = m.end()

    missing = [i for i in range(1, n + 1) if i not in flags]
    if missing:
        raise TypeParseError(f"axes {missing} missing from {text!r}")
    return AxisAssignment(tuple(flags[i] for i in range(1, n + 1)))


def parse_any(text: str, n: int) -> AxisAssignment:
    """Accept either the q/p JSON form or the primed shorthand."""
    t = text.strip()
    if len(t) == n and t and not set(t.lower()) - {"q", "p"}:
        return AxisAssignment.from_qp(t)
    return parse_type(t, n)


# ── Links ────────────────────────────────────────────────────────────

@dataclass(frozen=True, order=True)
class Link:
    a: AxisAssignment
    b: AxisAssignment
    index: int

    def other(self, v: AxisAssignment) -> AxisAssignment:
        return self.b if v == self.a else self.a


def contiguity_index(a: AxisAssignment, b: AxisAssignment) -> int | None:
    """The unique differing axis when a and b are at Hamming distance 1."""
    diff = a.differing_axes(b)
    return diff[0] if len(diff) == 1 else None


def derive_links(vertices: Iterable[AxisAssignment]) -> tuple[Link, ...]:
    """One Link per contiguous pair, in canonical (a, b) order."""
    verts = sorted(set(vertices))
    links = []
    for a, b in itertools.combinations(verts, 2):
        idx = contiguity_index(a, b)
        if idx is not None:
            links.append(Link(a, b, idx))
    return tuple(links)


# ── Graphs ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ChainGraph:
    n: int
    vertices: tuple[AxisAssignment, ...]

    def __post_init__(self):
        verts = tuple(sorted(set(self.vertices)))
        if not verts:
            raise DimensionMismatch("a chain graph needs at least one vertex")
        for v in verts:
            if v.n != self.n:
                raise DimensionMismatch(f"vertex {v} has dimension {v.n}, graph has {self.n}")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def of(cls, vertices: Iterable[AxisAssignment]) -> "ChainGraph":
        verts = list(vertices)
        if not verts:
            raise DimensionMismatch("a chain graph needs at least one vertex")
        return cls(verts[0].n, tuple(verts))

    @classmethod
    def from_types(cls, types: Iterable[str], n: int) -> "ChainGraph":
        return cls(n, tuple(parse_any(t, n) for t in types))

    @cached_property
    def links(self) -> tuple[Link, ...]:
        return derive_links(self.vertices)

    @cached_property
    def vertex_set(self) -> frozenset[AxisAssignment]:
        return frozenset(self.vertices)

    def __contains__(self, v: AxisAssignment) -> bool:
        return v in self.vertex_set

    def __len__(self) -> int:
        return len(self.vertices)

    def neighbors(self, v: AxisAssignment) -> list[AxisAssignment]:
        return [link.other(v) for link in self.links if v in (link.a, link.b)]

    def legs(self, v: AxisAssignment) -> int:
        return len(self.neighbors(v))

    def link_between(self, a: AxisAssignment, b: AxisAssignment) -> Link | None:
        for link in self.links:
            if {link.a, link.b} == {a, b}:
                return link
        return None

    def is_connected(self) -> bool:
        return len(connected_components(self)) == 1

    def type_strings(self) -> list[str]:
        return [v.to_type_string() for v in self.vertices]

    def __str__(self) -> str:
        return "{" + ", ".join(self.type_strings()) + "}"


def is_proper(graph: ChainGraph) -> bool:
    """No two links carry the same index."""
    indices = [link.index for link in graph.links]
    return len(indices) == len(set(indices))


def connected_components(graph: ChainGraph) -> list[tuple[AxisAssignment, ...]]:
    """Components under derived links, smallest canonical vertex first."""
    adjacency: dict[AxisAssignment, list[AxisAssignment]] = {v: [] for v in graph.vertices}
    for link in graph.links:
        adjacency[link.a].append(link.b)
        adjacency[link.b].append(link.a)

    seen: set[AxisAssignment] = set()
    components = []
    for start in graph.vertices:  # already canonical
        if start in seen:
            continue
        comp = []
        queue = deque([start])
        seen.add(start)
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w in adjacency[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        components.append(tuple(sorted(comp)))
    return components


# ── Critical quartets ────────────────────────────────────────────────

@dataclass(frozen=True)
class CriticalQuartet:
    vertices: tuple[AxisAssignment, ...]
    axes: tuple[int, int]

    def to_json(self) -> dict:
        return {
            "vertices": [v.to_type_string() for v in self.vertices],
            "axes": list(self.axes),
        }


def find_critical_quartet(graph: ChainGraph) -> CriticalQuartet | None:
    """First quartet in scan order (axis pairs ascending, then canonical vertices).

    For every axis pair (i, j) the canonically smallest vertex realizing each
    of the four (x_i, x_j) combinations is taken; a quartet exists on (i, j)
    exactly when all four combinations occur.
    """
    for i, j in itertools.combinations(range(1, graph.n + 1), 2):
        chosen: dict[tuple[bool, bool], AxisAssignment] = {}
        for v in graph.vertices:
            chosen.setdefault((v.is_momentum(i), v.is_momentum(j)), v)
        if len(chosen) == 4:
            return CriticalQuartet(tuple(sorted(chosen.values())), (i, j))
    return None


def all_types(n: int) -> list[AxisAssignment]:
    """Every vertex of the N-hypercube in canonical order."""
    return [AxisAssignment(flags) for flags in itertools.product((Q, P), repeat=n)]
