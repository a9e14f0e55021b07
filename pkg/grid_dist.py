"""
PhaseMarginals — finite-grid distributions.

Every distribution is a tensor of probability masses (sums replace
integrals). Axes are labelled with one character per phase variable:
q_i -> 'a','b',..  p_i -> 'A','B',..  and all contractions go through the
labelled Factor below, so "sum out x'_i" or "multiply by a propagator over
X" is a matter of letters, not axis bookkeeping.

Canonical phase order is q_1..q_N, p_1..p_N (row-major, axis 1 outermost).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from chain_graph import AxisAssignment, ChainGraph, var_letter
from config import SUPPORT_EPS, TOL_COMPAT, TOL_NORM
from errors import DimensionMismatch, IncompatibleChain, NormalizationError, ShapeMismatch

logger = logging.getLogger("mf.grid_dist")


def canonical_letters(letters: Iterable[str]) -> str:
    """q letters (lowercase) before p letters, each by axis."""
    return "".join(sorted(set(letters), key=lambda c: (c.isupper(), c.lower())))


def phase_letters(n: int) -> str:
    return "".join(var_letter(i, False) for i in range(1, n + 1)) + "".join(
        var_letter(i, True) for i in range(1, n + 1)
    )


# ── Labelled factors ─────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Factor:
    """A real tensor whose axes carry variable letters."""

    letters: str
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != len(self.letters):
            raise ShapeMismatch(
                f"factor over {self.letters!r} needs {len(self.letters)} axes, got {values.ndim}"
            )
        if len(set(self.letters)) != len(self.letters):
            raise ShapeMismatch(f"repeated letter in {self.letters!r}")
        object.__setattr__(self, "values", values)

    @classmethod
    def scalar(cls, value: float) -> "Factor":
        return cls("", np.asarray(float(value)))

    @classmethod
    def ones(cls, letters: str, sizes: Mapping[str, int]) -> "Factor":
        letters = canonical_letters(letters)
        return cls(letters, np.ones(tuple(sizes[c] for c in letters)))

    def sizes(self) -> dict[str, int]:
        return dict(zip(self.letters, self.values.shape))

    def aligned(self, letters: str) -> np.ndarray:
        """Values transposed to the given letter order (same letter set)."""
        if set(letters) != set(self.letters):
            raise ShapeMismatch(f"cannot align {self.letters!r} to {letters!r}")
        return np.einsum(f"{self.letters}->{letters}", self.values)

    def canonical(self) -> "Factor":
        return Factor(canonical_letters(self.letters), self.aligned(canonical_letters(self.letters)))

    def __mul__(self, other: "Factor") -> "Factor":
        out = canonical_letters(self.letters + other.letters)
        return Factor(out, np.einsum(f"{self.letters},{other.letters}->{out}", self.values, other.values))

    def sum_out(self, letters: Iterable[str]) -> "Factor":
        drop = set(letters)
        keep = "".join(c for c in canonical_letters(self.letters) if c not in drop)
        return Factor(keep, np.einsum(f"{self.letters}->{keep}", self.values))

    def keep(self, letters: Iterable[str]) -> "Factor":
        wanted = set(letters)
        missing = wanted - set(self.letters)
        if missing:
            raise ShapeMismatch(f"factor over {self.letters!r} has no {''.join(sorted(missing))!r}")
        return self.sum_out(c for c in self.letters if c not in wanted)

    def expand(self, letters: str, sizes: Mapping[str, int]) -> "Factor":
        """Broadcast onto a superset of letters (constant along the new ones)."""
        return self * Factor.ones("".join(c for c in letters if c not in self.letters), sizes)

    def reciprocal(self, eps: float = SUPPORT_EPS) -> "Factor":
        """1/x above eps * max, exactly 0 elsewhere."""
        top = float(self.values.max()) if self.values.size else 0.0
        support = self.values > eps * top
        out = np.zeros_like(self.values)
        out[support] = 1.0 / self.values[support]
        return Factor(self.letters, out)

    def where_positive(self, other: "Factor", eps: float = SUPPORT_EPS) -> np.ndarray:
        """Support mask of self, aligned to other's letters (self's letters must be a subset)."""
        top = float(self.values.max()) if self.values.size else 0.0
        mask = Factor(self.letters, (self.values > eps * top).astype(float))
        return mask.expand(other.letters, other.sizes()).aligned(other.letters) > 0.5


# ── Grids ────────────────────────────────────────────────────────────

def centered_labels(m: int, spacing: float | None = None) -> tuple[float, ...]:
    """Grid points symmetric about zero; default spacing sqrt(2π/M) (unitary DFT pairing)."""
    step = math.sqrt(2 * math.pi / m) if spacing is None else spacing
    return tuple(float((k - m // 2) * step) for k in range(m))


@dataclass(frozen=True)
class GridSpec:
    """Per-axis q and p grid labels; labels only matter for reporting."""

    q_labels: tuple[tuple[float, ...], ...]
    p_labels: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        q = tuple(tuple(float(x) for x in axis) for axis in self.q_labels)
        p = tuple(tuple(float(x) for x in axis) for axis in self.p_labels)
        if not q or len(q) != len(p):
            raise DimensionMismatch(f"grid needs N >= 1 q and p axes, got {len(q)} and {len(p)}")
        if any(len(axis) < 1 for axis in q + p):
            raise ShapeMismatch("every grid axis needs at least one point")
        object.__setattr__(self, "q_labels", q)
        object.__setattr__(self, "p_labels", p)

    @classmethod
    def uniform(cls, n: int, m: int | Iterable[int]) -> "GridSpec":
        sizes = [m] * n if isinstance(m, int) else list(m)
        if len(sizes) != n:
            raise DimensionMismatch(f"{len(sizes)} grid sizes for N = {n}")
        labels = tuple(centered_labels(s) for s in sizes)
        return cls(labels, labels)

    @classmethod
    def two_point(cls, n: int) -> "GridSpec":
        """q and p grids labelled {-1, +1} on every axis."""
        labels = tuple((-1.0, 1.0) for _ in range(n))
        return cls(labels, labels)

    @property
    def n(self) -> int:
        return len(self.q_labels)

    def size(self, axis: int, momentum: bool) -> int:
        return len((self.p_labels if momentum else self.q_labels)[axis - 1])

    def shape_for(self, a: AxisAssignment) -> tuple[int, ...]:
        self.check_dim(a.n)
        return tuple(self.size(i, a.is_momentum(i)) for i in range(1, self.n + 1))

    @property
    def phase_shape(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.q_labels) + tuple(len(x) for x in self.p_labels)

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.phase_shape))

    @cached_property
    def letter_sizes(self) -> dict[str, int]:
        sizes = {}
        for i in range(1, self.n + 1):
            sizes[var_letter(i, False)] = self.size(i, False)
            sizes[var_letter(i, True)] = self.size(i, True)
        return sizes

    def restrict(self, axes: Iterable[int]) -> "GridSpec":
        axes = list(axes)
        return GridSpec(
            tuple(self.q_labels[i - 1] for i in axes),
            tuple(self.p_labels[i - 1] for i in axes),
        )

    def check_dim(self, n: int) -> None:
        if n != self.n:
            raise DimensionMismatch(f"dimension {n} does not match grid dimension {self.n}")


# ── Distributions ────────────────────────────────────────────────────

def _check_normalized(values: np.ndarray, norm_tol: float, what: str) -> None:
    if values.size and values.min() < 0:
        raise NormalizationError(f"{what} has negative mass {values.min():.3g}")
    total = float(values.sum())
    if abs(total - 1.0) > norm_tol:
        raise NormalizationError(f"{what} sums to {total!r}, not 1")


@dataclass(frozen=True, eq=False)
class MarginalTensor:
    assignment: AxisAssignment
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != self.assignment.n:
            raise ShapeMismatch(
                f"marginal of type {self.assignment} needs {self.assignment.n} axes, got {values.ndim}"
            )
        object.__setattr__(self, "values", values)

    def factor(self) -> Factor:
        return Factor(self.assignment.letters(), self.values)

    def validate(self, norm_tol: float = TOL_NORM) -> None:
        _check_normalized(self.values, norm_tol, f"marginal {self.assignment}")


@dataclass(frozen=True, eq=False)
class PhaseTensor:
    """Masses over (q_1..q_N, p_1..p_N)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.phase_shape:
            raise ShapeMismatch(f"phase tensor shape {values.shape} != grid {self.grid.phase_shape}")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.grid.n

    def factor(self) -> Factor:
        return Factor(phase_letters(self.n), self.values)

    @classmethod
    def from_factor(cls, grid: GridSpec, factor: Factor) -> "PhaseTensor":
        letters = phase_letters(grid.n)
        return cls(grid, factor.expand(letters, grid.letter_sizes).aligned(letters))

    @classmethod
    def uniform(cls, grid: GridSpec) -> "PhaseTensor":
        return cls(grid, np.full(grid.phase_shape, 1.0 / grid.cell_count))

    def validate(self, norm_tol: float = TOL_NORM) -> None:
        _check_normalized(self.values, norm_tol, "phase tensor")


@dataclass(frozen=True, eq=False)
class Chain:
    grid: GridSpec
    members: dict[AxisAssignment, MarginalTensor]

    def __post_init__(self):
        if not self.members:
            raise DimensionMismatch("a chain needs at least one member")
        for a, member in self.members.items():
            if member.assignment != a:
                raise ShapeMismatch(f"member keyed {a} carries type {member.assignment}")
            if member.values.shape != self.grid.shape_for(a):
                raise ShapeMismatch(
                    f"member {a} has shape {member.values.shape}, grid wants {self.grid.shape_for(a)}"
                )
        ordered = {a: self.members[a] for a in sorted(self.members)}
        object.__setattr__(self, "members", ordered)

    @classmethod
    def from_tensors(cls, grid: GridSpec, tensors: Mapping[AxisAssignment, np.ndarray]) -> "Chain":
        return cls(grid, {a: MarginalTensor(a, v) for a, v in tensors.items()})

    @cached_property
    def graph(self) -> ChainGraph:
        return ChainGraph(self.grid.n, tuple(self.members))

    @property
    def types(self) -> tuple[AxisAssignment, ...]:
        return tuple(self.members)

    def __getitem__(self, a: AxisAssignment) -> MarginalTensor:
        return self.members[a]

    def __contains__(self, a: AxisAssignment) -> bool:
        return a in self.members

    def __len__(self) -> int:
        return len(self.members)

    def factor(self, a: AxisAssignment) -> Factor:
        return self.members[a].factor()

    def restrict(self, types: Iterable[AxisAssignment]) -> "Chain":
        return Chain(self.grid, {a: self.members[a] for a in types})

    def validate(self, norm_tol: float = TOL_NORM) -> None:
        for member in self.members.values():
            member.validate(norm_tol)


# ── Operations ───────────────────────────────────────────────────────

def marginalize(rho: PhaseTensor, a: AxisAssignment) -> MarginalTensor:
    """Sum out the conjugate of every variable selected by `a`."""
    rho.grid.check_dim(a.n)
    return MarginalTensor(a, rho.factor().keep(a.letters()).aligned(a.letters()))


def chain_from_phase(rho: PhaseTensor, graph: ChainGraph) -> Chain:
    return Chain(rho.grid, {a: marginalize(rho, a) for a in graph.vertices})


def _pair_sums(sa: MarginalTensor, sb: MarginalTensor) -> tuple[Factor, Factor]:
    """Both sides of the pairwise compatibility condition, over the shared letters X."""
    y = sa.assignment.differing_axes(sb.assignment)
    left = sa.factor().sum_out(sa.assignment.letter(i) for i in y)
    right = sb.factor().sum_out(sb.assignment.letter(i) for i in y)
    if left.values.shape != right.aligned(left.letters).shape:
        raise ShapeMismatch(f"{sa.assignment} and {sb.assignment} disagree on shared grid sizes")
    return left, right


def pair_deviation(sa: MarginalTensor, sb: MarginalTensor) -> float:
    left, right = _pair_sums(sa, sb)
    return float(np.max(np.abs(left.values - right.aligned(left.letters)), initial=0.0))


@dataclass
class CompatibilityReport:
    tol: float
    deviations: dict[tuple[AxisAssignment, AxisAssignment], float] = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol

    def violations(self) -> list[tuple[AxisAssignment, AxisAssignment]]:
        return [pair for pair, dev in self.deviations.items() if dev > self.tol]

    def to_json(self) -> dict:
        return {
            "compatible": self.passed,
            "tol": self.tol,
            "max_deviation": self.max_deviation,
            "pairs": [
                {"a": a.to_type_string(), "b": b.to_type_string(), "deviation": dev}
                for (a, b), dev in self.deviations.items()
            ],
        }


def check_compatibility(chain: Chain, tol: float = TOL_COMPAT) -> CompatibilityReport:
    report = CompatibilityReport(tol)
    for a, b in itertools.combinations(chain.types, 2):
        report.deviations[(a, b)] = pair_deviation(chain[a], chain[b])
    if not report.passed:
        logger.warning(
            "chain incompatible: %d pair(s) above tol %.3g (max %.3g)",
            len(report.violations()), tol, report.max_deviation,
        )
    return report


def integrated_distribution(sa: MarginalTensor, sb: MarginalTensor, tol: float = TOL_COMPAT) -> Factor:
    """σ_{αβ}(X): σ_α summed over its Y variables, averaged with σ_β summed over Y'."""
    if sa.assignment == sb.assignment:
        raise DimensionMismatch(f"{sa.assignment} paired with itself has no link variables")
    left, right = _pair_sums(sa, sb)
    right_values = right.aligned(left.letters)
    deviation = float(np.max(np.abs(left.values - right_values), initial=0.0))
    if deviation > tol:
        raise IncompatibleChain(
            f"{sa.assignment} and {sb.assignment} differ by {deviation:.3g} after summing "
            f"their conflicting variables (tol {tol:.3g})",
            deviation=deviation,
        )
    return Factor(left.letters, 0.5 * (left.values + right_values))


# ── Test-data generation ─────────────────────────────────────────────

def random_phase_tensor(grid: GridSpec, rng: np.random.Generator) -> PhaseTensor:
    """Strictly positive random masses, each an exact dyadic rational.

    One unit per cell plus a multinomial draw over the rest of a power-of-two
    total, so every marginal sums exactly in binary floating point.
    """
    cells = grid.cell_count
    total = 2 ** max(20, cells.bit_length() + 10)
    weights = rng.random(cells)
    counts = 1 + rng.multinomial(total - cells, weights / weights.sum())
    return PhaseTensor(grid, (counts / total).reshape(grid.phase_shape))


def random_chain(graph: ChainGraph, grid: GridSpec, seed: int | None = None) -> Chain:
    """Marginals of one random phase tensor; compatible by construction."""
    grid.check_dim(graph.n)
    rho = random_phase_tensor(grid, np.random.default_rng(seed))
    return chain_from_phase(rho, graph)
