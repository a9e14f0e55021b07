"""
PhaseMarginals — feasibility oracle and non-admissible chain families.

lp_feasible() asks the exact simplex whether a nonnegative phase tensor
reproduces every member of a chain. Members are quantized to integers over
a common denominator D; one row per (member, cell), one column per phase
cell. Infeasible verdicts carry a Farkas vector z (per row) with A^T z >= 0
and b^T z < 0.

Also here: J-reduction onto a subset of axes, the k-axis counterexample
chain with its closed-form certificate, its embedding into any type whose
connectification has an insertion with three or more legs, and the
correlator screening used to hunt quantum counterexamples on the square.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from chain_graph import AxisAssignment, ChainGraph, parse_type
from classifier import ConnectifiedDiagram
from config import CELL_CAP, DENOMINATOR
from errors import CellCapExceeded, InvalidCounterexampleOrder, NormalizationError, ShapeMismatch
from exact_lp import nullspace, phase_one, quantize, rank
from grid_dist import Chain, Factor, GridSpec, MarginalTensor, PhaseTensor
from quantum import WaveFunction, quantum_chain

logger = logging.getLogger("mf.feasibility")

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"

# Largest |S| any admissible two-point square chain can reach
CHSH_CLASSICAL_BOUND = 2.0


# ── Marginal constraint system ───────────────────────────────────────

@dataclass
class MarginalSystem:
    """A x = b for phase masses x (scaled by D); rows keyed by (type, cell)."""

    grid: GridSpec
    denominator: int
    row_keys: list[tuple[AxisAssignment, tuple[int, ...]]]
    rows: list[dict[int, int]]
    rhs: list[int]
    lossless: bool

    @property
    def n_cols(self) -> int:
        return self.grid.cell_count

    def column_sums(self, z: list[Fraction]) -> list[Fraction]:
        """A^T z."""
        out = [Fraction(0)] * self.n_cols
        for coeff, row in zip(z, self.rows):
            if coeff:
                for j in row:
                    out[j] += coeff
        return out

    def residual(self, x: dict[int, Fraction]) -> Fraction:
        """max |A x - b| in units of 1/D."""
        worst = Fraction(0)
        for row, b in zip(self.rows, self.rhs):
            worst = max(worst, abs(sum((x.get(j, Fraction(0)) for j in row), Fraction(0)) - b))
        return worst


def marginal_system(chain: Chain, denominator: int = DENOMINATOR, cell_cap: int = CELL_CAP) -> MarginalSystem:
    grid = chain.grid
    cells = grid.cell_count
    if cells > cell_cap:
        raise CellCapExceeded(f"{cells} phase cells exceed the cap of {cell_cap}")

    n = grid.n
    coords = np.unravel_index(np.arange(cells), grid.phase_shape)
    row_keys, rows, rhs = [], [], []
    lossless = True
    for a, member in chain.members.items():
        # Phase axis of the variable a selects on axis i: q_i -> i-1, p_i -> n+i-1
        picked = tuple(coords[(n if a.is_momentum(i) else 0) + i - 1] for i in range(1, n + 1))
        target = np.ravel_multi_index(picked, member.values.shape)
        counts, exact = quantize(member.values, denominator)
        lossless &= exact

        by_cell: dict[int, list[int]] = {}
        for col, t in enumerate(target.tolist()):
            by_cell.setdefault(t, []).append(col)
        for flat, count in enumerate(counts):
            row_keys.append((a, tuple(int(c) for c in np.unravel_index(flat, member.values.shape))))
            rows.append({col: 1 for col in by_cell.get(flat, [])})
            rhs.append(count)
    return MarginalSystem(grid, denominator, row_keys, rows, rhs, lossless)


# ── LP verdicts ──────────────────────────────────────────────────────

@dataclass
class FeasibilityResult:
    status: str
    exact: bool                                   # quantization was lossless
    optimum: Fraction                             # phase-one optimum, units of 1/D
    residual: float                               # max marginal mismatch of the witness
    pivots: int
    denominator: int
    witness: PhaseTensor | None = None
    witness_exact: dict[int, Fraction] | None = None   # cell -> mass, exact
    certificate: list[Fraction] | None = None          # z per row
    row_keys: list[tuple[AxisAssignment, tuple[int, ...]]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def to_json(self) -> dict:
        out = {
            "status": self.status,
            "exact": self.exact,
            "denominator": self.denominator,
            "optimum": str(self.optimum),
            "residual": self.residual,
            "pivots": self.pivots,
        }
        if self.certificate is not None:
            out["certificate"] = [
                {"type": a.to_qp(), "cell": list(cell), "z": str(z)}
                for (a, cell), z in zip(self.row_keys, self.certificate)
                if z != 0
            ]
        return out


def lp_feasible(chain: Chain, denominator: int = DENOMINATOR, cell_cap: int = CELL_CAP) -> FeasibilityResult:
    """Exact verdict on whether some nonnegative phase tensor has these marginals."""
    system = marginal_system(chain, denominator, cell_cap)
    result = phase_one(
        [{j: Fraction(v) for j, v in row.items()} for row in system.rows],
        [Fraction(v) for v in system.rhs],
        system.n_cols,
    )
    # Lossy inputs: rounding and flooring cost at most one unit each per row
    slack = 0 if system.lossless else 2 * len(system.rows)
    feasible = result.optimum <= slack

    if feasible:
        witness_exact = {j: v / denominator for j, v in result.x.items()}
        values = np.zeros(system.n_cols)
        for j, v in witness_exact.items():
            values[j] = float(v)
        residual = float(system.residual(result.x) / denominator)
        out = FeasibilityResult(
            FEASIBLE, system.lossless, result.optimum, residual, result.pivots, denominator,
            witness=PhaseTensor(chain.grid, values.reshape(chain.grid.phase_shape)),
            witness_exact=witness_exact,
            row_keys=system.row_keys,
        )
    else:
        out = FeasibilityResult(
            INFEASIBLE, system.lossless, result.optimum, float(result.optimum / denominator),
            result.pivots, denominator,
            certificate=[-y for y in result.y],
            row_keys=system.row_keys,
        )
    logger.info(
        "LP %s: %d rows x %d cells, %d pivots, optimum %s/%d%s",
        out.status, len(system.rows), system.n_cols, result.pivots, result.optimum,
        denominator, "" if system.lossless else " (lossy quantization)",
    )
    return out


def verify_certificate(chain: Chain, result: FeasibilityResult) -> bool:
    """A^T z >= 0 on every cell and b^T z < 0, in exact arithmetic."""
    if result.certificate is None:
        return False
    system = marginal_system(chain, result.denominator, cell_cap=chain.grid.cell_count)
    z = result.certificate
    if len(z) != len(system.rows):
        return False
    if any(s < 0 for s in system.column_sums(z)):
        return False
    return sum((Fraction(b) * zi for b, zi in zip(system.rhs, z)), Fraction(0)) < 0


def verify_witness(chain: Chain, result: FeasibilityResult) -> bool:
    """Nonnegative witness whose marginals equal the quantized chain exactly."""
    if result.witness_exact is None:
        return False
    if any(v < 0 for v in result.witness_exact.values()):
        return False
    system = marginal_system(chain, result.denominator, cell_cap=chain.grid.cell_count)
    scaled = {j: v * result.denominator for j, v in result.witness_exact.items()}
    return system.residual(scaled) == 0


# ── J-reduction ──────────────────────────────────────────────────────

def j_reduce(chain: Chain, axes) -> Chain:
    """Sum every member over the axes outside J; keep one member per reduced type."""
    axes = sorted(set(axes))
    n = chain.grid.n
    if not axes or axes[0] < 1 or axes[-1] > n:
        raise ShapeMismatch(f"J = {axes} is not a nonempty subset of 1..{n}")
    outside = [i for i in range(1, n + 1) if i not in axes]

    grid = chain.grid.restrict(axes)
    members: dict[AxisAssignment, MarginalTensor] = {}
    for a, member in chain.members.items():  # canonical order: first wins
        reduced = a.restrict(axes)
        if reduced in members:
            continue
        kept = "".join(a.letter(i) for i in axes)
        values = member.factor().sum_out(a.letter(i) for i in outside).aligned(kept)
        members[reduced] = MarginalTensor(reduced, values)
    return Chain(grid, members)


# ── k-axis counterexample family ─────────────────────────────────────

HALF = Fraction(1, 2)
T_VEC = (HALF, HALF)        # index 0 <-> q = -1, index 1 <-> q = +1
U_VEC = (-HALF, HALF)


def _outer(vectors) -> np.ndarray:
    out = np.array(1.0)
    for v in vectors:
        out = np.multiply.outer(out, np.asarray([float(x) for x in v]))
    return out


def star_types(k: int) -> list[AxisAssignment]:
    """Momentum on axis j, position elsewhere, j = 1..k."""
    return [AxisAssignment(tuple(i == j for i in range(1, k + 1))) for j in range(1, k + 1)]


def reduced_member(k: int, j: int) -> np.ndarray:
    """τ̄_j over the k-1 position axes r != j (ascending)."""
    others = k - 1
    if j == 1:
        return _outer([T_VEC] * others) - _outer([U_VEC] * others)
    return _outer([T_VEC] * others) + _outer([U_VEC] * others)


def _check_order(k: int) -> None:
    if k < 2:
        raise InvalidCounterexampleOrder(f"k = {k}: the construction needs k >= 3 axes")
    if k == 2:
        raise InvalidCounterexampleOrder(
            "k = 2: the two sign monomials that rule out positivity only exist for k >= 3"
        )


def star_chain(k: int, gamma: list[np.ndarray] | None = None) -> Chain:
    """τ_j = γ_j(p_j) τ̄_j on two-point grids labelled {-1, +1}."""
    _check_order(k)
    gamma = gamma or [np.array([0.5, 0.5])] * k
    if len(gamma) != k:
        raise ShapeMismatch(f"{len(gamma)} momentum distributions for k = {k}")

    members = {}
    for j, a in enumerate(star_types(k), start=1):
        g = np.asarray(gamma[j - 1], dtype=float)
        if g.shape != (2,):
            raise ShapeMismatch(f"γ_{j} must be a two-point distribution")
        if g.min() < 0 or abs(g.sum() - 1.0) > 1e-12:
            raise NormalizationError(f"γ_{j} must be nonnegative and sum to 1")
        bar = reduced_member(k, j)
        # Insert the momentum axis at position j-1
        members[a] = np.moveaxis(np.multiply.outer(g, bar), 0, j - 1)
    return Chain.from_tensors(GridSpec.two_point(k), members)


@dataclass(frozen=True)
class StarCertificate:
    """Two configuration cells whose masses are affine in λ with a negative sum."""

    k: int
    first: tuple[Fraction, Fraction]     # (constant, slope in λ)
    second: tuple[Fraction, Fraction]
    first_cell: tuple[int, ...]          # ε per axis
    second_cell: tuple[int, ...]
    nullity: int

    @property
    def total(self) -> Fraction:
        return self.first[0] + self.second[0]

    def at(self, lam: Fraction) -> tuple[Fraction, Fraction]:
        return self.first[0] + self.first[1] * lam, self.second[0] + self.second[1] * lam

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "first": {"cell": list(self.first_cell), "constant": str(self.first[0]), "slope": str(self.first[1])},
            "second": {"cell": list(self.second_cell), "constant": str(self.second[0]), "slope": str(self.second[1])},
            "sum": str(self.total),
            "nullity": self.nullity,
        }


def _prod(values) -> int:
    out = 1
    for v in values:
        out *= v
    return out


def configuration_mass(k: int, eps: tuple[int, ...]) -> tuple[Fraction, Fraction]:
    """General configuration density at ε as (constant, λ-slope)."""
    scale = Fraction(1, 2 ** k)
    const = 1 - _prod(eps[1:]) + sum(_prod(e for r, e in enumerate(eps) if r != j) for j in range(1, k))
    return scale * const, scale * _prod(eps)


def configuration_system(k: int) -> tuple[list[list[int]], list[Fraction], list[tuple[int, ...]]]:
    """Rows: summing the configuration density over q_j must give τ̄_j."""
    cells = list(itertools.product((-1, 1), repeat=k))
    matrix, rhs = [], []
    for j in range(k):
        bar = reduced_member(k, j + 1)
        for rest in itertools.product((-1, 1), repeat=k - 1):
            matrix.append([1 if tuple(c[r] for r in range(k) if r != j) == rest else 0 for c in cells])
            idx = tuple((e + 1) // 2 for e in rest)
            rhs.append(Fraction(bar[idx]).limit_denominator(2 ** k))
    return matrix, rhs, cells


def star_certificate(k: int) -> StarCertificate:
    """Closed-form cell masses, checked against the exact configuration system."""
    _check_order(k)
    matrix, rhs, cells = configuration_system(k)
    # The closed form must solve the system for every λ
    for lam_part in (0, 1):
        for row, b in zip(matrix, rhs):
            total = sum(configuration_mass(k, c)[lam_part] for c, a in zip(cells, row) if a)
            if total != (b if lam_part == 0 else 0):
                raise ArithmeticError(f"closed form fails the configuration system at k = {k}")

    null = nullspace(matrix)
    nullity = len(null)
    if nullity != 1 or rank(matrix) != 2 ** k - 1:
        raise ArithmeticError(f"configuration system at k = {k} has nullity {nullity}")
    pivot = next(i for i, v in enumerate(null[0]) if v != 0)
    if any(null[0][i] * _prod(cells[pivot]) != null[0][pivot] * _prod(c) for i, c in enumerate(cells)):
        raise ArithmeticError("null direction is not the full sign product")

    first_cell = (-1,) + (1,) * (k - 1)
    second_cell = (1, -1, -1) + (1,) * (k - 3)
    return StarCertificate(
        k,
        configuration_mass(k, first_cell),
        configuration_mass(k, second_cell),
        first_cell,
        second_cell,
        nullity,
    )


def embed_star_chain(diagram: ConnectifiedDiagram, gamma: list[np.ndarray] | None = None) -> Chain:
    """A compatible, non-admissible chain of type G for a non G-simple G_c.

    Takes the first insertion V of G_c with k >= 3 legs on axes i_1 < .. < i_k.
    Every vertex of G sits behind exactly one leg i_j and gets
    τ_j (with V's variables playing the position role) times a uniform
    factor on the remaining axes.
    """
    gc, graph = diagram.gc, diagram.graph
    hub = next((v for v in gc.vertices if v not in graph and gc.legs(v) >= 3), None)
    if hub is None:
        raise InvalidCounterexampleOrder(f"G_c {gc} has no insertion with three or more legs")

    leg_axes = sorted(gc.link_between(hub, w).index for w in gc.neighbors(hub))
    k = len(leg_axes)
    base = star_chain(k, gamma)
    star = star_types(k)
    n = graph.n

    members = {}
    for v in graph.vertices:
        flipped = [r for r, i in enumerate(leg_axes) if v.is_momentum(i) != hub.is_momentum(i)]
        if len(flipped) != 1:
            raise InvalidCounterexampleOrder(f"{v} is not behind a single leg of {hub}")
        tau = base[star[flipped[0]]].values
        factor = Factor("".join(v.letter(i) for i in leg_axes), tau)
        for i in range(1, n + 1):
            if i not in leg_axes:
                factor = factor * Factor(v.letter(i), np.array([0.5, 0.5]))
        members[v] = factor.aligned(v.letters())
    logger.info("embedded the k = %d counterexample at insertion %s", k, hub)
    return Chain.from_tensors(GridSpec.two_point(n), members)


# ── Square correlators ───────────────────────────────────────────────

SQUARE_TYPES = ("12", "1'2", "12'", "1'2'")


def square_graph() -> ChainGraph:
    return ChainGraph(2, tuple(parse_type(t, 2) for t in SQUARE_TYPES))


def correlators(chain: Chain) -> dict[tuple[bool, bool], float]:
    """E(x_1, x_2) = Σ s_1 s_2 σ with outcome signs -1, +1 by grid index."""
    if chain.grid.n != 2 or chain.grid.phase_shape != (2, 2, 2, 2):
        raise ShapeMismatch("correlators need N = 2 with two-point grids")
    signs = np.array([-1.0, 1.0])
    weights = np.multiply.outer(signs, signs)
    return {a.flags: float(np.sum(weights * chain[a].values)) for a in chain.types}


def chsh_values(chain: Chain) -> list[float]:
    """|S| for the four sign placements of S = ±E_qq ± E_qp ± E_pq ± E_pp (one minus)."""
    e = correlators(chain)
    order = [(False, False), (False, True), (True, False), (True, True)]
    if any(key not in e for key in order):
        raise ShapeMismatch("correlators need all four square types")
    values = []
    for minus in range(4):
        s = sum((-1 if idx == minus else 1) * e[key] for idx, key in enumerate(order))
        values.append(abs(s))
    return values


def search_square_counterexample(
    seed: int,
    max_tries: int = 20_000,
    denominator: int = DENOMINATOR,
) -> tuple[WaveFunction, Chain, FeasibilityResult] | None:
    """First random real two-qubit-like state whose square chain is LP-infeasible."""
    rng = np.random.default_rng(seed)
    grid = GridSpec.uniform(2, 2)
    graph = square_graph()
    for attempt in range(1, max_tries + 1):
        psi = WaveFunction.random(grid, rng, real=True)
        chain = quantum_chain(psi, graph)
        if max(chsh_values(chain)) <= CHSH_CLASSICAL_BOUND + 1e-9:
            continue
        result = lp_feasible(chain, denominator)
        if not result.feasible:
            logger.info("square counterexample found after %d tries", attempt)
            return psi, chain, result
    logger.warning("no square counterexample in %d tries (seed %d)", max_tries, seed)
    return None
