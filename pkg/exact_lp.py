"""
PhaseMarginals — exact rational linear algebra.

phase_one() decides whether A x = b, x >= 0 has a solution (b >= 0) with a
tableau simplex over Fraction. Rows are sparse dicts (column -> value);
artificial columns are kept so the final reduced costs also give the dual
vector. Bland's rule throughout: smallest improving column enters, ratio
ties leave by smallest basic column.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from errors import QuantizationError

logger = logging.getLogger("mf.exact_lp")

Row = dict[int, Fraction]


@dataclass
class PhaseOneResult:
    optimum: Fraction                 # minimal total artificial mass
    x: dict[int, Fraction]            # nonzero structural values
    y: list[Fraction]                 # phase-one duals, one per row
    pivots: int

    @property
    def feasible(self) -> bool:
        return self.optimum == 0


def phase_one(rows: Sequence[Row], rhs: Sequence[Fraction], n_cols: int) -> PhaseOneResult:
    m = len(rows)
    if len(rhs) != m:
        raise ValueError(f"{m} rows but {len(rhs)} right-hand sides")
    if any(v < 0 for v in rhs):
        raise ValueError("phase one expects nonnegative right-hand sides")

    # Tableau: structural columns 0..n_cols-1, artificial i is column n_cols+i
    tableau: list[Row] = []
    for i, row in enumerate(rows):
        t = {j: Fraction(v) for j, v in row.items() if v != 0}
        t[n_cols + i] = Fraction(1)
        tableau.append(t)
    b = [Fraction(v) for v in rhs]
    basis = [n_cols + i for i in range(m)]

    # Reduced costs of min Σ artificials with the artificial basis
    reduced: Row = {}
    for row in rows:
        for j, v in row.items():
            if v:
                reduced[j] = reduced.get(j, Fraction(0)) - Fraction(v)
    objective = sum(b, Fraction(0))

    pivots = 0
    while True:
        entering = min((j for j, d in reduced.items() if d < 0), default=None)
        if entering is None:
            break

        leave = None
        best = None
        for i in range(m):
            a = tableau[i].get(entering)
            if a is None or a <= 0:
                continue
            ratio = b[i] / a
            if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                best, leave = ratio, i
        if leave is None:
            # Unbounded below cannot happen: the objective is bounded by 0
            raise ArithmeticError("phase-one objective unbounded")

        pivot_row = tableau[leave]
        scale = pivot_row[entering]
        if scale != 1:
            pivot_row = {j: v / scale for j, v in pivot_row.items()}
            b[leave] = b[leave] / scale
        tableau[leave] = pivot_row

        for i in range(m):
            if i == leave:
                continue
            factor = tableau[i].get(entering)
            if not factor:
                continue
            row = tableau[i]
            for j, v in pivot_row.items():
                new = row.get(j, Fraction(0)) - factor * v
                if new:
                    row[j] = new
                else:
                    row.pop(j, None)
            b[i] -= factor * b[leave]

        d = reduced[entering]
        for j, v in pivot_row.items():
            new = reduced.get(j, Fraction(0)) - d * v
            if new:
                reduced[j] = new
            else:
                reduced.pop(j, None)
        objective += d * b[leave]
        basis[leave] = entering
        pivots += 1

    x = {basis[i]: b[i] for i in range(m) if basis[i] < n_cols and b[i] != 0}
    # Artificial i has cost 1, so its reduced cost is 1 - y_i
    y = [1 - reduced.get(n_cols + i, Fraction(0)) for i in range(m)]
    logger.debug("phase one: %d rows, %d columns, %d pivots, optimum %s", m, n_cols, pivots, objective)
    return PhaseOneResult(objective, x, y, pivots)


# ── Quantization ─────────────────────────────────────────────────────

def quantize(values: np.ndarray, denominator: int) -> tuple[list[int], bool]:
    """Integers summing to `denominator`, proportional to `values`.

    Returns (counts, lossless); lossless means every value was already
    count/denominator exactly.
    """
    flat = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(flat)):
        raise QuantizationError("non-finite value cannot be quantized")
    if flat.size and flat.min() < 0:
        raise QuantizationError(f"negative value {flat.min()!r} cannot be quantized")

    exact = [Fraction(float(v)) * denominator for v in flat]
    floors = [int(e) for e in exact]
    lossless = all(e.denominator == 1 for e in exact) and sum(floors) == denominator

    short = denominator - sum(floors)
    if short < 0:
        # Values sum above 1: trim from the largest entries
        order = sorted(range(len(floors)), key=lambda i: (-floors[i], i))
        for i in order[: -short]:
            floors[i] -= 1
    elif short > 0:
        remainders = [e - f for e, f in zip(exact, floors)]
        order = sorted(range(len(floors)), key=lambda i: (-remainders[i], i))
        for k in range(short):
            floors[order[k % len(order)]] += 1
    if min(floors, default=0) < 0:
        raise QuantizationError("quantization produced a negative count")
    return floors, lossless


# ── Row reduction ────────────────────────────────────────────────────

def rref(matrix: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over Fraction; returns (rows, pivot columns)."""
    rows = [[Fraction(v) for v in row] for row in matrix]
    n_cols = len(rows[0]) if rows else 0
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        lead = rows[r][c]
        rows[r] = [v / lead for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def rank(matrix: Sequence[Sequence]) -> int:
    return len(rref(matrix)[1])


def nullspace(matrix: Sequence[Sequence]) -> list[list[Fraction]]:
    """Basis of {x : M x = 0}, one vector per free column."""
    rows, pivots = rref(matrix)
    n_cols = len(matrix[0]) if matrix else 0
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n_cols
        v[f] = Fraction(1)
        for r, c in enumerate(pivots):
            v[c] = -rows[r][f]
        basis.append(v)
    return basis
