"""
PhaseMarginals — tree-factorized reconstruction of a phase-space density.

Particular solution
    ρ₀ = ∏_α σ_α · ∏_links 1/σ_{αβ} · ζ(T′)

over a LinkTree: the proper connected graph itself (simple links, one
flipped axis each) or, for a G-simple connectification, G with every chain
of insertions contracted into one composite link flipping a set Y of axes.
Axes flipped by no link are passive; ζ lives on their conjugate grid.

General solution
    ρ = ρ₀ (1 + λ h),   h = Π f
where P_α is the ρ₀-weighted average over the variables σ_α does not see,
the pairwise term of a link is the same average over the link's shared
variables X, and Π f = f − Σ P_α f + Σ_links (pairwise term).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from chain_graph import AxisAssignment, ChainGraph, is_proper, var_letter
from classifier import ConnectifiedDiagram, is_g_simple
from config import SUPPORT_EPS, TOL_COMPAT, TOL_NORM
from errors import (
    ContainmentError,
    IncompatibleChain,
    InternalConsistencyError,
    NormalizationError,
    NotALeaf,
    NotProperOrConnected,
    ShapeMismatch,
    SupportViolation,
)
from grid_dist import (
    Chain,
    Factor,
    GridSpec,
    MarginalTensor,
    PhaseTensor,
    canonical_letters,
    check_compatibility,
    integrated_distribution,
    phase_letters,
)

logger = logging.getLogger("mf.reconstructor")


# ── Link trees ───────────────────────────────────────────────────────

@dataclass(frozen=True, order=True)
class TreeLink:
    """Link between two chain members; `axes` is Y (one axis unless composite)."""

    a: AxisAssignment
    b: AxisAssignment
    axes: tuple[int, ...]

    @property
    def composite(self) -> bool:
        return len(self.axes) > 1

    def other(self, v: AxisAssignment) -> AxisAssignment:
        return self.b if v == self.a else self.a

    def shared_letters(self) -> str:
        """Letters of X: the variables both endpoints carry."""
        return "".join(self.a.letter(i) for i in range(1, self.a.n + 1) if i not in self.axes)

    def own_letters(self, v: AxisAssignment) -> str:
        """Letters of v on the link axes (summed out when v is peeled)."""
        return "".join(v.letter(i) for i in self.axes)


@dataclass(frozen=True)
class LinkTree:
    n: int
    vertices: tuple[AxisAssignment, ...]
    links: tuple[TreeLink, ...]

    def __post_init__(self):
        verts = tuple(sorted(set(self.vertices)))
        links = tuple(sorted(self.links))
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "links", links)
        if len(links) != len(verts) - 1:
            raise NotProperOrConnected(f"{len(verts)} vertices with {len(links)} links is not a tree")
        used: set[int] = set()
        for link in links:
            if link.a not in verts or link.b not in verts:
                raise NotProperOrConnected(f"link {link.a}-{link.b} leaves the vertex set")
            if used.intersection(link.axes):
                raise NotProperOrConnected(f"axis set {link.axes} flipped twice in the tree")
            used.update(link.axes)
        if not self._connected():
            raise NotProperOrConnected("link tree is not connected")

    def _connected(self) -> bool:
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            v = stack.pop()
            for w in self.neighbors(v):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    # -- Constructors --

    @classmethod
    def from_graph(cls, graph: ChainGraph) -> "LinkTree":
        if not is_proper(graph) or not graph.is_connected():
            raise NotProperOrConnected(f"{graph} is not a proper connected graph")
        links = tuple(TreeLink(l.a, l.b, (l.index,)) for l in graph.links)
        return cls(graph.n, graph.vertices, links)

    @classmethod
    def from_diagram(cls, diagram: ConnectifiedDiagram) -> "LinkTree":
        """Composite-link tree on G for a G-simple diagram; tree on G_c otherwise."""
        gc, graph = diagram.gc, diagram.graph
        if not is_proper(gc) or not gc.is_connected():
            raise NotProperOrConnected(f"G_c {gc} is not a proper connected graph")
        if not is_g_simple(graph, gc):
            return cls.from_graph(gc)

        links = set()
        for v in graph.vertices:
            for w in gc.neighbors(v):
                prev, cur = v, w
                while cur not in graph:
                    nxt = [x for x in gc.neighbors(cur) if x != prev]
                    prev, cur = cur, nxt[0]
                a, b = sorted((v, cur))
                links.add(TreeLink(a, b, a.differing_axes(b)))
        return cls(graph.n, graph.vertices, tuple(links))

    # -- Structure --

    def neighbors(self, v: AxisAssignment) -> list[AxisAssignment]:
        return [link.other(v) for link in self.links if v in (link.a, link.b)]

    def links_of(self, v: AxisAssignment) -> list[TreeLink]:
        return [link for link in self.links if v in (link.a, link.b)]

    def leaves(self) -> list[AxisAssignment]:
        return [v for v in self.vertices if len(self.links_of(v)) == 1]

    def remove_leaf(self, leaf: AxisAssignment) -> "LinkTree":
        own = self.links_of(leaf)
        if leaf not in self.vertices or len(own) != 1:
            raise NotALeaf(f"{leaf} has {len(own)} legs in the current tree")
        return LinkTree(
            self.n,
            tuple(v for v in self.vertices if v != leaf),
            tuple(l for l in self.links if l is not own[0]),
        )

    @cached_property
    def passive_axes(self) -> tuple[int, ...]:
        active = {i for link in self.links for i in link.axes}
        return tuple(i for i in range(1, self.n + 1) if i not in active)

    def passive_letters(self) -> str:
        """T′: conjugates of the constant assignment on passive axes."""
        ref = self.vertices[0]
        return "".join(var_letter(i, not ref.is_momentum(i)) for i in self.passive_axes)


def as_link_tree(tree: LinkTree | ChainGraph | ConnectifiedDiagram) -> LinkTree:
    if isinstance(tree, LinkTree):
        return tree
    if isinstance(tree, ConnectifiedDiagram):
        return LinkTree.from_diagram(tree)
    return LinkTree.from_graph(tree)


# ── Propagators and ζ ────────────────────────────────────────────────

@dataclass(frozen=True)
class Propagator:
    link: TreeLink | None
    factor: Factor


def build_propagator(sigma_ab: Factor, eps: float = SUPPORT_EPS, link: TreeLink | None = None) -> Propagator:
    return Propagator(link, sigma_ab.reciprocal(eps))


@dataclass(frozen=True)
class PassiveFactor:
    axes: tuple[int, ...]
    factor: Factor

    @classmethod
    def uniform(cls, tree: LinkTree, grid: GridSpec) -> "PassiveFactor":
        letters = canonical_letters(tree.passive_letters())
        shape = tuple(grid.letter_sizes[c] for c in letters)
        count = int(np.prod(shape)) if shape else 1
        return cls(tree.passive_axes, Factor(letters, np.full(shape, 1.0 / count)))

    @classmethod
    def from_values(cls, tree: LinkTree, grid: GridSpec, values: np.ndarray) -> "PassiveFactor":
        """ζ given in axis order over T′ (ascending passive axes)."""
        letters = tree.passive_letters()
        values = np.asarray(values, dtype=float)
        shape = tuple(grid.letter_sizes[c] for c in letters)
        if values.shape != shape:
            raise ShapeMismatch(f"ζ over {letters!r} needs shape {shape}, got {values.shape}")
        if values.min(initial=0.0) < 0 or abs(float(values.sum()) - 1.0) > TOL_NORM:
            raise NormalizationError("ζ must be nonnegative and sum to 1")
        return cls(tree.passive_axes, Factor(letters, values).canonical())


# ── Particular solution ──────────────────────────────────────────────

def _check_chain(chain: Chain, tree: LinkTree, tol: float, norm_tol: float) -> None:
    missing = [v for v in tree.vertices if v not in chain]
    if missing:
        raise ContainmentError(f"chain has no member for {', '.join(map(str, missing))}")
    chain.validate(norm_tol)
    report = check_compatibility(chain.restrict(tree.vertices), tol)
    if not report.passed:
        raise IncompatibleChain(
            f"chain incompatible: max deviation {report.max_deviation:.3g} > {tol:.3g}",
            deviation=report.max_deviation,
        )


def propagators(chain: Chain, tree: LinkTree, tol: float = TOL_COMPAT) -> list[Propagator]:
    return [
        build_propagator(integrated_distribution(chain[l.a], chain[l.b], tol), link=l)
        for l in tree.links
    ]


def tree_product(chain: Chain, tree: LinkTree, zeta: PassiveFactor, tol: float = TOL_COMPAT) -> Factor:
    """∏ vertex tensors · ∏ propagators · ζ, over the letters the tree sees."""
    product = zeta.factor
    for v in tree.vertices:
        product = product * chain.factor(v)
    for prop in propagators(chain, tree, tol):
        product = product * prop.factor
    return product


def build_rho0(
    chain: Chain,
    tree: LinkTree | ChainGraph | ConnectifiedDiagram,
    zeta: PassiveFactor | None = None,
    tol: float = TOL_COMPAT,
    norm_tol: float = TOL_NORM,
) -> PhaseTensor:
    tree = as_link_tree(tree)
    _check_chain(chain, tree, tol, norm_tol)
    zeta = zeta or PassiveFactor.uniform(tree, chain.grid)

    product = tree_product(chain, tree, zeta, tol)
    letters = phase_letters(chain.grid.n)
    if canonical_letters(product.letters) != letters:
        raise InternalConsistencyError(f"tree product covers {product.letters!r}, not {letters!r}")
    rho0 = PhaseTensor(chain.grid, product.aligned(letters))

    total = float(rho0.values.sum())
    if abs(total - 1.0) > norm_tol:
        raise InternalConsistencyError(f"ρ₀ sums to {total!r}")
    logger.info(
        "built ρ₀ on %d vertices, %d link(s) (%d composite), %d passive axis(es)",
        len(tree.vertices), len(tree.links),
        sum(l.composite for l in tree.links), len(tree.passive_axes),
    )
    return rho0


# ── Peeling ──────────────────────────────────────────────────────────

def peel(rho: PhaseTensor | Factor, tree: LinkTree, leaf: AxisAssignment) -> tuple[Factor, LinkTree]:
    """Sum the leaf's own link variables out of rho; returns the reduced tree too."""
    factor = rho.factor() if isinstance(rho, PhaseTensor) else rho
    reduced = tree.remove_leaf(leaf)
    (link,) = tree.links_of(leaf)
    return factor.sum_out(link.own_letters(leaf)), reduced


def peel_to(
    rho: PhaseTensor | Factor,
    tree: LinkTree,
    target: AxisAssignment,
    choose: Callable[[Sequence[AxisAssignment]], AxisAssignment] = min,
) -> MarginalTensor:
    """Peel every other vertex (leaf picked by `choose`), then sum out T′."""
    if target not in tree.vertices:
        raise ContainmentError(f"{target} is not a tree vertex")
    factor = rho.factor() if isinstance(rho, PhaseTensor) else rho
    passive = tree.passive_letters()
    while len(tree.vertices) > 1:
        leaf = choose([v for v in tree.leaves() if v != target])
        factor, tree = peel(factor, tree, leaf)
    factor = factor.sum_out(passive)
    return MarginalTensor(target, factor.aligned(target.letters()))


# ── Projectors ───────────────────────────────────────────────────────

class Projectors:
    """P_α, the pairwise link terms and Π, all as ρ₀-weighted averages."""

    def __init__(self, rho0: PhaseTensor, tree: LinkTree, eps: float = SUPPORT_EPS):
        self.rho0 = rho0
        self.tree = tree
        self.eps = eps
        self.letters = phase_letters(rho0.n)
        self.sizes = rho0.grid.letter_sizes
        self._weight = rho0.factor()

    def average(self, f: np.ndarray, keep: str) -> np.ndarray:
        """(Σ_rest ρ₀ f) / (Σ_rest ρ₀) as a function of `keep`, 0 off support."""
        f = self._as_array(f)
        num = (self._weight * Factor(self.letters, f)).keep(keep)
        den = self._weight.keep(keep)
        top = float(den.values.max()) if den.values.size else 0.0
        support = den.values > self.eps * top
        ratio = np.zeros_like(den.values)
        ratio[support] = num.values[support] / den.values[support]
        return Factor(den.letters, ratio).expand(self.letters, self.sizes).aligned(self.letters)

    def P(self, alpha: AxisAssignment, f: np.ndarray) -> np.ndarray:
        return self.average(f, alpha.letters())

    def pair(self, link: TreeLink, f: np.ndarray) -> np.ndarray:
        """P_α P_β f for the link's endpoints, in closed form."""
        return self.average(f, link.shared_letters())

    def Pi(self, f: np.ndarray) -> np.ndarray:
        f = self._as_array(f)
        out = f.copy()
        for v in self.tree.vertices:
            out -= self.P(v, f)
        for link in self.tree.links:
            out += self.pair(link, f)
        return out

    def support(self) -> np.ndarray:
        values = self.rho0.values
        return values > self.eps * float(values.max())

    def _as_array(self, f) -> np.ndarray:
        values = np.broadcast_to(np.asarray(f, dtype=float), self.rho0.grid.phase_shape)
        return np.array(values)


def apply_P(rho0: PhaseTensor, alpha: AxisAssignment, f: np.ndarray, eps: float = SUPPORT_EPS) -> np.ndarray:
    return Projectors(rho0, LinkTree(rho0.n, (alpha,), ()), eps).P(alpha, f)


def apply_Pi(
    rho0: PhaseTensor,
    tree: LinkTree | ChainGraph | ConnectifiedDiagram,
    f: np.ndarray,
    eps: float = SUPPORT_EPS,
) -> np.ndarray:
    return Projectors(rho0, as_link_tree(tree), eps).Pi(f)


# ── General solution ─────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class SolutionFamily:
    rho0: PhaseTensor
    h: np.ndarray
    m_plus: float
    m_minus: float

    @property
    def degenerate(self) -> bool:
        """h vanishes: ρ = ρ₀ for every λ."""
        return self.m_plus == 0.0 and self.m_minus == 0.0

    @property
    def lambda_range(self) -> tuple[float, float]:
        low = -1.0 / self.m_plus if self.m_plus > 0 else -math.inf
        high = 1.0 / self.m_minus if self.m_minus > 0 else math.inf
        return low, high

    def admits(self, lam: float) -> bool:
        low, high = self.lambda_range
        return low <= lam <= high

    def rho_at(self, lam: float) -> PhaseTensor:
        return PhaseTensor(self.rho0.grid, self.rho0.values * (1.0 + lam * self.h))

    def to_json(self) -> dict:
        low, high = self.lambda_range
        return {
            "m_plus": self.m_plus,
            "m_minus": self.m_minus,
            "lambda_range": [None if math.isinf(low) else low, None if math.isinf(high) else high],
            "degenerate": self.degenerate,
        }


def general_solution(
    chain: Chain,
    tree: LinkTree | ChainGraph | ConnectifiedDiagram,
    f: np.ndarray,
    lam: float | None = None,
    zeta: PassiveFactor | None = None,
    tol: float = TOL_COMPAT,
) -> tuple[SolutionFamily, PhaseTensor | None]:
    """Solution family generated by a bounded f; ρ at λ when λ is admissible."""
    tree = as_link_tree(tree)
    rho0 = build_rho0(chain, tree, zeta, tol)
    proj = Projectors(rho0, tree)
    support = proj.support()

    h = proj.Pi(f)
    h[~support] = 0.0
    scale = max(1.0, float(np.max(np.abs(f))))
    if float(np.max(np.abs(h))) <= 1e-12 * scale:
        h = np.zeros_like(h)
        m_plus = m_minus = 0.0
    else:
        m_plus = max(0.0, float(h[support].max()))
        m_minus = max(0.0, -float(h[support].min()))
    family = SolutionFamily(rho0, h, m_plus, m_minus)

    if lam is None:
        return family, None
    if not family.admits(lam):
        low, high = family.lambda_range
        logger.warning("λ = %g outside the admissible range [%g, %g]", lam, low, high)
        return family, None
    return family, family.rho_at(lam)


def solution_membership(
    rho_candidate: PhaseTensor,
    rho0: PhaseTensor,
    tree: LinkTree | ChainGraph | ConnectifiedDiagram,
    tol: float = 1e-8,
) -> tuple[bool, float]:
    """Whether rho_candidate = ρ₀(1 + h) with h in the range of Π; returns the residual."""
    proj = Projectors(rho0, as_link_tree(tree))
    support = proj.support()
    outside = rho_candidate.values[~support]
    if outside.size and float(outside.max()) > SUPPORT_EPS * float(rho0.values.max()):
        raise SupportViolation(f"candidate puts mass {float(outside.max()):.3g} outside ρ₀'s support")

    h = np.zeros_like(rho0.values)
    h[support] = rho_candidate.values[support] / rho0.values[support] - 1.0

    residual = max(float(np.max(np.abs(proj.P(v, h)))) for v in proj.tree.vertices)
    residual = max(residual, float(np.max(np.abs(proj.Pi(h) - h))))
    logger.info("solution membership residual %.3g", residual)
    return residual <= tol, residual
