"""
PhaseMarginals — discrete quantum chains.

A wavefunction lives on the q-grids. Its amplitude for a mixed type is
obtained by a centered unitary DFT on every momentum axis (negative
exponent q -> p, norm="ortho"); the member σ is the squared modulus.
Mixed states are ensembles of pure states.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from chain_graph import AxisAssignment, ChainGraph, is_proper
from classifier import ConnectifiedDiagram
from config import TOL_NORM
from errors import DimensionMismatch, NormalizationError, NotProperOrConnected, ShapeMismatch
from grid_dist import Chain, GridSpec, MarginalTensor

logger = logging.getLogger("mf.quantum")


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: GridSpec
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        q_shape = tuple(len(x) for x in self.grid.q_labels)
        if amps.shape != q_shape:
            raise ShapeMismatch(f"amplitudes shape {amps.shape} != q-grid shape {q_shape}")
        for i in range(1, self.grid.n + 1):
            if self.grid.size(i, False) != self.grid.size(i, True):
                raise ShapeMismatch(
                    f"axis {i}: q-grid has {self.grid.size(i, False)} points, "
                    f"p-grid {self.grid.size(i, True)}; the transform needs equal sizes"
                )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n(self) -> int:
        return self.grid.n

    def validate(self, norm_tol: float = TOL_NORM) -> None:
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > norm_tol:
            raise NormalizationError(f"wavefunction norm² is {norm!r}, not 1")

    @classmethod
    def product(cls, factors: Sequence[np.ndarray]) -> "WaveFunction":
        """ψ = φ_1 ⊗ ... ⊗ φ_N on centered grids sized by the factors."""
        amps = np.array(1.0 + 0j)
        for phi in factors:
            amps = np.multiply.outer(amps, np.asarray(phi, dtype=complex))
        return cls(GridSpec.uniform(len(factors), [len(phi) for phi in factors]), amps)

    @classmethod
    def random(cls, grid: GridSpec, rng: np.random.Generator, real: bool = False) -> "WaveFunction":
        shape = tuple(len(x) for x in grid.q_labels)
        amps = rng.normal(size=shape)
        if not real:
            amps = amps + 1j * rng.normal(size=shape)
        return cls(grid, amps / np.linalg.norm(amps))


@dataclass(frozen=True, eq=False)
class Ensemble:
    items: tuple[tuple[float, WaveFunction], ...]

    def __post_init__(self):
        items = tuple((float(w), psi) for w, psi in self.items)
        if not items:
            raise ShapeMismatch("an ensemble needs at least one state")
        object.__setattr__(self, "items", items)

    @property
    def grid(self) -> GridSpec:
        return self.items[0][1].grid

    @property
    def n(self) -> int:
        return self.grid.n

    def validate(self, norm_tol: float = TOL_NORM) -> None:
        weights = [w for w, _ in self.items]
        if min(weights) < 0:
            raise NormalizationError("ensemble weights must be nonnegative")
        if abs(sum(weights) - 1.0) > norm_tol:
            raise NormalizationError(f"ensemble weights sum to {sum(weights)!r}, not 1")
        for _, psi in self.items:
            if psi.grid != self.grid:
                raise ShapeMismatch("ensemble members live on different grids")
            psi.validate(norm_tol)


def centered_dft(x: np.ndarray, axis: int) -> np.ndarray:
    """Unitary DFT along one axis with both index ranges centered on zero."""
    return np.fft.fftshift(
        np.fft.fft(np.fft.ifftshift(x, axes=axis), axis=axis, norm="ortho"),
        axes=axis,
    )


def to_mixed_basis(psi: WaveFunction, a: AxisAssignment) -> np.ndarray:
    psi.grid.check_dim(a.n)
    out = psi.amplitudes
    for i in range(1, a.n + 1):
        if a.is_momentum(i):
            out = centered_dft(out, i - 1)
    return out


def _member(psi: WaveFunction, a: AxisAssignment) -> MarginalTensor:
    return MarginalTensor(a, np.abs(to_mixed_basis(psi, a)) ** 2)


def quantum_chain(psi: WaveFunction, graph: ChainGraph | Iterable[AxisAssignment]) -> Chain:
    types = graph.vertices if isinstance(graph, ChainGraph) else tuple(graph)
    for a in types:
        if a.n != psi.n:
            raise DimensionMismatch(f"type {a} has dimension {a.n}, wavefunction {psi.n}")
    return Chain(psi.grid, {a: _member(psi, a) for a in types})


def mixed_state_chain(ens: Ensemble, graph: ChainGraph | Iterable[AxisAssignment]) -> Chain:
    ens.validate()
    types = graph.vertices if isinstance(graph, ChainGraph) else tuple(graph)
    totals: dict[AxisAssignment, np.ndarray] = {}
    for weight, psi in ens.items:
        pure = quantum_chain(psi, types)
        for a in types:
            totals[a] = totals.get(a, 0.0) + weight * pure[a].values
    return Chain.from_tensors(ens.grid, totals)


def extend_chain(source: WaveFunction | Ensemble, diagram: ConnectifiedDiagram) -> Chain:
    """The chain of the same state on every vertex of G_c, insertions included."""
    gc = diagram.gc
    if not is_proper(gc) or not gc.is_connected():
        raise NotProperOrConnected(f"G_c {gc} is not a proper connected graph")
    if isinstance(source, Ensemble):
        chain = mixed_state_chain(source, gc)
    else:
        chain = quantum_chain(source, gc)
    logger.info(
        "extended %d-member chain to G_c with %d member(s)", len(diagram.graph), len(chain)
    )
    return chain
