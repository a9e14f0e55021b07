"""
PhaseMarginals — JSON files for chains, phase tensors and states.

Layouts (all carry "schema_version"; arrays are flat, row-major, axis 1
outermost):
    chain         {"N", "grids": [{"q": [...], "p": [...]}], "members": [{"type": "qpq", "values": [...]}]}
    phase tensor  {"N", "grids", "values"}    axis order q_1..q_N, p_1..p_N
    wavefunction  {"N", "sizes", "re", "im"}  on centered grids
    ensemble      {"N", "weights", "states": [wavefunction, ...]}
    zeta          {"values", "shape"}         over T′, ascending passive axes

Floats are written with repr precision so every file re-reads bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from chain_graph import AxisAssignment
from config import SCHEMA_VERSION
from errors import ChainFormatError, MarginalsError
from grid_dist import Chain, GridSpec, MarginalTensor, PhaseTensor
from quantum import Ensemble, WaveFunction


# ── Files ────────────────────────────────────────────────────────────

def save_json(path: Path, payload: dict) -> Path:
    """Write atomically (tmp file + replace), stamping the schema version."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2, sort_keys=True))
    tmp.replace(path)
    return path


def load_json(path: Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ChainFormatError(f"{path}: no such file") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ChainFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ChainFormatError(f"{path}: top level must be an object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ChainFormatError(f"{path}: schema_version {version} is not supported")
    return data


def _field(data: dict, key: str) -> Any:
    if key not in data:
        raise ChainFormatError(f"missing field {key!r}")
    return data[key]


def _array(flat, shape: tuple[int, ...], what: str, dtype=float) -> np.ndarray:
    values = np.asarray(flat, dtype=dtype)
    expected = int(np.prod(shape)) if shape else 1
    if values.ndim != 1 or values.size != expected:
        raise ChainFormatError(f"{what}: expected {expected} values, got {values.size}")
    return values.reshape(shape)


def _flat(values: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(values).ravel()]


def _parsed(path: Path, parse):
    """Run a from_json parser on a file; malformed content becomes ChainFormatError."""
    data = load_json(path)
    try:
        return parse(data)
    except MarginalsError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ChainFormatError(f"{path}: {exc}") from exc


# ── Grids and chains ─────────────────────────────────────────────────

def grid_to_json(grid: GridSpec) -> list[dict]:
    return [{"q": list(q), "p": list(p)} for q, p in zip(grid.q_labels, grid.p_labels)]


def grid_from_json(n: int, grids: list) -> GridSpec:
    if len(grids) != n:
        raise ChainFormatError(f"{len(grids)} grid entries for N = {n}")
    try:
        return GridSpec(tuple(g["q"] for g in grids), tuple(g["p"] for g in grids))
    except (KeyError, TypeError) as exc:
        raise ChainFormatError(f"malformed grid entry ({exc})") from exc


def chain_to_json(chain: Chain) -> dict:
    return {
        "N": chain.grid.n,
        "grids": grid_to_json(chain.grid),
        "members": [{"type": a.to_qp(), "values": _flat(m.values)} for a, m in chain.members.items()],
    }


def chain_from_json(data: dict) -> Chain:
    n = int(_field(data, "N"))
    grid = grid_from_json(n, _field(data, "grids"))
    members = {}
    for entry in _field(data, "members"):
        a = AxisAssignment.from_qp(_field(entry, "type"))
        grid.check_dim(a.n)
        if a in members:
            raise ChainFormatError(f"type {a} listed twice")
        members[a] = MarginalTensor(a, _array(_field(entry, "values"), grid.shape_for(a), f"member {a}"))
    return Chain(grid, members)


def save_chain(path: Path, chain: Chain) -> Path:
    return save_json(path, chain_to_json(chain))


def load_chain(path: Path) -> Chain:
    return _parsed(path, chain_from_json)


# ── Phase tensors ────────────────────────────────────────────────────

def phase_to_json(rho: PhaseTensor) -> dict:
    return {"N": rho.n, "grids": grid_to_json(rho.grid), "values": _flat(rho.values)}


def phase_from_json(data: dict) -> PhaseTensor:
    n = int(_field(data, "N"))
    grid = grid_from_json(n, _field(data, "grids"))
    return PhaseTensor(grid, _array(_field(data, "values"), grid.phase_shape, "phase tensor"))


def save_phase(path: Path, rho: PhaseTensor) -> Path:
    return save_json(path, phase_to_json(rho))


def load_phase(path: Path) -> PhaseTensor:
    return _parsed(path, phase_from_json)


def load_function(path: Path, grid: GridSpec) -> np.ndarray:
    """A real function on phase space (the f of a solution family)."""
    data = load_json(path)
    return _array(_field(data, "values"), grid.phase_shape, "function")


def load_zeta(path: Path) -> np.ndarray:
    data = load_json(path)
    shape = tuple(int(s) for s in _field(data, "shape"))
    return _array(_field(data, "values"), shape, "zeta")


# ── States ───────────────────────────────────────────────────────────

def wavefunction_to_json(psi: WaveFunction) -> dict:
    return {
        "N": psi.n,
        "sizes": [len(q) for q in psi.grid.q_labels],
        "re": _flat(psi.amplitudes.real),
        "im": _flat(psi.amplitudes.imag),
    }


def wavefunction_from_json(data: dict) -> WaveFunction:
    n = int(_field(data, "N"))
    sizes = tuple(int(s) for s in _field(data, "sizes"))
    if len(sizes) != n:
        raise ChainFormatError(f"{len(sizes)} sizes for N = {n}")
    re = _array(_field(data, "re"), sizes, "wavefunction re")
    im = _array(data.get("im", [0.0] * int(np.prod(sizes))), sizes, "wavefunction im")
    return WaveFunction(GridSpec.uniform(n, list(sizes)), re + 1j * im)


def ensemble_to_json(ens: Ensemble) -> dict:
    return {
        "N": ens.n,
        "weights": [w for w, _ in ens.items],
        "states": [wavefunction_to_json(psi) for _, psi in ens.items],
    }


def ensemble_from_json(data: dict) -> Ensemble:
    weights = _field(data, "weights")
    states = _field(data, "states")
    if len(weights) != len(states):
        raise ChainFormatError(f"{len(weights)} weights for {len(states)} states")
    return Ensemble(tuple((float(w), wavefunction_from_json(s)) for w, s in zip(weights, states)))


def load_state(path: Path) -> WaveFunction | Ensemble:
    """Wavefunction or ensemble file, told apart by the "states" field."""
    return _parsed(path, lambda d: ensemble_from_json(d) if "states" in d else wavefunction_from_json(d))


def save_state(path: Path, state: WaveFunction | Ensemble) -> Path:
    payload = ensemble_to_json(state) if isinstance(state, Ensemble) else wavefunction_to_json(state)
    return save_json(path, payload)
