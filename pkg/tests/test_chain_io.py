"""Tests for chain_io.py — JSON layouts, atomic writes and malformed input."""

import json

import numpy as np
import pytest

from chain_io import (
    chain_to_json,
    load_chain,
    load_function,
    load_phase,
    load_state,
    load_zeta,
    save_chain,
    save_json,
    save_phase,
    save_state,
)
from config import SCHEMA_VERSION
from errors import ChainFormatError, DimensionMismatch, TypeParseError
from grid_dist import GridSpec, random_chain, random_phase_tensor
from quantum import Ensemble, WaveFunction


def test_chain_file_rereads_bit_exact(hub3, tmp_path):
    chain = random_chain(hub3, GridSpec.uniform(3, [2, 3, 4]), seed=9)
    path = save_chain(tmp_path / "chain.json", chain)
    again = load_chain(path)
    assert again.types == chain.types
    assert again.grid == chain.grid
    for a in chain.types:
        assert np.array_equal(again[a].values, chain[a].values)


def test_chain_layout(hub3, tmp_path):
    chain = random_chain(hub3, GridSpec.two_point(3), seed=1)
    data = json.loads(save_chain(tmp_path / "chain.json", chain).read_text())
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["N"] == 3
    assert data["grids"][0] == {"q": [-1.0, 1.0], "p": [-1.0, 1.0]}
    assert [m["type"] for m in data["members"]] == ["qqp", "qpq", "pqq"]
    assert len(data["members"][0]["values"]) == 8
    assert not list(tmp_path.glob("*.tmp"))


def test_phase_and_state_files(tmp_path, rng):
    grid = GridSpec.uniform(2, 3)
    rho = random_phase_tensor(grid, rng)
    assert np.array_equal(load_phase(save_phase(tmp_path / "rho.json", rho)).values, rho.values)

    psi = WaveFunction.random(grid, rng)
    loaded = load_state(save_state(tmp_path / "psi.json", psi))
    assert isinstance(loaded, WaveFunction)
    assert np.array_equal(loaded.amplitudes, psi.amplitudes)

    ens = Ensemble(((0.25, psi), (0.75, WaveFunction.random(grid, rng))))
    loaded = load_state(save_state(tmp_path / "ens.json", ens))
    assert isinstance(loaded, Ensemble)
    assert [w for w, _ in loaded.items] == [0.25, 0.75]


def test_real_wavefunction_may_omit_imaginary_part(tmp_path):
    path = tmp_path / "psi.json"
    path.write_text(json.dumps({"N": 1, "sizes": [2], "re": [0.6, 0.8]}))
    psi = load_state(path)
    assert np.allclose(psi.amplitudes, [0.6, 0.8])


def test_function_and_zeta_files(tmp_path):
    grid = GridSpec.two_point(1)
    save_json(tmp_path / "f.json", {"values": [1.0, 2.0, 3.0, 4.0]})
    assert load_function(tmp_path / "f.json", grid).shape == (2, 2)
    save_json(tmp_path / "z.json", {"values": [0.5, 0.5], "shape": [2]})
    assert np.allclose(load_zeta(tmp_path / "z.json"), [0.5, 0.5])
    save_json(tmp_path / "short.json", {"values": [1.0]})
    with pytest.raises(ChainFormatError):
        load_function(tmp_path / "short.json", grid)


# ── Malformed input ──────────────────────────────────────────────────

def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(ChainFormatError):
        load_chain(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ChainFormatError):
        load_chain(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ChainFormatError):
        load_chain(bad)


def test_unsupported_schema_version(hub3, tmp_path):
    data = chain_to_json(random_chain(hub3, GridSpec.two_point(3), seed=1))
    path = tmp_path / "chain.json"
    path.write_text(json.dumps({**data, "schema_version": 99}))
    with pytest.raises(ChainFormatError):
        load_chain(path)


@pytest.mark.parametrize("mutate,error", [
    (lambda d: d.pop("members"), ChainFormatError),
    (lambda d: d["members"][0].update(values=[0.5, 0.5]), ChainFormatError),
    (lambda d: d["members"][1].update(type=d["members"][0]["type"]), ChainFormatError),
    (lambda d: d["members"][0].update(type="qx"), TypeParseError),
    (lambda d: d["members"][0].update(type="qq"), DimensionMismatch),
    (lambda d: d.update(grids=d["grids"][:2]), ChainFormatError),
    (lambda d: d["grids"][0].pop("p"), ChainFormatError),
])
def test_malformed_chain_fields(hub3, tmp_path, mutate, error):
    data = chain_to_json(random_chain(hub3, GridSpec.two_point(3), seed=1))
    mutate(data)
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(data))
    with pytest.raises(error):
        load_chain(path)
