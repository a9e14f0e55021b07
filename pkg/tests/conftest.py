"""Shared pytest fixtures for PhaseMarginals tests.

The repo root goes on sys.path so the flat modules (chain_graph, classifier,
reconstructor, ...) import as they do for mf.py. Logging is pointed at a
per-test temp directory so CLI runs never write under the real MF_HOME.

The named graphs are the worked examples used throughout the suite:
    quartet4  {1234, 1'234, 1'2'34, 12'3'4'}          proper, holds a quartet
    simple4   {1234, 1'234, 1'2'34, 1'23'4'}          G-simple G_c
    hub3      {1'23, 12'3, 123'}                      insertion 123 with three legs
    tree4     {1234, 1'234, 1'2'34, 1'23'4, 1'23'4'}  proper connected tree
    square    {12, 1'2, 12', 1'2'}                    non proper
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Repo root on sys.path so `import chain_graph`, `import mf` work
REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT))

import config  # noqa: E402
from chain_graph import ChainGraph  # noqa: E402

FIXTURES = Path(__file__).resolve().parent / "fixtures"

QUARTET4 = ["1234", "1'234", "1'2'34", "12'3'4'"]
SIMPLE4 = ["1234", "1'234", "1'2'34", "1'23'4'"]
HUB3 = ["1'23", "12'3", "123'"]
TREE4 = ["1234", "1'234", "1'2'34", "1'23'4", "1'23'4'"]
SQUARE = ["12", "1'2", "12'", "1'2'"]


def graph_of(types: list[str]) -> ChainGraph:
    n = len(types[0].replace("'", ""))
    return ChainGraph.from_types(types, n)


# ── Fixtures ─────────────────────────────────────────────────────────

@pytest.fixture(autouse=True)
def isolated_logs(tmp_path, monkeypatch):
    """mf.log goes to a temp dir; MF_* settings come only from the test."""
    monkeypatch.setattr(config, "LOG_DIR", tmp_path / "logs")
    for var in ("MF_TOL", "MF_NORM_TOL", "MF_DENOMINATOR", "MF_CELL_CAP", "MF_ENUM_GUARD", "MF_THREADS"):
        monkeypatch.delenv(var, raising=False)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def quartet4():
    return graph_of(QUARTET4)


@pytest.fixture
def simple4():
    return graph_of(SIMPLE4)


@pytest.fixture
def hub3():
    return graph_of(HUB3)


@pytest.fixture
def tree4():
    return graph_of(TREE4)


@pytest.fixture
def square():
    return graph_of(SQUARE)
