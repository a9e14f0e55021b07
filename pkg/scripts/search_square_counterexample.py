#!/usr/bin/env python3
"""
PhaseMarginals — hunt for a quantum square chain that no density reproduces.

Samples real random states on the N = 2 two-point grid (fixed seed), keeps
the first one whose square chain {12, 1'2, 12', 1'2'} breaks the correlator
bound |S| <= 2 and is confirmed infeasible by the exact LP, and writes the
state as a wavefunction file together with the seed and try budget that
found it.

The regression fixture tests/fixtures/square_counterexample.json pins
--seed 2024 --max-tries 200; the tests rerun that search and, when the file
carries amplitudes, require them to match bit for bit.

Usage:
    python3 scripts/search_square_counterexample.py
    python3 scripts/search_square_counterexample.py --seed 7 --max-tries 50000 --out /tmp/square.json
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from chain_io import save_json, wavefunction_to_json  # noqa: E402
from config import setup_logging  # noqa: E402
from feasibility import chsh_values, search_square_counterexample  # noqa: E402

logger = logging.getLogger("mf.search")

DEFAULT_OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "square_counterexample.json"
FIXTURE_SEED = 2024
FIXTURE_MAX_TRIES = 200


def main() -> int:
    parser = argparse.ArgumentParser(description="Search for a non-admissible quantum square chain")
    parser.add_argument("--seed", type=int, default=FIXTURE_SEED)
    parser.add_argument("--max-tries", type=int, default=FIXTURE_MAX_TRIES)
    parser.add_argument("--out", type=str, default=str(DEFAULT_OUT))
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args()

    setup_logging(verbose=args.verbose)
    found = search_square_counterexample(args.seed, args.max_tries)
    if found is None:
        print(f"No infeasible square chain in {args.max_tries} tries (seed {args.seed}).")
        return 1

    psi, chain, result = found
    payload = {**wavefunction_to_json(psi), "seed": args.seed, "max_tries": args.max_tries}
    path = save_json(Path(args.out), payload)
    logger.info("wrote square counterexample (seed %d) to %s", args.seed, path)
    print(f"S = {max(chsh_values(chain)):.6f}, LP optimum {result.optimum}/{result.denominator}")
    print(f"Saved {path}: {payload['re']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
