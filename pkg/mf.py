"""
PhaseMarginals — command line.

Decides whether a chain of mixed position/momentum distributions is the
set of marginals of one nonnegative phase-space density, and builds those
densities when they exist.

Usage:
    python3 mf.py classify 1234 1\\'234 1\\'2\\'34 12\\'3\\'4\\'
    python3 mf.py classify 1\\'23 12\\'3 123\\' --exhaustive
    python3 mf.py compat-check chain.json --tol 1e-10
    python3 mf.py reconstruct chain.json --out run/ [--zeta z.json] [--f f.json|random --seed 7 --lambda 0.1,0.5]
    python3 mf.py reconstruct chain.json --extend --state psi.json --out run/
    python3 mf.py oracle chain.json [--denominator 4294967296] [--out run/]
    python3 mf.py quantum psi.json qqq pqq qpq [--extend] [--out run/]
    python3 mf.py counterexample 3 --out run/

Exit codes: 0 fully admissible / feasible / compatible, 10 quantum-only,
20 non-admissible / infeasible, 2 bad input or config, 3 incompatible
chain, 4 LP cell cap exceeded, 1 internal error.

Settings: MF_HOME/.env and MF_* environment variables (see config.py);
flags win. MF_THREADS is exported to the BLAS thread variables before numpy
is first imported.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import config
from config import cap_threads, load_settings, setup_logging
from errors import (
    CellCapExceeded,
    ConfigError,
    IncompatibleChain,
    InternalConsistencyError,
    MarginalsError,
)

logger = logging.getLogger("mf.cli")

EXIT_OK = 0
EXIT_QUANTUM = 10
EXIT_NON = 20
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_INCOMPATIBLE = 3
EXIT_CAP = 4

VERDICT_EXIT = {"fully": EXIT_OK, "quantum": EXIT_QUANTUM, "non": EXIT_NON}


def emit(payload: dict) -> None:
    print(json.dumps({"schema_version": config.SCHEMA_VERSION, **payload}, indent=2, sort_keys=True))


def infer_dim(types: list[str]) -> int:
    from chain_graph import RE_AXIS_TOKEN

    first = types[0].strip()
    if first and not set(first.lower()) - {"q", "p"}:
        return len(first)
    return len(RE_AXIS_TOKEN.findall(first.replace("’", "'").replace("′", "'")))


def parse_lambdas(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--lambda expects comma-separated numbers, got {text!r}") from exc


def out_dir(args) -> Path | None:
    if not args.out:
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ── classify ─────────────────────────────────────────────────────────

def cmd_classify(args, settings) -> int:
    from chain_graph import ChainGraph
    from classifier import classify, classify_exhaustive
    from chain_io import save_json

    n = args.dim or infer_dim(args.types)
    graph = ChainGraph.from_types(args.types, n)
    result = classify(graph)
    payload = {"N": n, "types": graph.type_strings(), **result.to_json()}
    if args.exhaustive:
        exhaustive = classify_exhaustive(graph, settings.enum_guard)
        if exhaustive is not result.verdict:
            raise InternalConsistencyError(
                f"{graph}: connectification says {result.verdict.value}, "
                f"exhaustive search says {exhaustive.value}"
            )
        payload["exhaustive_verdict"] = exhaustive.value
    if (path := out_dir(args)) is not None:
        save_json(path / "classification.json", payload)
    emit(payload)
    return VERDICT_EXIT[result.verdict.value]


# ── compat-check ─────────────────────────────────────────────────────

def cmd_compat_check(args, settings) -> int:
    from chain_io import load_chain
    from grid_dist import check_compatibility

    chain = load_chain(Path(args.chain))
    chain.validate(settings.norm_tol)
    report = check_compatibility(chain, settings.tol)
    emit(report.to_json())
    return EXIT_OK if report.passed else EXIT_INCOMPATIBLE


# ── reconstruct ──────────────────────────────────────────────────────

def _load_f(args, grid):
    import numpy as np
    from chain_io import load_function

    if args.f == "random":
        if args.seed is None:
            raise ConfigError("--f random needs an explicit --seed")
        return np.random.default_rng(args.seed).random(grid.phase_shape)
    return load_function(Path(args.f), grid)


def cmd_reconstruct(args, settings) -> int:
    import numpy as np

    from chain_io import load_chain, load_state, load_zeta, save_json, save_phase
    from classifier import Verdict, classify
    from grid_dist import check_compatibility, marginalize, pair_deviation
    from quantum import extend_chain
    from reconstructor import LinkTree, PassiveFactor, build_rho0, general_solution

    chain = load_chain(Path(args.chain))
    chain.validate(settings.norm_tol)
    report = check_compatibility(chain, settings.tol)
    if not report.passed:
        raise IncompatibleChain(
            f"chain incompatible (max deviation {report.max_deviation:.3g})",
            deviation=report.max_deviation,
        )

    result = classify(chain.graph)
    if result.verdict is Verdict.NON:
        emit({"error": "type is not admissible; no density reproduces every chain of it",
              **result.to_json()})
        return EXIT_NON

    source_chain = chain
    if result.verdict is Verdict.QUANTUM:
        if not args.extend or not args.state:
            emit({"error": "quantum-only type: rerun with --extend --state FILE (the state "
                           "that generated the chain) to reconstruct on the extended graph",
                  **result.to_json()})
            return EXIT_QUANTUM
        source_chain = extend_chain(load_state(Path(args.state)), result.diagram)
        mismatch = max(pair_deviation(source_chain[a], chain[a]) for a in chain.types)
        if mismatch > settings.tol:
            raise IncompatibleChain(
                f"--state does not reproduce the chain (max deviation {mismatch:.3g})",
                deviation=mismatch,
            )
        tree = LinkTree.from_graph(result.diagram.gc)
    elif result.diagram is not None:
        tree = LinkTree.from_diagram(result.diagram)
    else:
        tree = LinkTree.from_graph(chain.graph)

    zeta = None
    if args.zeta:
        zeta = PassiveFactor.from_values(tree, chain.grid, load_zeta(Path(args.zeta)))

    rho0 = build_rho0(source_chain, tree, zeta, settings.tol, settings.norm_tol)
    residual = max(
        float(np.max(np.abs(marginalize(rho0, a).values - chain[a].values))) for a in chain.types
    )
    payload = {
        **result.to_json(),
        "tree": {
            "vertices": [v.to_type_string() for v in tree.vertices],
            "links": [{"a": l.a.to_type_string(), "b": l.b.to_type_string(), "axes": list(l.axes)}
                      for l in tree.links],
            "passive_axes": list(tree.passive_axes),
        },
        "marginal_residual": residual,
    }

    path = out_dir(args)
    if path is not None:
        payload["rho0"] = str(save_phase(path / "rho0.json", rho0))

    if args.f:
        f = _load_f(args, chain.grid)
        family, _ = general_solution(source_chain, tree, f, None, zeta, settings.tol)
        lambdas = []
        for i, lam in enumerate(parse_lambdas(args.lambdas)):
            entry = {"lambda": lam, "admissible": family.admits(lam)}
            if entry["admissible"] and path is not None:
                entry["rho"] = str(save_phase(path / f"rho_lambda_{i}.json", family.rho_at(lam)))
            elif not entry["admissible"]:
                logger.warning("λ = %g outside [%g, %g]", lam, *family.lambda_range)
            lambdas.append(entry)
        payload["solution"] = {**family.to_json(), "lambdas": lambdas}
        if path is not None:
            save_json(path / "solution.json", payload["solution"])

    logger.info("reconstructed %s, marginal residual %.3g", chain.graph, residual)
    emit(payload)
    return VERDICT_EXIT[result.verdict.value]


# ── oracle ───────────────────────────────────────────────────────────

def cmd_oracle(args, settings) -> int:
    from chain_io import load_chain, save_json, save_phase
    from feasibility import lp_feasible, verify_certificate, verify_witness

    chain = load_chain(Path(args.chain))
    chain.validate(settings.norm_tol)
    result = lp_feasible(chain, settings.denominator, settings.cell_cap)
    payload = result.to_json()
    if result.feasible:
        payload["witness_verified"] = verify_witness(chain, result) if result.exact else None
    else:
        payload["certificate_verified"] = verify_certificate(chain, result)

    path = out_dir(args)
    if path is not None:
        if result.witness is not None:
            payload["witness"] = str(save_phase(path / "witness.json", result.witness))
        save_json(path / "feasibility.json", payload)
    emit(payload)
    return EXIT_OK if result.feasible else EXIT_NON


# ── quantum ──────────────────────────────────────────────────────────

def cmd_quantum(args, settings) -> int:
    from chain_graph import ChainGraph
    from chain_io import chain_to_json, load_state, save_chain
    from classifier import Verdict, classify
    from quantum import Ensemble, extend_chain, mixed_state_chain, quantum_chain

    state = load_state(Path(args.state))
    state.validate(settings.norm_tol)
    graph = ChainGraph.from_types(args.types, state.n)
    chain = mixed_state_chain(state, graph) if isinstance(state, Ensemble) else quantum_chain(state, graph)

    payload: dict = {"types": graph.type_strings()}
    extended = None
    if args.extend:
        result = classify(graph)
        if result.verdict is Verdict.NON:
            emit({"error": "no proper connected extension exists for this type", **result.to_json()})
            return EXIT_NON
        # Connected types are their own G_c
        extended = extend_chain(state, result.diagram) if result.diagram is not None else chain
        payload["extended_types"] = extended.graph.type_strings()

    path = out_dir(args)
    if path is not None:
        payload["chain"] = str(save_chain(path / "chain.json", chain))
        if extended is not None:
            payload["extended_chain"] = str(save_chain(path / "chain_extended.json", extended))
    else:
        payload["chain"] = chain_to_json(chain)
        if extended is not None:
            payload["extended_chain"] = chain_to_json(extended)
    emit(payload)
    return EXIT_OK


# ── counterexample ───────────────────────────────────────────────────

def cmd_counterexample(args, settings) -> int:
    from chain_io import chain_to_json, save_chain, save_json
    from feasibility import star_certificate, star_chain

    chain = star_chain(args.k)
    certificate = star_certificate(args.k)
    payload = {"certificate": certificate.to_json()}
    path = out_dir(args)
    if path is not None:
        payload["chain"] = str(save_chain(path / "chain.json", chain))
        save_json(path / "certificate.json", certificate.to_json())
    else:
        payload["chain"] = chain_to_json(chain)
    emit(payload)
    return EXIT_OK


# ── Entry point ──────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="compatibility tolerance (MF_TOL)")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized inputs")
    common.add_argument("--denominator", type=int, default=None,
                        help="LP quantization denominator (MF_DENOMINATOR)")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--verbose", action="store_true", help="log INFO to stderr")

    parser = argparse.ArgumentParser(description="Phase-space marginal problem on finite grids")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="admissibility of a set of types")
    p.add_argument("types", nargs="+", help="type strings, e.g. 12'3 or qpq")
    p.add_argument("--dim", type=int, default=None, help="N (default: inferred from the first type)")
    p.add_argument("--exhaustive", action="store_true",
                   help="cross-check against the exhaustive supergraph search (MF_ENUM_GUARD)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("compat-check", parents=[common], help="pairwise compatibility of a chain file")
    p.add_argument("chain")
    p.set_defaults(func=cmd_compat_check)

    p = sub.add_parser("reconstruct", parents=[common], help="build ρ₀ and the solution family")
    p.add_argument("chain")
    p.add_argument("--zeta", type=str, default=None, help="ζ file over the passive conjugate axes")
    p.add_argument("--f", type=str, default=None, help="f file, or 'random' (needs --seed)")
    p.add_argument("--lambda", dest="lambdas", type=str, default=None, help="comma-separated λ values")
    p.add_argument("--extend", action="store_true", help="reconstruct quantum-only chains on G_c")
    p.add_argument("--state", type=str, default=None, help="wavefunction/ensemble behind the chain")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("oracle", parents=[common], help="exact LP feasibility verdict")
    p.add_argument("chain")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("quantum", parents=[common], help="chain of a wavefunction or ensemble")
    p.add_argument("state")
    p.add_argument("types", nargs="+")
    p.add_argument("--extend", action="store_true", help="also write the chain on G_c")
    p.set_defaults(func=cmd_quantum)

    p = sub.add_parser("counterexample", parents=[common], help="non-admissible k-chain and its certificate")
    p.add_argument("k", type=int)
    p.set_defaults(func=cmd_counterexample)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(verbose=args.verbose)

    try:
        settings = load_settings().with_overrides(tol=args.tol, denominator=args.denominator)
        # Before the first numpy import
        cap_threads(settings.threads)
        logger.info("mf %s (tol %.3g, denominator %d)", args.command, settings.tol, settings.denominator)
        return args.func(args, settings)
    except IncompatibleChain as exc:
        logger.warning("incompatible chain: %s", exc)
        emit({"error": str(exc), "deviation": exc.deviation})
        return EXIT_INCOMPATIBLE
    except CellCapExceeded as exc:
        logger.error("%s", exc)
        emit({"error": str(exc)})
        return EXIT_CAP
    except InternalConsistencyError as exc:
        logger.exception("internal consistency failure: %s", exc)
        emit({"error": f"internal consistency failure: {exc}"})
        return EXIT_INTERNAL
    except MarginalsError as exc:
        logger.error("%s", exc)
        emit({"error": str(exc)})
        return EXIT_INPUT


if __name__ == "__main__":
    try:
        sys.exit(main())
    except Exception as exc:
        logger.exception("Fatal error: %s", exc)
        print(f"Error: {exc}")
        sys.exit(EXIT_INTERNAL)
