# tracing_topk/cli.py
"""
Command-line entry point.

Exit codes: 0 on success, 1 on a configuration or parameter error, 2 when a file
cannot be read or written.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, List, Optional

import numpy as np

from tracing_topk.core import config
from tracing_topk.core import rng as rngs
from tracing_topk.core.attack import AttackParams, trace_dataset
from tracing_topk.core.bounds import (
    anticonc_lower,
    chernoff_bounds,
    dp_witness,
    exact_regime_check,
    hoeffding_tail,
    noisy_constants,
)
from tracing_topk.core.dataset import (
    DatasetMatrix,
    exact_top_k,
    format_dataset_text,
    generate_uniform,
    marginals,
    read_dataset_text,
    validate_alpha_accurate,
    write_dataset_text,
)
from tracing_topk.core.errors import ConfigError, ReportError, TracingError
from tracing_topk.core.harness import run_experiment, summarize
from tracing_topk.core.mechanisms import Composition, MechanismConfig, MechanismKind, parse_epsilon, release
from tracing_topk.core.models.experiment import ExperimentConfig
from tracing_topk.core.reports import ReportFormat, jsonable, write_report

logger = logging.getLogger("tracing_topk.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


def _emit(payload: Any) -> None:
    print(json.dumps(jsonable(payload), indent=2))


def _epsilon(value: str) -> float:
    parsed = parse_epsilon(value)
    try:
        return float(parsed)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid epsilon {value!r}") from e


# ---------------------------
# Subcommands
# ---------------------------

def _dataset(args: argparse.Namespace) -> DatasetMatrix:
    if args.input:
        return read_dataset_text(args.input)
    if args.n is None or args.d is None:
        raise ConfigError("give --input or both --n and --d")
    return generate_uniform(args.n, args.d, args.seed)


def cmd_gen(args: argparse.Namespace) -> int:
    X = generate_uniform(args.n, args.d, args.seed)
    if args.out:
        write_dataset_text(X, args.out)
    else:
        sys.stdout.write(format_dataset_text(X))
    return EXIT_OK


def cmd_topk(args: argparse.Namespace) -> int:
    X = _dataset(args)
    t = exact_top_k(X, args.k)
    q_k = marginals(X).kth(args.k)
    _emit({"n": X.n, "d": X.d, "k": args.k, "selected": t.selected, "q_k": {"num": q_k.numerator, "den": q_k.denominator}})
    return EXIT_OK


def _release(args: argparse.Namespace, X: DatasetMatrix):
    mech = MechanismConfig(
        kind=MechanismKind(args.mech),
        epsilon=args.epsilon,
        alpha=args.alpha,
        target_row=args.target_row,
        seed=args.mech_seed,
        composition=Composition(args.composition),
        delta=args.delta,
    )
    return release(X, args.k, mech)


def cmd_release(args: argparse.Namespace) -> int:
    X = _dataset(args)
    outcome = _release(args, X)
    payload = {
        "mechanism": outcome.mechanism.kind,
        "selected": outcome.t_hat.selected,
        "release_error": outcome.error,
    }
    if args.alpha is not None:
        payload["alpha_accurate"] = validate_alpha_accurate(X, args.k, args.alpha, outcome.t_hat)
    _emit(payload)
    return EXIT_OK


def cmd_attack(args: argparse.Namespace) -> int:
    X = _dataset(args)
    outcome = _release(args, X)
    params = AttackParams.build(args.k, args.rho)
    bits = rngs.generator(args.target_seed).integers(0, 2, size=X.d, dtype=np.int8)
    report = trace_dataset(X, outcome.t_hat, params, (bits << 1) - 1)
    _emit({
        "tau": params.tau,
        "selected": outcome.t_hat.selected,
        "decisions": report.decisions,
        "traced_count": report.traced_count,
        "out_sample_decision": report.out_sample_decision,
        "out_inner_product": report.out_inner_product,
    })
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    exp = ExperimentConfig.from_json_file(args.config)
    fmt = ReportFormat(args.format)
    out = Path(args.out) if args.out else Path(config.RESULTS_DIR) / f"{exp.kind.value}_{exp.master_seed}.{fmt.value}"

    results = run_experiment(exp, workers=args.workers)
    summary = summarize(results, exp)
    write_report(summary, results, out, fmt, config=exp)
    _emit(summary.model_dump(mode="json", exclude_none=True))
    return EXIT_OK


def cmd_regime(args: argparse.Namespace) -> int:
    # n may be real for the approximate regime's sample-size identity
    n = int(args.n) if args.n.is_integer() else args.n
    if args.noisy:
        _emit(noisy_constants(args.rho, n, args.d, args.k))
    else:
        _emit(exact_regime_check(n, args.d, args.k, args.rho))
    return EXIT_OK


def cmd_witness(args: argparse.Namespace) -> int:
    w = dp_witness(args.rho_sound, args.untraced, args.delta)
    _emit({**jsonable(w), "defined": w.defined})
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    if args.kind == "hoeffding":
        if args.n is None:
            raise ConfigError("hoeffding needs --n")
        _emit({"kind": args.kind, "tail": hoeffding_tail(args.nu, args.n)})
    elif args.kind == "chernoff":
        if args.mu is None:
            raise ConfigError("chernoff needs --mu")
        _emit({"kind": args.kind, **jsonable(chernoff_bounds(args.nu, args.mu))})
    else:
        if args.n is None or args.beta is None:
            raise ConfigError("anticonc needs --n and --beta")
        _emit({"kind": args.kind, **jsonable(anticonc_lower(args.beta, args.nu, args.n))})
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("tracing_topk.app:app", host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------
# Parser
# ---------------------------

def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", help="Read the dataset from a text file instead of generating it")


def _add_release_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mech", choices=[m.value for m in MechanismKind], default=MechanismKind.EXACT.value)
    p.add_argument("--epsilon", type=_epsilon, help='Privacy budget, or "noiseless"')
    p.add_argument("--alpha", type=float)
    p.add_argument("--target-row", type=int)
    p.add_argument("--mech-seed", type=int, default=0)
    p.add_argument("--composition", choices=[c.value for c in Composition], default=Composition.BASIC.value)
    p.add_argument("--delta", type=float, default=0.0)


class _Parser(argparse.ArgumentParser):
    """Usage errors are parameter errors, so they exit with EXIT_CONFIG rather than argparse's 2."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tracing-topk", description="Tracing attacks against top-k releases")
    parser.add_argument("--log-level", default=config.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="Generate a uniform ±1 dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("topk", help="Exact top-k of a dataset")
    _add_dataset_args(p)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_topk)

    p = sub.add_parser("release", help="Run a top-k mechanism")
    _add_dataset_args(p)
    _add_release_args(p)
    p.set_defaults(func=cmd_release)

    p = sub.add_parser("attack", help="Release a top-k vector and trace every row")
    _add_dataset_args(p)
    _add_release_args(p)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--target-seed", type=int, default=1)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("experiment", help="Run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=[f.value for f in ReportFormat], default=ReportFormat.CSV.value)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("regime", help="Check the exact or approximate top-k regime")
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--noisy", action="store_true")
    p.set_defaults(func=cmd_regime)

    p = sub.add_parser("witness", help="(epsilon, delta) pairs ruled out by an observed attack")
    p.add_argument("--rho-sound", type=float, required=True)
    p.add_argument("--untraced", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("bounds", help="Evaluate a concentration bound")
    p.add_argument("--kind", choices=["hoeffding", "chernoff", "anticonc"], required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--beta", type=float)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("serve", help="Run the HTTP service")
    p.add_argument("--host", default=config.HOST)
    p.add_argument("--port", type=int, default=config.PORT)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    logging.basicConfig(
        level=str(args.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ReportError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except TracingError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
