"""Command-line front end: ``dinaid {check,simulate,fit,witness,experiment}``.

Exit status is 0 on success and 1 on bad input for every subcommand.
``check`` returns 2 for a non-identifiable Q-matrix; ``witness`` returns 2
when Q is identifiable and 3 when no witness can be constructed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from dinaid.em import EMConfig, fit
from dinaid.experiment import WORKERS_ENV, ExperimentSpec, run_experiment, write_outputs
from dinaid.model import ResponseDataset, read_params, simulate
from dinaid.qmatrix import identifiability_verdict, read_qmatrix
from dinaid.witness import (
    DEFAULT_PERTURBATION,
    IdentifiableQMatrixError,
    WitnessError,
    certify_nonidentifiable,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_IDENTIFIABLE = 2
EXIT_IDENTIFIABLE = 2
EXIT_NO_WITNESS = 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error status instead of 2, which
    ``check`` and ``witness`` reserve for verdicts."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        print(text)


def _load_q(path):
    try:
        return read_qmatrix(path)
    except OSError as exc:
        raise InputError(f"cannot read Q-matrix {path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_params(path, Q):
    try:
        params = read_params(path)
        params.validate(Q)
    except OSError as exc:
        raise InputError(f"cannot read parameters {path}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    return params


# ---------------------------------------------------------------- subcommands


def cmd_check(args) -> int:
    Q = _load_q(args.qmatrix)
    try:
        report = identifiability_verdict(Q)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.json:
        _emit(report.to_json(indent=2), args.out)
    else:
        ident = report.identity_rows
        lines = [
            report.summary(),
            f"  items x attributes: {Q.J} x {Q.K}",
            f"  complete: {'yes, identity rows ' + ','.join(map(str, ident)) if ident else 'no'}",
            f"  items per attribute: {','.join(map(str, report.attribute_counts))}",
            f"  condition 1: {'holds' if report.condition1_holds else 'fails'}",
            f"  condition 2: {'holds' if report.condition2_holds else 'fails'}",
        ]
        if report.zero_rows:
            lines.append(f"  all-zero items (ignored): {','.join(map(str, report.zero_rows))}")
        _emit("\n".join(lines), args.out)
    return EXIT_OK if report.identifiable else EXIT_NOT_IDENTIFIABLE


def cmd_simulate(args) -> int:
    Q = _load_q(args.qmatrix)
    params = _load_params(args.params, Q)
    if args.n < 1:
        raise InputError("N must be at least 1")
    data = simulate(Q, params, args.n, args.seed)
    rates = data.rows.mean(axis=0)
    summary = {"N": data.N, "J": data.J, "positive_rates": [round(float(r), 6) for r in rates]}
    if args.out:
        data.write_csv(args.out)
        sink = sys.stdout
    else:
        sys.stdout.write(data.to_csv())
        sink = sys.stderr
    if args.json:
        print(json.dumps(summary), file=sink)
    else:
        print(f"N={data.N} J={data.J}", file=sink)
        print("positive rates: " + " ".join(f"{r:.4f}" for r in rates), file=sink)
    return EXIT_OK


def cmd_fit(args) -> int:
    Q = _load_q(args.qmatrix)
    try:
        data = ResponseDataset.read_csv(args.data)
    except OSError as exc:
        raise InputError(f"cannot read dataset {args.data}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise InputError(f"{args.data}: {exc}") from exc
    if data.J != Q.J:
        raise InputError(f"dataset has {data.J} items but the Q-matrix has {Q.J}")
    try:
        config = EMConfig(
            max_iterations=args.max_iter, tolerance=args.tol, starts=args.starts, seed=args.seed, clip=args.clip
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    try:
        report = identifiability_verdict(Q)
        if not report.identifiable:
            print("warning: estimates are not unique; see witness subcommand", file=sys.stderr)
    except ValueError:
        pass
    result = fit(Q, data, config)
    _emit(result.to_json(indent=2), args.out)
    return EXIT_OK


def cmd_witness(args) -> int:
    Q = _load_q(args.qmatrix)
    try:
        identifiable = identifiability_verdict(Q).identifiable
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if identifiable:
        print("Q is identifiable; no witness exists", file=sys.stderr)
        return EXIT_IDENTIFIABLE
    params = _load_params(args.params, Q)
    try:
        pair = certify_nonidentifiable(Q, params, args.rho)
    except IdentifiableQMatrixError:
        return EXIT_IDENTIFIABLE
    except WitnessError as exc:
        print(f"no witness: {exc}", file=sys.stderr)
        return EXIT_NO_WITNESS
    _emit(pair.to_json(indent=2), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        spec = ExperimentSpec.read(args.spec)
    except OSError as exc:
        raise InputError(f"cannot read {args.spec}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.spec}: {exc}") from exc
    if args.seed is not None:
        spec.seed = args.seed
    if args.replications is not None:
        if args.replications < 1:
            raise InputError("replications must be at least 1")
        spec.replications = args.replications

    def progress(done, total):
        if done % 50 == 0 or done == total:
            print(f"\r{done}/{total} replications", end="", file=sys.stderr, flush=True)

    report = run_experiment(spec, workers=args.workers, progress=None if args.quiet else progress)
    if not args.quiet:
        print(file=sys.stderr)
    out_dir = args.out or spec.output_dir
    if out_dir:
        paths = write_outputs(report, out_dir)
        print(f"wrote {', '.join(str(p) for p in paths.values())}", file=sys.stderr)
    if args.json:
        print(report.to_json(indent=2, sort_keys=True))
    else:
        sys.stdout.write(report.table_csv())
    failed = sum(report.n_failed.values())
    if failed:
        print(f"{failed} replications failed or did not converge and were excluded", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _global_flags(parser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(None), help="random seed")
    parser.add_argument("--json", action="store_true", default=d(False), help="machine-readable output")
    parser.add_argument("--out", default=d(None), help="output file (or directory for experiment)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dinaid", description=__doc__.split("\n")[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    flags = argparse.ArgumentParser(add_help=False)
    _global_flags(flags, suppress=True)

    p = sub.add_parser("check", parents=[flags], help="identifiability verdict for a Q-matrix")
    p.add_argument("qmatrix")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", parents=[flags], help="simulate a response dataset")
    p.add_argument("qmatrix")
    p.add_argument("params")
    p.add_argument("-n", "--n", type=int, required=True, help="number of subjects")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[flags], help="multi-start EM fit")
    p.add_argument("qmatrix")
    p.add_argument("data")
    defaults = EMConfig()
    p.add_argument("--starts", type=int, default=defaults.starts)
    p.add_argument("--max-iter", type=int, default=defaults.max_iterations)
    p.add_argument("--tol", type=float, default=defaults.tolerance)
    p.add_argument("--clip", type=float, default=defaults.clip)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("witness", parents=[flags], help="two parameter sets with the same distribution")
    p.add_argument("qmatrix")
    p.add_argument("params")
    p.add_argument("--rho", type=float, default=DEFAULT_PERTURBATION, help="perturbation factor")
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("experiment", parents=[flags], help="Monte Carlo parameter-recovery study")
    p.add_argument("spec")
    p.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or CPU count)")
    p.add_argument("--replications", type=int, default=None, help="override the spec's replication count")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("simulate", "fit") and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except InputError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
