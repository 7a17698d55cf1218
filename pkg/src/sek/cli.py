"""Command-line interface: ``sek entropy | overlap | check | qkd``.

Data goes to stdout, diagnostics to stderr. Exit codes: 0 success, 2 input
error, 3 numerical failure, 4 relation violation (a replay file is written).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from sek import io
from sek.entropy import h_max_smooth, h_min_smooth, von_neumann
from sek.errors import ArgumentError, NumericalFailure, RelationViolation, SekError
from sek.measurement import overlap
from sek.qkd import QkdParams, key_length, rate_curve, rate_curve_csv, simulate_bb84
from sek.uncertainty import TOLERANCES, randomized_suite

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_VIOLATION = 4

RELATION_ALIASES = {"mu": "maassen_uffink"}


def _labels(values) -> list[str]:
    out: list[str] = []
    for v in values or ():
        out.extend(p for p in v.split(",") if p)
    return out


def _dims(text: str) -> list[int]:
    try:
        dims = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid dims {text!r}; expected e.g. 2,2,2")
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError("dims needs three positive integers")
    return dims


def _write(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def cmd_entropy(args) -> int:
    s = io.load_state(args.state_file)
    condition = _labels(args.condition)
    if args.kind == "vn":
        value, gap = von_neumann(s, args.target, condition), 0.0
    elif args.kind == "min":
        res = h_min_smooth(s, args.target, condition, args.eps)
        value, gap = res.value, res.gap
    else:
        res = h_max_smooth(s, args.target, condition, args.eps)
        value, gap = res.value, res.gap
    _write(io.dumps({"kind": args.kind, "eps": args.eps, "value_bits": value, "gap": gap}))
    return EXIT_OK


def cmd_overlap(args) -> int:
    x = io.load_povm(args.povm_x_file)
    z = io.load_povm(args.povm_z_file)
    if x.dim != z.dim:
        raise ArgumentError(f"POVM dimensions differ ({x.dim} vs {z.dim})")
    res = overlap(x, z)
    _write(io.dumps({"c": res.c, "q_bits": res.q, "argmax": list(res.argmax)}))
    return EXIT_OK


def cmd_check(args) -> int:
    relation = RELATION_ALIASES.get(args.relation, args.relation)
    if args.tolerance is not None and args.tolerance < TOLERANCES[relation]:
        raise ArgumentError(
            f"tolerance {args.tolerance:g} is tighter than the default {TOLERANCES[relation]:g}; it may only be loosened"
        )
    config = {
        "trials": args.trials,
        "dims": args.dims,
        "eps_list": args.eps,
        "seed": args.seed,
        "relations": [relation],
    }
    if args.tolerance is not None:
        config["tolerance"] = args.tolerance
    Path(args.replay_dir).mkdir(parents=True, exist_ok=True)
    report = randomized_suite(config, report_path=args.report, replay_dir=args.replay_dir)
    sec = report["relations"][relation]
    status = "FAIL" if sec["failures"] else "PASS"
    _write(
        f"{relation}: trials={sec['trials']} min_slack={sec['min_slack']:.3e} "
        f"tolerance={sec['tolerance']:g} failures={len(sec['failures'])} {status}\n"
    )
    if sec["failures"]:
        print(f"{len(sec['failures'])} instance(s) hit numerical failures; see {args.report}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_qkd(args) -> int:
    if args.mode == "rate-curve":
        _write(rate_curve_csv(rate_curve(args.q, args.delta_min, args.delta_max, args.steps)))
    elif args.mode == "key-length":
        if args.n is None or args.delta is None:
            raise ArgumentError("key-length needs --n and --delta")
        _write(io.dumps({"l": key_length(QkdParams(args.n, args.delta, args.q, args.epsilon))}))
    else:
        if args.n is None:
            raise ArgumentError("simulate needs --n")
        tr = simulate_bb84(args.n, args.noise, args.sample_fraction, args.seed)
        _write(io.dumps(tr.to_dict()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sek", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", help="conditional entropy of a state file")
    p.add_argument("state_file")
    p.add_argument("--target", required=True)
    p.add_argument("--condition", action="append", default=[], help="conditioning labels, comma separated or repeated")
    p.add_argument("--kind", choices=("min", "max", "vn"), default="min")
    p.add_argument("--eps", type=float, default=0.0)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("overlap", help="overlap c and incompatibility q of two POVM files")
    p.add_argument("povm_x_file")
    p.add_argument("povm_z_file")
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("check", help="randomized audit of one uncertainty relation")
    p.add_argument("--relation", choices=("class", "child", "mother", "mu"), required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--dims", type=_dims, default=[2, 2, 2])
    p.add_argument("--eps", type=float, nargs="+", default=[0.0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=None, help="may only loosen the relation's default")
    p.add_argument("--report", default="check_report.json")
    p.add_argument("--replay-dir", default=".")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("qkd", help="BB84 key rates, key lengths and simulation")
    p.add_argument("--mode", choices=("rate-curve", "key-length", "simulate"), required=True)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--delta-min", type=float, default=0.0)
    p.add_argument("--delta-max", type=float, default=0.25)
    p.add_argument("--steps", type=int, default=26)
    p.add_argument("--n", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--sample-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_qkd)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "eps", None) is not None:
        eps_values = args.eps if isinstance(args.eps, list) else [args.eps]
        if any(not 0 <= e < 1 for e in eps_values):
            print("error: eps must lie in [0, 1)", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except RelationViolation as exc:
        print(f"error: {exc}; replay file: {exc.replay_path}", file=sys.stderr)
        return EXIT_VIOLATION
    except NumericalFailure as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(exc.diagnostics, default=str), file=sys.stderr)
        return EXIT_NUMERICAL
    except (SekError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
