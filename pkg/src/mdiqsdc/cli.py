"""
Command-line front end.

Exit codes: 0 success, 2 protocol abort (eavesdropping detected),
3 validation failure, 4 golden-table mismatch.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .adversary import Channel, InterceptResend, Phase
from .leakage import (
    EXPECTED_SAFE_PAIRS,
    classify_cover_pairs,
    diff_tables,
    generate_case_table,
    leakage_report,
    load_table,
    monte_carlo_leakage,
    table_to_csv,
)
from .protocol import CapacityError, ConfigError, Mode, SessionConfig, run_session
from .variants import MODIFIED, ORIGINAL, cover_set, parse_cover, parse_variant

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_INVALID = 3
EXIT_MISMATCH = 4

OUTPUT_DIR_ENV = "MDIQSDC_OUTPUT_DIR"
MAX_QUBITS_PER_PARTY = 1_000_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for protocol aborts.
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _count(name: str, lo: int):
    def parse(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if not lo <= v <= MAX_QUBITS_PER_PARTY:
            raise argparse.ArgumentTypeError(f"{name} must lie in [{lo}, {MAX_QUBITS_PER_PARTY}]")
        return v
    return parse


def _variant(text: str):
    try:
        return parse_variant(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _cover(text: str):
    try:
        return cover_set(parse_cover(text))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def hex_to_bits(text: str) -> str:
    text = text.strip().lower().removeprefix("0x")
    try:
        return "".join(f"{int(c, 16):04b}" for c in text)
    except ValueError:
        raise UsageError(f"--message must be hex or 'random', got {text!r}") from None


def _section(title: str, rows: Sequence[tuple[str, Any]]) -> str:
    width = max(len(k) for k, _ in rows)
    body = "\n".join(f"  {k:<{width}}  {v}" for k, v in rows)
    return f"{title}\n{body}\n"


def _write(text: str, output: Optional[str]) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(output)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------- simulate

def cmd_simulate(args: argparse.Namespace) -> int:
    eve = None
    if args.eve == "intercept-resend":
        channels = {"alice": (Channel.ALICE,), "bob": (Channel.BOB,), "both": (Channel.ALICE, Channel.BOB)}
        phases = {
            "distribution": (Phase.DISTRIBUTION,),
            "return": (Phase.RETURN,),
            "both": (Phase.DISTRIBUTION, Phase.RETURN),
        }
        eve = InterceptResend(channels[args.eve_channel], phases[args.eve_phase], args.eve_fraction)
    message = None if args.message == "random" else hex_to_bits(args.message)
    config = SessionConfig(
        n=args.n,
        m=args.m,
        variant=args.variant,
        mode=Mode(args.mode),
        qd_split_fraction=args.qd_split,
        checking_bit_fraction=args.checking_fraction,
        seed=args.seed,
        eavesdropper=eve,
        abort_threshold=args.abort_threshold,
        alice_message=message,
    )
    tr = run_session(config)

    if args.format == "json":
        text = tr.to_json() + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "index", "alice_slot", "bob_slot", "first_outcome", "case", "retained"])
        for a, d in zip(tr.first_round, tr.sift_decisions):
            w.writerow([
                args.seed, a.index, tr.alice.layout[a.index].kind.value,
                tr.bob.layout[a.index].kind.value, a.outcome.value, d.case.value, int(d.retained),
            ])
        text = buf.getvalue()
    else:
        rows = [
            ("seed", args.seed),
            ("variant", config.variant.spec),
            ("mode", config.mode.value),
            ("n, m", f"{config.n}, {config.m}"),
            ("delta", tr.delta),
            ("decoy error rate", tr.decoy_error_rate),
            ("aborted", tr.aborted),
        ]
        for d in tr.directions:
            rows += [
                (f"{d.sender.value}->{d.receiver.value} bits", len(d.message)),
                (f"{d.sender.value}->{d.receiver.value} check error", d.check_error_rate),
            ]
        rows.append(("bit errors", tr.bit_errors))
        text = _section("MDI session", rows)
    _write(text, args.output)

    detected = tr.aborted or bool(tr.check_error_rate)
    return EXIT_ABORT if detected else EXIT_OK


# ---------------------------------------------------------------- leakage

def cmd_leakage(args: argparse.Namespace) -> int:
    variant = args.cover or args.variant or ORIGINAL
    report = leakage_report(variant)
    if args.monte_carlo:
        report = replace(report, monte_carlo=monte_carlo_leakage(variant, args.monte_carlo, args.seed))
    data = report.to_dict()
    data["seed"] = args.seed

    if args.format == "json":
        text = _dump(data)
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "variant", "first_round_class", "second_round_outcome", "p00", "p01", "p10", "p11"])
        for p in data["posteriors"]:
            probs = p["probabilities"]
            w.writerow([args.seed, data["variant"], p["first_round_class"], p["second_round_outcome"],
                        probs["00"], probs["01"], probs["10"], probs["11"]])
        text = buf.getvalue()
    else:
        rows = [
            ("variant", data["variant"]),
            ("mutual information (bits)", data["mutual_information_bits"]),
            ("residual entropy (bits)", data["residual_entropy_bits"]),
        ]
        if "monte_carlo" in data:
            mc = data["monte_carlo"]
            rows += [
                ("monte carlo pairs", mc["pairs"]),
                ("monte carlo estimate", f"{mc['mutual_information_bits']:.6f}"),
                ("absolute gap", f"{mc['absolute_gap_bits']:.6f}"),
            ]
        rows.append(("seed", args.seed))
        text = _section("Leakage to Charlie", rows)
    _write(text, args.output)
    return EXIT_OK


# ---------------------------------------------------------------- classify

def cmd_classify(args: argparse.Namespace) -> int:
    verdicts = classify_cover_pairs()
    safe = frozenset(frozenset(v.pair) for v in verdicts if v.safe)
    matches = safe == EXPECTED_SAFE_PAIRS
    if args.format == "json":
        text = _dump({
            "kind": "cover_pairs",
            "seed": args.seed,
            "verdicts": [v.to_dict() for v in verdicts],
            "safe_set_matches_expected": matches,
        })
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["op1", "op2", "leakage_bits", "safe"])
        for v in verdicts:
            w.writerow([v.pair[0].value, v.pair[1].value, v.leakage_bits, int(v.safe)])
        text = buf.getvalue()
    else:
        lines = ["Cover pair      leakage  verdict"]
        for v in verdicts:
            name = f"({v.pair[0].symbol}, {v.pair[1].symbol})"
            lines.append(f"{name:<14}  {v.leakage_bits:7.4f}  {'safe' if v.safe else 'leaks'}")
        text = "\n".join(lines) + "\n"
    _write(text, args.output)
    return EXIT_OK if matches else EXIT_MISMATCH


# ---------------------------------------------------------------- tables

def cmd_tables(args: argparse.Namespace) -> int:
    if args.variant.spec not in (ORIGINAL.spec, MODIFIED.spec):
        raise UsageError("tables supports --variant original or modified")
    rows = generate_case_table(args.variant)
    mismatches = None
    if args.diff:
        try:
            golden = load_table(args.diff)
        except (OSError, ValueError, KeyError) as e:
            raise UsageError(f"cannot read golden table {args.diff}: {e}") from None
        mismatches = diff_tables(rows, golden)

    if args.format == "json":
        data: dict[str, Any] = {
            "kind": "case_table",
            "variant": args.variant.spec,
            "seed": args.seed,
            "rows": [dict(zip(("pre_state", "bits", "alice_op", "bob_op", "post_state"), r.as_tokens())) for r in rows],
        }
        if mismatches is not None:
            data["diff"] = {"golden": str(args.diff), "mismatching_rows": [k + 1 for k, _, _ in mismatches]}
        text = _dump(data)
    else:
        text = table_to_csv(rows)
    _write(text, args.output)

    if not mismatches:
        return EXIT_OK
    for k, got, want in mismatches:
        g = ",".join(got.as_tokens()) if got else "<missing>"
        w = ",".join(want.as_tokens()) if want else "<missing>"
        print(f"row {k + 1}: generated {g} != golden {w}", file=sys.stderr)
    print(f"{len(mismatches)} mismatching rows", file=sys.stderr)
    return EXIT_MISMATCH


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdiqsdc", description=__doc__.splitlines()[1])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, formats: Sequence[str], default: str) -> None:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--output", "-o", help=f"write here instead of stdout (relative to ${OUTPUT_DIR_ENV} if set)")

    p = sub.add_parser("simulate", help="run one protocol session")
    p.add_argument("--n", type=_count("n", 1), default=32, help="EPR pairs per party")
    p.add_argument("--m", type=_count("m", 0), default=16, help="decoy qubits per party")
    p.add_argument("--variant", type=_variant, default=ORIGINAL, help="original | modified | cover=I,X,IY,Z")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="qsdc")
    p.add_argument("--eve", choices=["none", "intercept-resend"], default="none")
    p.add_argument("--eve-channel", choices=["alice", "bob", "both"], default="alice")
    p.add_argument("--eve-phase", choices=["distribution", "return", "both"], default="distribution")
    p.add_argument("--eve-fraction", type=float, default=1.0)
    p.add_argument("--message", default="random", help="hex string, or 'random'")
    p.add_argument("--checking-fraction", type=float, default=0.125)
    p.add_argument("--abort-threshold", type=float, default=0.05)
    p.add_argument("--qd-split", type=float, default=0.5)
    common(p, ["json", "csv", "text"], "json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("leakage", help="exact mutual information between message and Charlie's view")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--variant", type=_variant)
    g.add_argument("--cover", type=_cover, help="comma-separated I, X, IY, Z")
    p.add_argument("--monte-carlo", type=_count("--monte-carlo", 1), metavar="PAIRS", help="also estimate from simulated pairs")
    common(p, ["json", "csv", "text"], "text")
    p.set_defaults(func=cmd_leakage)

    p = sub.add_parser("classify", help="leakage of every two-element cover set")
    common(p, ["json", "csv", "text"], "text")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("tables", help="regenerate a case table, optionally diff against a golden CSV")
    p.add_argument("--variant", type=_variant, default=ORIGINAL)
    p.add_argument("--diff", metavar="GOLDEN_CSV")
    common(p, ["csv", "json"], "csv")
    p.set_defaults(func=cmd_tables)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, CapacityError) as e:
        print(f"mdiqsdc: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
