"""Command-line interface.

Subcommands:
  bench     sweep strategies over process lengths and print a report
  scenario  run the two-party supply-chain demonstration
  prove     prove a single guest invocation from a JSON input file
  verify    verify a receipt JSON envelope against a verification key
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .bench import DEFAULT_SEED, render_report, run_benchmark
from .domain import Strategy
from .engine import DEFAULT_SIZE_LIMIT
from .guests import (
    default_registry,
    load_guest_input,
    make_chained_descriptor,
    make_composer_descriptor,
    make_single_step_descriptor,
)
from .proofsys import (
    ImageId,
    Receipt,
    SimulatedBackend,
    VerificationError,
    image_id,
)
from .scenario import run_supply_chain_scenario

_ALL_STRATEGIES = [Strategy.SINGLE_STEP, Strategy.COMPOSED, Strategy.CHAINED]


def parse_activities(spec: str) -> list[int]:
    """Parse '1..10' ranges or '1,5,10' lists of activity counts."""
    if ".." in spec:
        low, high = spec.split("..", 1)
        values = list(range(int(low), int(high) + 1))
    else:
        values = [int(part) for part in spec.split(",") if part]
    if not values or any(v < 1 for v in values):
        raise ValueError(f"invalid activity counts: '{spec}'")
    return values


def parse_strategies(spec: str) -> list[Strategy]:
    if spec == "all":
        return list(_ALL_STRATEGIES)
    return [Strategy(part.strip()) for part in spec.split(",") if part.strip()]


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_bench(args: argparse.Namespace) -> int:
    report = run_benchmark(
        n_values=parse_activities(args.activities),
        strategies=parse_strategies(args.strategies),
        repetitions=args.reps,
        size_limit=args.size_limit,
        seed=args.seed,
    )
    _write_or_print(render_report(report, args.format), args.out)
    return 0


def _cmd_scenario(args: argparse.Namespace) -> int:
    outcome = run_supply_chain_scenario(tamper=args.tamper, seed=args.seed)
    _write_or_print(outcome.to_json() + "\n", args.out)
    return 0 if outcome.succeeded else 1


_GUEST_FACTORIES = {
    "chained": make_chained_descriptor,
    "single_step": make_single_step_descriptor,
    "composer": make_composer_descriptor,
}


def _cmd_prove(args: argparse.Namespace) -> int:
    guest_input = load_guest_input(args.guest, Path(args.input).read_text())
    descriptor = _GUEST_FACTORIES[args.guest]()
    backend = SimulatedBackend()
    registry = default_registry()
    registry.bind(backend)

    assumptions = []
    priv = guest_input.private
    if args.guest == "chained" and priv.previous_receipt is not None:
        assumptions.append((guest_input.public.previous_image_id, priv.previous_receipt))
    elif args.guest == "composer":
        assumptions.extend(priv.inner)

    try:
        receipt = backend.prove(descriptor, priv, guest_input.public, assumptions=assumptions)
    except Exception as exc:
        print(f"proving failed: {exc}", file=sys.stderr)
        return 1

    envelope = json.dumps(receipt.to_json_dict(), indent=2) + "\n"
    _write_or_print(envelope, args.out)
    if args.out:
        print(f"image id: {image_id(descriptor).hex}")
        print(f"journal: {json.dumps(receipt.journal.to_json_dict())}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    receipt = Receipt.from_json_dict(json.loads(Path(args.receipt).read_text()))
    backend = SimulatedBackend()
    try:
        journal = backend.verify(ImageId.from_hex(args.image_id), receipt)
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(journal.to_json_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zkproc",
        description="Verifiable footprinting processes over a pluggable proof backend.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run the strategy benchmark sweep")
    bench.add_argument("--activities", default="1..10", help="range '1..30' or list '1,5,10'")
    bench.add_argument("--strategies", default="all", help="'all' or comma list of strategies")
    bench.add_argument("--reps", type=int, default=1, help="repetitions per cell (median)")
    bench.add_argument("--size-limit", type=int, default=DEFAULT_SIZE_LIMIT)
    bench.add_argument("--format", choices=["md", "csv", "json"], default="md")
    bench.add_argument("--out", default=None, help="write report to this path")
    bench.add_argument("--seed", type=int, default=DEFAULT_SEED)
    bench.set_defaults(func=_cmd_bench)

    scenario = sub.add_parser("scenario", help="run the two-party supply-chain demo")
    scenario.add_argument("--tamper", action="store_true", help="mutate the supplier's reported total")
    scenario.add_argument("--out", default=None, help="write the outcome JSON to this path")
    scenario.add_argument("--seed", type=int, default=7)
    scenario.set_defaults(func=_cmd_scenario)

    prove = sub.add_parser("prove", help="prove one guest invocation from a JSON input file")
    prove.add_argument("--guest", choices=sorted(_GUEST_FACTORIES), required=True)
    prove.add_argument("--input", required=True, help="guest-input JSON file")
    prove.add_argument("--out", default=None, help="write the receipt envelope to this path")
    prove.set_defaults(func=_cmd_prove)

    verify = sub.add_parser("verify", help="verify a receipt envelope")
    verify.add_argument("--image-id", required=True, help="expected verification key (hex)")
    verify.add_argument("--receipt", required=True, help="receipt JSON envelope file")
    verify.set_defaults(func=_cmd_verify)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
