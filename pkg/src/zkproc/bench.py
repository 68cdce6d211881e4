"""Benchmark harness: process generation, strategy sweeps, and reporting.

Sweeps processes of one to thirty activities across the three proving
strategies and records proving time, final-receipt size, and verification
time per (strategy, n) cell. Inputs are derived deterministically from a
seed so receipt sizes are bit-reproducible; wall-clock timings naturally
vary between runs and are aggregated as medians.
"""

from __future__ import annotations

import csv
import io
import json
import platform
import random
import statistics
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .domain import (
    ActivityKind,
    ActivitySpec,
    EmissionFactor,
    FootprintItem,
    ProcessModel,
    ResourceAmount,
    Scope,
    Strategy,
)
from .engine import (
    DEFAULT_SIZE_LIMIT,
    Engine,
    EventKind,
    InstanceState,
    ProvingWorker,
)
from .guests import default_registry
from .proofsys import Receipt, SimulatedBackend, image_id, receipt_size, verify_receipt

DEFAULT_SEED = 1126

_SCOPE_CYCLE = (Scope.SCOPE1, Scope.SCOPE2, Scope.SCOPE3)


class UnsupportedFormat(ValueError):
    """render_report() was asked for an unknown output format."""


def _pair_for(seed: int, index: int) -> tuple[EmissionFactor, ResourceAmount]:
    # Factor is seed-derived, amount tracks the activity position; the same
    # (seed, index) pair yields the same inputs in every strategy, so totals
    # are comparable across strategies.
    rng = random.Random(f"{seed}:{index}")
    factor = EmissionFactor(rng.randrange(1_000, 1_000_000))
    return factor, ResourceAmount(index + 1)


def generate_process(n: int, strategy: Strategy, seed: int = DEFAULT_SEED) -> ProcessModel:
    """Deterministic sequential process of n footprinting steps."""
    if n < 1:
        raise ValueError("process needs at least one activity")

    pairs = [_pair_for(seed, i) for i in range(n)]
    process_id = f"bench-{strategy.value}-{n:03d}"

    if strategy is Strategy.SINGLE_STEP:
        items = tuple(
            FootprintItem(item_id=f"act{i:03d}", factor=factor, amount=amount)
            for i, (factor, amount) in enumerate(pairs)
        )
        activities = (
            ActivitySpec(
                id=process_id,
                name="footprint all activities",
                kind=ActivityKind.PROVE_FOOTPRINT,
                guest_ref="single",
                scope=Scope.SCOPE1,
                items=items,
            ),
        )
        return ProcessModel(id=process_id, strategy=strategy, activities=activities)

    activities = tuple(
        ActivitySpec(
            id=f"act{i:03d}",
            name=f"footprint step {i}",
            kind=ActivityKind.PROVE_FOOTPRINT,
            guest_ref="footprint",
            scope=_SCOPE_CYCLE[i % 3],
            factor=factor,
            amount=amount,
        )
        for i, (factor, amount) in enumerate(pairs)
    )
    if strategy is Strategy.COMPOSED:
        activities = activities + (
            ActivitySpec(
                id="compose",
                name="compose proofs",
                kind=ActivityKind.COMPOSE,
                guest_ref="composer",
            ),
        )
    return ProcessModel(id=process_id, strategy=strategy, activities=activities)


@dataclass(frozen=True)
class BenchmarkRow:
    strategy: str
    n_activities: int
    proving_seconds: float
    proof_size_bytes: int
    verification_seconds: float
    process_seconds: float
    fault: Optional[str] = None

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "n_activities": self.n_activities,
            "proving_seconds": self.proving_seconds,
            "proof_size_bytes": self.proof_size_bytes,
            "verification_seconds": self.verification_seconds,
            "process_seconds": self.process_seconds,
            "fault": self.fault,
        }


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow]
    environment: str
    repetitions: int
    seed: int
    size_limit: int
    aggregation: str = "median"

    def row(self, strategy: Strategy, n: int) -> BenchmarkRow:
        for row in self.rows:
            if row.strategy == strategy.value and row.n_activities == n:
                return row
        raise KeyError(f"no row for ({strategy.value}, {n})")

    def to_json_dict(self) -> dict:
        return {
            "environment": self.environment,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "size_limit": self.size_limit,
            "aggregation": self.aggregation,
            "rows": [row.to_json_dict() for row in self.rows],
        }


def describe_environment() -> str:
    return f"{platform.platform()} / Python {platform.python_version()}"


@dataclass(frozen=True)
class _CellRun:
    proving_seconds: float
    proof_size_bytes: int
    verification_seconds: float
    process_seconds: float
    fault: Optional[str]


def _run_cell(
    strategy: Strategy, n: int, seed: int, size_limit: int
) -> _CellRun:
    backend = SimulatedBackend()
    registry = default_registry()
    registry.bind(backend)
    engine = Engine(
        workers=[ProvingWorker(backend, registry)],
        size_limit=size_limit,
    )
    model = generate_process(n, strategy, seed)

    started = time.perf_counter()
    instance = engine.start_instance(model)
    engine.run_to_completion(instance)
    process_seconds = time.perf_counter() - started

    proving_seconds = sum(
        entry.details["duration_seconds"]
        for entry in instance.event_log
        if entry.event is EventKind.PROOF_GENERATED
    )

    fault = instance.fault.value if instance.state is InstanceState.FAULTED else None
    final_size = 0
    verification_seconds = 0.0
    if instance.state is InstanceState.COMPLETED:
        final = Receipt.from_bytes(instance.variables.get("receipt:latest"))
        final_size = receipt_size(final)
        expected = image_id(registry.descriptor(model.activities[-1].guest_ref))
        v0 = time.perf_counter()
        verify_receipt(expected, final)
        verification_seconds = time.perf_counter() - v0
    elif "receipt:latest" in instance.variables:
        # Partial metric for annotated fault rows: size of the last receipt
        # that still fit the store.
        final_size = receipt_size(Receipt.from_bytes(instance.variables.get("receipt:latest")))

    return _CellRun(proving_seconds, final_size, verification_seconds, process_seconds, fault)


def run_benchmark(
    n_values: Sequence[int],
    strategies: Sequence[Strategy],
    repetitions: int = 1,
    size_limit: int = DEFAULT_SIZE_LIMIT,
    seed: int = DEFAULT_SEED,
) -> BenchmarkReport:
    """Sweep every (strategy, n) cell; faults annotate rows instead of aborting."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")

    rows: list[BenchmarkRow] = []
    for strategy in strategies:
        for n in n_values:
            runs = [_run_cell(strategy, n, seed, size_limit) for _ in range(repetitions)]
            sizes = {run.proof_size_bytes for run in runs}
            if len(sizes) != 1:
                raise AssertionError(
                    f"nondeterministic proof size for ({strategy.value}, {n}): {sizes}"
                )
            rows.append(
                BenchmarkRow(
                    strategy=strategy.value,
                    n_activities=n,
                    proving_seconds=statistics.median(r.proving_seconds for r in runs),
                    proof_size_bytes=runs[0].proof_size_bytes,
                    verification_seconds=statistics.median(
                        r.verification_seconds for r in runs
                    ),
                    process_seconds=statistics.median(r.process_seconds for r in runs),
                    fault=runs[0].fault,
                )
            )

    return BenchmarkReport(
        rows=rows,
        environment=describe_environment(),
        repetitions=repetitions,
        seed=seed,
        size_limit=size_limit,
    )


def _fmt_seconds(value: float) -> str:
    return f"{value:.6f}"


def _render_markdown(report: BenchmarkReport) -> str:
    strategies = []
    for row in report.rows:
        if row.strategy not in strategies:
            strategies.append(row.strategy)
    n_values = sorted({row.n_activities for row in report.rows})
    by_cell = {(row.strategy, row.n_activities): row for row in report.rows}

    header = ["activities"]
    for strategy in strategies:
        header += [f"{strategy} sec", f"{strategy} bytes"]
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join(["---"] * len(header)) + " |",
    ]
    for n in n_values:
        cells = [str(n)]
        for strategy in strategies:
            row = by_cell.get((strategy, n))
            if row is None:
                cells += ["--", "--"]
            elif row.fault:
                cells += [f"fault:{row.fault}", f"fault:{row.fault}"]
            else:
                cells += [_fmt_seconds(row.proving_seconds), str(row.proof_size_bytes)]
        lines.append("| " + " | ".join(cells) + " |")

    meta = (
        f"\nrepetitions: {report.repetitions} ({report.aggregation}), "
        f"seed: {report.seed}, size limit: {report.size_limit} bytes, "
        f"environment: {report.environment}\n"
    )
    return "\n".join(lines) + "\n" + meta


_CSV_FIELDS = [
    "strategy",
    "n_activities",
    "proving_seconds",
    "proof_size_bytes",
    "verification_seconds",
    "process_seconds",
    "fault",
]


def _render_csv(report: BenchmarkReport) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in report.rows:
        record = row.to_json_dict()
        record["proving_seconds"] = _fmt_seconds(row.proving_seconds)
        record["verification_seconds"] = _fmt_seconds(row.verification_seconds)
        record["process_seconds"] = _fmt_seconds(row.process_seconds)
        record["fault"] = row.fault or ""
        writer.writerow(record)
    return out.getvalue()


def render_report(report: BenchmarkReport, fmt: str) -> str:
    """Render to markdown (wide table), csv (one row per cell), or json."""
    if fmt in ("md", "markdown"):
        return _render_markdown(report)
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "json":
        return json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    raise UnsupportedFormat(f"unknown report format '{fmt}'")
