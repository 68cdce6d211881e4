"""Minimal orchestrator-worker engine for verifiable processes.

The engine walks a sequential process model, dispatches each activity to
the first task worker that handles its kind, and propagates resulting
receipts between activities as size-limited process variables. Faults
(failed verification, oversized variables, proving errors) halt the
instance; the event log records digests and metrics only, never private
inputs or full receipts.

Variable conventions:
  receipt:<activity_id>   canonical receipt bytes produced/validated by that activity
  receipt:latest          most recent receipt; chained proving reads it as the predecessor
  external:<activity_id>  externally supplied receipt for a verification activity
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from .canon import DecodeError
from .domain import (
    ActivityKind,
    ActivitySpec,
    EmissionOverflowError,
    EmissionQuantity,
    Pcf,
    ProcessModel,
    Scope,
    Strategy,
    ZERO_EMISSIONS,
    aggregate,
    validate_process_model,
)
from .agency import Certificate, validate_certificate
from .guests import (
    ChainedPrivate,
    ChainedPublic,
    ComposerPrivate,
    ComposerPublic,
    GuestRegistry,
    SingleStepPrivate,
    SingleStepPublic,
)
from .proofsys import (
    GENESIS_IMAGE_ID,
    GuestExecutionFailed,
    ImageId,
    Journal,
    Receipt,
    VerificationError,
    image_id,
)

DEFAULT_SIZE_LIMIT = 4 * 1024 * 1024  # common WME variable/message cap


class EngineError(Exception):
    """Base for engine-level failures."""


class InvalidModel(EngineError):
    def __init__(self, violations: Sequence[str]) -> None:
        super().__init__("; ".join(violations))
        self.violations = tuple(violations)


class VariableSizeLimitExceeded(EngineError):
    """A variable insertion exceeded the store's per-entry size limit."""


class InstanceNotRunning(EngineError):
    """step() requires a Running instance."""


class InstanceNotCompleted(EngineError):
    """extract_pcf() requires a Completed instance."""


class NoWorkerForKind(EngineError):
    """No registered worker handles the activity kind."""


class UntrustedGuest(EngineError):
    """A referenced external guest has no valid certificate in the trust store."""


class InstanceState(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    FAULTED = "faulted"


class FaultKind(str, Enum):
    VERIFICATION_FAILED = "verification_failed"
    VARIABLE_SIZE_LIMIT = "variable_size_limit_exceeded"
    PROVING_FAILED = "proving_failed"
    OVERFLOW = "overflow"


class EventKind(str, Enum):
    ACTIVITY_STARTED = "activity_started"
    PROOF_GENERATED = "proof_generated"
    PROOF_VERIFIED = "proof_verified"
    FAULT = "fault"


@dataclass(frozen=True)
class EventLogEntry:
    """One event-log record; payloads are digests and metrics only."""

    timestamp: float
    instance_id: str
    activity_id: Optional[str]
    event: EventKind
    details: Mapping[str, object] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "instance_id": self.instance_id,
            "activity_id": self.activity_id,
            "event": self.event.value,
            **dict(self.details),
        }


def export_event_log_jsonl(entries: Iterable[EventLogEntry]) -> str:
    """Event log as JSON-lines, one entry per line."""
    return "\n".join(json.dumps(entry.to_json_dict(), sort_keys=True) for entry in entries)


class VariableStore:
    """Byte-valued process variables with a per-entry size limit.

    Multi-entry insertions are atomic: if any entry would exceed the limit
    the store is left unchanged.
    """

    def __init__(self, size_limit: int = DEFAULT_SIZE_LIMIT) -> None:
        if size_limit <= 0:
            raise ValueError("size limit must be positive")
        self.size_limit = size_limit
        self._entries: dict[str, bytes] = {}

    def put(self, name: str, blob: bytes) -> None:
        self.put_many({name: blob})

    def put_many(self, updates: Mapping[str, bytes]) -> None:
        for name, blob in updates.items():
            if len(blob) > self.size_limit:
                raise VariableSizeLimitExceeded(
                    f"variable '{name}' is {len(blob)} bytes, limit {self.size_limit}"
                )
        self._entries.update(updates)

    def get(self, name: str) -> bytes:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def items(self) -> tuple[tuple[str, bytes], ...]:
        return tuple(self._entries.items())

    def snapshot_json(self) -> str:
        """Hex-encoded snapshot of every variable, for export and audits."""
        return json.dumps(
            {
                "size_limit": self.size_limit,
                "entries": {name: blob.hex() for name, blob in sorted(self._entries.items())},
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class TrustEntry:
    """Verification key and certificate for one external guest."""

    image_id: ImageId
    certificate: Certificate


@dataclass(frozen=True)
class TrustStore:
    """The verifier side's certified keys plus the agency's public key."""

    agency_public_key: bytes
    entries: Mapping[str, TrustEntry] = field(default_factory=dict)

    def entry(self, guest_ref: str) -> Optional[TrustEntry]:
        return self.entries.get(guest_ref)


@dataclass
class ProcessInstance:
    instance_id: str
    model: ProcessModel
    variables: VariableStore
    cursor: int = 0
    state: InstanceState = InstanceState.RUNNING
    fault: Optional[FaultKind] = None
    fault_detail: Optional[str] = None
    event_log: list[EventLogEntry] = field(default_factory=list)

    @property
    def current_activity(self) -> Optional[ActivitySpec]:
        if self.cursor < len(self.model.activities):
            return self.model.activities[self.cursor]
        return None


class WorkerFault(Exception):
    """Raised by a worker to fault the instance instead of crashing the engine."""

    def __init__(self, kind: FaultKind, detail: str) -> None:
        super().__init__(detail)
        self.kind = kind
        self.detail = detail


@dataclass(frozen=True)
class WorkerResult:
    variables: Mapping[str, bytes]
    event: EventKind
    details: Mapping[str, object]


@dataclass(frozen=True)
class ExecContext:
    """Per-dispatch context handed to workers; workers stay stateless."""

    model: ProcessModel
    activity_index: int
    variables: VariableStore


class TaskWorker(Protocol):
    def handles(self, kind: ActivityKind) -> bool: ...

    def execute(self, activity: ActivitySpec, ctx: ExecContext) -> WorkerResult: ...


class ProvingWorker:
    """Runs guest programs through the proof backend for proving activities."""

    def __init__(self, backend, registry: GuestRegistry, trust_store: Optional[TrustStore] = None) -> None:
        self._backend = backend
        self._registry = registry
        self._trust_store = trust_store

    def handles(self, kind: ActivityKind) -> bool:
        return kind in (ActivityKind.PROVE_FOOTPRINT, ActivityKind.COMPOSE)

    def execute(self, activity: ActivitySpec, ctx: ExecContext) -> WorkerResult:
        started = time.perf_counter()
        try:
            if activity.kind is ActivityKind.COMPOSE:
                receipt = self._compose(activity, ctx)
            elif ctx.model.strategy is Strategy.SINGLE_STEP:
                receipt = self._prove_single_step(activity)
            else:
                receipt = self._prove_step(activity, ctx)
        except GuestExecutionFailed as exc:
            raise WorkerFault(FaultKind.VERIFICATION_FAILED, str(exc)) from exc
        except EmissionOverflowError as exc:
            raise WorkerFault(FaultKind.OVERFLOW, str(exc)) from exc
        except DecodeError as exc:
            raise WorkerFault(FaultKind.PROVING_FAILED, f"corrupt variable: {exc}") from exc

        duration = time.perf_counter() - started
        blob = receipt.to_bytes()
        return WorkerResult(
            variables={f"receipt:{activity.id}": blob, "receipt:latest": blob},
            event=EventKind.PROOF_GENERATED,
            details={
                "receipt_digest": receipt.digest().hex(),
                "size_bytes": len(blob),
                "duration_seconds": duration,
            },
        )

    def _previous_image_id(self, ctx: ExecContext) -> ImageId:
        previous = ctx.model.activities[ctx.activity_index - 1]
        if previous.kind is ActivityKind.VERIFY_EXTERNAL:
            if self._trust_store is None or self._trust_store.entry(previous.guest_ref) is None:
                raise WorkerFault(
                    FaultKind.PROVING_FAILED,
                    f"no trust entry for external guest '{previous.guest_ref}'",
                )
            return self._trust_store.entry(previous.guest_ref).image_id
        return image_id(self._registry.descriptor(previous.guest_ref))

    def _prove_step(self, activity: ActivitySpec, ctx: ExecContext) -> Receipt:
        chain_previous = ctx.model.strategy is Strategy.CHAINED and ctx.activity_index > 0
        if chain_previous:
            if "receipt:latest" not in ctx.variables:
                raise WorkerFault(
                    FaultKind.PROVING_FAILED, "missing predecessor receipt in variable store"
                )
            previous_receipt = Receipt.from_bytes(ctx.variables.get("receipt:latest"))
            previous_image = self._previous_image_id(ctx)
            assumptions = [(previous_image, previous_receipt)]
        else:
            previous_receipt = None
            previous_image = GENESIS_IMAGE_ID
            assumptions = []

        descriptor = self._registry.descriptor(activity.guest_ref)
        return self._backend.prove(
            descriptor,
            ChainedPrivate(
                factor=activity.factor,
                amount=activity.amount,
                previous_receipt=previous_receipt,
            ),
            ChainedPublic(activity_id=activity.id, previous_image_id=previous_image),
            assumptions=assumptions,
        )

    def _prove_single_step(self, activity: ActivitySpec) -> Receipt:
        descriptor = self._registry.descriptor(activity.guest_ref)
        return self._backend.prove(
            descriptor,
            SingleStepPrivate(
                items=tuple((item.item_id, item.factor, item.amount) for item in activity.items),
            ),
            SingleStepPublic(process_id=activity.id),
        )

    def _compose(self, activity: ActivitySpec, ctx: ExecContext) -> Receipt:
        inner: list[tuple[ImageId, Receipt]] = []
        for prior in ctx.model.activities[: ctx.activity_index]:
            name = f"receipt:{prior.id}"
            if name not in ctx.variables:
                raise WorkerFault(
                    FaultKind.PROVING_FAILED, f"missing receipt for activity '{prior.id}'"
                )
            receipt = Receipt.from_bytes(ctx.variables.get(name))
            inner.append((image_id(self._registry.descriptor(prior.guest_ref)), receipt))

        descriptor = self._registry.descriptor(activity.guest_ref)
        return self._backend.prove(
            descriptor,
            ComposerPrivate(inner=tuple(inner)),
            ComposerPublic(process_id=ctx.model.id),
            assumptions=inner,
        )


class VerificationWorker:
    """Checks externally supplied receipts against certified verification keys."""

    def __init__(self, backend, trust_store: TrustStore) -> None:
        self._backend = backend
        self._trust_store = trust_store

    def handles(self, kind: ActivityKind) -> bool:
        return kind is ActivityKind.VERIFY_EXTERNAL

    def execute(self, activity: ActivitySpec, ctx: ExecContext) -> WorkerResult:
        name = f"external:{activity.id}"
        if name not in ctx.variables:
            raise WorkerFault(
                FaultKind.VERIFICATION_FAILED, f"missing external receipt variable '{name}'"
            )
        entry = self._trust_store.entry(activity.guest_ref)
        if entry is None:
            raise WorkerFault(
                FaultKind.VERIFICATION_FAILED,
                f"no verification key for guest '{activity.guest_ref}'",
            )

        started = time.perf_counter()
        try:
            receipt = Receipt.from_bytes(ctx.variables.get(name))
            self._backend.verify(entry.image_id, receipt)
        except (VerificationError, DecodeError) as exc:
            raise WorkerFault(FaultKind.VERIFICATION_FAILED, str(exc)) from exc
        duration = time.perf_counter() - started

        blob = receipt.to_bytes()
        return WorkerResult(
            variables={f"receipt:{activity.id}": blob, "receipt:latest": blob},
            event=EventKind.PROOF_VERIFIED,
            details={
                "receipt_digest": receipt.digest().hex(),
                "duration_seconds": duration,
            },
        )


class Engine:
    """Single-instance-synchronous orchestrator.

    Distinct instances may run concurrently (workers and backends are
    stateless/shared-safe); one instance is stepped by one caller at a time.
    """

    def __init__(
        self,
        workers: Sequence[TaskWorker],
        size_limit: int = DEFAULT_SIZE_LIMIT,
        trust_store: Optional[TrustStore] = None,
    ) -> None:
        self._workers = tuple(workers)
        self._size_limit = size_limit
        self._trust_store = trust_store

    def start_instance(
        self, model: ProcessModel, initial_variables: Optional[Mapping[str, bytes]] = None
    ) -> ProcessInstance:
        report = validate_process_model(model)
        if not report.ok:
            raise InvalidModel(report.violations)
        self._check_trust(model)

        store = VariableStore(self._size_limit)
        store.put_many(dict(initial_variables or {}))
        return ProcessInstance(
            instance_id=uuid.uuid4().hex,
            model=model,
            variables=store,
        )

    def _check_trust(self, model: ProcessModel) -> None:
        # Certificates are validated once at deployment, not on every step.
        for activity in model.activities:
            if activity.kind is not ActivityKind.VERIFY_EXTERNAL:
                continue
            if self._trust_store is None:
                raise UntrustedGuest("model verifies external receipts but no trust store is configured")
            entry = self._trust_store.entry(activity.guest_ref)
            if entry is None:
                raise UntrustedGuest(f"no trust entry for guest '{activity.guest_ref}'")
            if not validate_certificate(
                entry.certificate, self._trust_store.agency_public_key, entry.image_id
            ):
                raise UntrustedGuest(
                    f"certificate for guest '{activity.guest_ref}' failed validation"
                )

    def step(self, instance: ProcessInstance) -> ProcessInstance:
        if instance.state is not InstanceState.RUNNING:
            raise InstanceNotRunning(f"instance is {instance.state.value}")

        activity = instance.model.activities[instance.cursor]
        worker = self._worker_for(activity.kind)
        self._log(instance, activity.id, EventKind.ACTIVITY_STARTED, {})

        ctx = ExecContext(
            model=instance.model,
            activity_index=instance.cursor,
            variables=instance.variables,
        )
        try:
            result = worker.execute(activity, ctx)
        except WorkerFault as fault:
            return self._fault(instance, activity.id, fault.kind, fault.detail)

        try:
            instance.variables.put_many(result.variables)
        except VariableSizeLimitExceeded as exc:
            return self._fault(instance, activity.id, FaultKind.VARIABLE_SIZE_LIMIT, str(exc))

        self._log(instance, activity.id, result.event, dict(result.details))
        instance.cursor += 1
        if instance.cursor == len(instance.model.activities):
            instance.state = InstanceState.COMPLETED
        return instance

    def run_to_completion(self, instance: ProcessInstance) -> ProcessInstance:
        while instance.state is InstanceState.RUNNING:
            self.step(instance)
        return instance

    def _worker_for(self, kind: ActivityKind) -> TaskWorker:
        for worker in self._workers:
            if worker.handles(kind):
                return worker
        raise NoWorkerForKind(f"no worker handles activity kind '{kind.value}'")

    def _fault(
        self, instance: ProcessInstance, activity_id: str, kind: FaultKind, detail: str
    ) -> ProcessInstance:
        instance.state = InstanceState.FAULTED
        instance.fault = kind
        instance.fault_detail = detail
        self._log(instance, activity_id, EventKind.FAULT, {"kind": kind.value, "detail": detail})
        return instance

    @staticmethod
    def _log(
        instance: ProcessInstance, activity_id: Optional[str], event: EventKind, details: dict
    ) -> None:
        instance.event_log.append(
            EventLogEntry(
                timestamp=time.time(),
                instance_id=instance.instance_id,
                activity_id=activity_id,
                event=event,
                details=details,
            )
        )


def _activity_contribution(activity: ActivitySpec, journal: Journal) -> EmissionQuantity:
    if activity.kind is ActivityKind.VERIFY_EXTERNAL:
        # The validated external total counts as this activity's contribution.
        return journal.cumulative_total
    return journal.activity_emissions


def _journal_for(instance: ProcessInstance, activity: ActivitySpec) -> Optional[Journal]:
    name = f"receipt:{activity.id}"
    if name not in instance.variables:
        return None
    return Receipt.from_bytes(instance.variables.get(name)).journal


def _build_pcf(instance: ProcessInstance, require_completed: bool) -> Pcf:
    if require_completed and instance.state is not InstanceState.COMPLETED:
        raise InstanceNotCompleted(f"instance is {instance.state.value}")

    model = instance.model
    per_activity: list[tuple[str, EmissionQuantity]] = []
    scopes: dict[Scope, EmissionQuantity] = {scope: ZERO_EMISSIONS for scope in Scope}
    total = ZERO_EMISSIONS

    if model.strategy is Strategy.SINGLE_STEP:
        activity = model.activities[0]
        journal = _journal_for(instance, activity)
        if journal is not None:
            quantity = journal.cumulative_total
            per_activity.append((activity.id, quantity))
            scopes[activity.scope] = aggregate(scopes[activity.scope], quantity)
            total = aggregate(total, quantity)
    else:
        for activity in model.activities:
            if activity.kind is ActivityKind.COMPOSE:
                continue
            journal = _journal_for(instance, activity)
            if journal is None:
                continue
            quantity = _activity_contribution(activity, journal)
            per_activity.append((activity.id, quantity))
            scopes[activity.scope] = aggregate(scopes[activity.scope], quantity)
            total = aggregate(total, quantity)

    return Pcf(
        total=total,
        per_activity=tuple(per_activity),
        scope_breakdown={scope: quantity for scope, quantity in scopes.items()},
    )


def extract_pcf(instance: ProcessInstance) -> Pcf:
    """PCF of a completed instance, reconstructed from stored journals.

    The final receipt's cumulative total is cross-checked against the
    per-activity reconstruction; a mismatch means the store was corrupted.
    """
    pcf = _build_pcf(instance, require_completed=True)
    final = Receipt.from_bytes(instance.variables.get("receipt:latest")).journal
    if final.cumulative_total != pcf.total:
        raise EngineError(
            "final receipt total %d does not match per-activity reconstruction %d"
            % (final.cumulative_total.mg, pcf.total.mg)
        )
    return pcf


def extract_partial_pcf(instance: ProcessInstance) -> Pcf:
    """Cumulative PCF over the activities completed so far.

    Same reconstruction as extract_pcf but without the Completed
    precondition, so a faulted chain still yields the footprint accumulated
    up to the fault.
    """
    return _build_pcf(instance, require_completed=False)
