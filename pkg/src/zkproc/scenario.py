"""Two-party supply-chain demonstration with greenwashing detection.

A material supplier runs a chained footprinting process and hands its final
receipt (the reported upstream emissions) to a production company. The
producer's first activity validates that receipt against the verification
key certified by a shared agency, then its own proving activities chain
internal emissions on top; the last link's journal is the product carbon
footprint. With tampering enabled, the supplier's reported total is mutated
after proving and the producer's validation activity must detect it.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Optional

from .agency import (
    AgencyIdentity,
    VerifierContext,
    audit_and_certify,
    distribute_keys,
)
from .domain import (
    ActivityKind,
    ActivitySpec,
    EmissionFactor,
    EmissionQuantity,
    ProcessModel,
    ResourceAmount,
    Scope,
    Strategy,
)
from .engine import (
    Engine,
    EventKind,
    FaultKind,
    InstanceState,
    ProcessInstance,
    ProvingWorker,
    TrustEntry,
    TrustStore,
    VerificationWorker,
)
from .guests import GuestRegistry, make_chained_descriptor
from .proofsys import Receipt, SimulatedBackend

STANDARD_ID = "GHG-Protocol-Product-Standard"


@dataclass(frozen=True)
class ScenarioOutcome:
    """What happened across the two parties, plus the oracle cross-check."""

    tampered: bool
    supplier_completed: bool
    producer_state: str
    producer_fault: Optional[str]
    fault_activity_id: Optional[str]
    detection: bool
    supplier_total_mg: int
    producer_internal_mg: int
    final_pcf_mg: Optional[int]
    oracle_total_mg: int
    customer_check_ok: Optional[bool]

    @property
    def succeeded(self) -> bool:
        """True when the run matched expectations for its tamper mode."""
        if self.tampered:
            return self.detection
        return self.producer_state == InstanceState.COMPLETED.value and (
            self.final_pcf_mg == self.oracle_total_mg
        )

    def to_json_dict(self) -> dict:
        return {
            "tampered": self.tampered,
            "supplier_completed": self.supplier_completed,
            "producer_state": self.producer_state,
            "producer_fault": self.producer_fault,
            "fault_activity_id": self.fault_activity_id,
            "detection": self.detection,
            "supplier_total_mg": self.supplier_total_mg,
            "producer_internal_mg": self.producer_internal_mg,
            "final_pcf_mg": self.final_pcf_mg,
            "oracle_total_mg": self.oracle_total_mg,
            "customer_check_ok": self.customer_check_ok,
            "succeeded": self.succeeded,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def _supplier_model(pairs: list[tuple[int, int]]) -> ProcessModel:
    names = ["mine raw material", "refine material", "transport to buyer"]
    activities = tuple(
        ActivitySpec(
            id=f"supply{i}",
            name=names[i % len(names)],
            kind=ActivityKind.PROVE_FOOTPRINT,
            guest_ref="supplier-footprint",
            scope=Scope.SCOPE1,
            factor=EmissionFactor(factor),
            amount=ResourceAmount(amount),
        )
        for i, (factor, amount) in enumerate(pairs)
    )
    return ProcessModel(id="supplier-footprinting", strategy=Strategy.CHAINED, activities=activities)


def _producer_model(pairs: list[tuple[int, int]]) -> ProcessModel:
    validate = ActivitySpec(
        id="validate-scope3",
        name="validate supplier emissions",
        kind=ActivityKind.VERIFY_EXTERNAL,
        guest_ref="supplier-footprint",
        scope=Scope.SCOPE3,
    )
    manufacturing = ActivitySpec(
        id="manufacturing",
        name="manufacture parts",
        kind=ActivityKind.PROVE_FOOTPRINT,
        guest_ref="producer-footprint",
        scope=Scope.SCOPE1,
        factor=EmissionFactor(pairs[0][0]),
        amount=ResourceAmount(pairs[0][1]),
    )
    assembly = ActivitySpec(
        id="assembly",
        name="assemble product",
        kind=ActivityKind.PROVE_FOOTPRINT,
        guest_ref="producer-footprint",
        scope=Scope.SCOPE2,
        factor=EmissionFactor(pairs[1][0]),
        amount=ResourceAmount(pairs[1][1]),
    )
    return ProcessModel(
        id="producer-footprinting",
        strategy=Strategy.CHAINED,
        activities=(validate, manufacturing, assembly),
    )


def _tamper_reported_total(receipt: Receipt) -> Receipt:
    """Greenwash the reported total: lower it after proving, keep everything else."""
    envelope = receipt.to_json_dict()
    reported = envelope["journal"]["cumulative_total_mg"]
    envelope["journal"]["cumulative_total_mg"] = max(0, reported // 2)
    return Receipt.from_json_dict(envelope)


def run_supply_chain_scenario(tamper: bool = False, seed: int = 7) -> ScenarioOutcome:
    """Execute the full setup and operation flow across both parties."""
    rng = random.Random(seed)
    supplier_pairs = [(rng.randrange(10_000, 90_000), rng.randrange(2, 40)) for _ in range(3)]
    producer_pairs = [(rng.randrange(10_000, 90_000), rng.randrange(2, 40)) for _ in range(2)]

    oracle_supplier = sum(f * a for f, a in supplier_pairs)
    oracle_producer = sum(f * a for f, a in producer_pairs)

    # Setup: the agency audits both parties' guests and distributes keys.
    agency = AgencyIdentity.generate()
    supplier_descriptor = make_chained_descriptor(name="supplier-footprint")
    producer_descriptor = make_chained_descriptor(name="producer-footprint")
    supplier_cert = audit_and_certify(agency, supplier_descriptor, STANDARD_ID)
    producer_cert = audit_and_certify(agency, producer_descriptor, STANDARD_ID)
    supplier_keys = distribute_keys(supplier_cert, supplier_descriptor)
    producer_keys = distribute_keys(producer_cert, producer_descriptor)

    registry = GuestRegistry()
    registry.add("supplier-footprint", supplier_descriptor)
    registry.add("producer-footprint", producer_descriptor)

    # Operation, supplier side: prove the upstream footprint.
    supplier_backend = SimulatedBackend()
    registry.bind(supplier_backend)
    supplier_engine = Engine(workers=[ProvingWorker(supplier_backend, registry)])
    supplier_instance = supplier_engine.start_instance(_supplier_model(supplier_pairs))
    supplier_engine.run_to_completion(supplier_instance)
    supplier_completed = supplier_instance.state is InstanceState.COMPLETED
    supplier_receipt = Receipt.from_bytes(supplier_instance.variables.get("receipt:latest"))
    supplier_total = supplier_receipt.journal.cumulative_total.mg

    # Hand-off crosses the organizational boundary as a JSON envelope.
    envelope = json.dumps(supplier_receipt.to_json_dict())
    transported = Receipt.from_json_dict(json.loads(envelope))
    if tamper:
        transported = _tamper_reported_total(transported)

    # Operation, producer side: validate upstream, then chain internal steps.
    producer_backend = SimulatedBackend()
    registry.bind(producer_backend)
    trust = TrustStore(
        agency_public_key=agency.public_key,
        entries={
            "supplier-footprint": TrustEntry(
                image_id=supplier_keys.verification_key, certificate=supplier_cert
            )
        },
    )
    producer_engine = Engine(
        workers=[
            ProvingWorker(producer_backend, registry, trust_store=trust),
            VerificationWorker(producer_backend, trust),
        ],
        trust_store=trust,
    )
    producer_instance = producer_engine.start_instance(
        _producer_model(producer_pairs),
        initial_variables={"external:validate-scope3": transported.to_bytes()},
    )
    producer_engine.run_to_completion(producer_instance)

    fault_activity = _fault_activity(producer_instance)
    detection = (
        producer_instance.state is InstanceState.FAULTED
        and producer_instance.fault is FaultKind.VERIFICATION_FAILED
    )

    final_pcf = None
    customer_check = None
    if producer_instance.state is InstanceState.COMPLETED:
        final_receipt = Receipt.from_bytes(producer_instance.variables.get("receipt:latest"))
        final_pcf = final_receipt.journal.cumulative_total.mg
        # The customer verifies with certified artifacts only.
        customer = VerifierContext(
            verification_key=producer_keys.verification_key,
            certificate=producer_cert,
            agency_public_key=agency.public_key,
        )
        try:
            customer.verify(final_receipt)
            customer_check = True
        except Exception:
            customer_check = False

    return ScenarioOutcome(
        tampered=tamper,
        supplier_completed=supplier_completed,
        producer_state=producer_instance.state.value,
        producer_fault=producer_instance.fault.value if producer_instance.fault else None,
        fault_activity_id=fault_activity,
        detection=detection,
        supplier_total_mg=supplier_total,
        producer_internal_mg=oracle_producer,
        final_pcf_mg=final_pcf,
        oracle_total_mg=oracle_supplier + oracle_producer,
        customer_check_ok=customer_check,
    )


def _fault_activity(instance: ProcessInstance) -> Optional[str]:
    for entry in instance.event_log:
        if entry.event is EventKind.FAULT:
            return entry.activity_id
    return None
