"""Confidentiality-preserving verifiable footprinting processes.

A minimal orchestrator-worker process engine whose activities execute guest
programs under a pluggable proof backend, plus the certification setup
phase, three proving strategies (single-step, composed, chained), a
benchmark harness, and a two-party supply-chain demonstration.
"""

from .domain import (
    ActivityKind,
    ActivitySpec,
    EmissionFactor,
    EmissionOverflowError,
    EmissionQuantity,
    FootprintItem,
    Pcf,
    ProcessModel,
    ResourceAmount,
    Scope,
    Strategy,
    aggregate,
    compute_emissions,
    validate_process_model,
)
from .proofsys import (
    GENESIS_DIGEST,
    GENESIS_IMAGE_ID,
    ChainLink,
    ComposedInner,
    GuestDescriptor,
    ImageId,
    Journal,
    Receipt,
    Seal,
    SimulatedBackend,
    image_id,
    receipt_size,
    verify_receipt,
)
from .guests import (
    ChainedGuestInput,
    ComposerGuestInput,
    GuestRegistry,
    SingleStepGuestInput,
    chained_footprint_guest,
    composer_guest,
    default_registry,
    single_step_guest,
)
from .agency import (
    AgencyIdentity,
    Certificate,
    KeyDistribution,
    VerifierContext,
    audit_and_certify,
    distribute_keys,
    validate_certificate,
)
from .engine import (
    DEFAULT_SIZE_LIMIT,
    Engine,
    FaultKind,
    InstanceState,
    ProcessInstance,
    ProvingWorker,
    TrustEntry,
    TrustStore,
    VariableStore,
    VerificationWorker,
    extract_partial_pcf,
    extract_pcf,
)
from .bench import BenchmarkReport, BenchmarkRow, generate_process, render_report, run_benchmark
from .scenario import ScenarioOutcome, run_supply_chain_scenario

__version__ = "0.1.0"
