"""Shared builders for tests: models, proving rigs, and receipt chains."""

from __future__ import annotations

import random
from dataclasses import dataclass

from zkproc.domain import (
    ActivityKind,
    ActivitySpec,
    EmissionFactor,
    FootprintItem,
    ProcessModel,
    ResourceAmount,
    Scope,
    Strategy,
)
from zkproc.engine import DEFAULT_SIZE_LIMIT, Engine, ProvingWorker
from zkproc.guests import ChainedPrivate, ChainedPublic, GuestRegistry, default_registry
from zkproc.proofsys import (
    GENESIS_IMAGE_ID,
    GuestDescriptor,
    ImageId,
    Receipt,
    SimulatedBackend,
    image_id,
)

Pair = tuple[int, int]

# Safe random-input ranges: products stay far below the signed 64-bit cap
# even when thirty of them are summed.
MAX_FACTOR = 1 << 30
MAX_AMOUNT = 1 << 20


def random_pairs(rng: random.Random, n: int) -> list[Pair]:
    return [(rng.randrange(0, MAX_FACTOR), rng.randrange(0, MAX_AMOUNT)) for _ in range(n)]


def oracle_total(pairs: list[Pair]) -> int:
    return sum(factor * amount for factor, amount in pairs)


@dataclass
class Rig:
    backend: SimulatedBackend
    registry: GuestRegistry
    engine: Engine


def make_rig(size_limit: int = DEFAULT_SIZE_LIMIT) -> Rig:
    backend = SimulatedBackend()
    registry = default_registry()
    registry.bind(backend)
    engine = Engine(workers=[ProvingWorker(backend, registry)], size_limit=size_limit)
    return Rig(backend=backend, registry=registry, engine=engine)


def model_from_pairs(pairs: list[Pair], strategy: Strategy, model_id: str = "m") -> ProcessModel:
    """Same emission inputs shaped for any of the three strategies."""
    if strategy is Strategy.SINGLE_STEP:
        items = tuple(
            FootprintItem(f"act{i:03d}", EmissionFactor(f), ResourceAmount(a))
            for i, (f, a) in enumerate(pairs)
        )
        activities = (
            ActivitySpec(
                id=f"{model_id}-all",
                name="footprint everything",
                kind=ActivityKind.PROVE_FOOTPRINT,
                guest_ref="single",
                items=items,
            ),
        )
    else:
        activities = tuple(
            ActivitySpec(
                id=f"act{i:03d}",
                name=f"step {i}",
                kind=ActivityKind.PROVE_FOOTPRINT,
                guest_ref="footprint",
                scope=(Scope.SCOPE1, Scope.SCOPE2, Scope.SCOPE3)[i % 3],
                factor=EmissionFactor(f),
                amount=ResourceAmount(a),
            )
            for i, (f, a) in enumerate(pairs)
        )
        if strategy is Strategy.COMPOSED:
            activities = activities + (
                ActivitySpec(
                    id="compose", name="compose", kind=ActivityKind.COMPOSE, guest_ref="composer"
                ),
            )
    return ProcessModel(id=f"{model_id}-{strategy.value}", strategy=strategy, activities=activities)


def run_model(rig: Rig, model: ProcessModel, initial=None):
    instance = rig.engine.start_instance(model, initial_variables=initial)
    return rig.engine.run_to_completion(instance)


def final_receipt(instance) -> Receipt:
    return Receipt.from_bytes(instance.variables.get("receipt:latest"))


def prove_chain(
    backend: SimulatedBackend,
    descriptor: GuestDescriptor,
    pairs: list[Pair],
    id_prefix: str = "act",
) -> list[Receipt]:
    """Prove a whole chain directly through the backend, one link per pair."""
    img = image_id(descriptor)
    receipts: list[Receipt] = []
    previous: Receipt | None = None
    for index, (factor, amount) in enumerate(pairs):
        public = ChainedPublic(
            activity_id=f"{id_prefix}{index:03d}",
            previous_image_id=img if previous is not None else GENESIS_IMAGE_ID,
        )
        private = ChainedPrivate(
            factor=EmissionFactor(factor),
            amount=ResourceAmount(amount),
            previous_receipt=previous,
        )
        assumptions = [(img, previous)] if previous is not None else []
        previous = backend.prove(descriptor, private, public, assumptions=assumptions)
        receipts.append(previous)
    return receipts


def flip_bit(data: bytes, bit_index: int) -> bytes:
    byte_index, offset = divmod(bit_index, 8)
    mutated = bytearray(data)
    mutated[byte_index] ^= 1 << offset
    return bytes(mutated)


def canary_patterns(value: int) -> list[bytes]:
    """Byte patterns a leaked 64-bit value could take in binary or text artifacts."""
    le = value.to_bytes(8, "little")
    be = value.to_bytes(8, "big")
    return [le, be, str(value).encode(), le.hex().encode(), be.hex().encode()]


def assert_no_canary(artifact: bytes, *values: int) -> None:
    for value in values:
        for pattern in canary_patterns(value):
            assert pattern not in artifact, f"canary {value} leaked as {pattern!r}"
