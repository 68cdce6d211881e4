"""Guest programs for the three proving strategies.

Each guest is a pure function from (private inputs, public inputs) to a
journal plus composition payload. The chained guest verifies its
predecessor's receipt before aggregating, so a verifier of the final link
transitively trusts the whole chain; the single-step guest folds an entire
process into one proof; the composer wraps independent per-activity proofs
into one outer receipt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional

from .canon import Writer
from .domain import (
    EmissionFactor,
    EmissionQuantity,
    ResourceAmount,
    ZERO_EMISSIONS,
    aggregate,
    compute_emissions,
)
from .proofsys import (
    GENESIS_IMAGE_ID,
    ChainLink,
    ComposedInner,
    GuestDescriptor,
    GuestFailure,
    GuestOutput,
    ImageId,
    InnerReceiptInvalid,
    Journal,
    Receipt,
    VerificationError,
    verify_receipt,
)


class PreviousVerificationFailed(GuestFailure):
    """The previous receipt in a chain did not verify."""


class ExternalVerificationFailed(GuestFailure):
    """An externally supplied receipt did not verify."""


# --- chained strategy ------------------------------------------------------


@dataclass(frozen=True)
class ChainedPrivate:
    """Private inputs of one chained footprinting step."""

    factor: EmissionFactor
    amount: ResourceAmount
    previous_receipt: Optional[Receipt] = None

    def canonical_bytes(self) -> bytes:
        w = Writer()
        w.u64(self.factor.mg_per_unit)
        w.u64(self.amount.units)
        if self.previous_receipt is None:
            w.boolean(False)
        else:
            w.boolean(True)
            w.bytes_(self.previous_receipt.to_bytes())
        return w.finish()


@dataclass(frozen=True)
class ChainedPublic:
    activity_id: str
    previous_image_id: ImageId = GENESIS_IMAGE_ID


@dataclass(frozen=True)
class ChainedGuestInput:
    private: ChainedPrivate
    public: ChainedPublic

    def __post_init__(self) -> None:
        genesis_receipt = self.private.previous_receipt is None
        genesis_image = self.public.previous_image_id == GENESIS_IMAGE_ID
        if genesis_receipt != genesis_image:
            raise ValueError("previous receipt and previous image id must both be GENESIS or neither")


def chained_footprint_guest(inp: ChainedGuestInput) -> GuestOutput:
    """Verify the previous proof, then aggregate this activity's emissions.

    With a GENESIS predecessor the previous total is zero. Otherwise the
    previous receipt must verify against the expected previous image id;
    the aggregated total and the link to the predecessor become part of the
    public journal, so the chain of guest identities is auditable from the
    outside.
    """
    priv, pub = inp.private, inp.public

    if priv.previous_receipt is None:
        current = compute_emissions(priv.factor, priv.amount)
        journal = Journal(
            cumulative_total=current,
            activity_emissions=current,
            activity_id=pub.activity_id,
        )
        return GuestOutput(journal=journal, composition=None)

    try:
        previous_journal = verify_receipt(pub.previous_image_id, priv.previous_receipt)
    except VerificationError as exc:
        raise PreviousVerificationFailed(str(exc)) from exc

    previous_total = previous_journal.cumulative_total
    current = compute_emissions(priv.factor, priv.amount)
    journal = Journal(
        cumulative_total=aggregate(previous_total, current),
        activity_emissions=current,
        activity_id=pub.activity_id,
        previous_receipt_digest=priv.previous_receipt.digest(),
        previous_image_id=pub.previous_image_id,
    )
    previous_link = priv.previous_receipt.composition
    inherited = previous_link.ancestry if isinstance(previous_link, ChainLink) else ()
    ancestry = inherited + (previous_journal.digest(),)
    return GuestOutput(journal=journal, composition=ChainLink(ancestry))


# --- single-step strategy --------------------------------------------------


@dataclass(frozen=True)
class SingleStepPrivate:
    """All (factor, amount) pairs of a process plus any external receipts."""

    items: tuple[tuple[str, EmissionFactor, ResourceAmount], ...]
    external_receipts: tuple[tuple[ImageId, Receipt], ...] = ()

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("single-step input needs at least one item")

    def canonical_bytes(self) -> bytes:
        w = Writer()
        w.u32(len(self.items))
        for item_id, factor, amount in self.items:
            w.string(item_id)
            w.u64(factor.mg_per_unit)
            w.u64(amount.units)
        w.u32(len(self.external_receipts))
        for img, receipt in self.external_receipts:
            w.digest(img.digest)
            w.bytes_(receipt.to_bytes())
        return w.finish()


@dataclass(frozen=True)
class SingleStepPublic:
    process_id: str


@dataclass(frozen=True)
class SingleStepGuestInput:
    private: SingleStepPrivate
    public: SingleStepPublic


def single_step_guest(inp: SingleStepGuestInput) -> GuestOutput:
    """Whole-process footprinting in one proof.

    External receipts are verified first and their reported totals folded
    in; the journal's activity_emissions field carries only the internally
    computed share.
    """
    priv, pub = inp.private, inp.public

    external_total = ZERO_EMISSIONS
    for index, (expected, receipt) in enumerate(priv.external_receipts):
        try:
            journal = verify_receipt(expected, receipt)
        except VerificationError as exc:
            raise ExternalVerificationFailed(f"external receipt {index}: {exc}") from exc
        external_total = aggregate(external_total, journal.cumulative_total)

    internal_total = ZERO_EMISSIONS
    for _, factor, amount in priv.items:
        internal_total = aggregate(internal_total, compute_emissions(factor, amount))

    journal = Journal(
        cumulative_total=aggregate(external_total, internal_total),
        activity_emissions=internal_total,
        activity_id=pub.process_id,
    )
    return GuestOutput(journal=journal, composition=None)


# --- composed strategy -----------------------------------------------------


@dataclass(frozen=True)
class ComposerPrivate:
    """Independent per-activity receipts to fold into one outer proof."""

    inner: tuple[tuple[ImageId, Receipt], ...]

    def __post_init__(self) -> None:
        if not self.inner:
            raise ValueError("composer input needs at least one inner receipt")

    def canonical_bytes(self) -> bytes:
        w = Writer()
        w.u32(len(self.inner))
        for img, receipt in self.inner:
            w.digest(img.digest)
            w.bytes_(receipt.to_bytes())
        return w.finish()


@dataclass(frozen=True)
class ComposerPublic:
    process_id: str


@dataclass(frozen=True)
class ComposerGuestInput:
    private: ComposerPrivate
    public: ComposerPublic


def composer_guest(inp: ComposerGuestInput) -> GuestOutput:
    """Verify every inner receipt and sum their per-activity emissions.

    Inner receipts are independent GENESIS-linked proofs, so summing their
    activity_emissions (never their cumulative totals) cannot double-count.
    All inner receipts are embedded verbatim in the composition payload.
    """
    priv, pub = inp.private, inp.public

    total = ZERO_EMISSIONS
    for index, (expected, receipt) in enumerate(priv.inner):
        try:
            journal = verify_receipt(expected, receipt)
        except VerificationError as exc:
            raise InnerReceiptInvalid(index, exc) from exc
        total = aggregate(total, journal.activity_emissions)

    journal = Journal(
        cumulative_total=total,
        activity_emissions=ZERO_EMISSIONS,
        activity_id=pub.process_id,
    )
    composition = ComposedInner(tuple(receipt for _, receipt in priv.inner))
    return GuestOutput(journal=journal, composition=composition)


# --- registry ---------------------------------------------------------------

CHAINED_SCHEMA = "private{factor:u64,amount:u64,previous_receipt?} public{activity_id,previous_image_id}"
SINGLE_STEP_SCHEMA = "private{items[(id,factor:u64,amount:u64)],external_receipts[]} public{process_id}"
COMPOSER_SCHEMA = "private{inner[(image_id,receipt)]} public{process_id}"


def make_chained_descriptor(name: str = "chained-footprint", version: str = "1.0.0") -> GuestDescriptor:
    return GuestDescriptor(name, version, CHAINED_SCHEMA, role="chained")


def make_single_step_descriptor(name: str = "single-step-footprint", version: str = "1.0.0") -> GuestDescriptor:
    return GuestDescriptor(name, version, SINGLE_STEP_SCHEMA, role="single_step")


def make_composer_descriptor(name: str = "proof-composer", version: str = "1.0.0") -> GuestDescriptor:
    return GuestDescriptor(name, version, COMPOSER_SCHEMA, role="composer")


_PROGRAMS = {
    "chained": lambda priv, pub: chained_footprint_guest(ChainedGuestInput(priv, pub)),
    "single_step": lambda priv, pub: single_step_guest(SingleStepGuestInput(priv, pub)),
    "composer": lambda priv, pub: composer_guest(ComposerGuestInput(priv, pub)),
}


def program_for_role(role: str):
    try:
        return _PROGRAMS[role]
    except KeyError:
        raise KeyError(f"no guest program for role '{role}'") from None


class GuestRegistry:
    """Maps guest references (as used in ActivitySpec) to descriptors.

    Binding a registry to a backend registers every descriptor's program;
    workers then resolve guest_ref strings through the same registry.
    """

    def __init__(self) -> None:
        self._entries: dict[str, GuestDescriptor] = {}

    def add(self, ref: str, descriptor: GuestDescriptor) -> None:
        if ref in self._entries:
            raise ValueError(f"guest ref '{ref}' already registered")
        self._entries[ref] = descriptor

    def descriptor(self, ref: str) -> GuestDescriptor:
        try:
            return self._entries[ref]
        except KeyError:
            raise KeyError(f"unknown guest ref '{ref}'") from None

    def refs(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def bind(self, backend) -> None:
        for descriptor in self._entries.values():
            backend.register(descriptor, program_for_role(descriptor.role))


def default_registry() -> GuestRegistry:
    """Registry with the three built-in guests under their conventional refs."""
    registry = GuestRegistry()
    registry.add("footprint", make_chained_descriptor())
    registry.add("single", make_single_step_descriptor())
    registry.add("composer", make_composer_descriptor())
    return registry


# --- JSON forms for single-invocation CLI use -------------------------------


def chained_input_from_json(data: Mapping) -> ChainedGuestInput:
    previous = data.get("previous_receipt")
    previous_image = data.get("previous_image_id_hex")
    return ChainedGuestInput(
        private=ChainedPrivate(
            factor=EmissionFactor(data["factor_mg_per_unit"]),
            amount=ResourceAmount(data["amount_units"]),
            previous_receipt=Receipt.from_json_dict(previous) if previous else None,
        ),
        public=ChainedPublic(
            activity_id=data["activity_id"],
            previous_image_id=ImageId.from_hex(previous_image)
            if previous_image
            else GENESIS_IMAGE_ID,
        ),
    )


def single_step_input_from_json(data: Mapping) -> SingleStepGuestInput:
    return SingleStepGuestInput(
        private=SingleStepPrivate(
            items=tuple(
                (
                    item["id"],
                    EmissionFactor(item["factor_mg_per_unit"]),
                    ResourceAmount(item["amount_units"]),
                )
                for item in data["items"]
            ),
            external_receipts=tuple(
                (ImageId.from_hex(entry["image_id_hex"]), Receipt.from_json_dict(entry["receipt"]))
                for entry in data.get("external_receipts", ())
            ),
        ),
        public=SingleStepPublic(process_id=data["process_id"]),
    )


def composer_input_from_json(data: Mapping) -> ComposerGuestInput:
    return ComposerGuestInput(
        private=ComposerPrivate(
            inner=tuple(
                (ImageId.from_hex(entry["image_id_hex"]), Receipt.from_json_dict(entry["receipt"]))
                for entry in data["inner"]
            ),
        ),
        public=ComposerPublic(process_id=data["process_id"]),
    )


def load_guest_input(role: str, text: str):
    """Parse a guest-input JSON document for the given guest role."""
    data = json.loads(text)
    if role == "chained":
        return chained_input_from_json(data)
    if role == "single_step":
        return single_step_input_from_json(data)
    if role == "composer":
        return composer_input_from_json(data)
    raise ValueError(f"unknown guest role '{role}'")
