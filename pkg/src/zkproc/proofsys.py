"""Receipt data model, guest identification, and the proof-backend contract.

A receipt binds a guest program's public output (journal) to the program's
identity (ImageId) and to a salted commitment over its private inputs. The
bundled :class:`SimulatedBackend` provides deterministic execution and
tamper-evidence at desk scale; it is NOT a zero-knowledge proof system —
anyone holding a guest descriptor could forge a seal. The backend contract
is the boundary where a real zkVM adapter would restore cryptographic
soundness; everything above it (guests, engine, benchmarks) is agnostic to
which backend is plugged in.

Digest algorithm throughout: SHA-256.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Protocol, Sequence, Union

from .canon import DIGEST_SIZE, DecodeError, Reader, Writer, sha256
from .domain import EmissionQuantity

GENESIS_DIGEST = b"\x00" * DIGEST_SIZE

SALT_SIZE = 16


class ProofSystemError(Exception):
    """Base for all proof-system failures."""


class VerificationError(ProofSystemError):
    """A receipt failed verification."""


class ImageIdMismatch(VerificationError):
    """Receipt was produced by a different guest than expected."""


class SealInvalid(VerificationError):
    """Recomputed seal differs: journal, commitment, or composition changed."""


class InnerReceiptInvalid(VerificationError):
    """An embedded inner receipt failed verification."""

    def __init__(self, index: int, cause: Optional[Exception] = None) -> None:
        super().__init__(f"inner receipt {index} invalid: {cause}")
        self.index = index


class GuestFailure(ProofSystemError):
    """Raised inside a guest program to abort proving (no receipt issued)."""


class GuestExecutionFailed(ProofSystemError):
    """The guest program returned an error during proving."""


class UnknownGuest(ProofSystemError):
    """prove() was called for a descriptor not registered with the backend."""


@dataclass(frozen=True)
class ImageId:
    """32-byte cryptographic identifier of a guest program.

    Serves as both proving and verification key: whoever can recompute it
    from a descriptor can check receipts against it.
    """

    digest: bytes

    def __post_init__(self) -> None:
        if len(self.digest) != DIGEST_SIZE:
            raise ValueError(f"ImageId must be {DIGEST_SIZE} bytes")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, text: str) -> "ImageId":
        return cls(bytes.fromhex(text))


GENESIS_IMAGE_ID = ImageId(GENESIS_DIGEST)


@dataclass(frozen=True)
class GuestDescriptor:
    """Stand-in for a compiled guest binary: the canonical program definition.

    ``code_digest`` is derived from (name, version, parameter schema, role),
    so two descriptors are interchangeable exactly when those agree.
    """

    name: str
    version: str
    parameter_schema: str
    role: str

    @property
    def code_digest(self) -> bytes:
        w = Writer()
        w.string(self.name).string(self.version)
        w.string(self.parameter_schema).string(self.role)
        return sha256(w.finish())

    def canonical_bytes(self) -> bytes:
        w = Writer()
        w.string(self.name).string(self.version).digest(self.code_digest)
        return w.finish()

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "parameter_schema": self.parameter_schema,
            "role": self.role,
            "code_digest_hex": self.code_digest.hex(),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "GuestDescriptor":
        descriptor = cls(
            name=data["name"],
            version=data["version"],
            parameter_schema=data["parameter_schema"],
            role=data["role"],
        )
        stated = data.get("code_digest_hex")
        if stated is not None and bytes.fromhex(stated) != descriptor.code_digest:
            raise DecodeError("code digest does not match descriptor fields")
        return descriptor


def image_id(descriptor: GuestDescriptor) -> ImageId:
    """Deterministic identifier of a guest; doubles as its verification key."""
    return ImageId(sha256(descriptor.canonical_bytes()))


@dataclass(frozen=True)
class Journal:
    """Public output segment of a receipt.

    Carries only data the prover intends to publish: totals, the producing
    activity, and the link to the previous proof in a chain. Emission
    factors and resource amounts never appear here.
    """

    cumulative_total: EmissionQuantity
    activity_emissions: EmissionQuantity
    activity_id: str
    previous_receipt_digest: bytes = GENESIS_DIGEST
    previous_image_id: ImageId = GENESIS_IMAGE_ID
    verification_ok: bool = True

    def __post_init__(self) -> None:
        if len(self.previous_receipt_digest) != DIGEST_SIZE:
            raise ValueError("previous_receipt_digest must be 32 bytes")
        genesis_digest = self.previous_receipt_digest == GENESIS_DIGEST
        genesis_image = self.previous_image_id == GENESIS_IMAGE_ID
        if genesis_digest != genesis_image:
            raise ValueError("previous receipt digest and image id must both be GENESIS or neither")

    @property
    def is_genesis_link(self) -> bool:
        return self.previous_receipt_digest == GENESIS_DIGEST

    def canonical_bytes(self) -> bytes:
        w = Writer()
        w.u64(self.cumulative_total.mg)
        w.u64(self.activity_emissions.mg)
        w.string(self.activity_id)
        w.digest(self.previous_receipt_digest)
        w.digest(self.previous_image_id.digest)
        w.boolean(self.verification_ok)
        return w.finish()

    def digest(self) -> bytes:
        return sha256(self.canonical_bytes())

    @classmethod
    def from_canonical(cls, data: bytes) -> "Journal":
        r = Reader(data)
        journal = cls._read(r)
        r.expect_eof()
        return journal

    @classmethod
    def _read(cls, r: Reader) -> "Journal":
        return cls(
            cumulative_total=EmissionQuantity(r.u64()),
            activity_emissions=EmissionQuantity(r.u64()),
            activity_id=r.string(),
            previous_receipt_digest=r.digest(),
            previous_image_id=ImageId(r.digest()),
            verification_ok=r.boolean(),
        )

    def to_json_dict(self) -> dict:
        return {
            "cumulative_total_mg": self.cumulative_total.mg,
            "activity_emissions_mg": self.activity_emissions.mg,
            "activity_id": self.activity_id,
            "previous_receipt_digest_hex": self.previous_receipt_digest.hex(),
            "previous_image_id_hex": self.previous_image_id.hex,
            "verification_ok": self.verification_ok,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Journal":
        return cls(
            cumulative_total=EmissionQuantity(data["cumulative_total_mg"]),
            activity_emissions=EmissionQuantity(data["activity_emissions_mg"]),
            activity_id=data["activity_id"],
            previous_receipt_digest=bytes.fromhex(data["previous_receipt_digest_hex"]),
            previous_image_id=ImageId.from_hex(data["previous_image_id_hex"]),
            verification_ok=data["verification_ok"],
        )


@dataclass(frozen=True)
class ChainLink:
    """Composition payload of a chained receipt.

    ``ancestry`` lists the journal digests of every ancestor proof, oldest
    first; the receipt therefore grows by one digest per chain link, which
    is what makes chained proof sizes scale with process length.
    """

    ancestry: tuple[bytes, ...]

    def __post_init__(self) -> None:
        if not self.ancestry:
            raise ValueError("ChainLink ancestry must be non-empty")
        for entry in self.ancestry:
            if len(entry) != DIGEST_SIZE:
                raise ValueError("ancestry entries must be 32-byte digests")

    @property
    def previous_journal_digest(self) -> bytes:
        return self.ancestry[-1]


@dataclass(frozen=True)
class ComposedInner:
    """Composition payload embedding all inner receipts verbatim."""

    inner: tuple["Receipt", ...]

    def __post_init__(self) -> None:
        if not self.inner:
            raise ValueError("ComposedInner must embed at least one receipt")


Composition = Union[None, ChainLink, ComposedInner]

_COMPOSITION_NONE = 0
_COMPOSITION_CHAIN_LINK = 1
_COMPOSITION_COMPOSED = 2


def _write_composition(w: Writer, composition: Composition) -> None:
    if composition is None:
        w.u8(_COMPOSITION_NONE)
    elif isinstance(composition, ChainLink):
        w.u8(_COMPOSITION_CHAIN_LINK)
        w.u32(len(composition.ancestry))
        for entry in composition.ancestry:
            w.digest(entry)
    elif isinstance(composition, ComposedInner):
        w.u8(_COMPOSITION_COMPOSED)
        w.u32(len(composition.inner))
        for receipt in composition.inner:
            w.bytes_(receipt.to_bytes())
    else:
        raise TypeError(f"unknown composition payload: {composition!r}")


def _read_composition(r: Reader) -> Composition:
    tag = r.u8()
    if tag == _COMPOSITION_NONE:
        return None
    if tag == _COMPOSITION_CHAIN_LINK:
        count = r.u32()
        return ChainLink(tuple(r.digest() for _ in range(count)))
    if tag == _COMPOSITION_COMPOSED:
        count = r.u32()
        return ComposedInner(tuple(Receipt.from_bytes(r.bytes_()) for _ in range(count)))
    raise DecodeError(f"unknown composition tag {tag}")


def _composition_bytes(composition: Composition) -> bytes:
    w = Writer()
    _write_composition(w, composition)
    return w.finish()


@dataclass(frozen=True)
class Seal:
    """Digest binding a journal to its guest identity and input commitment."""

    digest: bytes

    def __post_init__(self) -> None:
        if len(self.digest) != DIGEST_SIZE:
            raise ValueError(f"Seal must be {DIGEST_SIZE} bytes")


def compute_seal(
    img: ImageId,
    journal: Journal,
    salt_commitment: bytes,
    composition: Composition,
) -> Seal:
    """Seal = H(image_id || journal || private-input commitment || composition).

    The composition payload is part of the preimage so that swapping an
    embedded inner receipt or a chain-ancestry digest after proving is
    detectable from the outer receipt alone.
    """
    w = Writer()
    w.digest(img.digest)
    w.bytes_(journal.canonical_bytes())
    w.digest(salt_commitment)
    w.bytes_(_composition_bytes(composition))
    return Seal(sha256(w.finish()))


@dataclass(frozen=True)
class Receipt:
    """Proof artifact passed between activities as a process variable."""

    image_id: ImageId
    journal: Journal
    seal: Seal
    salt_commitment: bytes
    composition: Composition = None

    def __post_init__(self) -> None:
        if len(self.salt_commitment) != DIGEST_SIZE:
            raise ValueError("salt_commitment must be 32 bytes")

    def to_bytes(self) -> bytes:
        w = Writer()
        w.digest(self.image_id.digest)
        w.bytes_(self.journal.canonical_bytes())
        w.digest(self.seal.digest)
        w.digest(self.salt_commitment)
        _write_composition(w, self.composition)
        return w.finish()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Receipt":
        r = Reader(data)
        receipt = cls(
            image_id=ImageId(r.digest()),
            journal=Journal.from_canonical(r.bytes_()),
            seal=Seal(r.digest()),
            salt_commitment=r.digest(),
            composition=_read_composition(r),
        )
        r.expect_eof()
        return receipt

    def digest(self) -> bytes:
        return sha256(self.to_bytes())

    def claim_digest(self) -> bytes:
        """Digest of what the receipt claims (guest identity plus journal).

        Unlike digest(), this is independent of the per-proof salt, so two
        proofs of the same execution share a claim digest; chain links bind
        to it.
        """
        w = Writer()
        w.digest(self.image_id.digest)
        w.bytes_(self.journal.canonical_bytes())
        return sha256(w.finish())

    def to_json_dict(self) -> dict:
        if self.composition is None:
            composition = None
        elif isinstance(self.composition, ChainLink):
            composition = {
                "type": "chain_link",
                "ancestry_hex": [entry.hex() for entry in self.composition.ancestry],
            }
        else:
            composition = {
                "type": "composed",
                "inner": [inner.to_json_dict() for inner in self.composition.inner],
            }
        return {
            "image_id_hex": self.image_id.hex,
            "journal": self.journal.to_json_dict(),
            "seal_hex": self.seal.digest.hex(),
            "salt_commitment_hex": self.salt_commitment.hex(),
            "composition": composition,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Receipt":
        raw = data.get("composition")
        composition: Composition
        if raw is None:
            composition = None
        elif raw["type"] == "chain_link":
            composition = ChainLink(tuple(bytes.fromhex(h) for h in raw["ancestry_hex"]))
        elif raw["type"] == "composed":
            composition = ComposedInner(
                tuple(cls.from_json_dict(inner) for inner in raw["inner"])
            )
        else:
            raise DecodeError(f"unknown composition type {raw['type']!r}")
        return cls(
            image_id=ImageId.from_hex(data["image_id_hex"]),
            journal=Journal.from_json_dict(data["journal"]),
            seal=Seal(bytes.fromhex(data["seal_hex"])),
            salt_commitment=bytes.fromhex(data["salt_commitment_hex"]),
            composition=composition,
        )


def receipt_size(receipt: Receipt) -> int:
    """Length of the canonical serialization in bytes."""
    return len(receipt.to_bytes())


def verify_receipt(expected: ImageId, receipt: Receipt) -> Journal:
    """Checks a receipt against the expected guest identity.

    Pure function of its inputs: no descriptor, registry, or private data
    is needed, so any party holding the verification key can run it.
    Composed receipts are verified recursively.
    """
    if receipt.image_id != expected:
        raise ImageIdMismatch(
            f"expected {expected.hex[:16]}…, receipt carries {receipt.image_id.hex[:16]}…"
        )
    recomputed = compute_seal(
        receipt.image_id, receipt.journal, receipt.salt_commitment, receipt.composition
    )
    if recomputed.digest != receipt.seal.digest:
        raise SealInvalid("seal does not match receipt contents")
    if isinstance(receipt.composition, ComposedInner):
        for index, inner in enumerate(receipt.composition.inner):
            try:
                verify_receipt(inner.image_id, inner)
            except VerificationError as exc:
                raise InnerReceiptInvalid(index, exc) from exc
    return receipt.journal


@dataclass(frozen=True)
class GuestOutput:
    """What a guest program hands back to the proving host."""

    journal: Journal
    composition: Composition = None


class PrivateInputs(Protocol):
    def canonical_bytes(self) -> bytes: ...


GuestProgram = Callable[[PrivateInputs, object], GuestOutput]

Assumption = tuple[ImageId, Receipt]


class ProofBackend(Protocol):
    """Behavioral contract every proving backend satisfies."""

    def prove(
        self,
        descriptor: GuestDescriptor,
        private_inputs: PrivateInputs,
        public_inputs: object,
        assumptions: Sequence[Assumption] = (),
    ) -> Receipt: ...

    def verify(self, expected: ImageId, receipt: Receipt) -> Journal: ...


class SimulatedBackend:
    """Deterministic in-process backend implementing the ProofBackend contract.

    Execution is the guest function itself; the "proof" is a seal over the
    journal, the guest identity, and a salted commitment to the private
    inputs. Safe for concurrent use: registration happens at setup time and
    proving touches no shared mutable state beyond the salt source.
    """

    def __init__(self, salt_source: Optional[Callable[[], bytes]] = None) -> None:
        self._programs: dict[bytes, GuestProgram] = {}
        self._salt_source = salt_source or (lambda: secrets.token_bytes(SALT_SIZE))

    def register(self, descriptor: GuestDescriptor, program: GuestProgram) -> ImageId:
        img = image_id(descriptor)
        self._programs[img.digest] = program
        return img

    def is_registered(self, descriptor: GuestDescriptor) -> bool:
        return image_id(descriptor).digest in self._programs

    def prove(
        self,
        descriptor: GuestDescriptor,
        private_inputs: PrivateInputs,
        public_inputs: object,
        assumptions: Sequence[Assumption] = (),
    ) -> Receipt:
        img = image_id(descriptor)
        program = self._programs.get(img.digest)
        if program is None:
            raise UnknownGuest(f"descriptor '{descriptor.name}' not registered")

        try:
            output = program(private_inputs, public_inputs)
        except (GuestFailure, VerificationError) as exc:
            raise GuestExecutionFailed(f"guest '{descriptor.name}' failed: {exc}") from exc

        _check_assumptions(output.composition, assumptions)

        salt = self._salt_source()
        if len(salt) != SALT_SIZE:
            raise ValueError(f"salt source must yield {SALT_SIZE} bytes")
        commitment = sha256(salt + private_inputs.canonical_bytes())
        seal = compute_seal(img, output.journal, commitment, output.composition)
        return Receipt(
            image_id=img,
            journal=output.journal,
            seal=seal,
            salt_commitment=commitment,
            composition=output.composition,
        )

    def verify(self, expected: ImageId, receipt: Receipt) -> Journal:
        return verify_receipt(expected, receipt)


def _check_assumptions(composition: Composition, assumptions: Sequence[Assumption]) -> None:
    """Composition payloads may only reference receipts declared as assumptions."""
    if composition is None:
        return
    if isinstance(composition, ChainLink):
        declared = {receipt.journal.digest() for _, receipt in assumptions}
        if composition.previous_journal_digest not in declared:
            raise ValueError("chain link references a receipt not declared in assumptions")
    elif isinstance(composition, ComposedInner):
        declared_receipts = {receipt.digest() for _, receipt in assumptions}
        for index, inner in enumerate(composition.inner):
            if inner.digest() not in declared_receipts:
                raise ValueError(
                    f"inner receipt {index} not declared in assumptions"
                )
