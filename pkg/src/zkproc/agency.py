"""Certification-agency setup phase: audit, certificates, key distribution.

The agency audits a guest descriptor (structural checks stand in for the
human standards audit), binds its ImageId to a footprinting standard in a
signed certificate, and hands the proving key to the prover and the
verification key plus certificate to the verifier. Signatures are Ed25519
detached signatures over a canonical byte string.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Mapping, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canon import Writer
from .proofsys import GuestDescriptor, ImageId, Journal, Receipt, image_id, verify_receipt


class MalformedDescriptor(Exception):
    """The descriptor failed the structural audit."""


class CertificateMismatch(Exception):
    """Certificate and descriptor identify different guests."""


class UntrustedCertificate(Exception):
    """Certificate did not validate in the verifier's trust context."""


def certificate_payload(img: ImageId, standard_id: str, guest_name: str, issued_at: int) -> bytes:
    """Canonical byte string the agency signs."""
    w = Writer()
    w.digest(img.digest)
    w.string(standard_id)
    w.string(guest_name)
    w.u64(issued_at)
    return w.finish()


@dataclass(frozen=True)
class Certificate:
    """Agency-signed binding of a guest's ImageId to a footprinting standard."""

    image_id: ImageId
    standard_id: str
    guest_name: str
    issued_at: int
    signature: bytes

    def payload(self) -> bytes:
        return certificate_payload(self.image_id, self.standard_id, self.guest_name, self.issued_at)

    def to_json_dict(self) -> dict:
        return {
            "image_id_hex": self.image_id.hex,
            "standard_id": self.standard_id,
            "guest_name": self.guest_name,
            "issued_at": self.issued_at,
            "signature_hex": self.signature.hex(),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Certificate":
        return cls(
            image_id=ImageId.from_hex(data["image_id_hex"]),
            standard_id=data["standard_id"],
            guest_name=data["guest_name"],
            issued_at=data["issued_at"],
            signature=bytes.fromhex(data["signature_hex"]),
        )


class AgencyIdentity:
    """Signing identity of the certification agency.

    Only the agency holds the private half; everyone else validates
    certificates with the 32-byte raw public key, distributed out of band.
    """

    def __init__(self, signing_key: Ed25519PrivateKey) -> None:
        self._signing_key = signing_key
        self.public_key: bytes = signing_key.public_key().public_bytes_raw()

    @classmethod
    def generate(cls) -> "AgencyIdentity":
        return cls(Ed25519PrivateKey.generate())

    def sign(self, payload: bytes) -> bytes:
        return self._signing_key.sign(payload)


def audit_descriptor(descriptor: GuestDescriptor) -> None:
    """Structural audit stub; raises MalformedDescriptor on defects."""
    if not descriptor.name:
        raise MalformedDescriptor("descriptor name is empty")
    if not descriptor.version:
        raise MalformedDescriptor("descriptor version is empty")
    if not descriptor.parameter_schema:
        raise MalformedDescriptor("descriptor parameter schema is empty")
    if not descriptor.role:
        raise MalformedDescriptor("descriptor role is empty")


def audit_and_certify(
    agency: AgencyIdentity,
    descriptor: GuestDescriptor,
    standard_id: str,
    issued_at: Optional[int] = None,
) -> Certificate:
    """Audit a descriptor and issue a signed certificate for its ImageId."""
    audit_descriptor(descriptor)
    img = image_id(descriptor)
    timestamp = int(time.time()) if issued_at is None else issued_at
    payload = certificate_payload(img, standard_id, descriptor.name, timestamp)
    return Certificate(
        image_id=img,
        standard_id=standard_id,
        guest_name=descriptor.name,
        issued_at=timestamp,
        signature=agency.sign(payload),
    )


def validate_certificate(
    cert: Certificate, agency_public_key: bytes, expected_image_id: ImageId
) -> bool:
    """True iff the signature verifies and the certificate names the expected guest."""
    if cert.image_id != expected_image_id:
        return False
    try:
        verifier = Ed25519PublicKey.from_public_bytes(agency_public_key)
        verifier.verify(cert.signature, cert.payload())
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class KeyDistribution:
    """Keys handed out after certification; identical under this proof model."""

    proving_key: ImageId
    verification_key: ImageId


def distribute_keys(cert: Certificate, descriptor: GuestDescriptor) -> KeyDistribution:
    """Derive proving and verification keys for a certified guest.

    Both keys are the guest's ImageId; the prover keeps the descriptor and
    proving key, the verifier receives the verification key alongside the
    certificate.
    """
    img = image_id(descriptor)
    if cert.image_id != img:
        raise CertificateMismatch(
            f"certificate is for {cert.image_id.hex[:16]}…, descriptor hashes to {img.hex[:16]}…"
        )
    return KeyDistribution(proving_key=img, verification_key=img)


@dataclass(frozen=True)
class VerifierContext:
    """Everything a verifying party holds: no descriptor, no private inputs."""

    verification_key: ImageId
    certificate: Certificate
    agency_public_key: bytes

    def check_certificate(self) -> bool:
        return validate_certificate(self.certificate, self.agency_public_key, self.verification_key)

    def verify(self, receipt: Receipt) -> Journal:
        """Validate the certificate, then check the receipt against the key."""
        if not self.check_certificate():
            raise UntrustedCertificate(
                f"certificate for guest '{self.certificate.guest_name}' failed validation"
            )
        return verify_receipt(self.verification_key, receipt)
