import random

import pytest

from helpers import flip_bit, prove_chain
from zkproc.agency import (
    AgencyIdentity,
    Certificate,
    CertificateMismatch,
    MalformedDescriptor,
    UntrustedCertificate,
    VerifierContext,
    audit_and_certify,
    distribute_keys,
    validate_certificate,
)
from zkproc.guests import make_chained_descriptor, program_for_role
from zkproc.proofsys import (
    GuestDescriptor,
    ImageIdMismatch,
    SimulatedBackend,
    image_id,
)

STANDARD = "GHG-Protocol-Product-Standard"


@pytest.fixture(scope="module")
def agency():
    return AgencyIdentity.generate()


class TestCertification:
    def test_certificate_binds_descriptor_image_id(self, agency):
        descriptor = make_chained_descriptor()
        cert = audit_and_certify(agency, descriptor, STANDARD)
        assert cert.image_id == image_id(descriptor)
        assert validate_certificate(cert, agency.public_key, image_id(descriptor))

    def test_changed_descriptor_gets_new_identity(self, agency):
        before = audit_and_certify(agency, make_chained_descriptor(version="1.0.0"), STANDARD)
        after = audit_and_certify(agency, make_chained_descriptor(version="2.0.0"), STANDARD)
        assert before.image_id != after.image_id

    def test_empty_name_fails_audit(self, agency):
        bad = GuestDescriptor(name="", version="1.0", parameter_schema="s", role="chained")
        with pytest.raises(MalformedDescriptor):
            audit_and_certify(agency, bad, STANDARD)

    def test_round_trip_property_over_random_descriptors(self, agency):
        rng = random.Random(701)
        for _ in range(20):
            descriptor = GuestDescriptor(
                name=f"guest-{rng.randrange(10**9)}",
                version=f"{rng.randrange(9)}.{rng.randrange(9)}.{rng.randrange(9)}",
                parameter_schema=f"schema-{rng.randrange(10**9)}",
                role="chained",
            )
            cert = audit_and_certify(agency, descriptor, STANDARD)
            assert validate_certificate(cert, agency.public_key, image_id(descriptor))


class TestValidateCertificate:
    def test_wrong_agency_key_rejected(self, agency):
        cert = audit_and_certify(agency, make_chained_descriptor(), STANDARD)
        other = AgencyIdentity.generate()
        assert not validate_certificate(cert, other.public_key, cert.image_id)

    def test_altered_standard_rejected(self, agency):
        cert = audit_and_certify(agency, make_chained_descriptor(), STANDARD)
        altered = Certificate(
            image_id=cert.image_id,
            standard_id="Another-Standard",
            guest_name=cert.guest_name,
            issued_at=cert.issued_at,
            signature=cert.signature,
        )
        assert not validate_certificate(altered, agency.public_key, cert.image_id)

    def test_mismatched_image_id_rejected(self, agency):
        cert = audit_and_certify(agency, make_chained_descriptor(), STANDARD)
        other = image_id(make_chained_descriptor(name="different"))
        assert not validate_certificate(cert, agency.public_key, other)

    def test_sampled_bit_flips_in_serialized_certificate_rejected(self, agency):
        cert = audit_and_certify(agency, make_chained_descriptor(), STANDARD, issued_at=1_700_000_000)
        rng = random.Random(702)

        # Flip bits across both the signed payload fields and the signature.
        payload = cert.payload()
        for _ in range(64):
            bit = rng.randrange(len(payload) * 8)
            mutated_payload = flip_bit(payload, bit)
            from zkproc.canon import Reader

            r = Reader(mutated_payload)
            try:
                mutated = Certificate(
                    image_id=type(cert.image_id)(r.digest()),
                    standard_id=r.string(),
                    guest_name=r.string(),
                    issued_at=r.u64(),
                    signature=cert.signature,
                )
                r.expect_eof()
            except ValueError:
                continue  # unparseable mutation counts as rejected
            assert not validate_certificate(mutated, agency.public_key, mutated.image_id)

        for _ in range(64):
            bit = rng.randrange(len(cert.signature) * 8)
            mutated = Certificate(
                image_id=cert.image_id,
                standard_id=cert.standard_id,
                guest_name=cert.guest_name,
                issued_at=cert.issued_at,
                signature=flip_bit(cert.signature, bit),
            )
            assert not validate_certificate(mutated, agency.public_key, cert.image_id)

    def test_json_round_trip(self, agency):
        cert = audit_and_certify(agency, make_chained_descriptor(), STANDARD)
        assert Certificate.from_json_dict(cert.to_json_dict()) == cert


class TestKeyDistribution:
    def test_both_keys_equal_the_image_id(self, agency):
        descriptor = make_chained_descriptor()
        cert = audit_and_certify(agency, descriptor, STANDARD)
        keys = distribute_keys(cert, descriptor)
        assert keys.proving_key == keys.verification_key == image_id(descriptor)

    def test_mismatched_certificate_rejected(self, agency):
        descriptor = make_chained_descriptor()
        other_cert = audit_and_certify(agency, make_chained_descriptor(name="other"), STANDARD)
        with pytest.raises(CertificateMismatch):
            distribute_keys(other_cert, descriptor)

    def test_distributed_keys_complete_a_prove_verify_round_trip(self, agency):
        descriptor = make_chained_descriptor()
        cert = audit_and_certify(agency, descriptor, STANDARD)
        keys = distribute_keys(cert, descriptor)

        backend = SimulatedBackend()
        backend.register(descriptor, program_for_role(descriptor.role))
        receipt = prove_chain(backend, descriptor, [(2000, 3)])[-1]
        journal = backend.verify(keys.verification_key, receipt)
        assert journal.cumulative_total.mg == 6000


class TestVerifierContext:
    def _receipt_and_context(self, agency):
        descriptor = make_chained_descriptor()
        cert = audit_and_certify(agency, descriptor, STANDARD)
        keys = distribute_keys(cert, descriptor)
        backend = SimulatedBackend()
        backend.register(descriptor, program_for_role(descriptor.role))
        receipt = prove_chain(backend, descriptor, [(4000, 5)])[-1]
        context = VerifierContext(
            verification_key=keys.verification_key,
            certificate=cert,
            agency_public_key=agency.public_key,
        )
        return receipt, context

    def test_verifies_with_certified_artifacts_only(self, agency):
        receipt, context = self._receipt_and_context(agency)
        journal = context.verify(receipt)
        assert journal.cumulative_total.mg == 20_000

    def test_wrong_agency_key_fails(self, agency):
        receipt, context = self._receipt_and_context(agency)
        rogue = VerifierContext(
            verification_key=context.verification_key,
            certificate=context.certificate,
            agency_public_key=AgencyIdentity.generate().public_key,
        )
        with pytest.raises(UntrustedCertificate):
            rogue.verify(receipt)

    def test_mismatched_verification_key_fails(self, agency):
        receipt, context = self._receipt_and_context(agency)
        other_descriptor = make_chained_descriptor(name="someone-else")
        other_cert = audit_and_certify(agency, other_descriptor, STANDARD)
        wrong = VerifierContext(
            verification_key=image_id(other_descriptor),
            certificate=other_cert,
            agency_public_key=agency.public_key,
        )
        with pytest.raises(ImageIdMismatch):
            wrong.verify(receipt)
