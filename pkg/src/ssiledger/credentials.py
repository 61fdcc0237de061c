"""Verifiable credentials: issuance, presentation, verification, revocation,
and consent receipts.

A credential binds schema-conformant attribute claims to a subject DID under
a credential definition and carries the issuer's signature over the canonical
credential body. Presentations wrap credentials with the holder's signature
and bind to an audience DID so they cannot be replayed to another verifier.
Consent receipts are dual-signed and structurally value-free; only their hash
goes on the ledger.

Credential and presentation verification read a ledger view (``NodeState``):
issuer keys come from the on-ledger credential definition, holder keys from
the DID registry, and revocation status from the registry accumulator.
"""

from __future__ import annotations

import datetime
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable

from .auth import ChallengeVerifier
from .crypto import Digest, digest_of, sign, verify
from .ledger import LedgerTransaction, TxnType
from .state import (
    AttrType,
    CredDefRecord,
    NodeState,
    SchemaRecord,
    consent_proof_payload,
    get_cred_def,
    get_schema,
    is_revoked,
    registry_id_for,
    resolve_did,
    revoc_entry_payload,
)

if TYPE_CHECKING:
    from .wallet import Wallet


class CredentialError(Exception):
    pass


class SchemaMismatch(CredentialError):
    """Attributes do not conform to the schema (missing/extra/ill-typed)."""

    def __init__(self, field: str, problem: str):
        super().__init__(f"{field}: {problem}")
        self.field = field


class NothingToPresent(CredentialError):
    pass


class NotHolder(CredentialError):
    """A presented credential belongs to a different subject DID."""


class NotIssuer(CredentialError):
    """Revocation attempted by someone other than the credential definition's issuer."""


class MissingSignature(CredentialError):
    """A consent receipt signature is absent or does not verify."""


class ConsentDeclined(CredentialError):
    pass


class AuthenticationFailed(CredentialError):
    def __init__(self, party: str, reason: str):
        super().__init__(f"{party}: {reason}")
        self.party = party
        self.reason = reason


class VerificationFailed(CredentialError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class VerificationResult:
    valid: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.valid


VALID = VerificationResult(True)


def check_attributes(schema: SchemaRecord, attributes: dict) -> str | None:
    """Schema conformance: exact attribute set, each value of the declared type.
    Returns a description of the first problem, or None."""
    expected = schema.attribute_types()
    for attr in attributes:
        if attr not in expected:
            return f"unexpected attribute {attr!r}"
    for attr, attr_type in expected.items():
        if attr not in attributes:
            return f"missing attribute {attr!r}"
        value = attributes[attr]
        if attr_type == AttrType.STRING and not isinstance(value, str):
            return f"attribute {attr!r} must be a string"
        if attr_type == AttrType.INTEGER and (isinstance(value, bool) or not isinstance(value, int)):
            return f"attribute {attr!r} must be an integer"
        if attr_type == AttrType.BOOLEAN and not isinstance(value, bool):
            return f"attribute {attr!r} must be a boolean"
        if attr_type == AttrType.DATE:
            if not isinstance(value, str):
                return f"attribute {attr!r} must be an ISO date string"
            try:
                datetime.date.fromisoformat(value)
            except ValueError:
                return f"attribute {attr!r} is not a valid ISO date"
    return None


@dataclass(frozen=True)
class VerifiableCredential:
    """Issuer-signed attribute claims about a subject DID."""

    cred_def_id: Digest
    issuer_did: str
    subject_did: str
    attributes: dict
    issued_at: int
    credential_hash: Digest
    issuer_signature: bytes

    @staticmethod
    def compute_hash(
        cred_def_id: Digest, issuer_did: str, subject_did: str, attributes: dict, issued_at: int
    ) -> Digest:
        return digest_of(
            {
                "cred_def_id": cred_def_id.hex,
                "issuer_did": issuer_did,
                "subject_did": subject_did,
                "attributes": attributes,
                "issued_at": issued_at,
            }
        )

    def hash_recomputes(self) -> bool:
        return (
            self.compute_hash(
                self.cred_def_id,
                self.issuer_did,
                self.subject_did,
                self.attributes,
                self.issued_at,
            )
            == self.credential_hash
        )

    def to_dict(self) -> dict:
        return {
            "cred_def_id": self.cred_def_id.hex,
            "issuer_did": self.issuer_did,
            "subject_did": self.subject_did,
            "attributes": self.attributes,
            "issued_at": self.issued_at,
            "credential_hash": self.credential_hash.hex,
            "issuer_signature": self.issuer_signature.hex(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VerifiableCredential":
        return cls(
            cred_def_id=Digest.from_hex(data["cred_def_id"]),
            issuer_did=data["issuer_did"],
            subject_did=data["subject_did"],
            attributes=data["attributes"],
            issued_at=data["issued_at"],
            credential_hash=Digest.from_hex(data["credential_hash"]),
            issuer_signature=bytes.fromhex(data["issuer_signature"]),
        )


def issue(
    issuer_signing_private: bytes,
    cred_def: CredDefRecord,
    schema: SchemaRecord,
    subject_did: str,
    attributes: dict,
    issued_at: int,
) -> VerifiableCredential:
    """Construct and sign a credential. Self-attested credentials are the
    same thing with issuer_did == subject_did."""
    problem = check_attributes(schema, attributes)
    if problem is not None:
        raise SchemaMismatch(schema.name, problem)
    credential_hash = VerifiableCredential.compute_hash(
        cred_def.cred_def_id, cred_def.issuer_did, subject_did, attributes, issued_at
    )
    return VerifiableCredential(
        cred_def_id=cred_def.cred_def_id,
        issuer_did=cred_def.issuer_did,
        subject_did=subject_did,
        attributes=attributes,
        issued_at=issued_at,
        credential_hash=credential_hash,
        issuer_signature=sign(issuer_signing_private, credential_hash.value),
    )


def verify_credential(
    cred: VerifiableCredential, ledger_view: NodeState, now: int = 0
) -> VerificationResult:
    """Check a credential against the ledger. Total: returns a result, never
    raises. ``now`` is accepted for interface symmetry; revocation status is
    whatever the supplied ledger snapshot says."""
    cred_def = get_cred_def(ledger_view, cred.cred_def_id)
    if cred_def is None:
        return VerificationResult(False, "UnknownCredDef")
    if cred.issuer_did != cred_def.issuer_did or not cred.hash_recomputes():
        return VerificationResult(False, "BadSignature")
    if not verify(cred_def.issuer_verification_key, cred.credential_hash.value, cred.issuer_signature):
        return VerificationResult(False, "BadSignature")
    try:
        revoked = is_revoked(ledger_view, registry_id_for(cred.cred_def_id), cred.credential_hash)
    except KeyError:
        return VerificationResult(False, "UnknownCredDef")
    if revoked:
        return VerificationResult(False, "Revoked")
    schema = get_schema(ledger_view, cred_def.schema_id)
    if schema is None:
        return VerificationResult(False, "UnknownCredDef")
    if check_attributes(schema, cred.attributes) is not None:
        return VerificationResult(False, "SchemaMismatch")
    return VALID


@dataclass(frozen=True)
class Presentation:
    """Holder-signed bundle of credentials, bound to one audience DID."""

    credentials: tuple[VerifiableCredential, ...]
    holder_did: str
    audience_did: str
    presented_at: int
    holder_signature: bytes

    @staticmethod
    def body(
        credentials: Iterable[VerifiableCredential],
        holder_did: str,
        audience_did: str,
        presented_at: int,
    ) -> dict:
        return {
            "credentials": [c.to_dict() for c in credentials],
            "holder_did": holder_did,
            "audience_did": audience_did,
            "presented_at": presented_at,
        }

    def to_dict(self) -> dict:
        data = self.body(self.credentials, self.holder_did, self.audience_did, self.presented_at)
        data["holder_signature"] = self.holder_signature.hex()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Presentation":
        return cls(
            credentials=tuple(VerifiableCredential.from_dict(c) for c in data["credentials"]),
            holder_did=data["holder_did"],
            audience_did=data["audience_did"],
            presented_at=data["presented_at"],
            holder_signature=bytes.fromhex(data["holder_signature"]),
        )


def present(
    wallet: "Wallet",
    relation: str,
    credentials: list[VerifiableCredential],
    audience_did: str,
    now: int,
) -> Presentation:
    """Sign a presentation with the wallet's pairwise identity for ``relation``.
    Every presented credential must name that identity as its subject."""
    if not credentials:
        raise NothingToPresent("empty credential list")
    identity = wallet.identity(relation)
    for cred in credentials:
        if cred.subject_did != identity.did:
            raise NotHolder(f"credential subject {cred.subject_did} is not {identity.did}")
    body = Presentation.body(credentials, identity.did, audience_did, now)
    return Presentation(
        credentials=tuple(credentials),
        holder_did=identity.did,
        audience_did=audience_did,
        presented_at=now,
        holder_signature=sign(identity.signing.private, digest_of(body).value),
    )


def verify_presentation(
    presentation: Presentation,
    ledger_view: NodeState,
    now: int = 0,
    expected_audience: str | None = None,
) -> VerificationResult:
    """Check holder signature, audience binding, and every embedded credential."""
    if expected_audience is not None and presentation.audience_did != expected_audience:
        return VerificationResult(False, "WrongAudience")
    holder = resolve_did(ledger_view, presentation.holder_did)
    if holder is None:
        return VerificationResult(False, "UnknownHolder")
    body = Presentation.body(
        presentation.credentials,
        presentation.holder_did,
        presentation.audience_did,
        presentation.presented_at,
    )
    if not verify(holder.verification_key, digest_of(body).value, presentation.holder_signature):
        return VerificationResult(False, "BadSignature")
    if not presentation.credentials:
        return VerificationResult(False, "SchemaMismatch")
    for cred in presentation.credentials:
        if cred.subject_did != presentation.holder_did:
            return VerificationResult(False, "NotHolder")
        result = verify_credential(cred, ledger_view, now)
        if not result.valid:
            return result
    return VALID


@dataclass(frozen=True)
class ConsentReceipt:
    """Dual-signed record of a data-sharing agreement. Carries attribute names
    and types only — the type has no slot for values."""

    owner_did: str
    verifier_did: str
    shared_attributes: tuple[tuple[str, AttrType], ...]
    purpose: str
    timestamp: int
    owner_signature: bytes
    verifier_signature: bytes

    @staticmethod
    def body(
        owner_did: str,
        verifier_did: str,
        shared_attributes: Iterable[tuple[str, AttrType]],
        purpose: str,
        timestamp: int,
    ) -> dict:
        return {
            "owner_did": owner_did,
            "verifier_did": verifier_did,
            "shared": [[attr, attr_type.value] for attr, attr_type in shared_attributes],
            "purpose": purpose,
            "timestamp": timestamp,
        }

    def to_dict(self) -> dict:
        data = self.body(
            self.owner_did,
            self.verifier_did,
            self.shared_attributes,
            self.purpose,
            self.timestamp,
        )
        data["owner_signature"] = self.owner_signature.hex()
        data["verifier_signature"] = self.verifier_signature.hex()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ConsentReceipt":
        return cls(
            owner_did=data["owner_did"],
            verifier_did=data["verifier_did"],
            shared_attributes=tuple(
                (attr, AttrType(attr_type)) for attr, attr_type in data["shared"]
            ),
            purpose=data["purpose"],
            timestamp=data["timestamp"],
            owner_signature=bytes.fromhex(data["owner_signature"]),
            verifier_signature=bytes.fromhex(data["verifier_signature"]),
        )

    def receipt_hash(self) -> Digest:
        """Hash of the full dual-signed receipt; this is what goes on ledger."""
        return digest_of(self.to_dict())


def record_consent(
    owner_wallet: "Wallet",
    owner_relation: str,
    verifier_did: str,
    verifier_signing_private: bytes,
    shared_attributes: Iterable[tuple[str, AttrType]],
    purpose: str,
    now: int,
) -> tuple[ConsentReceipt, LedgerTransaction]:
    """Build the dual-signed receipt and the on-ledger proof transaction.

    The receipt stays off-ledger with both parties; the transaction carries
    only the receipt hash, the two DIDs, and the timestamp.
    """
    identity = owner_wallet.identity(owner_relation)
    shared = tuple((attr, AttrType(attr_type)) for attr, attr_type in shared_attributes)
    body = ConsentReceipt.body(identity.did, verifier_did, shared, purpose, now)
    body_digest = digest_of(body)
    receipt = ConsentReceipt(
        owner_did=identity.did,
        verifier_did=verifier_did,
        shared_attributes=shared,
        purpose=purpose,
        timestamp=now,
        owner_signature=sign(identity.signing.private, body_digest.value),
        verifier_signature=sign(verifier_signing_private, body_digest.value),
    )
    txn = LedgerTransaction.create(
        TxnType.CONSENT_PROOF,
        consent_proof_payload(receipt.receipt_hash(), identity.did, verifier_did, now),
        author_did=identity.did,
        signing_private=identity.signing.private,
        timestamp=now,
    )
    return receipt, txn


def verify_consent_receipt(receipt: ConsentReceipt, ledger_view: NodeState) -> VerificationResult:
    """Check both signatures against on-ledger keys and that the receipt hash
    is recorded as a consent proof."""
    owner = resolve_did(ledger_view, receipt.owner_did)
    verifier = resolve_did(ledger_view, receipt.verifier_did)
    if owner is None or verifier is None:
        return VerificationResult(False, "UnknownHolder")
    body_digest = digest_of(
        ConsentReceipt.body(
            receipt.owner_did,
            receipt.verifier_did,
            receipt.shared_attributes,
            receipt.purpose,
            receipt.timestamp,
        )
    )
    if not verify(owner.verification_key, body_digest.value, receipt.owner_signature):
        return VerificationResult(False, "MissingSignature")
    if not verify(verifier.verification_key, body_digest.value, receipt.verifier_signature):
        return VerificationResult(False, "MissingSignature")
    recorded = receipt.receipt_hash()
    if not any(rec.receipt_hash == recorded for rec in ledger_view.consent_proofs):
        return VerificationResult(False, "NotRecorded")
    return VALID


def revoke(
    issuer_did: str,
    issuer_signing_private: bytes,
    cred_def: CredDefRecord,
    credential_hash: Digest,
    timestamp: int,
) -> LedgerTransaction:
    """Produce the revocation-registry transaction for one credential hash.
    Only the credential definition's issuer may revoke; idempotent on commit."""
    if issuer_did != cred_def.issuer_did:
        raise NotIssuer(f"{issuer_did} does not own cred def {cred_def.cred_def_id.hex[:12]}")
    return LedgerTransaction.create(
        TxnType.REVOC_ENTRY,
        revoc_entry_payload(cred_def.cred_def_id, [credential_hash]),
        author_did=issuer_did,
        signing_private=issuer_signing_private,
        timestamp=timestamp,
    )


@dataclass
class IssuerParty:
    """A credential provider: on-ledger DID, signing key, published schema and
    credential definition, and a verifier for authenticating owners."""

    did: str
    signing_private: bytes
    schema: SchemaRecord
    cred_def: CredDefRecord
    auth: ChallengeVerifier


@dataclass
class VerifierParty:
    """A credential requester: on-ledger DID, signing key, and an authenticator."""

    did: str
    signing_private: bytes
    auth: ChallengeVerifier


@dataclass
class ThirdPartyFlowResult:
    credential: VerifiableCredential
    presentation: Presentation
    verification: VerificationResult
    receipt: ConsentReceipt
    consent_txn: LedgerTransaction
    steps: list[str]


def third_party_flow(
    requester: VerifierParty,
    provider: IssuerParty,
    owner_wallet: "Wallet",
    provider_relation: str,
    requester_relation: str,
    requested_attributes: dict,
    ledger: NodeState | Callable[[], NodeState],
    now: int,
    consent: bool = True,
    purpose: str = "third-party attestation",
    rng: Callable[[int], bytes] = os.urandom,
) -> ThirdPartyFlowResult:
    """The redirect-style attestation dance: the requester authenticates the
    owner, the owner authenticates with the provider, the provider issues a
    credential for the owner's requester-facing DID, the owner presents it,
    the requester verifies via on-ledger keys, and a consent receipt is
    recorded. Any failing step aborts the flow with that step's error.

    ``ledger`` may be a state snapshot or a callable returning the current
    snapshot, so commits that land mid-flow are observed.
    """
    current = ledger if callable(ledger) else (lambda: ledger)
    steps: list[str] = []

    requester_identity = owner_wallet.identity(requester_relation)
    challenge = requester.auth.issue(
        requester_identity.agreement.public, now=now, subject_did=requester_identity.did, rng=rng
    )
    response = owner_wallet.respond_challenge(requester_relation, challenge.ciphertext)
    result = requester.auth.check(response, now)
    if not result.authenticated:
        raise AuthenticationFailed("requester", result.reason or "auth failed")
    steps.append("owner authenticated with requester")

    provider_identity = owner_wallet.identity(provider_relation)
    challenge = provider.auth.issue(
        provider_identity.agreement.public, now=now, subject_did=provider_identity.did, rng=rng
    )
    response = owner_wallet.respond_challenge(provider_relation, challenge.ciphertext)
    result = provider.auth.check(response, now)
    if not result.authenticated:
        raise AuthenticationFailed("provider", result.reason or "auth failed")
    steps.append("owner authenticated with provider")

    if not consent:
        raise ConsentDeclined("owner declined to share")
    steps.append("owner consented to share")

    credential = issue(
        provider.signing_private,
        provider.cred_def,
        provider.schema,
        subject_did=requester_identity.did,
        attributes=requested_attributes,
        issued_at=now,
    )
    owner_wallet.store_credential(credential, current(), received_at=now)
    steps.append("provider issued credential")

    presentation = present(
        owner_wallet, requester_relation, [credential], audience_did=requester.did, now=now
    )
    steps.append("owner presented credential to requester")

    verification = verify_presentation(
        presentation, current(), now, expected_audience=requester.did
    )
    if not verification.valid:
        raise VerificationFailed(verification.reason or "invalid")
    steps.append("requester verified presentation")

    receipt, consent_txn = record_consent(
        owner_wallet,
        requester_relation,
        requester.did,
        requester.signing_private,
        [(attr, provider.schema.attribute_types()[attr]) for attr in sorted(requested_attributes)],
        purpose,
        now,
    )
    steps.append("consent receipt recorded")

    return ThirdPartyFlowResult(
        credential=credential,
        presentation=presentation,
        verification=verification,
        receipt=receipt,
        consent_txn=consent_txn,
        steps=steps,
    )
