from __future__ import annotations

from dataclasses import dataclass

import pytest

from ssiledger.crypto import (
    generate_encryption_keypair,
    generate_signing_keypair,
    sha256,
)
from ssiledger.ledger import LedgerTransaction, TxnType
from ssiledger.state import (
    AttrType,
    CredDefRecord,
    DidDocument,
    NodeState,
    SchemaRecord,
    apply,
    cred_def_payload,
    derive_did,
    did_reg_payload,
    schema_payload,
)
from ssiledger.wallet import Wallet


def seed(label: str) -> bytes:
    return sha256(f"test-seed:{label}".encode()).value


@dataclass
class Identity:
    """A bare keyholder with an on-ledger DID (no wallet)."""

    did: str
    signing_public: bytes
    signing_private: bytes
    agreement_public: bytes
    agreement_private: bytes
    document: DidDocument

    @classmethod
    def create(cls, label: str) -> "Identity":
        signing = generate_signing_keypair(seed(f"{label}:sign"))
        agreement = generate_encryption_keypair(seed(f"{label}:agree"))
        document = DidDocument(
            verification_key=signing.public,
            agreement_key=agreement.public,
            endpoint=f"sim://{label}",
        )
        return cls(
            did=derive_did(signing.public),
            signing_public=signing.public,
            signing_private=signing.private,
            agreement_public=agreement.public,
            agreement_private=agreement.private,
            document=document,
        )

    def registration_txn(self, timestamp: int = 0) -> LedgerTransaction:
        return LedgerTransaction.create(
            TxnType.DID_REG,
            did_reg_payload(self.did, self.document),
            author_did=self.did,
            signing_private=self.signing_private,
            timestamp=timestamp,
        )


def must_apply(state: NodeState, txn: LedgerTransaction) -> NodeState:
    state, rejection = apply(state, txn)
    assert rejection is None, f"unexpected rejection: {rejection}"
    return state


DIPLOMA_ATTRS = [
    ("degree", AttrType.STRING),
    ("field", AttrType.STRING),
    ("year", AttrType.INTEGER),
]


@dataclass
class CredEnv:
    """An issuer with a published schema and cred def, plus a registered holder."""

    state: NodeState
    issuer: Identity
    schema: SchemaRecord
    cred_def: CredDefRecord
    holder_wallet: Wallet
    holder_relation: str
    holder_did: str


@pytest.fixture
def cred_env() -> CredEnv:
    issuer = Identity.create("university")
    state = must_apply(NodeState(), issuer.registration_txn())

    schema = SchemaRecord.create("diploma", "1.0", DIPLOMA_ATTRS)
    state = must_apply(
        state,
        LedgerTransaction.create(
            TxnType.SCHEMA,
            schema_payload(schema),
            author_did=issuer.did,
            signing_private=issuer.signing_private,
            timestamp=1,
        ),
    )
    cred_def = CredDefRecord.create(schema.schema_id, issuer.did, issuer.signing_public)
    state = must_apply(
        state,
        LedgerTransaction.create(
            TxnType.CRED_DEF,
            cred_def_payload(cred_def),
            author_did=issuer.did,
            signing_private=issuer.signing_private,
            timestamp=2,
        ),
    )

    holder_wallet = Wallet.create("alice", b"alice-secret")
    holder_did, holder_doc = holder_wallet.new_pairwise("employer", seed=seed("alice:employer"))
    holder_identity = holder_wallet.identity("employer")
    state = must_apply(
        state,
        LedgerTransaction.create(
            TxnType.DID_REG,
            did_reg_payload(holder_did, holder_doc),
            author_did=holder_did,
            signing_private=holder_identity.signing.private,
            timestamp=3,
        ),
    )
    return CredEnv(
        state=state,
        issuer=issuer,
        schema=schema,
        cred_def=cred_def,
        holder_wallet=holder_wallet,
        holder_relation="employer",
        holder_did=holder_did,
    )


def diploma_attributes() -> dict:
    return {"degree": "BSc", "field": "computer engineering", "year": 2019}
