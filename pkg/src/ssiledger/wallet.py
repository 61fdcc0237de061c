"""The identity owner's wallet: pairwise DIDs and encrypted key storage.

A wallet holds one pairwise identity per relation, each with its own signing
and agreement keypair, so compromising one relation's keys tells an attacker
nothing about the others. Private keys are encrypted at rest under a key
derived from the unlock secret with scrypt (memory-hard); the wallet file
never contains plaintext private key material.

The unlock secret stands in for a biometric unlock: anything that yields a
stable high-entropy byte string can be plugged in.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from .canonical import canonical_json
from .crypto import (
    EncryptionKeyPair,
    SigningKeyPair,
    decrypt_from,
    generate_encryption_keypair,
    generate_signing_keypair,
    sha256,
)
from .state import DidDocument, derive_did

if TYPE_CHECKING:
    from .credentials import VerifiableCredential
    from .state import NodeState

WALLET_FORMAT = "ssiledger-wallet/1"


class WalletError(Exception):
    pass


class WeakSecret(WalletError):
    """Unlock secret is empty."""


class UnlockFailed(WalletError):
    """Unlock secret does not match this wallet."""


class WalletLocked(WalletError):
    """Operation needs private keys but the wallet is locked."""


class RelationExists(WalletError):
    """A pairwise identity for this relation already exists."""


class UnknownRelation(WalletError):
    pass


class CredentialNotStored(WalletError):
    """Credential failed verification at storage time."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class KdfParams:
    salt: bytes
    n: int = 2**14
    r: int = 8
    p: int = 1

    def derive(self, secret: bytes) -> bytes:
        return Scrypt(salt=self.salt, length=32, n=self.n, r=self.r, p=self.p).derive(secret)


@dataclass
class PairwiseIdentity:
    """One relation's identity: a DID, its keypairs, and the peer it talks to."""

    relation: str
    did: str
    signing: SigningKeyPair
    agreement: EncryptionKeyPair
    endpoint: str
    peer_did: str = ""

    def document(self, metadata: dict | None = None) -> DidDocument:
        return DidDocument(
            verification_key=self.signing.public,
            agreement_key=self.agreement.public,
            endpoint=self.endpoint,
            metadata=metadata or {},
        )


@dataclass
class StoredCredential:
    credential: "VerifiableCredential"
    received_at: int


@dataclass
class _EncryptedRelation:
    did: str
    peer_did: str
    endpoint: str
    verification_key: bytes
    agreement_key: bytes
    signing_blob: dict
    agreement_blob: dict


def _seal(kek: bytes, relation: str, kind: str, secret: bytes) -> dict:
    key = HKDF(
        algorithm=SHA256(), length=32, salt=None, info=f"wallet:{relation}:{kind}".encode()
    ).derive(kek)
    nonce = os.urandom(12)
    ciphertext = ChaCha20Poly1305(key).encrypt(nonce, secret, None)
    return {
        "nonce": base64.b64encode(nonce).decode(),
        "ciphertext": base64.b64encode(ciphertext).decode(),
    }


def _open(kek: bytes, relation: str, kind: str, blob: dict) -> bytes:
    key = HKDF(
        algorithm=SHA256(), length=32, salt=None, info=f"wallet:{relation}:{kind}".encode()
    ).derive(kek)
    return ChaCha20Poly1305(key).decrypt(
        base64.b64decode(blob["nonce"]), base64.b64decode(blob["ciphertext"]), None
    )


class Wallet:
    """Single-owner key store. Operations on one wallet are not thread-safe."""

    def __init__(self, owner_label: str, kdf: KdfParams, check: bytes):
        self.owner_label = owner_label
        self._kdf = kdf
        self._check = check
        self._kek: bytes | None = None
        self._relations: dict[str, _EncryptedRelation] = {}
        self.credentials: list[StoredCredential] = []

    @classmethod
    def create(cls, owner_label: str, unlock_secret: bytes) -> "Wallet":
        if not unlock_secret:
            raise WeakSecret("unlock secret must be non-empty")
        kdf = KdfParams(salt=os.urandom(16))
        kek = kdf.derive(unlock_secret)
        wallet = cls(owner_label, kdf, sha256(b"wallet-check:" + kek).value)
        wallet._kek = kek
        return wallet

    @property
    def is_locked(self) -> bool:
        return self._kek is None

    def lock(self) -> None:
        self._kek = None

    def unlock(self, unlock_secret: bytes) -> None:
        kek = self._kdf.derive(unlock_secret)
        if sha256(b"wallet-check:" + kek).value != self._check:
            raise UnlockFailed("wrong unlock secret")
        self._kek = kek

    def _require_unlocked(self) -> bytes:
        if self._kek is None:
            raise WalletLocked("wallet is locked")
        return self._kek

    def relation_names(self) -> list[str]:
        return sorted(self._relations)

    def new_pairwise(
        self,
        relation: str,
        seed: bytes | None = None,
        endpoint: str | None = None,
        metadata: dict | None = None,
    ) -> tuple[str, DidDocument]:
        """Mint a fresh pairwise identity for a relation.

        The optional seed makes key generation reproducible; it is mixed with
        the relation name so the same seed never yields the same DID twice.
        """
        kek = self._require_unlocked()
        if relation in self._relations:
            raise RelationExists(relation)
        base = seed if seed is not None else os.urandom(32)
        signing = generate_signing_keypair(
            sha256(b"sign:" + relation.encode() + b":" + base).value
        )
        agreement = generate_encryption_keypair(
            sha256(b"agree:" + relation.encode() + b":" + base).value
        )
        did = derive_did(signing.public)
        endpoint = endpoint if endpoint is not None else f"sim://{self.owner_label}/{relation}"
        self._relations[relation] = _EncryptedRelation(
            did=did,
            peer_did="",
            endpoint=endpoint,
            verification_key=signing.public,
            agreement_key=agreement.public,
            signing_blob=_seal(kek, relation, "sign", signing.private),
            agreement_blob=_seal(kek, relation, "agree", agreement.private),
        )
        return did, self.identity(relation).document(metadata)

    def identity(self, relation: str) -> PairwiseIdentity:
        """Decrypt and return the full pairwise identity for a relation."""
        kek = self._require_unlocked()
        entry = self._relations.get(relation)
        if entry is None:
            raise UnknownRelation(relation)
        return PairwiseIdentity(
            relation=relation,
            did=entry.did,
            signing=SigningKeyPair(
                public=entry.verification_key,
                private=_open(kek, relation, "sign", entry.signing_blob),
            ),
            agreement=EncryptionKeyPair(
                public=entry.agreement_key,
                private=_open(kek, relation, "agree", entry.agreement_blob),
            ),
            endpoint=entry.endpoint,
            peer_did=entry.peer_did,
        )

    def did(self, relation: str) -> str:
        entry = self._relations.get(relation)
        if entry is None:
            raise UnknownRelation(relation)
        return entry.did

    def set_peer(self, relation: str, peer_did: str) -> None:
        entry = self._relations.get(relation)
        if entry is None:
            raise UnknownRelation(relation)
        entry.peer_did = peer_did

    def respond_challenge(self, relation: str, challenge_ciphertext: bytes) -> bytes:
        """Decrypt an authentication challenge with the relation's agreement
        key and return the recovered nonce (to be echoed to the verifier)."""
        identity = self.identity(relation)
        return decrypt_from(identity.agreement.private, challenge_ciphertext)

    def store_credential(
        self, credential: "VerifiableCredential", ledger_view: "NodeState", received_at: int
    ) -> StoredCredential:
        """Accept a received credential only if it verifies against the ledger:
        issuer signature checks out under the on-ledger key and the credential
        has not been revoked."""
        from .credentials import verify_credential

        self._require_unlocked()
        result = verify_credential(credential, ledger_view, received_at)
        if not result.valid:
            reason = result.reason or "invalid"
            if reason == "UnknownCredDef":
                reason = "UnknownIssuer"
            raise CredentialNotStored(reason)
        stored = StoredCredential(credential=credential, received_at=received_at)
        self.credentials.append(stored)
        return stored

    def find_credentials(self, subject_did: str | None = None) -> list["VerifiableCredential"]:
        found = [s.credential for s in self.credentials]
        if subject_did is not None:
            found = [c for c in found if c.subject_did == subject_did]
        return found

    def to_dict(self) -> dict:
        return {
            "format": WALLET_FORMAT,
            "owner_label": self.owner_label,
            "kdf": {
                "salt": self._kdf.salt.hex(),
                "n": self._kdf.n,
                "r": self._kdf.r,
                "p": self._kdf.p,
            },
            "check": self._check.hex(),
            "relations": {
                relation: {
                    "did": entry.did,
                    "peer_did": entry.peer_did,
                    "endpoint": entry.endpoint,
                    "verification_key": entry.verification_key.hex(),
                    "agreement_key": entry.agreement_key.hex(),
                    "signing_private": entry.signing_blob,
                    "agreement_private": entry.agreement_blob,
                }
                for relation, entry in sorted(self._relations.items())
            },
            "credentials": [
                {"credential": s.credential.to_dict(), "received_at": s.received_at}
                for s in self.credentials
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Wallet":
        from .credentials import VerifiableCredential

        kdf = data["kdf"]
        wallet = cls(
            owner_label=data["owner_label"],
            kdf=KdfParams(salt=bytes.fromhex(kdf["salt"]), n=kdf["n"], r=kdf["r"], p=kdf["p"]),
            check=bytes.fromhex(data["check"]),
        )
        for relation, entry in data["relations"].items():
            wallet._relations[relation] = _EncryptedRelation(
                did=entry["did"],
                peer_did=entry["peer_did"],
                endpoint=entry["endpoint"],
                verification_key=bytes.fromhex(entry["verification_key"]),
                agreement_key=bytes.fromhex(entry["agreement_key"]),
                signing_blob=entry["signing_private"],
                agreement_blob=entry["agreement_private"],
            )
        for item in data["credentials"]:
            wallet.credentials.append(
                StoredCredential(
                    credential=VerifiableCredential.from_dict(item["credential"]),
                    received_at=item["received_at"],
                )
            )
        return wallet

    def save(self, path: str | Path) -> None:
        """Write the wallet file. Private keys appear only as ciphertext."""
        Path(path).write_text(canonical_json(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Wallet":
        """Read a wallet file; the result is locked until ``unlock``."""
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
