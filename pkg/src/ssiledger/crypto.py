"""Hashing, signing and public-key encryption primitives.

Signatures are Ed25519 (deterministic, 64-byte signatures, 32-byte keys), so
signing the same message twice yields identical bytes and golden tests stay
stable. Public-key encryption is an X25519 sealed box: an ephemeral keypair
per message, HKDF-SHA256 key derivation, ChaCha20-Poly1305 AEAD. All key and
signature material is raw bytes; hex rendering is lowercase everywhere.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Any

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .canonical import canonicalize

DIGEST_SIZE = 32
SEED_SIZE = 32
KEY_SIZE = 32
SIGNATURE_SIZE = 64
MAX_SEALED_PLAINTEXT = 4096

_SEAL_INFO = b"ssiledger/sealed-box/v1"
_RAW = serialization.Encoding.Raw
_RAW_PUBLIC = serialization.PublicFormat.Raw
_RAW_PRIVATE = serialization.PrivateFormat.Raw
_NO_ENCRYPTION = serialization.NoEncryption()


class CryptoError(Exception):
    """Base class for crypto failures."""


class InvalidSeed(CryptoError):
    """Key generation seed has the wrong length."""


class InvalidKey(CryptoError):
    """Key bytes do not form a usable key."""


class PlaintextTooLarge(CryptoError):
    """Sealed-box plaintext exceeds the size bound."""


class DecryptFailed(CryptoError):
    """Ciphertext is tampered, truncated, or for a different key."""


@dataclass(frozen=True)
class Digest:
    """A SHA-256 output: exactly 32 bytes, rendered as 64 lowercase hex chars."""

    value: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.value, bytes) or len(self.value) != DIGEST_SIZE:
            raise ValueError("digest must be exactly 32 bytes")

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        return cls(bytes.fromhex(text))

    @property
    def hex(self) -> str:
        return self.value.hex()

    def __bytes__(self) -> bytes:
        return self.value

    def __repr__(self) -> str:
        return f"Digest({self.hex})"


ZERO_DIGEST = Digest(b"\x00" * DIGEST_SIZE)


@dataclass(frozen=True)
class SigningKeyPair:
    """Ed25519 keypair; the private part must never leave a wallet unencrypted."""

    public: bytes
    private: bytes


@dataclass(frozen=True)
class EncryptionKeyPair:
    """X25519 keypair used for sealed-box encryption (e.g. auth challenges)."""

    public: bytes
    private: bytes


def sha256(data: bytes) -> Digest:
    """Standard SHA-256 digest of a byte sequence."""
    return Digest(hashlib.sha256(data).digest())


def digest_of(value: Any) -> Digest:
    """SHA-256 over the canonical JSON encoding of a structured value."""
    return sha256(canonicalize(value))


def generate_signing_keypair(seed: bytes) -> SigningKeyPair:
    """Derive an Ed25519 keypair from a 32-byte seed. Deterministic."""
    if len(seed) != SEED_SIZE:
        raise InvalidSeed(f"signing seed must be {SEED_SIZE} bytes, got {len(seed)}")
    key = Ed25519PrivateKey.from_private_bytes(seed)
    public = key.public_key().public_bytes(_RAW, _RAW_PUBLIC)
    return SigningKeyPair(public=public, private=seed)


def generate_encryption_keypair(seed: bytes) -> EncryptionKeyPair:
    """Derive an X25519 keypair from a 32-byte seed. Deterministic."""
    if len(seed) != SEED_SIZE:
        raise InvalidSeed(f"encryption seed must be {SEED_SIZE} bytes, got {len(seed)}")
    key = X25519PrivateKey.from_private_bytes(seed)
    public = key.public_key().public_bytes(_RAW, _RAW_PUBLIC)
    private = key.private_bytes(_RAW, _RAW_PRIVATE, _NO_ENCRYPTION)
    return EncryptionKeyPair(public=public, private=private)


def sign(private: bytes, message: bytes) -> bytes:
    """Sign a message; returns a 64-byte deterministic signature."""
    if not isinstance(private, bytes) or len(private) != KEY_SIZE:
        raise InvalidKey("signing key must be 32 raw private bytes")
    return Ed25519PrivateKey.from_private_bytes(private).sign(message)


def verify(public: bytes, message: bytes, signature: bytes) -> bool:
    """True iff the signature was produced over message by the matching key.

    Total: malformed keys or signatures simply fail verification.
    """
    if not isinstance(public, bytes) or len(public) != KEY_SIZE:
        return False
    if not isinstance(signature, bytes) or len(signature) != SIGNATURE_SIZE:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


def _sealed_key(shared: bytes, ephemeral_public: bytes, recipient_public: bytes) -> bytes:
    return HKDF(
        algorithm=SHA256(),
        length=KEY_SIZE + 12,
        salt=ephemeral_public + recipient_public,
        info=_SEAL_INFO,
    ).derive(shared)


def encrypt_to(public: bytes, plaintext: bytes) -> bytes:
    """Encrypt to an X25519 public key. Randomized: a fresh ephemeral keypair
    per call, so two encryptions of the same plaintext differ.

    Output layout: ephemeral public key (32 bytes) || AEAD ciphertext.
    """
    if len(plaintext) > MAX_SEALED_PLAINTEXT:
        raise PlaintextTooLarge(
            f"plaintext of {len(plaintext)} bytes exceeds {MAX_SEALED_PLAINTEXT}"
        )
    try:
        recipient = X25519PublicKey.from_public_bytes(public)
    except ValueError as exc:
        raise InvalidKey("recipient key must be 32 raw X25519 public bytes") from exc
    ephemeral = X25519PrivateKey.from_private_bytes(os.urandom(KEY_SIZE))
    ephemeral_public = ephemeral.public_key().public_bytes(_RAW, _RAW_PUBLIC)
    material = _sealed_key(ephemeral.exchange(recipient), ephemeral_public, public)
    sealed = ChaCha20Poly1305(material[:KEY_SIZE]).encrypt(material[KEY_SIZE:], plaintext, None)
    return ephemeral_public + sealed


def decrypt_from(private: bytes, ciphertext: bytes) -> bytes:
    """Open a sealed box. Raises DecryptFailed for any mismatch or tampering."""
    if len(ciphertext) < KEY_SIZE + 16:
        raise DecryptFailed("ciphertext too short")
    try:
        recipient = X25519PrivateKey.from_private_bytes(private)
    except ValueError as exc:
        raise DecryptFailed("malformed private key") from exc
    ephemeral_public = ciphertext[:KEY_SIZE]
    recipient_public = recipient.public_key().public_bytes(_RAW, _RAW_PUBLIC)
    try:
        shared = recipient.exchange(X25519PublicKey.from_public_bytes(ephemeral_public))
        material = _sealed_key(shared, ephemeral_public, recipient_public)
        return ChaCha20Poly1305(material[:KEY_SIZE]).decrypt(
            material[KEY_SIZE:], ciphertext[KEY_SIZE:], None
        )
    except (InvalidTag, ValueError) as exc:
        raise DecryptFailed("sealed box did not open") from exc
