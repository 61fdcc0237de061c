"""Public-key challenge-response authentication.

The verifier encrypts a random nonce to the subject's agreement key and sends
only the ciphertext. Decrypting it and echoing the nonce back proves control
of the matching private key. Challenges expire and are single-use: without a
ttl and replay tracking the protocol would be trivially replayable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable

from .crypto import encrypt_to

NONCE_SIZE = 32
DEFAULT_TTL = 120  # seconds


@dataclass(frozen=True)
class Challenge:
    """Verifier-side record of one issued challenge. Only ``ciphertext`` is
    ever transmitted; the nonce stays with the verifier."""

    nonce: bytes
    issued_at: int
    ttl: int
    ciphertext: bytes
    subject_did: str = ""


@dataclass(frozen=True)
class AuthResult:
    authenticated: bool
    reason: str | None = None  # Mismatch | Expired | Replayed


AUTHENTICATED = AuthResult(True)


def issue_challenge(
    subject_agreement_key: bytes,
    ttl: int = DEFAULT_TTL,
    now: int = 0,
    subject_did: str = "",
    rng: Callable[[int], bytes] = os.urandom,
) -> Challenge:
    """Create a fresh challenge for a subject's agreement key."""
    if ttl <= 0:
        raise ValueError("challenge ttl must be positive")
    nonce = rng(NONCE_SIZE)
    return Challenge(
        nonce=nonce,
        issued_at=now,
        ttl=ttl,
        ciphertext=encrypt_to(subject_agreement_key, nonce),
        subject_did=subject_did,
    )


@dataclass
class ChallengeVerifier:
    """Tracks pending and consumed challenges for one verifying party.

    Every response is checked exactly once: a correct nonce authenticates the
    first time and is Replayed thereafter; expiry consumes the challenge too.
    """

    pending: dict[bytes, Challenge] = field(default_factory=dict)
    consumed: set[bytes] = field(default_factory=set)

    def issue(
        self,
        subject_agreement_key: bytes,
        ttl: int = DEFAULT_TTL,
        now: int = 0,
        subject_did: str = "",
        rng: Callable[[int], bytes] = os.urandom,
    ) -> Challenge:
        challenge = issue_challenge(subject_agreement_key, ttl, now, subject_did, rng)
        self.pending[challenge.nonce] = challenge
        return challenge

    def check(self, response: bytes, now: int) -> AuthResult:
        """Match a response against pending challenges."""
        if response in self.consumed:
            return AuthResult(False, "Replayed")
        challenge = self.pending.pop(response, None)
        if challenge is None:
            return AuthResult(False, "Mismatch")
        self.consumed.add(response)
        if now > challenge.issued_at + challenge.ttl:
            return AuthResult(False, "Expired")
        return AUTHENTICATED
