"""Self-sovereign identity on a permissioned hash-chained ledger.

Wallets hold pairwise DIDs and verifiable credentials; a deterministic
simulated network of BFT nodes orders and replicates the public records
(DID documents, schemas, credential definitions, revocation entries, and
consent proofs) that verification relies on.
"""

__version__ = "0.1.0"
