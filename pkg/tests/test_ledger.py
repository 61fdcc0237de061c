import hashlib
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import Identity
from ssiledger.crypto import Digest, ZERO_DIGEST, sha256
from ssiledger.ledger import (
    Block,
    Chain,
    ChainFault,
    EmptyBlock,
    EmptyLeaves,
    LedgerTransaction,
    TxnType,
    build_block,
    merkle_proof,
    merkle_root,
    read_chain,
    validate_chain,
    verify_inclusion,
    write_chain,
)
from ssiledger.state import did_reg_payload


def h(n: int) -> Digest:
    return sha256(bytes([n]))


def _oracle_pair(a: Digest, b: Digest) -> bytes:
    # independent of ledger.merkle_root: plain hashlib over concatenated bytes
    return hashlib.sha256(a.value + b.value).digest()


class TestMerkle:
    def test_single_leaf_is_identity(self):
        assert merkle_root([h(1)]) == h(1)

    def test_two_leaves_hand_computed(self):
        assert merkle_root([h(1), h(2)]).value == _oracle_pair(h(1), h(2))

    def test_three_leaves_duplicates_last(self):
        left = Digest(_oracle_pair(h(1), h(2)))
        right = Digest(_oracle_pair(h(3), h(3)))
        assert merkle_root([h(1), h(2), h(3)]).value == _oracle_pair(left, right)

    def test_empty_rejected(self):
        with pytest.raises(EmptyLeaves):
            merkle_root([])

    def test_deterministic(self):
        leaves = [h(i) for i in range(7)]
        assert merkle_root(leaves) == merkle_root(leaves)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=2, max_value=16), st.randoms(use_true_random=False))
    def test_permutation_changes_root(self, n, rng):
        leaves = [h(i) for i in range(n)]
        shuffled = leaves[:]
        rng.shuffle(shuffled)
        if shuffled != leaves:
            assert merkle_root(shuffled) != merkle_root(leaves)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8, 13])
    def test_proofs_round_trip(self, n):
        leaves = [h(i) for i in range(n)]
        root = merkle_root(leaves)
        for i in range(n):
            proof = merkle_proof(leaves, i)
            assert verify_inclusion(leaves[i], proof, root)

    def test_proof_against_wrong_root_rejects(self):
        leaves = [h(i) for i in range(4)]
        proof = merkle_proof(leaves, 2)
        assert not verify_inclusion(leaves[2], proof, h(9))

    def test_single_leaf_empty_proof(self):
        assert verify_inclusion(h(5), [], h(5))
        assert not verify_inclusion(h(5), [], h(6))


def _txn(n: int, identity: Identity | None = None) -> LedgerTransaction:
    identity = identity or Identity.create(f"txn-author-{n}")
    return LedgerTransaction.create(
        TxnType.DID_REG,
        did_reg_payload(identity.did, identity.document),
        author_did=identity.did,
        signing_private=identity.signing_private,
        timestamp=n,
    )


def _chain(blocks: int, txns_per_block: int = 2, start: int = 0) -> Chain:
    chain = Chain.new()
    counter = start
    for _ in range(blocks):
        txns = [_txn(counter + i) for i in range(txns_per_block)]
        counter += txns_per_block
        chain = chain.append(build_block(chain.head, txns, timestamp=counter))
    return chain


class TestBlocks:
    def test_genesis_shape(self):
        genesis = Block.genesis()
        assert genesis.height == 0
        assert genesis.prev_hash == ZERO_DIGEST
        assert genesis.txns == ()

    def test_build_block_links_and_heights(self):
        genesis = Block.genesis()
        block = build_block(genesis, [_txn(1)], timestamp=5)
        assert block.height == 1
        assert block.prev_hash == genesis.block_hash

    def test_build_is_deterministic(self):
        genesis = Block.genesis()
        txns = [_txn(1), _txn(2)]
        assert build_block(genesis, txns, 5).block_hash == build_block(genesis, txns, 5).block_hash

    def test_empty_block_rejected(self):
        with pytest.raises(EmptyBlock):
            build_block(Block.genesis(), [], timestamp=5)

    def test_mutated_txn_breaks_merkle(self):
        import dataclasses

        block = build_block(Block.genesis(), [_txn(1), _txn(2)], timestamp=5)
        tampered_txn = dataclasses.replace(block.txns[0], timestamp=99)
        tampered = dataclasses.replace(block, txns=(tampered_txn, block.txns[1]))
        from ssiledger.ledger import merkle_root as mr

        assert mr([t.leaf() for t in tampered.txns]) != tampered.merkle_root


class TestChainValidation:
    def test_fresh_chain_valid(self):
        assert validate_chain(_chain(5))

    def test_txn_tamper_detected_at_its_height(self):
        import dataclasses

        chain = _chain(5)
        victim = chain.blocks[2]
        payload = json.loads(json.dumps(victim.txns[0].payload))
        payload["document"]["endpoint"] = payload["document"]["endpoint"] + "x"
        tampered_txn = dataclasses.replace(victim.txns[0], payload=payload)
        tampered_block = dataclasses.replace(victim, txns=(tampered_txn,) + victim.txns[1:])
        tampered = Chain(blocks=chain.blocks[:2] + (tampered_block,) + chain.blocks[3:])
        result = validate_chain(tampered)
        assert not result.ok
        assert result.height == 2
        assert result.reason == ChainFault.BAD_MERKLE

    def test_replaced_selfconsistent_block_breaks_link_at_next(self):
        chain = _chain(5)
        # adversary rebuilds block 2 from scratch, fully self-consistent
        replacement = build_block(chain.blocks[1], [_txn(900)], timestamp=77)
        forged = Chain(blocks=chain.blocks[:2] + (replacement,) + chain.blocks[3:])
        result = validate_chain(forged)
        assert not result.ok
        assert result.height == 3
        assert result.reason == ChainFault.BAD_LINK

    def test_bad_height_detected(self):
        import dataclasses

        chain = _chain(3)
        wrong = dataclasses.replace(chain.blocks[2], height=5)
        result = validate_chain(Chain(blocks=chain.blocks[:2] + (wrong,) + chain.blocks[3:]))
        assert not result.ok
        assert result.reason == ChainFault.BAD_HEIGHT

    def test_header_tamper_detected_as_bad_hash(self):
        import dataclasses

        chain = _chain(3)
        wrong = dataclasses.replace(chain.blocks[2], timestamp=123456)
        result = validate_chain(Chain(blocks=chain.blocks[:2] + (wrong,) + chain.blocks[3:]))
        assert not result.ok
        assert result.height == 2
        assert result.reason == ChainFault.BAD_HASH


def mutate_one_bit(chain: Chain, rng: random.Random) -> tuple[Chain, int]:
    """Flip one random bit somewhere in a random non-genesis block, at the
    serialized representation level, and reparse."""
    import dataclasses

    height = rng.randrange(1, len(chain.blocks))
    block = chain.blocks[height]
    fields = ["height", "prev_hash", "merkle_root", "timestamp", "block_hash", "txn"]
    field = rng.choice(fields)
    if field == "height":
        block = dataclasses.replace(block, height=block.height ^ (1 << rng.randrange(8)))
    elif field == "timestamp":
        block = dataclasses.replace(block, timestamp=block.timestamp ^ (1 << rng.randrange(16)))
    elif field in ("prev_hash", "merkle_root", "block_hash"):
        digest: Digest = getattr(block, field)
        raw = bytearray(digest.value)
        raw[rng.randrange(32)] ^= 1 << rng.randrange(8)
        block = dataclasses.replace(block, **{field: Digest(bytes(raw))})
    else:
        index = rng.randrange(len(block.txns))
        txn = block.txns[index]
        choice = rng.choice(["payload", "author", "signature", "timestamp", "txn_id"])
        if choice == "payload":
            payload = json.loads(json.dumps(txn.payload))
            payload["document"]["endpoint"] = _flip_char(payload["document"]["endpoint"], rng)
            txn = dataclasses.replace(txn, payload=payload)
        elif choice == "author":
            txn = dataclasses.replace(txn, author_did=_flip_char(txn.author_did, rng))
        elif choice == "signature":
            raw = bytearray(txn.author_signature)
            raw[rng.randrange(len(raw))] ^= 1 << rng.randrange(8)
            txn = dataclasses.replace(txn, author_signature=bytes(raw))
        elif choice == "timestamp":
            txn = dataclasses.replace(txn, timestamp=txn.timestamp ^ (1 << rng.randrange(16)))
        else:
            raw = bytearray(txn.txn_id.value)
            raw[rng.randrange(32)] ^= 1 << rng.randrange(8)
            txn = dataclasses.replace(txn, txn_id=Digest(bytes(raw)))
        txns = block.txns[:index] + (txn,) + block.txns[index + 1 :]
        block = dataclasses.replace(block, txns=txns)
    blocks = chain.blocks[:height] + (block,) + chain.blocks[height + 1 :]
    return Chain(blocks=blocks), height


def _flip_char(text: str, rng: random.Random) -> str:
    i = rng.randrange(len(text))
    return text[:i] + chr(ord(text[i]) ^ 1) + text[i + 1 :]


class TestTamperPropagation:
    def test_random_single_bit_mutations_always_detected(self):
        rng = random.Random(1234)
        chain = _chain(6, txns_per_block=2)
        assert validate_chain(chain)
        for _ in range(40):
            mutated, height = mutate_one_bit(chain, rng)
            result = validate_chain(mutated)
            assert not result.ok, "mutation went undetected"
            assert result.height <= height + 1


class TestSerialization:
    def test_round_trip_is_byte_identical(self, tmp_path):
        chain = _chain(4)
        path = tmp_path / "test.ledger.jsonl"
        write_chain(chain, path)
        first = path.read_bytes()
        reread = read_chain(path)
        assert validate_chain(reread)
        write_chain(reread, path)
        assert path.read_bytes() == first

    def test_txn_dict_round_trip(self):
        txn = _txn(3)
        assert LedgerTransaction.from_dict(txn.to_dict()) == txn

    def test_block_dict_round_trip(self):
        block = build_block(Block.genesis(), [_txn(1)], timestamp=9)
        assert Block.from_dict(block.to_dict()) == block

    def test_chain_digest_commits_to_content(self):
        assert _chain(3, start=0).digest() != _chain(3, start=50).digest()
