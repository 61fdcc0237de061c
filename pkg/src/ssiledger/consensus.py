"""Replicated ordering with a master and a backup protocol instance.

Two protocol instances run concurrently over the same request pool, each with
its own primary and its own pre-prepare / prepare / commit pipeline. Both
instances order batches; only the master instance's order is executed against
the ledger. Every node monitors both instances' commit throughput and latency
over a sliding window; when the backup sustainably outperforms the master by
more than the configured ratio, nodes broadcast signed instance-change votes,
and a quorum certificate of 2f+1 votes — ordered through the backup instance
itself so all nodes agree on one cutover — promotes the backup to master.

Execution safety rests on two rules. First, a batch of the master instance is
executed only once 2f+1 nodes have announced (ExecReady) that they committed
it. Second, a node that votes for an instance change stops announcing for the
old master, freezing the frontier its vote reports. Together these guarantee
the agreed cutover sequence is never below anything any honest node already
executed, so every node executes exactly: old master up to the cutover, then
the new master from its first sequence, with already-applied transactions
deduplicated. Byzantine behaviours modelled for testing are crash, message
delay and primary equivocation; adaptive adversaries (e.g. lying in votes)
are out of scope.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Callable

from .crypto import digest_of, sign, verify
from .ledger import Chain, LedgerTransaction, build_block
from .state import NodeState, apply, verify_txn_signature
from .simnet import SimNetwork


@dataclass(frozen=True)
class ConsensusConfig:
    """Protocol and monitoring knobs. N is always 3f+1."""

    f: int = 1
    window: int = 10  # monitor window, in committed batches
    delta: float = 2.0  # degradation ratio that triggers an instance change
    batch_max: int = 5
    batch_timeout: int = 50  # ms a primary waits before batching what it has
    monitor_interval: int = 200  # ms between monitor evaluations
    stall_vote_after: int = 2000  # ms of blocked execution before voting anyway
    genesis_timestamp: int = 0
    denied_fields: tuple[str, ...] | None = None  # privacy lint override

    @property
    def n(self) -> int:
        return 3 * self.f + 1

    @property
    def quorum(self) -> int:
        return 2 * self.f + 1

    def validate(self) -> None:
        if self.f < 1:
            raise ValueError("fault bound f must be >= 1")
        if self.delta <= 1:
            raise ValueError("degradation threshold delta must be > 1")
        if self.batch_max < 1:
            raise ValueError("batch_max must be >= 1")
        if self.window < 1:
            raise ValueError("monitor window must be >= 1")


@dataclass
class FaultPlan:
    """When (in sim ms) nodes crash or start equivocating."""

    crash: dict[int, int] = field(default_factory=dict)
    equivocate: dict[int, int] = field(default_factory=dict)


# --- protocol messages -----------------------------------------------------


@dataclass(frozen=True)
class Batch:
    instance: int
    seq: int
    timestamp: int
    txns: tuple[LedgerTransaction, ...]
    control: Any = None  # instance-change certificate payload, if a control batch

    def digest_hex(self) -> str:
        return digest_of(
            {
                "instance": self.instance,
                "seq": self.seq,
                "timestamp": self.timestamp,
                "txns": [txn.to_dict() for txn in self.txns],
                "control": self.control,
            }
        ).hex


@dataclass(frozen=True)
class Request:
    txn: LedgerTransaction


@dataclass(frozen=True)
class PrePrepare:
    instance: int
    seq: int
    batch: Batch


@dataclass(frozen=True)
class Prepare:
    instance: int
    seq: int
    digest: str


@dataclass(frozen=True)
class Commit:
    instance: int
    seq: int
    digest: str


@dataclass(frozen=True)
class ExecReady:
    """Sender has committed (instance, seq); 2f+1 of these authorize execution."""

    instance: int
    seq: int
    digest: str


@dataclass(frozen=True)
class InstanceChangeVote:
    epoch: int
    new_master: int
    last_committed: int  # voter's committed frontier on the instance being demoted
    voter: int
    signature: bytes

    @staticmethod
    def body(epoch: int, new_master: int, last_committed: int, voter: int) -> dict:
        return {
            "epoch": epoch,
            "new_master": new_master,
            "last_committed": last_committed,
            "voter": voter,
        }

    @classmethod
    def create(
        cls, epoch: int, new_master: int, last_committed: int, voter: int, signing_private: bytes
    ) -> "InstanceChangeVote":
        body = cls.body(epoch, new_master, last_committed, voter)
        return cls(epoch, new_master, last_committed, voter, sign(signing_private, digest_of(body).value))

    def verify_with(self, public: bytes) -> bool:
        body = self.body(self.epoch, self.new_master, self.last_committed, self.voter)
        return verify(public, digest_of(body).value, self.signature)

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "new_master": self.new_master,
            "last_committed": self.last_committed,
            "voter": self.voter,
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InstanceChangeVote":
        return cls(
            epoch=data["epoch"],
            new_master=data["new_master"],
            last_committed=data["last_committed"],
            voter=data["voter"],
            signature=bytes.fromhex(data["signature"]),
        )


@dataclass(frozen=True)
class FetchBatch:
    instance: int
    seq: int
    digest: str


@dataclass(frozen=True)
class BatchReply:
    instance: int
    seq: int
    batch: Batch


# --- performance monitoring ------------------------------------------------


class PerfMonitor:
    """Sliding-window throughput/latency tracking for both instances."""

    def __init__(self, window: int):
        self.window = window
        self.reset(0)

    def reset(self, now: int) -> None:
        self.reset_time = now
        self.commits: dict[int, deque] = {0: deque(maxlen=self.window), 1: deque(maxlen=self.window)}
        self.totals: dict[int, int] = {0: 0, 1: 0}

    def record(self, instance: int, commit_time: int, latency: float) -> None:
        self.commits[instance].append((commit_time, latency))
        self.totals[instance] += 1

    def count(self, instance: int) -> int:
        return len(self.commits[instance])

    def throughput(self, instance: int, now: int) -> float:
        """Committed batches per simulated ms over the retained window."""
        window = self.commits[instance]
        if not window:
            return 0.0
        span = max(now - window[0][0], 1)
        return len(window) / span

    def mean_latency(self, instance: int) -> float:
        window = self.commits[instance]
        if not window:
            return 0.0
        return sum(lat for _, lat in window) / len(window)

    def evaluate(self, master: int, backup: int, config: ConsensusConfig, now: int) -> int | None:
        """Return the instance to promote, or None to keep the master.

        The ratio comparison runs once both instances have a full window. A
        master that made almost no progress while the backup filled three
        windows is treated as stalled and replaced outright.
        """
        if self.count(backup) < config.window:
            return None
        if self.count(master) < config.window:
            if self.totals[backup] >= 3 * config.window:
                return backup
            return None
        master_tp = self.throughput(master, now)
        backup_tp = self.throughput(backup, now)
        if master_tp == 0 or backup_tp / master_tp > config.delta:
            return backup
        master_lat = self.mean_latency(master)
        backup_lat = self.mean_latency(backup)
        if backup_lat > 0 and master_lat / backup_lat > config.delta:
            return backup
        return None


# --- per-instance bookkeeping ----------------------------------------------


@dataclass
class Slot:
    preprepare_digest: str | None = None
    batches: dict[str, Batch] = field(default_factory=dict)
    prepares: dict[int, str] = field(default_factory=dict)
    commits: dict[int, str] = field(default_factory=dict)
    exec_readies: dict[int, str] = field(default_factory=dict)
    commit_sent: bool = False
    committed: bool = False
    committed_digest: str | None = None
    commit_time: int = 0
    fetch_requested: bool = False


@dataclass
class InstanceState:
    instance_id: int
    primary: int
    next_seq: int = 1
    slots: dict[int, Slot] = field(default_factory=dict)
    proposed_txns: set = field(default_factory=set)
    last_committed: int = 0  # highest contiguous committed seq

    def slot(self, seq: int) -> Slot:
        if seq not in self.slots:
            self.slots[seq] = Slot()
        return self.slots[seq]

    def bump_committed(self) -> None:
        while self.slots.get(self.last_committed + 1, None) and self.slots[
            self.last_committed + 1
        ].committed:
            self.last_committed += 1


# --- the node ---------------------------------------------------------------


class ConsensusNode:
    """One replica: request pool, two ordering instances, execution, monitor."""

    def __init__(
        self,
        node_id: int,
        config: ConsensusConfig,
        network: SimNetwork,
        node_keys: dict[int, bytes],
        signing_private: bytes,
        log: Callable[[int, int, str, dict], None],
        horizon: int = 0,
    ):
        self.id = node_id
        self.config = config
        self.net = network
        self.node_keys = node_keys
        self.signing_private = signing_private
        self.log = log
        self.horizon = horizon
        self.peers = [n for n in sorted(node_keys) if n != node_id]

        self.chain = Chain.new(config.genesis_timestamp)
        self.state = (
            NodeState()
            if config.denied_fields is None
            else NodeState(denied_fields=frozenset(config.denied_fields))
        )
        self.applied: set = set()
        self.applied_at: dict[str, int] = {}
        self.pending: dict[str, LedgerTransaction] = {}
        self.first_seen: dict[str, int] = {}

        self.instances = {0: InstanceState(0, primary=0), 1: InstanceState(1, primary=1)}
        self.master_instance = 0
        self.epoch = 0
        self.exec_cursor = {0: 0, 1: 0}
        self.pending_switch: dict | None = None
        self.votes: dict[int, dict[int, InstanceChangeVote]] = {}
        self.voted_epochs: set = set()
        self.frozen_instance: int | None = None
        self.cert_proposed_epochs: set = set()
        self.exec_blocked_since: int | None = None

        self.monitor = PerfMonitor(config.window)
        self.crashed = False
        self.equivocate_from: int | None = None
        self.batch_timer_armed = {0: False, 1: False}
        self.rejected_submissions = 0

    # -- helpers

    def _broadcast(self, message: Any) -> None:
        self.net.broadcast(self.id, self.peers, message)

    def _master(self) -> InstanceState:
        return self.instances[self.master_instance]

    def _backup_id(self) -> int:
        return 1 - self.master_instance

    def is_equivocating(self) -> bool:
        return self.equivocate_from is not None and self.net.now >= self.equivocate_from

    # -- client requests

    def on_submit(self, txn: LedgerTransaction) -> bool:
        """Client submission: signature-gate, pool, gossip. Returns the ack."""
        if self.crashed:
            return False
        if not txn.id_recomputes() or not verify_txn_signature(self.state, txn):
            self.rejected_submissions += 1
            self.log(self.net.now, self.id, "submit_rejected", {"txn_id": txn.txn_id.hex})
            return False
        self._admit(txn)
        return True

    def on_request(self, src: int, request: Request) -> None:
        if self.crashed:
            return
        txn = request.txn
        if txn.txn_id.hex in self.first_seen:
            return
        if not txn.id_recomputes() or not verify_txn_signature(self.state, txn):
            return
        self._admit(txn)

    def _admit(self, txn: LedgerTransaction) -> None:
        txn_id = txn.txn_id.hex
        if txn_id in self.first_seen:
            return
        self.first_seen[txn_id] = self.net.now
        if txn_id in self.applied:
            return
        self.pending[txn_id] = txn
        self._broadcast(Request(txn))
        for instance in self.instances.values():
            if instance.primary != self.id:
                continue
            unproposed = sum(
                1
                for tid in self.pending
                if tid not in instance.proposed_txns and tid not in self.applied
            )
            if unproposed >= self.config.batch_max:
                self.propose(instance.instance_id)
            elif not self.batch_timer_armed[instance.instance_id]:
                self.batch_timer_armed[instance.instance_id] = True
                self.net.timer(self.id, self.config.batch_timeout, ("batch", instance.instance_id))

    # -- proposing

    def on_batch_timer(self, instance_id: int) -> None:
        self.batch_timer_armed[instance_id] = False
        if not self.crashed:
            self.propose(instance_id)

    def propose(self, instance_id: int) -> None:
        instance = self.instances[instance_id]
        if instance.primary != self.id:
            return
        candidates = [
            txn
            for tid, txn in self.pending.items()
            if tid not in instance.proposed_txns and tid not in self.applied
        ][: self.config.batch_max]
        if not candidates:
            return
        seq = instance.next_seq
        instance.next_seq += 1
        for txn in candidates:
            instance.proposed_txns.add(txn.txn_id.hex)
        batch = Batch(instance_id, seq, self.net.now, tuple(candidates))
        if self.is_equivocating() and len(self.peers) >= 2:
            # same seq, conflicting content, to disjoint halves of the peers
            twin = replace(batch, timestamp=batch.timestamp + 1)
            half = len(self.peers) // 2
            for dst in self.peers[:half]:
                self.net.send(self.id, dst, PrePrepare(instance_id, seq, batch))
            for dst in self.peers[half:]:
                self.net.send(self.id, dst, PrePrepare(instance_id, seq, twin))
            self.log(self.net.now, self.id, "equivocation", {"instance": instance_id, "seq": seq})
        else:
            self._broadcast(PrePrepare(instance_id, seq, batch))
        self._accept_preprepare(instance_id, seq, batch)
        leftovers = any(
            tid not in instance.proposed_txns and tid not in self.applied for tid in self.pending
        )
        if leftovers and not self.batch_timer_armed[instance_id]:
            self.batch_timer_armed[instance_id] = True
            self.net.timer(self.id, self.config.batch_timeout, ("batch", instance_id))

    # -- three-phase handlers

    def on_preprepare(self, src: int, msg: PrePrepare) -> None:
        if self.crashed:
            return
        instance = self.instances.get(msg.instance)
        if instance is None or src != instance.primary or msg.seq < 1:
            return
        if msg.batch.instance != msg.instance or msg.batch.seq != msg.seq:
            return
        if msg.batch.control is not None and not self._control_valid(msg.batch):
            return
        self._accept_preprepare(msg.instance, msg.seq, msg.batch)

    def _accept_preprepare(self, instance_id: int, seq: int, batch: Batch) -> None:
        slot = self.instances[instance_id].slot(seq)
        digest = batch.digest_hex()
        slot.batches[digest] = batch
        if slot.preprepare_digest is None:
            slot.preprepare_digest = digest
            slot.prepares[self.id] = digest
            self._broadcast(Prepare(instance_id, seq, digest))
            self._check_prepared(instance_id, seq)

    def on_prepare(self, src: int, msg: Prepare) -> None:
        if self.crashed:
            return
        slot = self.instances[msg.instance].slot(msg.seq)
        slot.prepares.setdefault(src, msg.digest)
        self._check_prepared(msg.instance, msg.seq)

    def _check_prepared(self, instance_id: int, seq: int) -> None:
        slot = self.instances[instance_id].slot(seq)
        if slot.commit_sent or slot.preprepare_digest is None:
            return
        digest = slot.preprepare_digest
        matching = sum(1 for d in slot.prepares.values() if d == digest)
        if matching >= self.config.quorum:
            slot.commit_sent = True
            slot.commits[self.id] = digest
            self._broadcast(Commit(instance_id, seq, digest))
            self._check_committed(instance_id, seq)

    def on_commit(self, src: int, msg: Commit) -> None:
        if self.crashed:
            return
        slot = self.instances[msg.instance].slot(msg.seq)
        slot.commits.setdefault(src, msg.digest)
        self._check_committed(msg.instance, msg.seq)

    def _check_committed(self, instance_id: int, seq: int) -> None:
        slot = self.instances[instance_id].slot(seq)
        if slot.committed:
            return
        counts: dict[str, int] = {}
        for digest in slot.commits.values():
            counts[digest] = counts.get(digest, 0) + 1
        for digest, count in counts.items():
            if count < self.config.quorum:
                continue
            if digest in slot.batches:
                self._commit(instance_id, seq, digest)
            elif not slot.fetch_requested:
                # commit certificate without the body: fetch it from a committer
                slot.fetch_requested = True
                holders = sorted(n for n, d in slot.commits.items() if d == digest and n != self.id)
                if holders:
                    self.net.send(self.id, holders[0], FetchBatch(instance_id, seq, digest))
            return

    def on_fetch(self, src: int, msg: FetchBatch) -> None:
        if self.crashed:
            return
        slot = self.instances[msg.instance].slot(msg.seq)
        batch = slot.batches.get(msg.digest)
        if batch is not None:
            self.net.send(self.id, src, BatchReply(msg.instance, msg.seq, batch))

    def on_batch_reply(self, src: int, msg: BatchReply) -> None:
        if self.crashed:
            return
        # keyed by the batch's actual digest: a wrong body can never satisfy
        # the commit certificate it was fetched for
        slot = self.instances[msg.instance].slot(msg.seq)
        slot.batches[msg.batch.digest_hex()] = msg.batch
        self._check_committed(msg.instance, msg.seq)

    def _commit(self, instance_id: int, seq: int, digest: str) -> None:
        instance = self.instances[instance_id]
        slot = instance.slot(seq)
        slot.committed = True
        slot.committed_digest = digest
        slot.commit_time = self.net.now
        instance.bump_committed()
        batch = slot.batches[digest]
        if batch.control is None:
            latency = self._batch_latency(batch)
            self.monitor.record(instance_id, self.net.now, latency)
        self.log(
            self.net.now,
            self.id,
            "commit",
            {"instance": instance_id, "seq": seq, "txns": len(batch.txns)},
        )
        if self.frozen_instance != instance_id:
            slot.exec_readies[self.id] = digest
            self._broadcast(ExecReady(instance_id, seq, digest))
        if batch.control is not None:
            self._apply_switch_cert(batch.control)
        self.try_execute()

    def _batch_latency(self, batch: Batch) -> float:
        times = [
            self.net.now - self.first_seen.get(txn.txn_id.hex, batch.timestamp)
            for txn in batch.txns
        ]
        return sum(times) / len(times) if times else float(self.net.now - batch.timestamp)

    def on_exec_ready(self, src: int, msg: ExecReady) -> None:
        if self.crashed:
            return
        slot = self.instances[msg.instance].slot(msg.seq)
        slot.exec_readies.setdefault(src, msg.digest)
        self.try_execute()

    # -- instance change

    def _last_master_committed(self) -> int:
        return self._master().last_committed

    def on_monitor_tick(self) -> None:
        if self.crashed:
            return
        if not self.pending_switch:
            decision = self.monitor.evaluate(
                self.master_instance, self._backup_id(), self.config, self.net.now
            )
            if decision is None and (self._execution_stalled() or self._requests_stalled()):
                decision = self._backup_id()
            if decision is not None:
                self._cast_vote(decision)
        self._maybe_propose_cert()
        if self.net.now + self.config.monitor_interval <= self.horizon:
            self.net.timer(self.id, self.config.monitor_interval, ("monitor", None))

    def _execution_stalled(self) -> bool:
        """Committed master batches are waiting on execution authorization for
        longer than the stall bound — vote so an instance change can unstick."""
        master = self._master()
        if master.last_committed <= self.exec_cursor[self.master_instance]:
            self.exec_blocked_since = None
            return False
        if self.exec_blocked_since is None:
            self.exec_blocked_since = self.net.now
            return False
        return self.net.now - self.exec_blocked_since >= self.config.stall_vote_after

    def _requests_stalled(self) -> bool:
        """A valid admitted request has gone unserved past the stall bound:
        the master instance is not making progress for clients (e.g. its
        primary equivocates or crashed), so push for an instance change."""
        for txn_id in self.pending:
            if txn_id in self.applied:
                continue
            first = self.first_seen.get(txn_id, self.net.now)
            return self.net.now - first >= self.config.stall_vote_after
        return False

    def _cast_vote(self, new_master: int) -> None:
        epoch = self.epoch + 1
        if epoch in self.voted_epochs:
            return
        self.voted_epochs.add(epoch)
        self.frozen_instance = self.master_instance
        vote = InstanceChangeVote.create(
            epoch, new_master, self._last_master_committed(), self.id, self.signing_private
        )
        self.votes.setdefault(epoch, {})[self.id] = vote
        self._broadcast(vote)
        self.log(
            self.net.now,
            self.id,
            "instance_change_vote",
            {"epoch": epoch, "new_master": new_master, "last_committed": vote.last_committed},
        )
        self._maybe_propose_cert()

    def on_vote(self, src: int, vote: InstanceChangeVote) -> None:
        if self.crashed:
            return
        if vote.voter != src or not vote.verify_with(self.node_keys.get(vote.voter, b"")):
            return
        if vote.epoch <= self.epoch:
            return
        self.votes.setdefault(vote.epoch, {})[vote.voter] = vote
        # join rule: f+1 distinct voters means at least one honest node saw
        # degradation; join so the change can reach quorum
        if (
            len(self.votes[vote.epoch]) >= self.config.f + 1
            and vote.epoch == self.epoch + 1
            and vote.epoch not in self.voted_epochs
        ):
            self._cast_vote(vote.new_master)
        self._maybe_propose_cert()

    def _maybe_propose_cert(self) -> None:
        """The proposed new master's primary turns a vote quorum into a control
        batch ordered through its own instance."""
        epoch = self.epoch + 1
        votes = self.votes.get(epoch, {})
        if len(votes) < self.config.quorum or epoch in self.cert_proposed_epochs:
            return
        new_master = self._backup_id()
        instance = self.instances[new_master]
        if instance.primary != self.id or self.crashed:
            return
        chosen = sorted(votes)[: self.config.quorum]
        cert_votes = [votes[v] for v in chosen]
        cutover = max(v.last_committed for v in cert_votes)
        self.cert_proposed_epochs.add(epoch)
        control = {
            "epoch": epoch,
            "new_master": new_master,
            "old_master": self.master_instance,
            "cutover": cutover,
            "votes": [v.to_dict() for v in cert_votes],
        }
        seq = instance.next_seq
        instance.next_seq += 1
        batch = Batch(new_master, seq, self.net.now, (), control=control)
        self._broadcast(PrePrepare(new_master, seq, batch))
        self._accept_preprepare(new_master, seq, batch)

    def _control_valid(self, batch: Batch) -> bool:
        control = batch.control
        try:
            if control["epoch"] != self.epoch + 1:
                return False
            votes = [InstanceChangeVote.from_dict(v) for v in control["votes"]]
            if len({v.voter for v in votes}) < self.config.quorum:
                return False
            for vote in votes:
                if vote.epoch != control["epoch"] or vote.new_master != control["new_master"]:
                    return False
                if not vote.verify_with(self.node_keys.get(vote.voter, b"")):
                    return False
            return control["cutover"] == max(v.last_committed for v in votes)
        except (KeyError, TypeError, ValueError):
            return False

    def _apply_switch_cert(self, control: dict) -> None:
        if control["epoch"] != self.epoch + 1:
            return
        self.pending_switch = {
            "epoch": control["epoch"],
            "new_master": control["new_master"],
            "old_master": control["old_master"],
            "cutover": control["cutover"],
        }
        self.log(
            self.net.now,
            self.id,
            "instance_change_cert",
            {"epoch": control["epoch"], "cutover": control["cutover"]},
        )

    # -- execution

    def _exec_ready_quorum(self, slot: Slot) -> bool:
        digest = slot.committed_digest
        return sum(1 for d in slot.exec_readies.values() if d == digest) >= self.config.quorum

    def try_execute(self) -> None:
        progress = True
        while progress:
            progress = False
            if self.pending_switch is not None:
                old = self.pending_switch["old_master"]
                cutover = self.pending_switch["cutover"]
                while self.exec_cursor[old] < cutover:
                    slot = self.instances[old].slots.get(self.exec_cursor[old] + 1)
                    if slot is None or not slot.committed:
                        return  # wait for delayed commits of the demoted master
                    self._execute_next(old)
                self.epoch = self.pending_switch["epoch"]
                self.master_instance = self.pending_switch["new_master"]
                self.pending_switch = None
                self.frozen_instance = None
                self.exec_blocked_since = None
                self.monitor.reset(self.net.now)
                self.log(
                    self.net.now,
                    self.id,
                    "instance_change",
                    {"epoch": self.epoch, "master_instance": self.master_instance},
                )
                progress = True
                continue
            master_id = self.master_instance
            slot = self.instances[master_id].slots.get(self.exec_cursor[master_id] + 1)
            if slot is not None and slot.committed and self._exec_ready_quorum(slot):
                self._execute_next(master_id)
                progress = True

    def _execute_next(self, instance_id: int) -> None:
        seq = self.exec_cursor[instance_id] + 1
        slot = self.instances[instance_id].slots[seq]
        self.exec_cursor[instance_id] = seq
        batch = slot.batches[slot.committed_digest]
        if batch.control is not None:
            return
        accepted = []
        for txn in batch.txns:
            txn_id = txn.txn_id.hex
            if txn_id in self.applied:
                continue
            self.applied.add(txn_id)
            self.applied_at[txn_id] = self.net.now
            self.pending.pop(txn_id, None)
            new_state, rejection = apply(self.state, txn)
            if rejection is None:
                self.state = new_state
                accepted.append(txn)
            else:
                self.log(
                    self.net.now,
                    self.id,
                    "txn_rejected",
                    {"txn_id": txn_id, "reason": rejection.value},
                )
        if accepted:
            block = build_block(self.chain.head, accepted, batch.timestamp)
            self.chain = self.chain.append(block)
            self.log(
                self.net.now,
                self.id,
                "ledger_append",
                {
                    "height": block.height,
                    "instance": instance_id,
                    "seq": seq,
                    "epoch": self.epoch,
                    "txns": len(accepted),
                },
            )

    # -- dispatch

    def on_timer(self, payload: tuple) -> None:
        kind, data = payload
        if kind == "batch":
            self.on_batch_timer(data)
        elif kind == "monitor":
            self.on_monitor_tick()

    def on_message(self, src: int, message: Any) -> None:
        instance = getattr(message, "instance", None)
        if instance is not None and instance not in self.instances:
            return
        if isinstance(message, Request):
            self.on_request(src, message)
        elif isinstance(message, PrePrepare):
            self.on_preprepare(src, message)
        elif isinstance(message, Prepare):
            self.on_prepare(src, message)
        elif isinstance(message, Commit):
            self.on_commit(src, message)
        elif isinstance(message, ExecReady):
            self.on_exec_ready(src, message)
        elif isinstance(message, InstanceChangeVote):
            self.on_vote(src, message)
        elif isinstance(message, FetchBatch):
            self.on_fetch(src, message)
        elif isinstance(message, BatchReply):
            self.on_batch_reply(src, message)
