"""Simulation harness: wires nodes to the network, injects workload and
faults, runs the event loop to completion, and emits a deterministic report.

A run is a pure function of (consensus config, network config, fault plan,
workload, seed): identical inputs give byte-identical reports and event logs.
All report values are integers or strings so the canonical-JSON rendering is
exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .canonical import canonical_json, canonicalize
from .consensus import ConsensusConfig, ConsensusNode, FaultPlan
from .crypto import generate_encryption_keypair, generate_signing_keypair, sha256
from .ledger import LedgerTransaction, TxnType
from .simnet import CONTROL, DELIVER, SUBMIT, TIMER, LinkProfile, NetworkConfig, Partition, SimNetwork
from .state import DidDocument, derive_did, did_reg_payload

MAX_EVENTS = 5_000_000


@dataclass(frozen=True)
class WorkloadItem:
    time: int
    node: int
    txn: LedgerTransaction


class Simulation:
    """One in-process network of 3f+1 consensus nodes over simulated time."""

    def __init__(
        self,
        config: ConsensusConfig,
        net_config: NetworkConfig | None = None,
        faults: FaultPlan | None = None,
        seed: int = 0,
        horizon: int = 0,
    ):
        config.validate()
        self.config = config
        self.seed = seed
        self.horizon = horizon
        self.faults = faults or FaultPlan()
        net_config = net_config or NetworkConfig(n=config.n)
        if net_config.n != config.n:
            raise ValueError(f"network has {net_config.n} nodes, consensus needs {config.n}")
        self.network = SimNetwork(net_config, seed)
        self.events: list[dict] = []
        self.submitted = 0
        self.accepted = 0

        node_keys: dict[int, bytes] = {}
        privates: dict[int, bytes] = {}
        for i in range(config.n):
            pair = generate_signing_keypair(sha256(f"consensus-node:{seed}:{i}".encode()).value)
            node_keys[i] = pair.public
            privates[i] = pair.private
        self.nodes = [
            ConsensusNode(i, config, self.network, node_keys, privates[i], self._log, horizon)
            for i in range(config.n)
        ]
        for node_id, at in sorted(self.faults.crash.items()):
            self.network.inject(at, CONTROL, node_id, "crash")
        for node_id, at in sorted(self.faults.equivocate.items()):
            self.nodes[node_id].equivocate_from = at
        if horizon > 0:
            for node in self.nodes:
                self.network.timer(node.id, config.monitor_interval, ("monitor", None))

    def _log(self, time: int, node: int, event_type: str, detail: dict) -> None:
        self.events.append({"time": time, "node": node, "event_type": event_type, "detail": detail})

    @property
    def now(self) -> int:
        return self.network.now

    def submit_at(self, at: int, node: int, txn: LedgerTransaction) -> None:
        self.network.inject(at, SUBMIT, node, txn)

    def run(self) -> None:
        """Drain the event queue. Recurring timers stop at the horizon, so
        this terminates once all in-flight work settles."""
        processed = 0
        while True:
            event = self.network.pop()
            if event is None:
                return
            processed += 1
            if processed > MAX_EVENTS:
                raise RuntimeError("event budget exceeded; simulation is not settling")
            node = self.nodes[event.node]
            if event.kind == DELIVER:
                node.on_message(event.src, event.payload)
            elif event.kind == TIMER:
                node.on_timer(event.payload)
            elif event.kind == SUBMIT:
                self.submitted += 1
                if node.on_submit(event.payload):
                    self.accepted += 1
            elif event.kind == CONTROL and event.payload == "crash":
                node.crashed = True
                self._log(self.now, event.node, "crash", {})

    def settle(self, txn: LedgerTransaction, node: int = 0) -> bool:
        """Scenario helper: submit now, run to quiescence, report whether the
        transaction was applied on every honest node."""
        self.submit_at(self.now, node, txn)
        self.run()
        return all(
            txn.txn_id.hex in n.applied for n in self.nodes if self.is_honest(n.id)
        )

    def is_honest(self, node_id: int) -> bool:
        return node_id not in self.faults.crash and node_id not in self.faults.equivocate

    def honest_nodes(self) -> list[ConsensusNode]:
        return [n for n in self.nodes if self.is_honest(n.id)]

    def safety_violations(self) -> int:
        """Count (instance, seq) pairs where two honest nodes committed
        different batch digests — must always be zero."""
        violations = 0
        for instance_id in (0, 1):
            seqs: set[int] = set()
            for node in self.honest_nodes():
                seqs.update(
                    s
                    for s, slot in node.instances[instance_id].slots.items()
                    if slot.committed
                )
            for seq in sorted(seqs):
                digests = {
                    node.instances[instance_id].slots[seq].committed_digest
                    for node in self.honest_nodes()
                    if seq in node.instances[instance_id].slots
                    and node.instances[instance_id].slots[seq].committed
                }
                if len(digests) > 1:
                    violations += 1
        return violations

    def report(self) -> "SimReport":
        per_node = []
        for node in self.nodes:
            per_node.append(
                {
                    "node": node.id,
                    "honest": self.is_honest(node.id),
                    "crashed": node.crashed,
                    "chain_digest": node.chain.digest().hex,
                    "chain_height": node.chain.height,
                    "ledger_txns": node.chain.txn_count(),
                    "committed_batches": {
                        "0": node.instances[0].last_committed,
                        "1": node.instances[1].last_committed,
                    },
                    "epoch": node.epoch,
                    "master_instance": node.master_instance,
                    "rejected_submissions": node.rejected_submissions,
                }
            )
        honest_digests = sorted(
            {entry["chain_digest"] for entry in per_node if entry["honest"]}
        )
        instance_changes = [e for e in self.events if e["event_type"] == "instance_change"]
        commit_events = [e for e in self.events if e["event_type"] == "commit"]
        return SimReport(
            seed=self.seed,
            f=self.config.f,
            n=self.config.n,
            horizon=self.horizon,
            end_time=self.now,
            submitted=self.submitted,
            accepted=self.accepted,
            messages_sent=self.network.sent,
            messages_dropped=self.network.dropped,
            per_node=per_node,
            honest_digests=honest_digests,
            safety_violations=self.safety_violations(),
            instance_change_count=len(instance_changes),
            instance_changes=[
                {"time": e["time"], "node": e["node"], **e["detail"]} for e in instance_changes
            ],
            commit_count=len(commit_events),
        )

    def write_events(self, path: str | Path) -> None:
        lines = [canonicalize(event).decode("utf-8") for event in self.events]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


@dataclass(frozen=True)
class SimReport:
    seed: int
    f: int
    n: int
    horizon: int
    end_time: int
    submitted: int
    accepted: int
    messages_sent: int
    messages_dropped: int
    per_node: list
    honest_digests: list
    safety_violations: int
    instance_change_count: int
    instance_changes: list
    commit_count: int

    @property
    def honest_chains_agree(self) -> bool:
        return len(self.honest_digests) <= 1

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "f": self.f,
            "n": self.n,
            "horizon": self.horizon,
            "end_time": self.end_time,
            "submitted": self.submitted,
            "accepted": self.accepted,
            "messages_sent": self.messages_sent,
            "messages_dropped": self.messages_dropped,
            "per_node": self.per_node,
            "honest_digests": self.honest_digests,
            "honest_chains_agree": self.honest_chains_agree,
            "safety_violations": self.safety_violations,
            "instance_change_count": self.instance_change_count,
            "instance_changes": self.instance_changes,
            "commit_count": self.commit_count,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def synthetic_did_workload(
    count: int, seed: int, start: int = 10, interval: int = 40, node: int = 0
) -> list[WorkloadItem]:
    """Deterministic workload of self-certifying DID registrations."""
    items = []
    for i in range(count):
        signing = generate_signing_keypair(sha256(f"workload:{seed}:{i}:sign".encode()).value)
        agreement = generate_encryption_keypair(sha256(f"workload:{seed}:{i}:agree".encode()).value)
        did = derive_did(signing.public)
        document = DidDocument(
            verification_key=signing.public,
            agreement_key=agreement.public,
            endpoint=f"sim://workload/{i}",
        )
        at = start + i * interval
        txn = LedgerTransaction.create(
            TxnType.DID_REG,
            did_reg_payload(did, document),
            author_did=did,
            signing_private=signing.private,
            timestamp=at,
        )
        items.append(WorkloadItem(time=at, node=node, txn=txn))
    return items


def run_simulation(
    config: ConsensusConfig,
    net_config: NetworkConfig | None,
    faults: FaultPlan | None,
    workload: Iterable[WorkloadItem],
    horizon: int,
    seed: int,
) -> tuple[SimReport, Simulation]:
    """Build, feed, and drain a simulation; returns the report and the
    simulation itself (for chain/state/event inspection)."""
    sim = Simulation(config, net_config, faults, seed=seed, horizon=horizon)
    for item in workload:
        sim.submit_at(item.time, item.node, item.txn)
    sim.run()
    return sim.report(), sim


def parse_config(raw: dict) -> tuple[ConsensusConfig, NetworkConfig, FaultPlan]:
    """Decode the JSON configuration format used by the command line."""
    consensus_raw = raw.get("consensus", {})
    denied = raw.get("privacy", {}).get("denied_fields")
    config = ConsensusConfig(
        f=consensus_raw.get("f", 1),
        window=consensus_raw.get("window", 10),
        delta=consensus_raw.get("delta", 2.0),
        batch_max=consensus_raw.get("batch_max", 5),
        batch_timeout=consensus_raw.get("batch_timeout_ms", 50),
        monitor_interval=consensus_raw.get("monitor_interval_ms", 200),
        stall_vote_after=consensus_raw.get("stall_vote_after_ms", 2000),
        genesis_timestamp=consensus_raw.get("genesis_timestamp", 0),
        denied_fields=tuple(denied) if denied is not None else None,
    )
    config.validate()
    declared_n = raw.get("n", consensus_raw.get("n"))
    if declared_n is not None and declared_n != config.n:
        raise ValueError(f"n={declared_n} is not 3f+1 for f={config.f} (need {config.n})")
    network_raw = raw.get("network", {})
    default_link = LinkProfile(
        min_latency=network_raw.get("min_latency_ms", 5),
        max_latency=network_raw.get("max_latency_ms", 15),
        drop_prob=network_raw.get("drop_prob", 0.0),
    )
    partitions = [
        Partition(
            start=p["start"],
            end=p["end"],
            group_a=frozenset(p["group_a"]),
            group_b=frozenset(p["group_b"]),
        )
        for p in network_raw.get("partitions", [])
    ]
    net_config = NetworkConfig(
        n=config.n,
        default_link=default_link,
        slow_nodes={int(k): float(v) for k, v in network_raw.get("slow_nodes", {}).items()},
        partitions=partitions,
    )
    faults_raw = raw.get("faults", {})
    faults = FaultPlan(
        crash={int(k): int(v) for k, v in faults_raw.get("crash", {}).items()},
        equivocate={int(k): int(v) for k, v in faults_raw.get("equivocate", {}).items()},
    )
    return config, net_config, faults
