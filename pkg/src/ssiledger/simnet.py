"""Deterministic in-process network simulation.

Simulated time is integer milliseconds. Every message delivery, timer, and
injected event sits in one priority queue ordered by (time, sequence counter),
and all latency/drop sampling comes from a single seeded RNG, so a run is a
pure function of (seed, configuration, injected events).

Per-link latency profiles, drop probabilities, outbound slow-down factors and
partition windows are the fault-injection surface the consensus tests drive.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Iterable

DELIVER = "deliver"
TIMER = "timer"
SUBMIT = "submit"
CONTROL = "control"


@dataclass(frozen=True)
class LinkProfile:
    """Latency band (inclusive, ms) and drop probability for one link."""

    min_latency: int = 5
    max_latency: int = 15
    drop_prob: float = 0.0

    def scaled(self, factor: float) -> "LinkProfile":
        return LinkProfile(
            min_latency=int(self.min_latency * factor),
            max_latency=int(self.max_latency * factor),
            drop_prob=self.drop_prob,
        )


@dataclass(frozen=True)
class Partition:
    """During [start, end) messages between the two groups are dropped."""

    start: int
    end: int
    group_a: frozenset[int]
    group_b: frozenset[int]

    def blocks(self, now: int, src: int, dst: int) -> bool:
        if not self.start <= now < self.end:
            return False
        return (src in self.group_a and dst in self.group_b) or (
            src in self.group_b and dst in self.group_a
        )


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: str
    node: int
    payload: Any = None
    src: int = -1


@dataclass
class NetworkConfig:
    n: int = 4
    default_link: LinkProfile = field(default_factory=LinkProfile)
    link_overrides: dict[tuple[int, int], LinkProfile] = field(default_factory=dict)
    slow_nodes: dict[int, float] = field(default_factory=dict)  # node -> outbound factor
    partitions: list[Partition] = field(default_factory=list)

    def link(self, src: int, dst: int) -> LinkProfile:
        profile = self.link_overrides.get((src, dst), self.default_link)
        factor = self.slow_nodes.get(src)
        return profile.scaled(factor) if factor else profile


class SimNetwork:
    """Event queue plus link model. The network owns simulated time."""

    def __init__(self, config: NetworkConfig, seed: int):
        self.config = config
        self.rng = random.Random(seed)
        self.now = 0
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._counter = 0
        self.sent = 0
        self.delivered = 0
        self.dropped = 0

    def _push(self, event: SimEvent) -> None:
        self._counter += 1
        heapq.heappush(self._queue, (event.time, self._counter, event))

    def send(self, src: int, dst: int, message: Any) -> None:
        """Queue a message for delivery, subject to drops and partitions."""
        self.sent += 1
        for partition in self.config.partitions:
            if partition.blocks(self.now, src, dst):
                self.dropped += 1
                return
        link = self.config.link(src, dst)
        if link.drop_prob > 0 and self.rng.random() < link.drop_prob:
            self.dropped += 1
            return
        latency = self.rng.randint(link.min_latency, max(link.min_latency, link.max_latency))
        self._push(SimEvent(self.now + latency, DELIVER, dst, message, src=src))

    def broadcast(self, src: int, peers: Iterable[int], message: Any) -> None:
        for dst in peers:
            self.send(src, dst, message)

    def timer(self, node: int, delay: int, payload: Any) -> None:
        self._push(SimEvent(self.now + delay, TIMER, node, payload))

    def inject(self, at: int, kind: str, node: int, payload: Any) -> None:
        """Schedule an external event (client submission, fault activation)."""
        self._push(SimEvent(max(at, self.now), kind, node, payload))

    def pop(self) -> SimEvent | None:
        if not self._queue:
            return None
        time, _, event = heapq.heappop(self._queue)
        self.now = time
        return event

    def __len__(self) -> int:
        return len(self._queue)
