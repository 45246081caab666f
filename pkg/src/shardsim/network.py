"""Deterministic discrete-event message fabric.

Three channel classes connect the simulated nodes:

* ``INTRA``   -- members of the same committee, delivery within ``delta`` ticks;
* ``KEYLINK`` -- leaders/partial-set members among themselves and to every
  referee member, delivery within ``gamma`` ticks;
* ``PARTIAL`` -- partially-synchronous links (referee to/from ordinary nodes,
  e.g. block release and work-ticket registration), delivery within a finite
  cap so runs terminate.

Any other node pair has no protocol-bearing link and sending raises
``NoChannelError``.  Delivery delays are drawn from a seeded generator; an
adversary hook may re-schedule within the class bound and may drop messages
sent by corrupted nodes.  For a fixed seed and hook the full event trace is
reproducible byte for byte.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from random import Random
from typing import Callable, Iterable, Optional


class Role(Enum):
    COMMON = "common"
    LEADER = "leader"
    PARTIAL = "partial"
    REFEREE = "referee"

    @property
    def is_key(self) -> bool:
        return self in (Role.LEADER, Role.PARTIAL)


class ChannelClass(Enum):
    INTRA = "intra"
    KEYLINK = "keylink"
    PARTIAL = "partialsync"


class NetworkError(Exception):
    pass


class UnknownNodeError(NetworkError):
    pass


class NoChannelError(NetworkError):
    pass


@dataclass(order=True)
class Envelope:
    deliver_at: int
    seq: int
    src: int = field(compare=False)
    dst: int = field(compare=False)
    payload: object = field(compare=False)
    sent_at: int = field(compare=False)
    channel: ChannelClass = field(compare=False)


class Topology:
    """Per-round connection map derived from role assignments.

    ``committee_of`` maps a node to its committee id (``None`` for referee
    members).  Referee members form a committee of their own, so referee to
    referee traffic is intra-committee synchronous.
    """

    def __init__(self, roles: dict[int, Role], committee_of: dict[int, Optional[int]]):
        self.roles = roles
        self.committee_of = committee_of

    def channel(self, src: int, dst: int) -> Optional[ChannelClass]:
        ra, rb = self.roles[src], self.roles[dst]
        ca, cb = self.committee_of[src], self.committee_of[dst]
        if ra is Role.REFEREE and rb is Role.REFEREE:
            return ChannelClass.INTRA
        if ca is not None and ca == cb:
            return ChannelClass.INTRA
        if ra.is_key and rb.is_key:
            return ChannelClass.KEYLINK
        if (ra.is_key and rb is Role.REFEREE) or (ra is Role.REFEREE and rb.is_key):
            return ChannelClass.KEYLINK
        if ra is Role.REFEREE or rb is Role.REFEREE:
            return ChannelClass.PARTIAL
        return None


# Hook signature: (envelope, bound, default_delay) -> delay or None to drop.
SchedulerHook = Callable[[Envelope, int, int], Optional[int]]


class Network:
    def __init__(
        self,
        delta: int,
        gamma: int,
        seed: int = 0,
        partial_cap: Optional[int] = None,
        scheduler_hook: Optional[SchedulerHook] = None,
        corrupted: Optional[Callable[[int], bool]] = None,
        on_send: Optional[Callable[[Envelope], None]] = None,
        trace: Optional[Callable[[Envelope], None]] = None,
    ):
        if not (1 <= delta <= gamma):
            raise ValueError("need 1 <= delta <= gamma")
        self.delta = delta
        self.gamma = gamma
        self.partial_cap = partial_cap if partial_cap is not None else 10 * gamma
        self.now = 0
        self._rng = Random(("net", seed).__repr__())
        self._queue: list[Envelope] = []
        self._seq = 0
        self.topology: Optional[Topology] = None
        self.scheduler_hook = scheduler_hook
        self.corrupted = corrupted or (lambda node: False)
        self.on_send = on_send
        self.trace = trace
        self.dropped = 0

    def set_topology(self, topology: Topology) -> None:
        self.topology = topology

    def _bound(self, channel: ChannelClass) -> int:
        if channel is ChannelClass.INTRA:
            return self.delta
        if channel is ChannelClass.KEYLINK:
            return self.gamma
        return self.partial_cap

    def send(self, src: int, dst: int, payload: object) -> Optional[Envelope]:
        topo = self.topology
        if topo is None or src not in topo.roles or dst not in topo.roles:
            raise UnknownNodeError(f"unknown endpoint {src}->{dst}")
        channel = topo.channel(src, dst)
        if channel is None:
            raise NoChannelError(f"no link {src}->{dst}")
        bound = self._bound(channel)
        delay = self._rng.randint(1, bound)
        env = Envelope(
            deliver_at=self.now + delay,
            seq=self._seq,
            src=src,
            dst=dst,
            payload=payload,
            sent_at=self.now,
            channel=channel,
        )
        self._seq += 1
        if self.scheduler_hook is not None:
            chosen = self.scheduler_hook(env, bound, delay)
            if chosen is None:
                if not self.corrupted(src):
                    raise NetworkError("scheduler may drop only corrupted senders")
                self.dropped += 1
                if self.on_send:
                    self.on_send(env)
                return None
            if not (1 <= chosen <= bound):
                raise NetworkError("scheduler delay outside channel bound")
            env.deliver_at = self.now + chosen
        if self.on_send:
            self.on_send(env)
        heapq.heappush(self._queue, env)
        return env

    def broadcast(self, src: int, dsts: Iterable[int], payload: object) -> int:
        count = 0
        for dst in dsts:
            if dst == src:
                continue
            self.send(src, dst, payload)
            count += 1
        return count

    def next_time(self) -> Optional[int]:
        return self._queue[0].deliver_at if self._queue else None

    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> list[Envelope]:
        """Advance to the next delivery tick; return envelopes due, in seq order."""
        if not self._queue:
            return []
        t = self._queue[0].deliver_at
        assert t >= self.now, "time went backwards"
        self.now = t
        out = []
        while self._queue and self._queue[0].deliver_at == t:
            env = heapq.heappop(self._queue)
            if self.trace:
                self.trace(env)
            out.append(env)
        return out

    def deliver_until(self, t: int) -> list[Envelope]:
        """Deliver every envelope due at or before ``t``; advance clock to ``t``."""
        out = []
        while self._queue and self._queue[0].deliver_at <= t:
            out.extend(self.step())
        self.now = max(self.now, t)
        return out
