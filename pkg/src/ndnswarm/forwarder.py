"""Per-node forwarding plane: faces, FIB, PIT, content store.

The forwarder owns no clocks and no wires. The hosting node hands it a
send callback (face_id, packet), a timer callback for PIT expiry, and the
current time on every entry point, which keeps the pipeline directly
testable without a network underneath.
"""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field, replace

from .packets import Data, Interest, Nack, NackReason, Name
from .strategy import FailureKind, StrategyConfig, StrategyState


class FaceKind(enum.Enum):
    LINK = "link"
    APP = "app"


@dataclass(frozen=True)
class Face:
    """Attachment point: either one end of a link or a local application."""

    face_id: int
    kind: FaceKind
    # link faces: the link id and the node on the other end;
    # app faces: the application id.
    link_id: str = ""
    remote: str = ""


@dataclass
class NextHop:
    face_id: int
    cost_ms: float


class FibEntry:
    """Nexthops for one prefix, kept sorted by (cost, face_id)."""

    def __init__(self, prefix: Name):
        self.prefix = prefix
        self.nexthops: list[NextHop] = []

    def upsert(self, face_id: int, cost_ms: float):
        for nh in self.nexthops:
            if nh.face_id == face_id:
                nh.cost_ms = cost_ms
                break
        else:
            self.nexthops.append(NextHop(face_id, cost_ms))
        self.nexthops.sort(key=lambda nh: (nh.cost_ms, nh.face_id))

    def pairs(self):
        return [(nh.face_id, nh.cost_ms) for nh in self.nexthops]


@dataclass
class PitEntry:
    name: Name
    fib_prefix: Name
    interest: Interest  # as forwarded upstream (first arrival wins)
    expiry_ns: int
    serial: int
    downstreams: list = field(default_factory=list)  # (face_id, nonce) pairs
    nonces: set = field(default_factory=set)
    upstreams: set = field(default_factory=set)
    send_time_ns: dict = field(default_factory=dict)


class ContentStore:
    """Exact-name LRU cache of Data packets."""

    def __init__(self, capacity_packets: int = 0, enabled: bool = False):
        self.capacity = capacity_packets
        self.enabled = enabled and capacity_packets > 0
        self._store: OrderedDict = OrderedDict()
        self.hits = 0
        self.insertions = 0

    def __len__(self):
        return len(self._store)

    def lookup(self, name: Name) -> Data | None:
        if not self.enabled:
            return None
        key = name.components
        data = self._store.get(key)
        if data is not None:
            self._store.move_to_end(key)
            self.hits += 1
        return data

    def insert(self, data: Data):
        if not self.enabled:
            return
        key = data.name.components
        self._store[key] = data
        self._store.move_to_end(key)
        self.insertions += 1
        while len(self._store) > self.capacity:
            self._store.popitem(last=False)


_COUNTER_KEYS = (
    "interests_in",
    "interests_out",
    "data_in",
    "data_out",
    "nacks_in",
    "nacks_out",
    "cs_hits",
    "cs_insertions",
    "pit_timeouts",
    "drops",
)


class Forwarder:
    """One node's forwarding pipeline."""

    def __init__(
        self,
        node_id: str,
        strategy_config: StrategyConfig,
        send_fn,
        schedule_fn,
        cs_capacity: int = 0,
        cs_enabled: bool = False,
    ):
        self.node_id = node_id
        self.strategy_config = strategy_config
        self._send_fn = send_fn
        self._schedule_fn = schedule_fn
        self.faces: dict[int, Face] = {}
        self.fib: dict[tuple, FibEntry] = {}
        self.pit: dict[tuple, PitEntry] = {}
        self.cs = ContentStore(cs_capacity, cs_enabled)
        self.strategy_states: dict[tuple, StrategyState] = {}
        self.counters = {k: 0 for k in _COUNTER_KEYS}
        self._serial = 0
        self.switch_log: list = []  # (time_ns, prefix, old_face, new_face, reason)

    # -- faces and FIB ----------------------------------------------------

    def add_face(self, face: Face):
        if face.face_id in self.faces:
            raise ValueError("duplicate face id %d" % face.face_id)
        self.faces[face.face_id] = face

    def fib_insert(self, prefix: Name, face_id: int, cost_ms: float):
        if face_id not in self.faces:
            raise ValueError("unknown face %d" % face_id)
        entry = self.fib.get(prefix.components)
        if entry is None:
            entry = FibEntry(prefix)
            self.fib[prefix.components] = entry
        entry.upsert(face_id, cost_ms)

    def fib_nexthop_cost(self, prefix: Name, face_id: int) -> float | None:
        entry = self.fib.get(prefix.components)
        if entry is None:
            return None
        for nh in entry.nexthops:
            if nh.face_id == face_id:
                return nh.cost_ms
        return None

    def fib_lookup(self, name: Name) -> FibEntry | None:
        comps = name.components
        for k in range(len(comps), -1, -1):
            entry = self.fib.get(comps[:k])
            if entry is not None:
                return entry
        return None

    def _state_for(self, prefix: Name) -> StrategyState:
        st = self.strategy_states.get(prefix.components)
        if st is None:
            st = StrategyState(self.strategy_config)
            self.strategy_states[prefix.components] = st
        return st

    # -- pipeline ---------------------------------------------------------

    def on_interest(self, face_in: int, interest: Interest, now_ns: int):
        self.counters["interests_in"] += 1
        key = interest.name.components
        entry = self.pit.get(key)

        if entry is not None and interest.nonce in entry.nonces:
            self.counters["drops"] += 1  # duplicate nonce, likely a loop
            return

        cached = self.cs.lookup(interest.name)
        if cached is not None:
            self.counters["cs_hits"] += 1
            out = replace(cached, origin_tag="cache:%s" % self.node_id)
            self._send_data(face_in, out)
            return

        if entry is not None:
            entry.downstreams.append((face_in, interest.nonce))
            entry.nonces.add(interest.nonce)
            return

        fib = self.fib_lookup(interest.name)
        if fib is None:
            self._send_nack(face_in, Nack(interest.name, interest.nonce, NackReason.NO_ROUTE))
            return

        state = self._state_for(fib.prefix)
        upstream = state.choose_face(fib.pairs(), {face_in}, now_ns)
        if upstream is None:
            self._send_nack(face_in, Nack(interest.name, interest.nonce, NackReason.EXHAUSTED))
            return

        self._serial += 1
        entry = PitEntry(
            name=interest.name,
            fib_prefix=fib.prefix,
            interest=interest,
            expiry_ns=now_ns + interest.lifetime_ms * 1_000_000,
            serial=self._serial,
        )
        entry.downstreams.append((face_in, interest.nonce))
        entry.nonces.add(interest.nonce)
        entry.upstreams.add(upstream)
        entry.send_time_ns[upstream] = now_ns
        self.pit[key] = entry
        self._schedule_fn(
            entry.expiry_ns,
            lambda t, name=interest.name, serial=entry.serial: self.on_pit_timeout(
                name, serial, t
            ),
        )
        self.counters["interests_out"] += 1
        self._send_fn(upstream, interest)

    def on_data(self, face_in: int, data: Data, now_ns: int):
        self.counters["data_in"] += 1
        key = data.name.components
        entry = self.pit.get(key)
        if entry is None:
            self.counters["drops"] += 1  # unsolicited
            return

        sent = entry.send_time_ns.get(face_in)
        if sent is not None:
            state = self._state_for(entry.fib_prefix)
            decision = state.on_data(face_in, (now_ns - sent) / 1e6)
            if decision is not None:
                self.switch_log.append(
                    (now_ns, entry.fib_prefix, decision.old_face,
                     decision.new_face, decision.reason)
                )

        self.cs.insert(data)
        if self.cs.enabled:
            self.counters["cs_insertions"] += 1

        del self.pit[key]
        for face_id, _nonce in sorted(entry.downstreams):
            self._send_data(face_id, data)

    def on_nack(self, face_in: int, nack: Nack, now_ns: int):
        self.counters["nacks_in"] += 1
        key = nack.name.components
        entry = self.pit.get(key)
        if entry is None or nack.nonce != entry.interest.nonce:
            self.counters["drops"] += 1
            return

        state = self._state_for(entry.fib_prefix)
        decision = state.on_failure(face_in, FailureKind.NACK, now_ns)
        if decision is not None:
            self.switch_log.append(
                (now_ns, entry.fib_prefix, decision.old_face,
                 decision.new_face, decision.reason)
            )

        fib = self.fib.get(entry.fib_prefix.components)
        upstream = None
        if fib is not None:
            tried = set(entry.upstreams)
            tried.update(f for f, _ in entry.downstreams)
            upstream = state.choose_face(fib.pairs(), tried, now_ns)
        if upstream is not None:
            entry.upstreams.add(upstream)
            entry.send_time_ns[upstream] = now_ns
            self.counters["interests_out"] += 1
            self._send_fn(upstream, entry.interest)
            return

        del self.pit[key]
        for face_id, nonce in sorted(entry.downstreams):
            self._send_nack(face_id, Nack(nack.name, nonce, NackReason.EXHAUSTED))

    def on_pit_timeout(self, name: Name, serial: int, now_ns: int):
        key = name.components
        entry = self.pit.get(key)
        if entry is None or entry.serial != serial:
            return  # satisfied or replaced before the timer fired
        self.counters["pit_timeouts"] += 1
        state = self._state_for(entry.fib_prefix)
        for upstream in sorted(entry.upstreams):
            decision = state.on_failure(upstream, FailureKind.TIMEOUT, now_ns)
            if decision is not None:
                self.switch_log.append(
                    (now_ns, entry.fib_prefix, decision.old_face,
                     decision.new_face, decision.reason)
                )
        del self.pit[key]

    # -- senders ----------------------------------------------------------

    def _send_data(self, face_id: int, data: Data):
        self.counters["data_out"] += 1
        self._send_fn(face_id, data)

    def _send_nack(self, face_id: int, nack: Nack):
        self.counters["nacks_out"] += 1
        self._send_fn(face_id, nack)
