"""Discrete-event network core.

Time is integer nanoseconds. Events execute in (time, sequence) order, so
two runs over the same inputs replay identically. Links serialize packets
per direction through a droptail queue: the transmission slot plus a
bounded FIFO, with the arriving packet dropped on overflow. Routing is a
static oracle: announcing a prefix installs FIB nexthops at every node by
shortest propagation delay toward the announcing origin, and later
topology changes never recompute them (adapting is the strategy's job).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .forwarder import Face, FaceKind, Forwarder
from .packets import Data, Interest, Nack, decode_wire, encode_wire
from .strategy import StrategyConfig

MS = 1_000_000
SECOND = 1_000_000_000


class SchedulingInPast(RuntimeError):
    pass


class Scheduler:
    """Min-heap of (time_ns, seq, fn) with a monotone tie-break counter."""

    def __init__(self):
        self.now_ns = 0
        self._seq = 0
        self._heap: list = []

    def schedule(self, at_ns: int, fn):
        if at_ns < self.now_ns:
            raise SchedulingInPast(
                "event at %d ns scheduled from %d ns" % (at_ns, self.now_ns)
            )
        self._seq += 1
        heapq.heappush(self._heap, (at_ns, self._seq, fn))

    def run_until(self, t_end_ns: int) -> int:
        """Run events with time <= t_end_ns; returns events executed."""
        count = 0
        while self._heap and self._heap[0][0] <= t_end_ns:
            at, _seq, fn = heapq.heappop(self._heap)
            self.now_ns = at
            fn(at)
            count += 1
        if self.now_ns < t_end_ns:
            self.now_ns = t_end_ns
        return count

    def pending(self) -> int:
        return len(self._heap)


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    role: str = "peer"  # "peer" or "router"


@dataclass(frozen=True)
class LinkSpec:
    link_id: str
    a: str
    b: str
    bandwidth_bps: int
    prop_delay_ms: float
    queue_capacity: int = 64


class ValidationError(ValueError):
    pass


@dataclass
class Topology:
    nodes: list
    links: list

    def validate(self):
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate node ids")
        idset = set(ids)
        seen_links = set()
        adjacency = {i: set() for i in ids}
        for l in self.links:
            if l.link_id in seen_links:
                raise ValidationError("duplicate link id %r" % l.link_id)
            seen_links.add(l.link_id)
            for end in (l.a, l.b):
                if end not in idset:
                    raise ValidationError(
                        "link %r endpoint %r is not a node" % (l.link_id, end)
                    )
            if l.a == l.b:
                raise ValidationError("link %r is a self-loop" % l.link_id)
            if l.bandwidth_bps <= 0:
                raise ValidationError("link %r bandwidth must be positive" % l.link_id)
            if l.prop_delay_ms < 0:
                raise ValidationError("link %r delay must be >= 0" % l.link_id)
            if l.queue_capacity < 1:
                raise ValidationError("link %r queue capacity must be >= 1" % l.link_id)
            adjacency[l.a].add(l.b)
            adjacency[l.b].add(l.a)
        if self.nodes:
            # Reachability check: a partitioned topology is almost always a
            # scenario-file typo.
            stack = [self.nodes[0].node_id]
            seen = {self.nodes[0].node_id}
            while stack:
                for m in adjacency[stack.pop()]:
                    if m not in seen:
                        seen.add(m)
                        stack.append(m)
            if seen != idset:
                raise ValidationError(
                    "topology is not connected (unreached: %s)"
                    % ", ".join(sorted(idset - seen))
                )


class _Direction:
    """One direction of a link: transmitter plus droptail queue."""

    __slots__ = (
        "key", "queue", "busy", "delivered_packets", "delivered_bytes", "drops"
    )

    def __init__(self, key: str):
        self.key = key
        self.queue: list = []
        self.busy = False
        self.delivered_packets = 0
        self.delivered_bytes = 0
        self.drops = 0


class Link:
    def __init__(self, spec: LinkSpec, scheduler: Scheduler, net: "Network"):
        self.spec = spec
        self.link_id = spec.link_id
        self._sched = scheduler
        self._net = net
        self.prop_ns = int(spec.prop_delay_ms * MS)
        self.active = True
        self.epoch = 0
        self.dirs = {
            spec.a: _Direction("%s->%s" % (spec.a, spec.b)),
            spec.b: _Direction("%s->%s" % (spec.b, spec.a)),
        }

    def other(self, node_id: str) -> str:
        return self.spec.b if node_id == self.spec.a else self.spec.a

    def tx_ns(self, wire_len: int) -> int:
        return wire_len * 8 * SECOND // self.spec.bandwidth_bps

    def send(self, from_node: str, wire: bytes, kind: str, name) -> bool:
        """Queue one packet for transmission; False when dropped."""
        d = self.dirs[from_node]
        if not self.active:
            d.drops += 1
            self._net._log("drop", self, d, kind, name, len(wire), "down")
            return False
        self._net._log("send", self, d, kind, name, len(wire), "")
        if d.busy:
            if len(d.queue) >= self.spec.queue_capacity:
                d.drops += 1
                self._net._log("drop", self, d, kind, name, len(wire), "overflow")
                return False
            d.queue.append((wire, kind, name))
            return True
        self._begin_tx(from_node, d, wire, kind, name)
        return True

    def _begin_tx(self, from_node: str, d: _Direction, wire: bytes, kind, name):
        d.busy = True
        now = self._sched.now_ns
        tx = self.tx_ns(len(wire))
        self._net.metrics.record_busy(self.link_id, d.key, now, tx)
        epoch = self.epoch
        self._sched.schedule(
            now + tx,
            lambda t: self._tx_done(from_node, d, wire, kind, name, epoch),
        )

    def _tx_done(self, from_node: str, d: _Direction, wire, kind, name, epoch: int):
        if epoch != self.epoch:
            return  # link went down mid-flight
        to_node = self.other(from_node)
        self._sched.schedule(
            self._sched.now_ns + self.prop_ns,
            lambda t, e=epoch: self._deliver(to_node, wire, kind, name, e),
        )
        if d.queue:
            nwire, nkind, nname = d.queue.pop(0)
            self._begin_tx(from_node, d, nwire, nkind, nname)
        else:
            d.busy = False

    def _deliver(self, to_node: str, wire, kind, name, epoch: int):
        if epoch != self.epoch:
            return
        d = self.dirs[self.other(to_node)]
        d.delivered_packets += 1
        d.delivered_bytes += len(wire)
        self._net._log("recv", self, d, kind, name, len(wire), "")
        self._net.nodes[to_node].receive_wire(self.link_id, wire)

    def set_active(self, active: bool):
        if active == self.active:
            return
        self.active = active
        self.epoch += 1
        for d in self.dirs.values():
            d.drops += len(d.queue)
            d.queue.clear()
            d.busy = False


class Node:
    def __init__(self, spec: NodeSpec, net: "Network", strategy_config, cs_capacity, cs_enabled):
        self.node_id = spec.node_id
        self.role = spec.role
        self._net = net
        self.forwarder = Forwarder(
            spec.node_id,
            strategy_config,
            send_fn=self._forwarder_send,
            schedule_fn=net.scheduler.schedule,
            cs_capacity=cs_capacity,
            cs_enabled=cs_enabled,
        )
        self._next_face = 0
        self.link_faces: dict[int, Link] = {}
        self.face_by_link: dict[str, int] = {}
        self.apps: dict[int, object] = {}
        self._nonce_counter = 0
        self.index = 0  # set by Network; namespaces nonces per node

    def add_link_face(self, link: Link) -> int:
        fid = self._next_face
        self._next_face += 1
        self.forwarder.add_face(
            Face(fid, FaceKind.LINK, link_id=link.link_id, remote=link.other(self.node_id))
        )
        self.link_faces[fid] = link
        self.face_by_link[link.link_id] = fid
        return fid

    def add_app_face(self, app) -> int:
        fid = self._next_face
        self._next_face += 1
        self.forwarder.add_face(Face(fid, FaceKind.APP, remote=getattr(app, "app_id", "app")))
        self.apps[fid] = app
        return fid

    def next_nonce(self) -> int:
        self._nonce_counter += 1
        return (self.index << 40) | self._nonce_counter

    def _forwarder_send(self, face_id: int, pkt):
        link = self.link_faces.get(face_id)
        if link is not None:
            wire = encode_wire(pkt)
            link.send(self.node_id, wire, type(pkt).__name__, pkt.name)
            return
        app = self.apps.get(face_id)
        if app is None:
            raise ValueError("send on unknown face %d at %s" % (face_id, self.node_id))
        app.from_network(face_id, pkt, self._net.scheduler.now_ns)

    def receive_wire(self, link_id: str, wire: bytes):
        pkt = decode_wire(wire)
        face_in = self.face_by_link[link_id]
        now = self._net.scheduler.now_ns
        if isinstance(pkt, Interest):
            self.forwarder.on_interest(face_in, pkt, now)
        elif isinstance(pkt, Data):
            self.forwarder.on_data(face_in, pkt, now)
        else:
            self.forwarder.on_nack(face_in, pkt, now)

    def app_send(self, app_face_id: int, pkt):
        """An application hands a packet to its own forwarder."""
        now = self._net.scheduler.now_ns
        if isinstance(pkt, Interest):
            self.forwarder.on_interest(app_face_id, pkt, now)
        elif isinstance(pkt, Data):
            self.forwarder.on_data(app_face_id, pkt, now)
        else:
            self.forwarder.on_nack(app_face_id, pkt, now)


class UtilizationTracker:
    """Accumulates per-direction link busy time into fixed intervals."""

    def __init__(self, interval_ns: int):
        self.interval_ns = interval_ns
        self.busy: dict[tuple, dict[int, int]] = {}

    def record_busy(self, link_id: str, direction: str, start_ns: int, dur_ns: int):
        if dur_ns <= 0:
            return
        buckets = self.busy.setdefault((link_id, direction), {})
        t = start_ns
        end = start_ns + dur_ns
        while t < end:
            idx = t // self.interval_ns
            bucket_end = (idx + 1) * self.interval_ns
            span = min(end, bucket_end) - t
            buckets[idx] = buckets.get(idx, 0) + span
            t = bucket_end

    def series(self, link_id: str, direction: str) -> list[tuple[float, float]]:
        """(interval start in seconds, utilization in [0, 1]) rows."""
        buckets = self.busy.get((link_id, direction), {})
        if not buckets:
            return []
        out = []
        for idx in range(0, max(buckets) + 1):
            out.append(
                (
                    idx * self.interval_ns / SECOND,
                    buckets.get(idx, 0) / self.interval_ns,
                )
            )
        return out


class Network:
    """Nodes wired by links, a scheduler, and the static routing oracle."""

    def __init__(
        self,
        topology: Topology,
        strategy_config: StrategyConfig | None = None,
        metrics_interval_ms: float = 100.0,
        cs_capacity: int = 0,
        cs_enabled_roles: tuple = (),
        record_events: bool = False,
    ):
        topology.validate()
        self.topology = topology
        self.scheduler = Scheduler()
        self.metrics = UtilizationTracker(int(metrics_interval_ms * MS))
        self.record_events = record_events
        self.events: list = []
        cfg = strategy_config or StrategyConfig()

        self._down: set[str] = set()
        self.nodes: dict[str, Node] = {}
        for i, spec in enumerate(topology.nodes):
            node = Node(
                spec,
                self,
                cfg,
                cs_capacity=cs_capacity if spec.role in cs_enabled_roles else 0,
                cs_enabled=spec.role in cs_enabled_roles,
            )
            node.index = i
            self.nodes[spec.node_id] = node

        self.links: dict[str, Link] = {}
        self._adjacency: dict[str, list] = {n.node_id: [] for n in topology.nodes}
        for lspec in topology.links:
            link = Link(lspec, self.scheduler, self)
            self.links[lspec.link_id] = link
            self.nodes[lspec.a].add_link_face(link)
            self.nodes[lspec.b].add_link_face(link)
            self._adjacency[lspec.a].append((lspec.b, lspec.prop_delay_ms, lspec.link_id))
            self._adjacency[lspec.b].append((lspec.a, lspec.prop_delay_ms, lspec.link_id))

    # -- logging ----------------------------------------------------------

    def _log(self, event: str, link: Link, d: _Direction, kind, name, nbytes, note):
        if self.record_events:
            self.events.append(
                (self.scheduler.now_ns, event, link.link_id, d.key, kind, name, nbytes, note)
            )

    # -- routing oracle ----------------------------------------------------

    def shortest_delays_from(self, origin: str) -> dict[str, float]:
        dist = {origin: 0.0}
        heap = [(0.0, origin)]
        while heap:
            d, n = heapq.heappop(heap)
            if d > dist.get(n, float("inf")):
                continue
            for m, w, _lid in self._adjacency[n]:
                nd = d + w
                if nd < dist.get(m, float("inf")):
                    dist[m] = nd
                    heapq.heappush(heap, (nd, m))
        return dist

    def announce_prefix(self, prefix, origin_id: str, app_face_id: int | None = None):
        """Install FIB entries for prefix at every node, pointing down the
        shortest-propagation-delay tree toward origin. Accumulates with
        earlier announcements: an existing nexthop keeps its lower cost."""
        dist = self.shortest_delays_from(origin_id)
        for node_id, node in self.nodes.items():
            if node_id == origin_id:
                continue
            if node_id not in dist:
                continue  # unreachable from origin; leave its FIB alone
            for m, w, lid in self._adjacency[node_id]:
                if m not in dist or dist[m] >= dist[node_id]:
                    continue
                cost = w + dist[m]
                face_id = node.face_by_link[lid]
                old = node.forwarder.fib_nexthop_cost(prefix, face_id)
                if old is None or cost < old:
                    node.forwarder.fib_insert(prefix, face_id, cost)
        if app_face_id is not None:
            origin = self.nodes[origin_id]
            old = origin.forwarder.fib_nexthop_cost(prefix, app_face_id)
            if old is None or old > 0.0:
                origin.forwarder.fib_insert(prefix, app_face_id, 0.0)

    # -- dynamics ----------------------------------------------------------

    def disconnect_node(self, node_id: str):
        self._down.add(node_id)
        for link in self.links.values():
            if node_id in (link.spec.a, link.spec.b):
                link.set_active(False)

    def connect_node(self, node_id: str):
        self._down.discard(node_id)
        for link in self.links.values():
            if node_id in (link.spec.a, link.spec.b):
                if link.other(node_id) not in self._down:
                    link.set_active(True)

    def schedule(self, at_ns: int, fn):
        self.scheduler.schedule(at_ns, fn)

    def run_until(self, t_end_ns: int) -> int:
        return self.scheduler.run_until(t_end_ns)
