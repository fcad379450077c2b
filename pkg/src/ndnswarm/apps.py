"""Swarm applications: producer (seeder) and consumer (leecher).

A producer holds a full torrent and answers any Interest that names a
packet it has. A consumer walks the catalog hierarchy (torrent file, then
manifests, then data packets, strictly in order), keeps up to `window`
Interests in flight, and re-announces the torrent prefix once its first
data packet is stored so later joiners can fetch from it. Every served
Data packet is re-stamped with the serving node's id; consumers tally the
stamps to attribute where their download actually came from.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .packets import Data, Interest, Nack, Name
from .torrent import (
    InterestQueue,
    StatsTable,
    TorrentManager,
    MANIFEST_COMPONENT,
    TORRENT_FILE_COMPONENT,
    build_torrent,
    decode_manifest,
    decode_torrent_file,
    encode_manifest,
    encode_torrent_file,
    peek_total_length,
    segment_component,
    segments_for_length,
)


class AbortedDownload(RuntimeError):
    pass


def generate_files(seed: int, torrent_name: Name, sizes: list[int]) -> list[bytes]:
    """Deterministic pseudo-random file contents for a torrent. Every
    producer of the same torrent under the same seed builds an identical
    store."""
    out = []
    for idx, size in enumerate(sizes):
        rng = random.Random("%d|%s|%d" % (seed, torrent_name.to_uri(), idx))
        out.append(rng.randbytes(size))
    return out


class ProducerApp:
    """Seeder: builds the full store up front and serves exact matches."""

    def __init__(self, node, torrent_name: Name, files: list[bytes], payload_size: int):
        self.node = node
        self.app_id = "producer:%s" % node.node_id
        self.torrent_name = torrent_name
        self.app_face: int | None = None
        tf, manifests, packets = build_torrent(torrent_name, files, payload_size)
        self.torrent_file = tf
        self.store: dict[tuple, Data] = {}
        for seg in encode_torrent_file(tf, payload_size):
            self.store[seg.name.components] = seg
        for m in manifests:
            for seg in encode_manifest(m, payload_size):
                self.store[seg.name.components] = seg
        for pkt in packets:
            self.store[pkt.name.components] = pkt
        self.catalog_size = len(packets)
        self.interests_answered = 0
        self.interests_unmatched = 0

    def start(self, _now_ns: int):
        self.node._net.announce_prefix(self.torrent_name, self.node.node_id, self.app_face)

    def from_network(self, face_id: int, pkt, now_ns: int):
        if not isinstance(pkt, Interest):
            return
        data = self.store.get(pkt.name.components)
        if data is None:
            self.interests_unmatched += 1
            return
        self.interests_answered += 1
        self.node.app_send(face_id, replace(data, origin_tag=self.node.node_id))


@dataclass
class _InFlight:
    sent_ns: int
    retries: int
    gen: int


class ConsumerApp:
    """Leecher: fetches the catalog, then data packets in catalog order."""

    PHASE_TORRENT_FILE = "torrent-file"
    PHASE_MANIFESTS = "manifests"
    PHASE_DATA = "data"
    PHASE_DONE = "done"

    def __init__(
        self,
        node,
        torrent_name: Name,
        payload_size: int,
        window: int = 64,
        lifetime_ms: int = 4000,
        retry_limit: int = 16,
        serve: bool = True,
        nack_backoff_ms: int = 500,
        retry_backoff_ms: int = 1,
        record_stats: bool = False,
        pace_interval_ms: int = 0,
    ):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.node = node
        self.app_id = "consumer:%s" % node.node_id
        self.torrent_name = torrent_name
        self.payload_size = payload_size
        self.window = window
        self.lifetime_ms = lifetime_ms
        self.retry_limit = retry_limit
        self.serve = serve
        self.nack_backoff_ns = nack_backoff_ms * 1_000_000
        self.retry_backoff_ns = retry_backoff_ms * 1_000_000
        self.app_face: int | None = None

        self.phase = self.PHASE_TORRENT_FILE
        self.in_flight: dict[tuple, _InFlight] = {}
        self.pending: list[Name] = []  # known-needed catalog segment names
        self._pending_head = 0
        self._gen = 0

        self._tf_base = torrent_name.child(TORRENT_FILE_COMPONENT)
        self._tf_segments: dict[int, Data] = {}
        self._tf_total: int | None = None
        self._manifest_bases: list[Name] = []
        self._manifest_segments: dict[tuple, dict[int, Data]] = {}
        self._manifest_totals: dict[tuple, int | None] = {}
        self._manifests_done = 0

        self.tm: TorrentManager | None = None
        self._scan = 0  # monotone catalog fill pointer
        self.store: dict[tuple, Data] = {}
        self.provenance: dict[str, int] = {}
        # (t_ns, payload bytes, origin tag) per stored data packet
        self.arrivals: list[tuple[int, int, str]] = []
        self.stats = StatsTable() if record_stats else None
        self.iq = InterestQueue(pace_interval_ms) if pace_interval_ms > 0 else None
        self._iq_drain_armed = False

        self.started_ns: int | None = None
        self.completed_ns: int | None = None
        self.announced = False
        self.aborted = False
        self.rejected_packets = 0
        self.serve_answered = 0
        self.retries_issued = 0

    # -- lifecycle ---------------------------------------------------------

    def start(self, now_ns: int):
        self.started_ns = now_ns
        self._enqueue(self._tf_base.child(segment_component(0)))
        self._refill(now_ns)

    @property
    def complete(self) -> bool:
        return self.phase == self.PHASE_DONE

    # -- network entry point ------------------------------------------------

    def from_network(self, face_id: int, pkt, now_ns: int):
        if isinstance(pkt, Interest):
            self._serve(face_id, pkt)
        elif isinstance(pkt, Data):
            self._on_data(pkt, now_ns)
        elif isinstance(pkt, Nack):
            self._on_nack(pkt, now_ns)

    def _serve(self, face_id: int, interest: Interest):
        if not self.serve:
            return
        data = self.store.get(interest.name.components)
        if data is not None:
            self.serve_answered += 1
            self.node.app_send(face_id, replace(data, origin_tag=self.node.node_id))

    # -- request machinery ---------------------------------------------------

    def _enqueue(self, name: Name):
        self.pending.append(name)

    def _next_pending(self) -> Name | None:
        while self._pending_head < len(self.pending):
            name = self.pending[self._pending_head]
            self._pending_head += 1
            if name.components not in self.in_flight:
                return name
        return None

    def _next_catalog(self) -> Name | None:
        if self.tm is None:
            return None
        catalog = self.tm.catalog
        while self._scan < len(catalog):
            name = catalog[self._scan]
            if name in self.tm.have or name.components in self.in_flight:
                self._scan += 1
                continue
            self._scan += 1
            return name
        return None

    def _refill(self, now_ns: int):
        if self.aborted or self.phase == self.PHASE_DONE:
            return
        while len(self.in_flight) < self.window:
            name = self._next_pending()
            if name is None and self.phase == self.PHASE_DATA:
                name = self._next_catalog()
            if name is None:
                return
            self._request(name, now_ns, retries=0)

    def _request(self, name: Name, now_ns: int, retries: int):
        self._gen += 1
        self.in_flight[name.components] = _InFlight(now_ns, retries, self._gen)
        if self.iq is not None:
            self.iq.enqueue(name)
            self._arm_iq(now_ns)
        else:
            self._emit(name, now_ns)

    def _emit(self, name: Name, now_ns: int):
        entry = self.in_flight.get(name.components)
        if entry is None:
            return
        entry.sent_ns = now_ns
        interest = Interest(name, self.node.next_nonce(), self.lifetime_ms)
        gen = entry.gen
        self.node._net.schedule(
            now_ns + self.lifetime_ms * 1_000_000,
            lambda t, n=name, g=gen: self._on_timeout(n, g, t),
        )
        self.node.app_send(self.app_face, interest)

    def _arm_iq(self, now_ns: int):
        if self._iq_drain_armed:
            return
        at = self.iq.ready_at(now_ns)
        if at is None:
            return
        self._iq_drain_armed = True
        self.node._net.schedule(at, self._drain_iq)

    def _drain_iq(self, now_ns: int):
        self._iq_drain_armed = False
        name = self.iq.dequeue_ready(now_ns)
        if name is not None:
            self._emit(name, now_ns)
        self._arm_iq(now_ns)

    def _on_timeout(self, name: Name, gen: int, now_ns: int):
        entry = self.in_flight.get(name.components)
        if entry is None or entry.gen != gen:
            return
        self._retry(name, entry, now_ns)

    def _on_nack(self, nack: Nack, now_ns: int):
        entry = self.in_flight.get(nack.name.components)
        if entry is None:
            return
        # Nacks can arrive much faster than timeouts; back off before the
        # retry so a persistent no-route does not spin.
        entry.gen = self._gen = self._gen + 1
        gen = entry.gen
        self.node._net.schedule(
            now_ns + self.nack_backoff_ns,
            lambda t, n=nack.name, g=gen: self._on_timeout(n, g, t),
        )

    def _retry(self, name: Name, entry: _InFlight, now_ns: int):
        if entry.retries >= self.retry_limit:
            self.aborted = True
            self.in_flight.clear()
            return
        # An immediate re-request would land on the forwarder in the same
        # instant its old PIT entry expires and be aggregated onto it, then
        # swallowed. The short backoff lets the expiry run first.
        retries = entry.retries + 1
        self.node._net.schedule(
            now_ns + self.retry_backoff_ns,
            lambda t, n=name, r=retries: self._rerequest(n, r, t),
        )

    def _rerequest(self, name: Name, retries: int, now_ns: int):
        if self.aborted or self.phase == self.PHASE_DONE:
            return
        if name.components not in self.in_flight:
            return  # satisfied while the backoff ran
        self.retries_issued += 1
        self._request(name, now_ns, retries=retries)

    # -- data arrivals --------------------------------------------------------

    def _on_data(self, data: Data, now_ns: int):
        comps = data.name.components
        entry = self.in_flight.pop(comps, None)
        if self.phase == self.PHASE_DONE:
            return
        if self._tf_base.is_prefix_of(data.name):
            self._on_tf_segment(data, now_ns)
        elif len(data.name) >= 2 and data.name[len(data.name) - 2] == MANIFEST_COMPONENT:
            self._on_manifest_segment(data, now_ns)
        else:
            self._on_packet(data, entry, now_ns)
        self._refill(now_ns)

    @staticmethod
    def _segment_index(name: Name) -> int:
        last = name[len(name) - 1]
        if not last.startswith(b"s"):
            raise ValueError("not a segment name: %r" % (last,))
        return int(last[1:])

    def _on_tf_segment(self, data: Data, now_ns: int):
        if not data.verify():
            self.rejected_packets += 1
            return
        idx = self._segment_index(data.name)
        if idx in self._tf_segments:
            return
        self._tf_segments[idx] = data
        self.store[data.name.components] = data
        if idx == 0:
            total_len = peek_total_length(data.content)
            self._tf_total = segments_for_length(total_len, self.payload_size)
            for i in range(1, self._tf_total):
                self._enqueue(self._tf_base.child(segment_component(i)))
        if self._tf_total is not None and len(self._tf_segments) == self._tf_total:
            segs = [self._tf_segments[i] for i in range(self._tf_total)]
            tf = decode_torrent_file(segs)
            self.phase = self.PHASE_MANIFESTS
            for mname in tf.manifest_names:
                self._manifest_bases.append(mname)
                self._manifest_segments[mname.components] = {}
                self._manifest_totals[mname.components] = None
                self._enqueue(mname.child(segment_component(0)))

    def _on_manifest_segment(self, data: Data, now_ns: int):
        if not data.verify():
            self.rejected_packets += 1
            return
        base = data.name[: len(data.name) - 1]
        segs = self._manifest_segments.get(base.components)
        if segs is None:
            return
        idx = self._segment_index(data.name)
        if idx in segs:
            return
        segs[idx] = data
        self.store[data.name.components] = data
        if idx == 0:
            total_len = peek_total_length(data.content)
            total = segments_for_length(total_len, self.payload_size)
            self._manifest_totals[base.components] = total
            for i in range(1, total):
                self._enqueue(base.child(segment_component(i)))
        total = self._manifest_totals[base.components]
        if total is not None and len(segs) == total:
            self._manifests_done += 1
            if self._manifests_done == len(self._manifest_bases):
                self._finish_manifests()

    def _finish_manifests(self):
        catalog: list[Name] = []
        for mname in self._manifest_bases:
            segs = self._manifest_segments[mname.components]
            ordered = [segs[i] for i in range(len(segs))]
            manifest = decode_manifest(ordered)
            catalog.extend(manifest.packet_names)
        self.tm = TorrentManager(catalog)
        if self.stats is not None:
            self.stats.total_bytes = len(catalog) * self.payload_size
        self.phase = self.PHASE_DATA

    def _on_packet(self, data: Data, entry: _InFlight | None, now_ns: int):
        if self.tm is None:
            return
        was_new = self.tm.record_received(data)
        if not was_new:
            if data.name in self.tm._index and data.name not in self.tm.have:
                self.rejected_packets += 1
            return
        self.store[data.name.components] = data
        origin = data.origin_tag or "unknown"
        self.provenance[origin] = self.provenance.get(origin, 0) + 1
        self.arrivals.append((now_ns, len(data.content), origin))
        if self.stats is not None and entry is not None:
            self.stats.record(now_ns, (now_ns - entry.sent_ns) / 1e6, len(data.content))
        if not self.announced and self.serve:
            self.announced = True
            self.node._net.announce_prefix(
                self.torrent_name, self.node.node_id, self.app_face
            )
        if self.tm.complete:
            self.phase = self.PHASE_DONE
            self.completed_ns = now_ns
            self.in_flight.clear()
