"""Torrent catalog model: segmentation, catalog codecs, download state.

A torrent is published as a three-level hierarchy, every level made of
ordinary signed Data packets so the network can treat them uniformly:

  <torrent>/torrent-file/s<i>        segments of the top-level catalog
  <torrent>/file<k>/manifest/s<i>    segments of one file's manifest
  <torrent>/file<k>/p<i>             the file's data packets

The torrent file lists manifest names; each manifest lists its file's
packet names in order. Serialized catalogs carry their own total length
up front, so a consumer that has fetched segment s0 knows how many more
segments to request.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .packets import Data, DecodeError, Name, make_data

TORRENT_FILE_COMPONENT = b"torrent-file"
MANIFEST_COMPONENT = b"manifest"

_MAGIC_TORRENT = 0x54
_MAGIC_MANIFEST = 0x4D


class EmptyContent(ValueError):
    pass


def file_component(index: int) -> bytes:
    return b"file%d" % index


def packet_component(index: int) -> bytes:
    return b"p%d" % index


def segment_component(index: int) -> bytes:
    return b"s%d" % index


def segments_for_length(total_len: int, payload_size: int) -> int:
    return -(-total_len // payload_size)


def segment_content(
    torrent_name: Name, file_index: int, content: bytes, payload_size: int
) -> list[Data]:
    """Split one file's content into signed data packets.

    Every packet carries payload_size bytes except possibly the last one.
    """
    if payload_size <= 0:
        raise ValueError("payload_size must be positive")
    if len(content) == 0:
        raise EmptyContent("file %d has no content" % file_index)
    base = torrent_name.child(file_component(file_index))
    packets = []
    for i in range(segments_for_length(len(content), payload_size)):
        chunk = content[i * payload_size : (i + 1) * payload_size]
        packets.append(make_data(base.child(packet_component(i)), chunk))
    return packets


@dataclass(frozen=True)
class FileManifest:
    """Ordered list of one file's packet names."""

    file_name: Name
    packet_names: tuple[Name, ...]

    @property
    def manifest_name(self) -> Name:
        return self.file_name.child(MANIFEST_COMPONENT)


@dataclass(frozen=True)
class TorrentFile:
    """Top of the catalog hierarchy: names every file manifest, in order."""

    torrent_name: Name
    manifest_names: tuple[Name, ...]


def _pack_name(name: Name) -> bytes:
    parts = [struct.pack(">H", len(name.components))]
    for c in name.components:
        parts.append(struct.pack(">H", len(c)))
        parts.append(c)
    return b"".join(parts)


class _Cursor:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DecodeError("truncated catalog")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]


def _unpack_name(c: _Cursor) -> Name:
    count = c.u16()
    comps = []
    for _ in range(count):
        n = c.u16()
        if n == 0:
            raise DecodeError("empty name component in catalog")
        comps.append(c.take(n))
    return Name(tuple(comps))


def _serialize(magic: int, body: bytes) -> bytes:
    # 1-byte magic + u32 total length (header included) + body. The length
    # field is what lets a consumer size the fetch from segment 0 alone.
    return struct.pack(">BI", magic, 5 + len(body)) + body


def peek_total_length(segment0_content: bytes) -> int:
    """Read the serialized catalog length out of a first segment."""
    if len(segment0_content) < 5:
        raise DecodeError("first segment too short for catalog header")
    magic, total = struct.unpack(">BI", segment0_content[:5])
    if magic not in (_MAGIC_TORRENT, _MAGIC_MANIFEST):
        raise DecodeError("bad catalog magic 0x%02x" % magic)
    return total


def serialize_torrent_file(tf: TorrentFile) -> bytes:
    body = [_pack_name(tf.torrent_name), struct.pack(">H", len(tf.manifest_names))]
    for m in tf.manifest_names:
        body.append(_pack_name(m))
    return _serialize(_MAGIC_TORRENT, b"".join(body))


def serialize_manifest(m: FileManifest) -> bytes:
    body = [_pack_name(m.file_name), struct.pack(">I", len(m.packet_names))]
    for p in m.packet_names:
        body.append(_pack_name(p))
    return _serialize(_MAGIC_MANIFEST, b"".join(body))


def _segment(name_base: Name, blob: bytes, payload_size: int) -> list[Data]:
    segs = []
    for i in range(segments_for_length(len(blob), payload_size)):
        chunk = blob[i * payload_size : (i + 1) * payload_size]
        segs.append(make_data(name_base.child(segment_component(i)), chunk))
    return segs


def encode_torrent_file(tf: TorrentFile, payload_size: int) -> list[Data]:
    if payload_size <= 0:
        raise ValueError("payload_size must be positive")
    base = tf.torrent_name.child(TORRENT_FILE_COMPONENT)
    return _segment(base, serialize_torrent_file(tf), payload_size)


def encode_manifest(m: FileManifest, payload_size: int) -> list[Data]:
    if payload_size <= 0:
        raise ValueError("payload_size must be positive")
    return _segment(m.manifest_name, serialize_manifest(m), payload_size)


def _reassemble(segments: list[Data], expect_magic: int) -> _Cursor:
    if not segments:
        raise DecodeError("no segments")
    for i, seg in enumerate(segments):
        last = seg.name[len(seg.name) - 1]
        if last != segment_component(i):
            raise DecodeError(
                "segment %d out of order: got %r" % (i, last)
            )
    blob = b"".join(seg.content for seg in segments)
    if len(blob) < 5:
        raise DecodeError("catalog too short")
    magic, total = struct.unpack(">BI", blob[:5])
    if magic != expect_magic:
        raise DecodeError("bad catalog magic 0x%02x" % magic)
    if total != len(blob):
        raise DecodeError(
            "catalog length mismatch: header %d, got %d" % (total, len(blob))
        )
    c = _Cursor(blob)
    c.pos = 5
    return c


def decode_torrent_file(segments: list[Data]) -> TorrentFile:
    c = _reassemble(segments, _MAGIC_TORRENT)
    torrent_name = _unpack_name(c)
    count = c.u16()
    manifests = tuple(_unpack_name(c) for _ in range(count))
    if c.pos != len(c.buf):
        raise DecodeError("trailing bytes in torrent file")
    for m in manifests:
        if not torrent_name.is_prefix_of(m):
            raise DecodeError("manifest name %s outside torrent" % m)
    return TorrentFile(torrent_name, manifests)


def decode_manifest(segments: list[Data]) -> FileManifest:
    c = _reassemble(segments, _MAGIC_MANIFEST)
    file_name = _unpack_name(c)
    count = c.u32()
    packets = tuple(_unpack_name(c) for _ in range(count))
    if c.pos != len(c.buf):
        raise DecodeError("trailing bytes in manifest")
    return FileManifest(file_name, packets)


def build_torrent(
    torrent_name: Name, files: list[bytes], payload_size: int
) -> tuple[TorrentFile, list[FileManifest], list[Data]]:
    """Build the full catalog hierarchy plus all data packets for a torrent.

    Deterministic: same names and contents give byte-identical packets.
    """
    if not files:
        raise EmptyContent("torrent has no files")
    manifests = []
    packets = []
    for k, content in enumerate(files):
        pkts = segment_content(torrent_name, k, content, payload_size)
        packets.extend(pkts)
        manifests.append(
            FileManifest(
                torrent_name.child(file_component(k)),
                tuple(p.name for p in pkts),
            )
        )
    tf = TorrentFile(torrent_name, tuple(m.manifest_name for m in manifests))
    return tf, manifests, packets


class TorrentManager:
    """Tracks download progress over an ordered packet catalog.

    cursor always points at the first catalog entry not yet received
    (one past the end when complete); arrivals beyond the cursor are kept
    and the cursor jumps over them once the gap fills.
    """

    def __init__(self, catalog: list[Name]):
        self.catalog = list(catalog)
        self._index = {name: i for i, name in enumerate(self.catalog)}
        if len(self._index) != len(self.catalog):
            raise ValueError("catalog contains duplicate names")
        self.have: set[Name] = set()
        self.cursor = 0

    @property
    def complete(self) -> bool:
        return self.cursor >= len(self.catalog)

    def next_missing(self) -> Name | None:
        if self.complete:
            return None
        return self.catalog[self.cursor]

    def iter_missing(self):
        """Yield missing names in catalog order, starting at the cursor."""
        for i in range(self.cursor, len(self.catalog)):
            name = self.catalog[i]
            if name not in self.have:
                yield name

    def record_received(self, pkt: Data) -> bool:
        """Accept a packet if it belongs to the catalog, verifies, and is
        new. Returns False (and changes nothing) otherwise."""
        if pkt.name not in self._index:
            return False
        if pkt.name in self.have:
            return False
        if not pkt.verify():
            return False
        self.have.add(pkt.name)
        while self.cursor < len(self.catalog) and self.catalog[self.cursor] in self.have:
            self.cursor += 1
        return True


class NoSamples(RuntimeError):
    pass


@dataclass
class StatsTable:
    """Running per-download statistics: latency average, rate, ETA."""

    total_bytes: int = 0
    samples: int = 0
    delay_sum_ms: float = 0.0
    bytes_received: int = 0
    start_time_ns: int | None = None

    def record(self, now_ns: int, delay_ms: float, nbytes: int):
        if self.start_time_ns is None:
            self.start_time_ns = now_ns
        self.samples += 1
        self.delay_sum_ms += delay_ms
        self.bytes_received += nbytes

    def summary(self, now_ns: int) -> dict:
        if self.samples == 0:
            raise NoSamples("no data samples recorded")
        elapsed_s = (now_ns - self.start_time_ns) / 1e9
        rate_bps = 8.0 * self.bytes_received / elapsed_s if elapsed_s > 0 else 0.0
        out = {
            "average_latency_ms": self.delay_sum_ms / self.samples,
            "download_rate_bps": rate_bps,
        }
        remaining = max(0, self.total_bytes - self.bytes_received)
        if rate_bps > 0:
            out["estimated_completion_ms"] = 8000.0 * remaining / rate_bps
        else:
            out["estimated_completion_ms"] = float("inf")
        return out


class InterestQueue:
    """FIFO with optional pacing: at most one dequeue per pace interval.

    A pace interval of zero disables pacing entirely.
    """

    def __init__(self, pace_interval_ms: int = 0):
        if pace_interval_ms < 0:
            raise ValueError("pace interval must be >= 0")
        self.pace_interval_ns = int(pace_interval_ms * 1_000_000)
        self._items: list = []
        self._head = 0
        self._last_dequeue_ns: int | None = None

    def __len__(self):
        return len(self._items) - self._head

    def enqueue(self, item):
        self._items.append(item)

    def ready_at(self, now_ns: int) -> int | None:
        """Earliest time the head could be dequeued, None when empty."""
        if len(self) == 0:
            return None
        if self.pace_interval_ns == 0 or self._last_dequeue_ns is None:
            return now_ns
        return max(now_ns, self._last_dequeue_ns + self.pace_interval_ns)

    def dequeue_ready(self, now_ns: int):
        """Pop the head if pacing allows it, else return None."""
        if len(self) == 0:
            return None
        if (
            self.pace_interval_ns > 0
            and self._last_dequeue_ns is not None
            and now_ns < self._last_dequeue_ns + self.pace_interval_ns
        ):
            return None
        item = self._items[self._head]
        self._head += 1
        if self._head > 64 and self._head * 2 > len(self._items):
            del self._items[: self._head]
            self._head = 0
        self._last_dequeue_ns = now_ns
        return item
