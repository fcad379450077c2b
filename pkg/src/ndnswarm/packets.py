"""Packet types and deterministic wire codec.

Three packet kinds cross simulated links: Interest (a request), Data (a
signed response), and Nack (an explicit failure). Names are ordered lists
of byte-string components with a total order, so catalogs can be sorted
and compared. The codec is deterministic: equal packets encode to equal
bytes, and the encoded length is what link transmission time is charged
for.
"""

from __future__ import annotations

import enum
import hashlib
import struct
import zlib
from dataclasses import dataclass, field


class MalformedUri(ValueError):
    pass


class DecodeError(ValueError):
    pass


# Characters that survive URI round-trips unescaped.
_URI_SAFE = frozenset(
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-._~"
)
_HEX = b"0123456789ABCDEF"


def _escape(comp: bytes) -> str:
    out = []
    for b in comp:
        if b in _URI_SAFE:
            out.append(chr(b))
        else:
            out.append("%%%c%c" % (_HEX[b >> 4], _HEX[b & 0xF]))
    return "".join(out)


def _unescape(text: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(text):
        c = text[i]
        if c == "%":
            if i + 3 > len(text):
                raise MalformedUri("truncated percent escape in %r" % text)
            try:
                out.append(int(text[i + 1 : i + 3], 16))
            except ValueError:
                raise MalformedUri("bad percent escape in %r" % text) from None
            i += 3
        else:
            code = ord(c)
            if code > 255:
                raise MalformedUri("non-latin1 character in %r" % text)
            out.append(code)
            i += 1
    return bytes(out)


@dataclass(frozen=True)
class Name:
    """Hierarchical name: an ordered tuple of non-empty byte components."""

    components: tuple[bytes, ...] = ()

    def __post_init__(self):
        for c in self.components:
            if not isinstance(c, bytes) or len(c) == 0:
                raise ValueError("name components must be non-empty bytes")
        # bytes.__hash__ is salted per process; cache a stable hash so that
        # set/dict iteration orders are reproducible across runs.
        object.__setattr__(
            self, "_hash", zlib.crc32(b"\x00".join(self.components))
        )

    def __hash__(self):
        return self._hash

    def __lt__(self, other: "Name") -> bool:
        return self.components < other.components

    def __le__(self, other: "Name") -> bool:
        return self.components <= other.components

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Name(self.components[idx])
        return self.components[idx]

    def child(self, *comps: bytes) -> "Name":
        return Name(self.components + tuple(comps))

    def is_prefix_of(self, other: "Name") -> bool:
        """True when self is a (possibly equal) prefix of other. The root
        name (zero components) is a prefix of everything."""
        n = len(self.components)
        return self.components == other.components[:n]

    def to_uri(self) -> str:
        if not self.components:
            return "/"
        return "/" + "/".join(_escape(c) for c in self.components)

    def __str__(self):
        return self.to_uri()

    def __repr__(self):
        return "Name(%s)" % self.to_uri()


def name_from_uri(uri: str) -> Name:
    """Parse a /-separated URI. Inverse of Name.to_uri for every Name."""
    if not uri.startswith("/"):
        raise MalformedUri("name URI must start with '/': %r" % uri)
    if uri == "/":
        return Name(())
    parts = uri[1:].split("/")
    comps = []
    for part in parts:
        if part == "":
            raise MalformedUri("empty name component in %r" % uri)
        comps.append(_unescape(part))
    return Name(tuple(comps))


class NackReason(enum.IntEnum):
    NO_ROUTE = 0
    EXHAUSTED = 1
    CONGESTION = 2


@dataclass(frozen=True)
class Interest:
    name: Name
    nonce: int
    lifetime_ms: int = 4000

    def __post_init__(self):
        if not 0 <= self.nonce < 2**64:
            raise ValueError("nonce must fit in 64 bits")
        if self.lifetime_ms <= 0:
            raise ValueError("lifetime_ms must be positive")


@dataclass(frozen=True)
class Data:
    """Signed content packet.

    origin_tag names the node that served the packet. It is carried on the
    wire (consumers use it for provenance accounting) but is simulation
    metadata: it is excluded from the signature, so re-stamping it never
    invalidates a packet.
    """

    name: Name
    content: bytes
    signature: bytes
    origin_tag: str = ""

    def __post_init__(self):
        if len(self.signature) != 32:
            raise ValueError("signature must be 32 bytes")

    def verify(self) -> bool:
        return self.signature == compute_signature(self.name, self.content)


@dataclass(frozen=True)
class Nack:
    name: Name
    nonce: int
    reason: NackReason

    def __post_init__(self):
        if not 0 <= self.nonce < 2**64:
            raise ValueError("nonce must fit in 64 bits")


Packet = Interest | Data | Nack

_TAG_INTEREST = 0x01
_TAG_DATA = 0x02
_TAG_NACK = 0x03


def _encode_name(name: Name) -> bytes:
    parts = [struct.pack(">H", len(name.components))]
    for c in name.components:
        parts.append(struct.pack(">H", len(c)))
        parts.append(c)
    return b"".join(parts)


def compute_signature(name: Name, content: bytes) -> bytes:
    """Stand-in for a real signature: digest over the name wire form and
    the content, nothing else."""
    h = hashlib.sha256()
    h.update(_encode_name(name))
    h.update(content)
    return h.digest()


def make_data(name: Name, content: bytes, origin_tag: str = "") -> Data:
    return Data(name, content, compute_signature(name, content), origin_tag)


def encode_wire(pkt: Packet) -> bytes:
    if isinstance(pkt, Interest):
        return b"".join(
            (
                bytes([_TAG_INTEREST]),
                _encode_name(pkt.name),
                struct.pack(">QI", pkt.nonce, pkt.lifetime_ms),
            )
        )
    if isinstance(pkt, Data):
        origin = pkt.origin_tag.encode("utf-8")
        return b"".join(
            (
                bytes([_TAG_DATA]),
                _encode_name(pkt.name),
                struct.pack(">I", len(pkt.content)),
                pkt.content,
                pkt.signature,
                struct.pack(">H", len(origin)),
                origin,
            )
        )
    if isinstance(pkt, Nack):
        return b"".join(
            (
                bytes([_TAG_NACK]),
                _encode_name(pkt.name),
                struct.pack(">QB", pkt.nonce, int(pkt.reason)),
            )
        )
    raise TypeError("not a packet: %r" % (pkt,))


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DecodeError("truncated packet")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def done(self):
        if self.pos != len(self.buf):
            raise DecodeError("trailing bytes after packet")


def _decode_name(r: _Reader) -> Name:
    count = r.u16()
    comps = []
    for _ in range(count):
        n = r.u16()
        if n == 0:
            raise DecodeError("empty name component")
        comps.append(r.take(n))
    return Name(tuple(comps))


def decode_wire(wire: bytes) -> Packet:
    """Strict inverse of encode_wire. Raises DecodeError on truncation,
    unknown tags, or trailing bytes; never raises anything else on
    arbitrary input."""
    r = _Reader(wire)
    tag = r.u8()
    if tag == _TAG_INTEREST:
        name = _decode_name(r)
        nonce = r.u64()
        lifetime = r.u32()
        r.done()
        if lifetime == 0:
            raise DecodeError("zero interest lifetime")
        return Interest(name, nonce, lifetime)
    if tag == _TAG_DATA:
        name = _decode_name(r)
        clen = r.u32()
        content = r.take(clen)
        sig = r.take(32)
        olen = r.u16()
        origin = r.take(olen)
        r.done()
        try:
            origin_s = origin.decode("utf-8")
        except UnicodeDecodeError:
            raise DecodeError("origin tag is not utf-8") from None
        return Data(name, content, sig, origin_s)
    if tag == _TAG_NACK:
        name = _decode_name(r)
        nonce = r.u64()
        reason = r.u8()
        r.done()
        try:
            return Nack(name, nonce, NackReason(reason))
        except ValueError:
            raise DecodeError("unknown nack reason %d" % reason) from None
    raise DecodeError("unknown packet tag 0x%02x" % tag)
