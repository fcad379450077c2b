"""Name/URI handling and the wire codec."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from ndnswarm.packets import (
    Data,
    DecodeError,
    Interest,
    MalformedUri,
    Nack,
    NackReason,
    Name,
    compute_signature,
    decode_wire,
    encode_wire,
    make_data,
    name_from_uri,
)


# -- names -------------------------------------------------------------------


def test_uri_roundtrip_simple():
    n = name_from_uri("/swarm/alpha/file0/p12")
    assert n.components == (b"swarm", b"alpha", b"file0", b"p12")
    assert n.to_uri() == "/swarm/alpha/file0/p12"


def test_uri_escaping():
    n = Name((b"a/b", b"\x00\xff", b"sp ace"))
    uri = n.to_uri()
    assert uri == "/a%2Fb/%00%FF/sp%20ace"
    assert name_from_uri(uri) == n


def test_root_name():
    assert Name(()).to_uri() == "/"
    assert name_from_uri("/") == Name(())
    assert len(Name(())) == 0


@pytest.mark.parametrize(
    "bad",
    ["", "noslash", "//", "/a//b", "/a/", "/a%G1", "/a%1", "/caféሴ"],
)
def test_malformed_uris(bad):
    with pytest.raises(MalformedUri):
        name_from_uri(bad)


def test_empty_component_rejected():
    with pytest.raises(ValueError):
        Name((b"a", b""))


def test_prefix_and_child():
    base = name_from_uri("/swarm/alpha")
    child = base.child(b"file0", b"p3")
    assert base.is_prefix_of(child)
    assert base.is_prefix_of(base)
    assert not child.is_prefix_of(base)
    assert Name(()).is_prefix_of(child)
    assert child[:2] == base
    assert child[3] == b"p3"


def test_name_ordering():
    a = name_from_uri("/a/b")
    b = name_from_uri("/a/c")
    assert a < b
    assert a <= a
    assert sorted([b, a]) == [a, b]


def test_name_hash_is_content_based():
    # hashes must not depend on interpreter hash salting
    assert hash(name_from_uri("/x/y")) == hash(Name((b"x", b"y")))


@given(
    st.lists(st.binary(min_size=1, max_size=24), min_size=0, max_size=12)
)
def test_uri_roundtrip_property(comps):
    n = Name(tuple(comps))
    assert name_from_uri(n.to_uri()) == n


# -- wire format: frozen byte layouts ---------------------------------------


def test_interest_wire_bytes():
    """Hand-assembled reference encoding."""
    wire = encode_wire(Interest(Name((b"a",)), nonce=1, lifetime_ms=4000))
    assert wire == (
        b"\x01"  # packet tag
        + b"\x00\x01"  # 1 name component
        + b"\x00\x01a"  # component length + bytes
        + b"\x00\x00\x00\x00\x00\x00\x00\x01"  # nonce
        + b"\x00\x00\x0f\xa0"  # lifetime 4000 ms
    )
    assert len(wire) == 18


def test_data_wire_bytes():
    d = make_data(Name((b"a",)), b"hi", origin_tag="n1")
    wire = encode_wire(d)
    expected = (
        b"\x02"
        + b"\x00\x01" + b"\x00\x01a"
        + b"\x00\x00\x00\x02" + b"hi"
        + d.signature
        + b"\x00\x02" + b"n1"
    )
    assert wire == expected
    assert len(wire) == 1 + 5 + 4 + 2 + 32 + 2 + 2


def test_nack_wire_bytes():
    wire = encode_wire(Nack(Name((b"a", b"bc")), nonce=7, reason=NackReason.NO_ROUTE))
    assert wire == (
        b"\x03"
        + b"\x00\x02" + b"\x00\x01a" + b"\x00\x02bc"
        + b"\x00\x00\x00\x00\x00\x00\x00\x07"
        + b"\x00"
    )
    assert len(wire) == 19


def test_wire_length_formula():
    # Interest: 1 + (2 + sum(2+len)) + 8 + 4
    name = Name((b"swarm", b"alpha", b"p0"))
    enc = encode_wire(Interest(name, nonce=0))
    assert len(enc) == 1 + 2 + (2 + 5) + (2 + 5) + (2 + 2) + 12
    # Data: 1 + name + 4 + content + 32 + 2 + origin
    d = make_data(name, b"x" * 100, origin_tag="peer1")
    assert len(encode_wire(d)) == 1 + 2 + 7 + 7 + 4 + 4 + 100 + 32 + 2 + 5


# -- roundtrips --------------------------------------------------------------


def _random_name(rng):
    return Name(
        tuple(
            rng.randbytes(rng.randint(1, 20))
            for _ in range(rng.randint(1, 6))
        )
    )


def _random_packet(rng):
    kind = rng.randrange(3)
    name = _random_name(rng)
    if kind == 0:
        return Interest(name, rng.getrandbits(64), rng.randint(1, 60000))
    if kind == 1:
        return make_data(name, rng.randbytes(rng.randint(0, 200)),
                         origin_tag=rng.choice(["", "peer1", "cache:r2"]))
    return Nack(name, rng.getrandbits(64), NackReason(rng.randrange(3)))


def test_roundtrip_seeded_bulk():
    rng = random.Random(0x5eed)
    for _ in range(10_000):
        pkt = _random_packet(rng)
        assert decode_wire(encode_wire(pkt)) == pkt


@given(st.binary(max_size=64))
@settings(max_examples=300)
def test_decode_arbitrary_bytes_never_panics(blob):
    try:
        pkt = decode_wire(blob)
    except DecodeError:
        return
    assert encode_wire(pkt) == blob


def test_decode_mutated_encodings_never_panic():
    """Truncations, bit flips, and suffixes of valid packets must decode
    cleanly or raise DecodeError, nothing else."""
    rng = random.Random(0xfa22)
    for _ in range(2_000):
        wire = bytearray(encode_wire(_random_packet(rng)))
        op = rng.randrange(3)
        if op == 0 and len(wire) > 1:
            wire = wire[: rng.randrange(len(wire))]
        elif op == 1:
            wire[rng.randrange(len(wire))] ^= 1 << rng.randrange(8)
        else:
            wire += rng.randbytes(rng.randint(1, 4))
        try:
            decode_wire(bytes(wire))
        except DecodeError:
            pass


@pytest.mark.parametrize(
    "wire",
    [
        b"",  # empty
        b"\x09\x00\x00",  # unknown tag
        b"\x01\x00\x01\x00\x01a" + b"\x00" * 8 + b"\x00\x00\x00\x00",  # zero lifetime
        b"\x01\x00\x01\x00\x00" + b"\x00" * 12,  # empty name component
        encode_wire(Interest(Name((b"a",)), 1)) + b"!",  # trailing bytes
        b"\x03\x00\x00" + b"\x00" * 8 + b"\x07",  # unknown nack reason
    ],
)
def test_decode_rejects(wire):
    with pytest.raises(DecodeError):
        decode_wire(wire)


# -- signatures ---------------------------------------------------------------


def test_signature_covers_name_and_content():
    d = make_data(name_from_uri("/t/file0/p0"), b"payload")
    assert d.verify()
    assert not Data(d.name, b"payload!", d.signature).verify()
    assert not Data(name_from_uri("/t/file0/p1"), d.content, d.signature).verify()


def test_origin_tag_outside_signature():
    """Re-stamping the serving node must never invalidate a packet."""
    from dataclasses import replace

    d = make_data(name_from_uri("/t/file0/p0"), b"payload", origin_tag="peer4")
    for tag in ("", "peer1", "cache:r3"):
        assert replace(d, origin_tag=tag).verify()
    assert compute_signature(d.name, d.content) == d.signature


def test_origin_tag_survives_wire():
    d = make_data(name_from_uri("/t/p0"), b"x", origin_tag="cache:r1")
    assert decode_wire(encode_wire(d)).origin_tag == "cache:r1"


def test_bad_signature_length_rejected():
    with pytest.raises(ValueError):
        Data(Name((b"a",)), b"", b"short")


def test_nonce_range_checked():
    with pytest.raises(ValueError):
        Interest(Name((b"a",)), nonce=2**64)
    with pytest.raises(ValueError):
        Interest(Name((b"a",)), nonce=-1)
