"""Producer and consumer behavior over small live networks: catalog walk,
windowing, retry/abort, provenance attribution, re-serving, and pacing."""

import pytest

from ndnswarm.apps import ConsumerApp, ProducerApp, generate_files
from ndnswarm.packets import Interest, name_from_uri
from ndnswarm.simnet import MS, SECOND, LinkSpec, Network, NodeSpec, Topology
from ndnswarm.torrent import build_torrent, encode_manifest, encode_torrent_file

NAME = name_from_uri("/swarm/x")


def pair_net(**net_kw):
    topo = Topology(
        nodes=[NodeSpec("a"), NodeSpec("b")],
        links=[LinkSpec("l1", "a", "b", 100_000_000, 1.0, 64)],
    )
    return Network(topo, **net_kw)


def wire(node, app):
    app.app_face = node.add_app_face(app)
    return app


def start_at(net, app, at_s):
    net.schedule(int(at_s * SECOND), app.start)


def test_generate_files_deterministic():
    sizes = [100, 50]
    first = generate_files(7, NAME, sizes)
    again = generate_files(7, NAME, sizes)
    other = generate_files(8, NAME, sizes)

    assert [len(f) for f in first] == sizes
    assert first == again
    assert first != other
    assert first[0] != first[1][:50] + first[1][:50]  # files differ pairwise


def test_producer_store_matches_catalog_layout():
    files = generate_files(7, NAME, [10, 10])
    net = pair_net()
    producer = wire(net.nodes["b"], ProducerApp(net.nodes["b"], NAME, files, 4))

    tf, manifests, packets = build_torrent(NAME, files, 4)
    expected = len(encode_torrent_file(tf, 4))
    expected += sum(len(encode_manifest(m, 4)) for m in manifests)
    expected += len(packets)
    assert len(producer.store) == expected
    assert producer.catalog_size == len(packets) == 6


def test_producer_counts_unmatched():
    files = generate_files(7, NAME, [10])
    net = pair_net()
    producer = wire(net.nodes["b"], ProducerApp(net.nodes["b"], NAME, files, 4))
    producer.from_network(0, Interest(name_from_uri("/swarm/x/nope"), 1), 0)

    assert producer.interests_unmatched == 1
    assert producer.interests_answered == 0


def test_consumer_rejects_bad_window():
    net = pair_net()
    with pytest.raises(ValueError):
        ConsumerApp(net.nodes["a"], NAME, 512, window=0)


def test_full_download_and_reassembly():
    files = generate_files(7, NAME, [2048, 2048])
    net = pair_net()
    producer = wire(net.nodes["b"], ProducerApp(net.nodes["b"], NAME, files, 512))
    consumer = wire(
        net.nodes["a"],
        ConsumerApp(net.nodes["a"], NAME, 512, window=8, record_stats=True),
    )
    start_at(net, producer, 0.0)
    start_at(net, consumer, 0.01)
    net.run_until(3 * SECOND)

    assert consumer.complete
    assert consumer.completed_ns is not None
    assert not consumer.aborted
    assert consumer.in_flight == {}
    assert consumer.retries_issued == 0

    # every data packet came from the seeder and re-stamped with its id
    assert consumer.provenance == {"b": 8}
    assert len(consumer.arrivals) == 8

    # stored packets concatenate back to the original files, catalog order
    blob = b"".join(
        consumer.store[n.components].content for n in consumer.tm.catalog
    )
    assert blob == b"".join(files)

    # catalog segments plus one answer per data packet, no retransmits
    assert producer.interests_answered == len(consumer.store)

    summary = consumer.stats.summary(net.scheduler.now_ns)
    assert summary["average_latency_ms"] > 0
    assert summary["download_rate_bps"] > 0
    assert summary["estimated_completion_ms"] == 0.0


def test_window_is_never_exceeded():
    class WindowWatch(ConsumerApp):
        max_in_flight = 0

        def _request(self, name, now_ns, retries):
            super()._request(name, now_ns, retries)
            self.max_in_flight = max(self.max_in_flight, len(self.in_flight))

    files = generate_files(7, NAME, [2048, 2048])
    net = pair_net()
    producer = wire(net.nodes["b"], ProducerApp(net.nodes["b"], NAME, files, 512))
    consumer = wire(net.nodes["a"], WindowWatch(net.nodes["a"], NAME, 512, window=2))
    start_at(net, producer, 0.0)
    start_at(net, consumer, 0.01)
    net.run_until(3 * SECOND)

    assert consumer.complete
    assert consumer.max_in_flight == 2


def test_abort_after_retry_limit_without_route():
    topo = Topology(nodes=[NodeSpec("a")], links=[])
    net = Network(topo)
    consumer = wire(
        net.nodes["a"],
        ConsumerApp(net.nodes["a"], NAME, 512, window=4, retry_limit=2),
    )
    start_at(net, consumer, 0.0)
    net.run_until(10 * SECOND)

    # every request is nacked NO_ROUTE; backoff, retry, then give up
    assert consumer.aborted
    assert not consumer.complete
    assert consumer.retries_issued == 2
    assert consumer.in_flight == {}


def test_completed_consumer_serves_and_lowers_latency():
    # b seeds, a leeches then re-announces; c joins later one hop from a.
    # Interests from c land on a's forwarder with the seeder as its current
    # upstream, so the local store only takes over after probes sample the
    # app face and the lower-delay switch fires. From then on c is served
    # out of a's store.
    topo = Topology(
        nodes=[NodeSpec("c"), NodeSpec("a"), NodeSpec("b")],
        links=[
            LinkSpec("l_ca", "c", "a", 100_000_000, 1.0, 64),
            LinkSpec("l_ab", "a", "b", 100_000_000, 1.0, 64),
        ],
    )
    net = Network(topo)
    files = generate_files(7, NAME, [262144, 262144])  # 1024 data packets
    producer = wire(net.nodes["b"], ProducerApp(net.nodes["b"], NAME, files, 512))
    first = wire(net.nodes["a"], ConsumerApp(net.nodes["a"], NAME, 512, window=32))
    late = wire(net.nodes["c"], ConsumerApp(net.nodes["c"], NAME, 512, window=32))
    start_at(net, producer, 0.0)
    start_at(net, first, 0.1)
    start_at(net, late, 3.0)
    net.run_until(20 * SECOND)

    assert first.complete
    assert first.announced
    assert late.complete

    switches = net.nodes["a"].forwarder.switch_log
    assert any(reason == "lower-delay" for *_rest, reason in switches)
    assert first.serve_answered > 0
    assert late.provenance["a"] > late.provenance.get("b", 0)
    # everything c holds is bit-identical to the source
    blob = b"".join(late.store[n.components].content for n in late.tm.catalog)
    assert blob == b"".join(files)


def test_pacing_spaces_interest_departures():
    files = generate_files(7, NAME, [2048, 2048])
    net = pair_net(record_events=True)
    producer = wire(net.nodes["b"], ProducerApp(net.nodes["b"], NAME, files, 512))
    consumer = wire(
        net.nodes["a"],
        ConsumerApp(net.nodes["a"], NAME, 512, window=8, pace_interval_ms=10),
    )
    start_at(net, producer, 0.0)
    start_at(net, consumer, 0.01)
    net.run_until(5 * SECOND)

    assert consumer.complete
    sends = [
        e[0] for e in net.events
        if e[1] == "send" and e[3] == "a->b" and e[4] == "Interest"
    ]
    assert len(sends) >= 2
    gaps = [b - a for a, b in zip(sends, sends[1:])]
    assert min(gaps) >= 10 * MS
