"""Framing bit-exactness, ring-buffer policy, throughput-cap behavior, and
dongle sequence accounting."""

import numpy as np
import pytest

from wearsim import link


def test_pack_i24_roundtrip_extremes():
    values = np.array([-(1 << 23), (1 << 23) - 1, 0, -1, 1, 123456, -654321])
    assert np.array_equal(link.unpack_i24(link.pack_i24(values)), values)
    with pytest.raises(ValueError):
        link.pack_i24(np.array([1 << 23]))


def test_packet_header_roundtrip_and_payload_cap():
    p = link.Packet(link.PacketType.RAW_EEG, 513, 123456, 7, b"\x01" * 240)
    q = link.Packet.from_bytes(p.to_bytes())
    assert (q.type, q.seq, q.timestamp_ms, q.config_id, q.payload) == \
        (p.type, p.seq, p.timestamp_ms, p.config_id, p.payload)
    with pytest.raises(ValueError):
        link.Packet(link.PacketType.RAW_EEG, 0, 0, 0, b"\x00" * 241)


def test_frame_arithmetic():
    assert link.eeg_frame_bytes(8) == 24
    assert link.frames_per_packet(24) == 10
    assert link.eeg_frame_bytes(1) == 3
    assert link.frames_per_packet(3) == 80
    assert link.mixed_frame_bytes(8, 2) == 32


def test_frame_raw_full_packets_only():
    frames = [link.pack_i24(np.arange(8) * (i + 1)) for i in range(25)]
    packets = link.frame_raw(frames, link.PacketType.RAW_EEG, 24, 0, 0, 0)
    assert len(packets) == 2  # 20 frames packed, 5 left for the caller
    assert all(len(p.payload) == 240 for p in packets)
    got = link.unframe_raw(packets[0], 8)
    assert np.array_equal(got[0], np.arange(8))
    assert link.frame_raw([], link.PacketType.RAW_EEG, 24, 0, 0, 0) == []


def test_eeg_framing_bit_exact_roundtrip_extremes():
    codes = np.array([[-(1 << 23), (1 << 23) - 1, 0, -1, 1, 2, -2, 42]])
    payload = link.pack_i24(codes[0])
    packet = link.Packet(link.PacketType.RAW_EEG, 0, 0, 0, payload)
    assert np.array_equal(link.unframe_raw(packet, 8), codes)


def test_edge_framing_sizes():
    one = link.frame_edge(np.arange(8, dtype=np.float32), 0, 0, 0)
    assert len(one) == 1 and len(one[0].payload) == 32
    single = link.frame_edge(np.arange(1, dtype=np.float32), 0, 0, 0)
    assert len(single[0].payload) == 4
    bins = link.frame_edge(np.arange(8 * 12, dtype=np.float32), 0, 0, 0)
    assert len(bins) == 2
    assert [len(p.payload) for p in bins] == [240, 144]
    values = link.unframe_edge(bins)
    assert np.array_equal(values, np.arange(96, dtype=np.float32))


def test_ring_buffer_drop_oldest():
    ring = link.RingBuffer()
    mk = lambda seq: link.Packet(link.PacketType.RAW_EEG, seq, 0, 0, b"x")
    for i in range(15):
        ring.enqueue(mk(i))
    assert ring.occupancy == 15 and ring.drop_count == 0
    ring.enqueue(mk(15))
    assert ring.occupancy == 15 and ring.drop_count == 1
    assert ring.head().seq == 1  # oldest evicted
    ring2 = link.RingBuffer()
    for i in range(40):
        ring2.enqueue(mk(i))
        ring2.pop()
    assert ring2.drop_count == 0


def _run_traffic(offered_pps, payload_bytes, seconds, channel=None):
    """Enqueue packets at a fixed rate and transmit in 1 ms steps."""
    lk = link.Link(channel or link.ChannelModel())
    deliveries = []
    period_us = 1e6 / offered_pps
    next_emit = 0.0
    seq = 0
    step = 1000.0
    t = 0.0
    while t < seconds * 1e6:
        while next_emit <= t:
            lk.enqueue(link.Packet(link.PacketType.RAW_EEG, seq % 65536, int(t // 1000),
                                   0, b"\x00" * payload_bytes))
            seq += 1
            next_emit += period_us
        out, _ = lk.transmit_step(t, step)
        deliveries.extend(out)
        t += step
    return lk, deliveries


def test_no_drops_at_192kbps_under_330kbps_cap():
    # 8 ch at 1 kSPS: 100 packets/s of 240-byte payloads = 192 kbps offered.
    lk, deliveries = _run_traffic(100, 240, 10)
    assert lk.dropped == 0
    assert lk.conservation_ok()
    seqs = [d.packet.seq for d in deliveries]
    assert seqs == sorted(seqs)


def test_sustained_drop_rate_at_768kbps():
    lk, _ = _run_traffic(400, 240, 30)
    rate = lk.dropped / lk.emitted
    expected = (768_000 - 330_000) / 768_000
    assert rate == pytest.approx(expected, rel=0.10)


def test_outage_within_ring_capacity_rides_through():
    ch = link.ChannelModel(outages=[(2e6, 2.12e6)])  # 120 ms < 15 packets @ 100/s
    lk, deliveries = _run_traffic(100, 240, 5, channel=ch)
    assert lk.dropped == 0
    seqs = [d.packet.seq for d in deliveries]
    assert seqs == sorted(seqs)


def test_outage_longer_than_ring_capacity_drops_but_keeps_order():
    ch = link.ChannelModel(outages=[(1e6, 1.5e6)])  # 50 arrivals vs 15 slots
    lk, deliveries = _run_traffic(100, 240, 5, channel=ch)
    assert lk.dropped > 0
    seqs = [d.packet.seq for d in deliveries]
    assert seqs == sorted(seqs)
    assert lk.conservation_ok()


def test_delivered_bits_respect_cap_over_any_second():
    lk, deliveries = _run_traffic(400, 240, 10)
    times = np.array([d.time_us for d in deliveries])
    bits = np.array([d.packet.payload_bits for d in deliveries])
    for start in np.arange(0, 9, 0.5) * 1e6:
        sel = (times >= start) & (times < start + 1e6)
        assert bits[sel].sum() <= 1.01 * 330_000


def test_transmit_step_validates_dt():
    lk = link.Link()
    with pytest.raises(ValueError):
        lk.transmit_step(0, 0)


def test_channel_model_validation():
    with pytest.raises(ValueError):
        link.ChannelModel(max_payload_throughput=0)
    with pytest.raises(ValueError):
        link.ChannelModel(outages=[(0, 10), (5, 15)])


def test_dongle_sequence_tracking():
    dongle = link.Dongle()
    mk = lambda seq: link.Packet(link.PacketType.RAW_EEG, seq, 0, 0, b"x")
    events = [e for s in range(1, 6) for e in dongle.receive(mk(s % 65536))]
    assert all(isinstance(e, link.DataEvent) for e in events)
    dongle2 = link.Dongle()
    dongle2.receive(mk(5))
    events = dongle2.receive(mk(8))
    assert isinstance(events[0], link.LossEvent)
    assert events[0].count == 2
    # wraparound
    dongle3 = link.Dongle()
    dongle3.receive(mk(65534))
    dongle3.receive(mk(65535))
    events = dongle3.receive(mk(1))  # skipped packet 0
    assert isinstance(events[0], link.LossEvent) and events[0].count == 1


def test_required_throughput_and_reduction():
    assert link.required_throughput(8, 1000) == 192_000
    assert link.required_throughput(8, 1000, edge=True, hop_ms=50) == 5120
    assert link.required_throughput(0, 1000) == 0
    assert link.required_throughput(8, 1000, ppg_rate=100, n_leds=2) == 192_000 + 6400
    red = link.reduction_ratio(192_000, 5120)
    assert round(red, 4) == 0.9733
    with pytest.raises(ValueError):
        link.reduction_ratio(0, 5120)


def test_hexdump_runs():
    p = link.Packet(link.PacketType.EDGE_RESULT, 3, 42, 1, bytes(range(20)))
    text = link.hexdump(p)
    assert "EDGE_RESULT" in text and "seq=3" in text


def test_command_roundtrip_latency():
    ch = link.ChannelModel(per_packet_latency_us=2500.0)
    assert link.command_roundtrip_us(ch) == 5000.0
