"""Radio-link simulation: packet framing, bounded ring buffer with a
drop-oldest overflow policy, a credit-based channel with an effective payload
throughput cap and scheduled outage windows, and the receiving dongle.

Wire format (the interop surface between device and host):
  header, 8 bytes big-endian: type u8 | seq u16 | timestamp_ms u32 | config_id u8
  payload, up to 240 bytes:
    RAW_EEG     frames packed back-to-back; one frame = 3 bytes per active
                channel, big-endian 24-bit two's complement, channel-major
    RAW_PPG     one frame = 4 bytes per enabled LED (RED before IR),
                big-endian u32 with the 19-bit code right-aligned
    RAW_MIXED   EEG bytes then PPG bytes per frame (PPG held at its own rate)
    EDGE_RESULT big-endian float32 values; summary mode = 1 per channel,
                bin mode = 12 per channel (4 stimuli x 3 harmonics, split
                across packets when longer than the payload cap)
    CMD/ACK     single info byte plus big-endian float32 parameters
"""

from __future__ import annotations

import enum
import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

MAX_PAYLOAD_BYTES = 240
RING_CAPACITY = 15

HEADER = struct.Struct(">BHIB")
SEQ_MOD = 1 << 16


class PacketType(enum.IntEnum):
    RAW_EEG = 1
    RAW_PPG = 2
    RAW_MIXED = 3
    EDGE_RESULT = 4
    CMD = 5
    ACK = 6


@dataclass
class Packet:
    type: PacketType
    seq: int
    timestamp_ms: int
    config_id: int
    payload: bytes

    def __post_init__(self):
        if len(self.payload) > MAX_PAYLOAD_BYTES:
            raise ValueError(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD_BYTES}")

    @property
    def payload_bits(self) -> int:
        return len(self.payload) * 8

    def to_bytes(self) -> bytes:
        return HEADER.pack(int(self.type), self.seq % SEQ_MOD,
                           self.timestamp_ms & 0xFFFFFFFF, self.config_id & 0xFF) + self.payload

    @staticmethod
    def from_bytes(data: bytes) -> "Packet":
        t, seq, ts, cfg_id = HEADER.unpack(data[:HEADER.size])
        return Packet(PacketType(t), seq, ts, cfg_id, data[HEADER.size:])


def hexdump(packet: Packet) -> str:
    raw = packet.to_bytes()
    lines = [f"{packet.type.name} seq={packet.seq} t={packet.timestamp_ms}ms "
             f"cfg={packet.config_id} len={len(packet.payload)}"]
    for off in range(0, len(raw), 16):
        chunk = raw[off:off + 16]
        hexpart = " ".join(f"{b:02x}" for b in chunk)
        lines.append(f"  {off:04x}  {hexpart}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Sample packing
# ---------------------------------------------------------------------------

def pack_i24(values: np.ndarray) -> bytes:
    """Signed 24-bit big-endian two's complement."""
    v = np.asarray(values, dtype=np.int64)
    if np.any(v < -(1 << 23)) or np.any(v > (1 << 23) - 1):
        raise ValueError("value out of 24-bit range")
    u = np.where(v < 0, v + (1 << 24), v)
    out = np.empty((len(u), 3), dtype=np.uint8)
    out[:, 0] = (u >> 16) & 0xFF
    out[:, 1] = (u >> 8) & 0xFF
    out[:, 2] = u & 0xFF
    return out.tobytes()

def unpack_i24(data: bytes) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
    u = (raw[:, 0] << 16) | (raw[:, 1] << 8) | raw[:, 2]
    return np.where(u >= (1 << 23), u - (1 << 24), u)

def pack_u32(values: np.ndarray) -> bytes:
    return np.asarray(values, dtype=">u4").tobytes()

def unpack_u32(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype=">u4").astype(np.int64)

def pack_f32(values: np.ndarray) -> bytes:
    return np.asarray(values, dtype=">f4").tobytes()

def unpack_f32(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype=">f4").astype(np.float32)


def eeg_frame_bytes(channels: int) -> int:
    return 3 * channels

def mixed_frame_bytes(channels: int, n_leds: int) -> int:
    return 3 * channels + 4 * n_leds

def frames_per_packet(frame_bytes: int) -> int:
    if frame_bytes <= 0:
        raise ValueError("frame size must be positive")
    return MAX_PAYLOAD_BYTES // frame_bytes


def frame_raw(frames, packet_type: PacketType, frame_bytes: int, seq_start: int,
              timestamp_ms: int, config_id: int) -> list[Packet]:
    """Pack pre-encoded frame byte strings into as many full packets as they
    fill (callers hold the remainder for the next rollover)."""
    per_packet = frames_per_packet(frame_bytes)
    packets = []
    for i in range(0, len(frames) - len(frames) % per_packet, per_packet):
        payload = b"".join(frames[i:i + per_packet])
        packets.append(Packet(packet_type, (seq_start + len(packets)) % SEQ_MOD,
                              timestamp_ms, config_id, payload))
    return packets


def encode_eeg_frame(codes: np.ndarray) -> bytes:
    return pack_i24(codes)

def encode_mixed_frame(eeg_codes: np.ndarray, ppg_codes: np.ndarray) -> bytes:
    return pack_i24(eeg_codes) + pack_u32(ppg_codes)

def encode_ppg_frame(ppg_codes: np.ndarray) -> bytes:
    return pack_u32(ppg_codes)


def unframe_raw(packet: Packet, channels: int, n_leds: int = 0) -> np.ndarray:
    """Decode a raw packet back to per-frame code arrays.

    RAW_EEG -> (frames, channels); RAW_PPG -> (frames, n_leds);
    RAW_MIXED -> (frames, channels + n_leds) with EEG columns first.
    """
    data = packet.payload
    if packet.type is PacketType.RAW_EEG:
        fb = eeg_frame_bytes(channels)
        count = len(data) // fb
        return unpack_i24(data[:count * fb]).reshape(count, channels)
    if packet.type is PacketType.RAW_PPG:
        fb = 4 * n_leds
        count = len(data) // fb
        return unpack_u32(data[:count * fb]).reshape(count, n_leds)
    if packet.type is PacketType.RAW_MIXED:
        fb = mixed_frame_bytes(channels, n_leds)
        count = len(data) // fb
        out = np.zeros((count, channels + n_leds), dtype=np.int64)
        for i in range(count):
            frame = data[i * fb:(i + 1) * fb]
            out[i, :channels] = unpack_i24(frame[:3 * channels])
            out[i, channels:] = unpack_u32(frame[3 * channels:])
        return out
    raise ValueError(f"not a raw data packet: {packet.type}")


def frame_edge(values: np.ndarray, seq_start: int, timestamp_ms: int,
               config_id: int) -> list[Packet]:
    """Pack edge-result float32 values (channel-major) into one or more
    packets, splitting at the payload cap."""
    blob = pack_f32(np.asarray(values, dtype=np.float32).reshape(-1))
    packets = []
    for off in range(0, len(blob), MAX_PAYLOAD_BYTES):
        packets.append(Packet(PacketType.EDGE_RESULT, (seq_start + len(packets)) % SEQ_MOD,
                              timestamp_ms, config_id, blob[off:off + MAX_PAYLOAD_BYTES]))
    return packets or [Packet(PacketType.EDGE_RESULT, seq_start % SEQ_MOD,
                              timestamp_ms, config_id, b"")]


def unframe_edge(packets: list[Packet]) -> np.ndarray:
    return unpack_f32(b"".join(p.payload for p in packets))


# ---------------------------------------------------------------------------
# Throughput arithmetic
# ---------------------------------------------------------------------------

DEFAULT_THROUGHPUT_BPS = 330_000


def required_throughput(eeg_channels: int, sample_rate: float, ppg_rate: float = 0,
                        n_leds: int = 0, edge: bool = False, hop_ms: float = 50,
                        values_per_channel: int = 1) -> float:
    """Application-level offered bit rate.

    Streaming: channels x 24 bits x rate, plus 32 bits per LED sample when a
    pulse sensor runs alongside. Edge: 32-bit results per channel per hop.
    """
    if edge:
        return eeg_channels * 32 * values_per_channel * (1000.0 / hop_ms)
    return eeg_channels * 24 * sample_rate + n_leds * 32 * ppg_rate


def reduction_ratio(stream_bps: float, edge_bps: float) -> float:
    if stream_bps <= 0:
        raise ValueError("streaming rate must be positive")
    return 1.0 - edge_bps / stream_bps


def command_roundtrip_us(channel: "ChannelModel") -> float:
    """Host-to-device command plus the returning ACK on the loss-free
    control path: one per-packet latency each way."""
    return 2.0 * channel.per_packet_latency_us


# ---------------------------------------------------------------------------
# Ring buffer, channel, dongle
# ---------------------------------------------------------------------------

class RingBuffer:
    """Bounded FIFO of packets; overflow evicts the oldest entry so the most
    recent data survives an interference ride-through."""

    def __init__(self, capacity: int = RING_CAPACITY):
        self.capacity = capacity
        self._q = deque()
        self.drop_count = 0

    def __len__(self) -> int:
        return len(self._q)

    @property
    def occupancy(self) -> int:
        return len(self._q)

    def enqueue(self, packet: Packet) -> None:
        if len(self._q) >= self.capacity:
            self._q.popleft()
            self.drop_count += 1
        self._q.append(packet)

    def head(self) -> Packet | None:
        return self._q[0] if self._q else None

    def pop(self) -> Packet:
        return self._q.popleft()


@dataclass
class ChannelModel:
    """Payload-throughput-capped pipe with scheduled outage windows."""

    max_payload_throughput: float = DEFAULT_THROUGHPUT_BPS
    outages: list = field(default_factory=list)  # (start_us, end_us), non-overlapping
    per_packet_latency_us: float = 2500.0

    def __post_init__(self):
        if self.max_payload_throughput <= 0:
            raise ValueError("throughput must be positive")
        spans = sorted(self.outages)
        for (s0, e0), (s1, _) in zip(spans, spans[1:]):
            if s1 < e0:
                raise ValueError("outage windows must not overlap")
        self.outages = spans

    def usable_us(self, start_us: float, dt_us: float) -> float:
        """Portion of [start, start+dt) outside any outage window."""
        end = start_us + dt_us
        blocked = 0.0
        for s, e in self.outages:
            blocked += max(0.0, min(end, e) - max(start_us, s))
        return dt_us - blocked


@dataclass
class Delivery:
    time_us: float
    packet: Packet


class Link:
    """Sender-side transmit machinery: ring buffer drained through the
    channel with bit credit accrued over usable (non-outage) time."""

    def __init__(self, channel: ChannelModel | None = None, capacity: int = RING_CAPACITY):
        self.channel = channel or ChannelModel()
        self.ring = RingBuffer(capacity)
        self._credit_bits = 0.0
        self.emitted = 0
        self.delivered = 0
        self.delivered_payload_bits = 0

    @property
    def dropped(self) -> int:
        return self.ring.drop_count

    def enqueue(self, packet: Packet) -> None:
        self.emitted += 1
        self.ring.enqueue(packet)

    def transmit_step(self, now_us: float, dt_us: float):
        """Deliver head-of-line packets in FIFO order within this slice's
        credit. Returns (deliveries, radio_active_us)."""
        if dt_us <= 0:
            raise ValueError("dt must be positive")
        usable = self.channel.usable_us(now_us, dt_us)
        self._credit_bits += self.channel.max_payload_throughput * usable / 1e6
        sent_bits = 0
        out = []
        while self.ring.occupancy:
            head = self.ring.head()
            if head.payload_bits > self._credit_bits:
                break
            self.ring.pop()
            self._credit_bits -= head.payload_bits
            sent_bits += head.payload_bits
            out.append(Delivery(now_us + dt_us + self.channel.per_packet_latency_us, head))
            self.delivered += 1
            self.delivered_payload_bits += head.payload_bits
        if not self.ring.occupancy:
            self._credit_bits = 0.0  # idle credit does not bank into bursts
        radio_active_us = sent_bits / self.channel.max_payload_throughput * 1e6
        return out, radio_active_us

    def in_flight(self) -> int:
        return self.ring.occupancy

    def conservation_ok(self) -> bool:
        return self.emitted == self.delivered + self.dropped + self.ring.occupancy


@dataclass
class LossEvent:
    count: int
    expected_seq: int
    got_seq: int

@dataclass
class DataEvent:
    packet: Packet

@dataclass
class AckEvent:
    packet: Packet


class Dongle:
    """Receiver side: sequence-continuity tracking per packet stream."""

    def __init__(self):
        self._next_seq: dict[PacketType, int] = {}
        self.loss_total = 0
        self.received = 0

    def receive(self, packet: Packet) -> list:
        events = []
        if packet.type is PacketType.ACK:
            self.received += 1
            return [AckEvent(packet)]
        expected = self._next_seq.get(packet.type)
        if expected is not None and packet.seq != expected:
            gap = (packet.seq - expected) % SEQ_MOD
            self.loss_total += gap
            events.append(LossEvent(count=gap, expected_seq=expected, got_seq=packet.seq))
        self._next_seq[packet.type] = (packet.seq + 1) % SEQ_MOD
        self.received += 1
        events.append(DataEvent(packet))
        return events
