"""Application sources and sinks: CBR video, on/off VoIP, loss and MOS metrics."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .engine import Simulator


@dataclass
class AppPacket:
    flow_id: str
    seq: int
    size_bits: int
    sent_at: float
    spurt: int = 0  # talk-spurt index, VoIP only


@dataclass
class VoipConfig:
    packetization_interval: float = 0.020
    playout_delay: float = 0.005
    spurt_mean: float = 1.0
    silence_mean: float = 1.35
    codec_rate: float = 64000.0

    def __post_init__(self):
        for name in ("packetization_interval", "playout_delay", "spurt_mean",
                     "silence_mean", "codec_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class FlowStats:
    flow_id: str
    sent: int = 0
    received: int = 0
    late: int = 0
    lost: int = 0
    delays: list[float] = field(default_factory=list)
    received_seqs: set[int] = field(default_factory=set)
    dropped_seqs: set[int] = field(default_factory=set)

    @property
    def in_flight(self) -> int:
        return self.sent - self.received - self.late - self.lost

    @property
    def mean_delay(self) -> float:
        return sum(self.delays) / len(self.delays) if self.delays else 0.0


@dataclass
class MosReport:
    r_factor: float
    mos: float
    mean_delay: float
    effective_loss: float


def packet_loss_rate(stats: FlowStats) -> float:
    """Fraction of sent packets not received in time; late packets count as lost."""
    if stats.sent == 0:
        raise ValueError(f"flow {stats.flow_id}: no packets sent")
    return (stats.sent - stats.received) / stats.sent


def compute_mos(stats: FlowStats) -> MosReport:
    """Simplified ITU-T G.107 E-model with G.711 impairment defaults."""
    loss = packet_loss_rate(stats)
    mean_delay = stats.mean_delay
    d_ms = mean_delay * 1000.0
    i_d = 0.024 * d_ms
    if d_ms > 177.3:
        i_d += 0.11 * (d_ms - 177.3)
    ie, bpl = 0.0, 25.1
    ppl = loss * 100.0
    ie_eff = ie + (95.0 - ie) * ppl / (ppl + bpl)
    r = 93.2 - i_d - ie_eff
    mos = 1.0 + 0.035 * r + 7e-6 * r * (r - 60.0) * (100.0 - r)
    mos = min(4.5, max(1.0, mos))
    return MosReport(r, mos, mean_delay, loss)


class VideoSource:
    """Constant-bit-rate stream: one packet of packet_bits every packet_bits/rate."""

    def __init__(self, sim: Simulator, flow_id: str, rate_bps: float, packet_bits: int,
                 emit: Callable[[AppPacket], None], start: float = 0.0,
                 stop: Optional[float] = None):
        if rate_bps <= 0:
            raise ValueError("rate must be > 0")
        self.sim = sim
        self.flow_id = flow_id
        self.interval = packet_bits / rate_bps
        self.packet_bits = packet_bits
        self.emit = emit
        self.start_at = start
        self.stop = stop
        self.seq = 0

    def start(self) -> None:
        self.sim.schedule_at(self.start_at, self._tick, 0)

    def _tick(self, k: int) -> None:
        t = self.start_at + k * self.interval
        if self.stop is not None and t >= self.stop:
            return
        self.emit(AppPacket(self.flow_id, self.seq, self.packet_bits, t))
        self.seq += 1
        self.sim.schedule_at(self.start_at + (k + 1) * self.interval, self._tick, k + 1)


class VoipSource:
    """On/off voice: exponentially distributed talk spurts and silences."""

    def __init__(self, sim: Simulator, flow_id: str, cfg: VoipConfig,
                 rng: random.Random, emit: Callable[[AppPacket], None],
                 start: float = 0.0, stop: Optional[float] = None):
        self.sim = sim
        self.flow_id = flow_id
        self.cfg = cfg
        self.rng = rng
        self.emit = emit
        self.start_at = start
        self.stop = stop
        self.seq = 0
        self.spurt_idx = -1
        self.packet_bits = int(cfg.codec_rate * cfg.packetization_interval)

    def start(self) -> None:
        self.sim.schedule_at(self.start_at, self._begin_spurt)

    def _begin_spurt(self) -> None:
        if self.stop is not None and self.sim.now >= self.stop:
            return
        self.spurt_idx += 1
        duration = self.rng.expovariate(1.0 / self.cfg.spurt_mean)
        self._tick(self.sim.now, 0, self.sim.now + duration)

    def _tick(self, spurt_start: float, k: int, spurt_end: float) -> None:
        t = spurt_start + k * self.cfg.packetization_interval
        if t >= spurt_end or (self.stop is not None and t >= self.stop):
            silence = self.rng.expovariate(1.0 / self.cfg.silence_mean)
            self.sim.schedule_at(t + silence, self._begin_spurt)
            return
        self.emit(AppPacket(self.flow_id, self.seq, self.packet_bits, t,
                            spurt=self.spurt_idx))
        self.seq += 1
        self.sim.schedule_at(spurt_start + (k + 1) * self.cfg.packetization_interval,
                             self._tick, spurt_start, k + 1, spurt_end)


class Sink:
    """Receiver-side classification into received / late / duplicate.

    VoIP packets are late when their one-way delay exceeds the playout budget:
    the minimum delay observed over the flow's first talk spurt plus the fixed
    playout delay. Video has no deadline.
    """

    def __init__(self, stats: FlowStats, kind: str, playout_delay: float = 0.005):
        self.stats = stats
        self.kind = kind
        self.playout_delay = playout_delay
        self._budget: Optional[float] = None
        self._first_spurt_min: Optional[float] = None
        self.duplicates = 0

    def on_receive(self, pkt: AppPacket, now: float) -> str:
        if pkt.seq in self.stats.received_seqs:
            self.duplicates += 1
            return "duplicate"
        self.stats.received_seqs.add(pkt.seq)
        delay = now - pkt.sent_at
        if self.kind != "voip":
            self.stats.received += 1
            self.stats.delays.append(delay)
            return "received"
        if pkt.spurt == 0:
            if self._first_spurt_min is None or delay < self._first_spurt_min:
                self._first_spurt_min = delay
            self.stats.received += 1
            self.stats.delays.append(delay)
            return "received"
        if self._budget is None:
            self._budget = (self._first_spurt_min if self._first_spurt_min is not None
                            else delay) + self.playout_delay
        if delay <= self._budget:
            self.stats.received += 1
            self.stats.delays.append(delay)
            return "received"
        self.stats.late += 1
        return "late"
