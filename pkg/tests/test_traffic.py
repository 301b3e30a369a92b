import pytest

from vhosim.engine import Simulator
from vhosim.traffic import (
    AppPacket,
    FlowStats,
    Sink,
    VideoSource,
    VoipConfig,
    VoipSource,
    compute_mos,
    packet_loss_rate,
)

# Frozen expectations for the simplified E-model, computed independently from
# R = 93.2 - Id(d) - Ie_eff(loss) and the cubic R-to-MOS mapping.
MOS_GRID = [
    # (loss_fraction, one_way_delay_s, expected_mos)
    (0.00, 0.0, 4.409285824),
    (0.00, 0.1, 4.358103616),
    (0.00, 0.3, 3.712088177627311),
    (0.05, 0.0, 3.9228389925748117),
    (0.05, 0.1, 3.822700993799875),
    (0.05, 0.3, 2.928955947326534),
    (0.20, 0.0, 2.6313200804901156),
    (0.20, 0.1, 2.505388316686555),
    (0.20, 0.3, 1.624530909220995),
]


def stats_for(loss, delay, sent=1000):
    received = round((1.0 - loss) * sent)
    s = FlowStats("f")
    s.sent = sent
    s.received = received
    s.lost = sent - received
    s.delays = [delay] * received
    return s


@pytest.mark.parametrize("loss,delay,want", MOS_GRID)
def test_mos_reference_grid(loss, delay, want):
    report = compute_mos(stats_for(loss, delay))
    assert abs(report.mos - want) < 0.01
    assert report.effective_loss == pytest.approx(loss)


def test_mos_clamps_at_total_loss():
    report = compute_mos(stats_for(1.0, 0.0))
    assert report.mos == pytest.approx(1.1768624064914488)


def test_mos_monotone_in_loss_and_delay():
    for delay in (0.0, 0.05, 0.15, 0.3):
        mos = [compute_mos(stats_for(l, delay)).mos
               for l in (0.0, 0.02, 0.05, 0.1, 0.2, 0.4)]
        assert mos == sorted(mos, reverse=True)
    for loss in (0.0, 0.05, 0.2):
        mos = [compute_mos(stats_for(loss, d)).mos
               for d in (0.0, 0.1, 0.2, 0.3, 0.4)]
        assert mos == sorted(mos, reverse=True)


def test_loss_rate_counts_late_packets_as_lost():
    s = FlowStats("f", sent=100, received=90, late=6, lost=4)
    assert packet_loss_rate(s) == pytest.approx(0.1)


def test_loss_rate_requires_traffic():
    with pytest.raises(ValueError):
        packet_loss_rate(FlowStats("f"))


def test_video_source_cadence_and_sizes():
    sim = Simulator()
    out = []
    src = VideoSource(sim, "v", rate_bps=0.5e6, packet_bits=10000,
                      emit=out.append, start=5.0)
    src.start()
    sim.run_until(5.99)
    # 10000 bits at 0.5 Mbps: one packet every 20 ms, 50 packets in [5, 5.99]
    assert len(out) == 50
    assert [p.sent_at for p in out[:3]] == [5.0, 5.02, 5.04]
    assert all(p.size_bits == 10000 for p in out)
    assert [p.seq for p in out] == list(range(50))


def test_video_source_stop_time():
    sim = Simulator()
    out = []
    VideoSource(sim, "v", 2e6, 10000, out.append, start=0.0, stop=0.1).start()
    sim.run_until(1.0)
    assert len(out) == 20  # 5 ms interval, [0, 0.1)


def test_voip_packets_carry_spurt_index_and_fixed_size():
    sim = Simulator()
    out = []
    src = VoipSource(sim, "voip", VoipConfig(), sim.rng("voip"), out.append)
    src.start()
    sim.run_until(60.0)
    assert all(p.size_bits == 1280 for p in out)  # 64 kbps * 20 ms
    spurts = sorted({p.spurt for p in out})
    assert spurts == list(range(len(spurts))) and len(spurts) > 10
    # within a spurt, packets are spaced exactly one packetization interval
    first = [p for p in out if p.spurt == spurts[1]]
    gaps = {round(b.sent_at - a.sent_at, 9) for a, b in zip(first, first[1:])}
    assert gaps <= {0.02}


def test_voip_long_run_talk_fraction():
    sim = Simulator(seed=11)
    out = []
    VoipSource(sim, "voip", VoipConfig(), sim.rng("voip"), out.append).start()
    sim.run_until(2000.0)
    talk_fraction = len(out) * 0.020 / 2000.0
    # exponential on/off with means 1.0 / 1.35 -> duty cycle 1/2.35
    assert abs(talk_fraction - 1.0 / 2.35) < 0.03


def test_voip_source_reproducible_per_seed():
    def run(seed):
        sim = Simulator(seed=seed)
        out = []
        VoipSource(sim, "voip", VoipConfig(), sim.rng("voip"), out.append).start()
        sim.run_until(50.0)
        return [(p.seq, p.sent_at) for p in out]

    assert run(3) == run(3)
    assert run(3) != run(4)


def test_voip_config_validation():
    with pytest.raises(ValueError):
        VoipConfig(packetization_interval=0.0)
    with pytest.raises(ValueError):
        VoipConfig(silence_mean=-1.0)


def test_sink_late_classification_uses_first_spurt_budget():
    stats = FlowStats("voip")
    sink = Sink(stats, "voip", playout_delay=0.005)
    # first spurt establishes the 10 ms floor -> budget 15 ms
    for seq, delay in enumerate((0.012, 0.010, 0.011)):
        sink.on_receive(AppPacket("voip", seq, 1280, sent_at=0.0, spurt=0), now=delay)
    assert stats.received == 3 and stats.late == 0
    assert sink.on_receive(AppPacket("voip", 3, 1280, 2.0, spurt=1), 2.014) == "received"
    assert sink.on_receive(AppPacket("voip", 4, 1280, 2.02, spurt=1), 2.040) == "late"
    assert stats.received == 4 and stats.late == 1


def test_sink_video_has_no_deadline():
    stats = FlowStats("v")
    sink = Sink(stats, "video")
    assert sink.on_receive(AppPacket("v", 0, 10000, 0.0), now=9.0) == "received"
    assert stats.late == 0


def test_sink_counts_duplicates_once():
    stats = FlowStats("v")
    sink = Sink(stats, "video")
    pkt = AppPacket("v", 0, 10000, 0.0)
    assert sink.on_receive(pkt, 0.01) == "received"
    assert sink.on_receive(pkt, 0.02) == "duplicate"
    assert stats.received == 1 and sink.duplicates == 1
