"""Scenario configuration, experiment execution, sweeps and CSV export.

The standard geometry places the two APs 200 m apart with a field sweep whose
one-way length is 1000 m, so a run covering 2000 m of travel (sim_time =
2000 / speed when set to auto) crosses the coverage boundary exactly ten
times and therefore performs exactly ten handovers at every speed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .scenario import Scenario
from .traffic import FlowStats, compute_mos, packet_loss_rate

STANDARD_PATH_METERS = 2000.0


class ConfigError(Exception):
    pass


class InvariantError(Exception):
    pass


@dataclass
class ScenarioConfig:
    scheme: str = "soft"  # hard | soft
    application: str = "voip"  # video | voip
    seed: int = 1
    speed: float = 1.0
    sim_time: Optional[float] = None  # None = auto: 2000 m of travel

    video_rate_bps: float = 0.5e6
    video_packet_bits: int = 10000

    voip_packetization: float = 0.020
    voip_playout: float = 0.005
    voip_spurt_mean: float = 1.0
    voip_silence_mean: float = 1.35
    voip_codec_rate: float = 64000.0

    # field sweep: 5 rows of 192 m plus 4 steps of 10 m = 1000 m one-way
    field_x1: float = 4.0
    field_y1: float = 0.0
    field_x2: float = 196.0
    field_y2: float = 50.0
    row_count: int = 5

    ap_home_x: float = 0.0
    ap_home_y: float = 20.0
    ap_home_channel: int = 1
    ap_foreign_x: float = 200.0
    ap_foreign_y: float = 20.0
    ap_foreign_channel: int = 6
    tx_power_dbm: float = 0.0
    beacon_interval: float = 0.1

    frequency_hz: float = 2.4e9
    sensitivity_dbm: float = -85.0
    bitrate: float = 2e6
    d_ref: float = 1.0

    home_prefix: int = 0x20010DB800010000
    foreign_prefix: int = 0x20010DB800020000
    core_prefix: int = 0x20010DB800030000

    ra_interval: float = 1.0
    dad_duration: float = 1.0
    miss_threshold: int = 3

    cn_link_delay: float = 0.002
    foreign_link_delay: float = 0.001
    traffic_start: float = 5.0

    expected_handovers: Optional[int] = 10  # None disables the assertion
    mn_interfaces: Optional[int] = None  # derived from scheme when unset

    @property
    def sim_time_resolved(self) -> float:
        if self.sim_time is not None:
            return self.sim_time
        return STANDARD_PATH_METERS / self.speed

    def validate(self) -> "ScenarioConfig":
        if self.scheme not in ("hard", "soft"):
            raise ConfigError(f"scheme: must be 'hard' or 'soft', got {self.scheme!r}")
        if self.application not in ("video", "voip"):
            raise ConfigError(f"application: must be 'video' or 'voip', "
                              f"got {self.application!r}")
        if self.speed <= 0:
            raise ConfigError("speed: must be > 0")
        n = self.mn_interfaces
        if n is not None:
            if self.scheme == "hard" and n != 1:
                raise ConfigError("mn_interfaces: hard scheme requires exactly 1 "
                                  f"interface, got {n}")
            if self.scheme == "soft" and n < 2:
                raise ConfigError("mn_interfaces: soft scheme requires >= 2 "
                                  f"interfaces, got {n}")
        if self.ap_home_channel == self.ap_foreign_channel:
            raise ConfigError("ap_foreign_channel: the two APs must use "
                              "distinct channels")
        if self.beacon_interval <= 0:
            raise ConfigError("beacon_interval: must be > 0")
        return self


_INT_KEYS = {"seed", "video_packet_bits", "row_count", "ap_home_channel",
             "ap_foreign_channel", "miss_threshold", "expected_handovers",
             "mn_interfaces", "home_prefix", "foreign_prefix", "core_prefix"}
_STR_KEYS = {"scheme", "application"}

# dotted config-file keys -> dataclass fields
_KEY_ALIASES = {
    "video.rate_bps": "video_rate_bps",
    "video.packet_bits": "video_packet_bits",
    "voip.packetization_interval": "voip_packetization",
    "voip.playout_delay": "voip_playout",
    "voip.spurt_mean": "voip_spurt_mean",
    "voip.silence_mean": "voip_silence_mean",
    "voip.codec_rate": "voip_codec_rate",
    "mobility.x1": "field_x1",
    "mobility.y1": "field_y1",
    "mobility.x2": "field_x2",
    "mobility.y2": "field_y2",
    "mobility.row_count": "row_count",
    "mobility.speed": "speed",
    "ap.home.x": "ap_home_x",
    "ap.home.y": "ap_home_y",
    "ap.home.channel": "ap_home_channel",
    "ap.foreign.x": "ap_foreign_x",
    "ap.foreign.y": "ap_foreign_y",
    "ap.foreign.channel": "ap_foreign_channel",
    "radio.tx_power_dbm": "tx_power_dbm",
    "radio.beacon_interval": "beacon_interval",
    "radio.frequency_hz": "frequency_hz",
    "radio.sensitivity_dbm": "sensitivity_dbm",
    "radio.bitrate": "bitrate",
    "radio.d_ref": "d_ref",
    "ipv6.ra_interval": "ra_interval",
    "ipv6.dad_duration": "dad_duration",
    "llc.miss_threshold": "miss_threshold",
    "wired.cn_link_delay": "cn_link_delay",
    "wired.foreign_link_delay": "foreign_link_delay",
    "mn.interfaces": "mn_interfaces",
}


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Parse a flat key = value config file with dotted section keys."""
    cfg = ScenarioConfig()
    names = {f.name for f in fields(ScenarioConfig)}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        name = _KEY_ALIASES.get(key, key)
        if name not in names:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if name in ("sim_time", "expected_handovers", "mn_interfaces"):
            parsed = None if value in ("auto", "none") else _parse(name, value)
        else:
            parsed = _parse(name, value)
        setattr(cfg, name, parsed)
    return cfg.validate()


def _parse(name: str, value: str):
    try:
        if name in _STR_KEYS:
            return value
        if name in _INT_KEYS:
            return int(value, 0)
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {value!r}") from exc


@dataclass
class MetricsRecord:
    scheme: str
    application: str
    rate_bps: float
    speed: float
    seed: int
    sim_time: float
    handover_count: int
    sent: int
    received: int
    late: int
    lost: int
    loss_rate: float
    mean_delay: float
    r_factor: Optional[float]
    mos: Optional[float]
    dl_loss_rate: Optional[float]
    gaps: list[float] = field(default_factory=list)

    COLUMNS = ("scheme", "application", "rate_bps", "speed", "seed", "sim_time",
               "handover_count", "sent", "received", "late", "lost", "loss_rate",
               "mean_delay", "r_factor", "mos", "dl_loss_rate", "gaps")

    def to_row(self) -> list[str]:
        def num(v):
            return "" if v is None else repr(v)
        return [self.scheme, self.application, num(self.rate_bps), num(self.speed),
                str(self.seed), num(self.sim_time), str(self.handover_count),
                str(self.sent), str(self.received), str(self.late), str(self.lost),
                num(self.loss_rate), num(self.mean_delay), num(self.r_factor),
                num(self.mos), num(self.dl_loss_rate),
                ";".join(repr(g) for g in self.gaps)]

    @classmethod
    def from_row(cls, row: list[str]) -> "MetricsRecord":
        def opt(v):
            return None if v == "" else float(v)
        return cls(scheme=row[0], application=row[1], rate_bps=float(row[2]),
                   speed=float(row[3]), seed=int(row[4]), sim_time=float(row[5]),
                   handover_count=int(row[6]), sent=int(row[7]),
                   received=int(row[8]), late=int(row[9]), lost=int(row[10]),
                   loss_rate=float(row[11]), mean_delay=float(row[12]),
                   r_factor=opt(row[13]), mos=opt(row[14]),
                   dl_loss_rate=opt(row[15]),
                   gaps=[float(g) for g in row[16].split(";") if g])


@dataclass
class RunResult:
    metrics: MetricsRecord
    scenario: Scenario
    wall_time: float


def run_experiment(cfg: ScenarioConfig,
                   trace_sink: Optional[list[str]] = None) -> RunResult:
    cfg.validate()
    t0 = time.perf_counter()
    scenario = Scenario(cfg, trace_sink=trace_sink)
    scenario.run()
    wall = time.perf_counter() - t0

    llc = scenario.mn.llc
    if (cfg.expected_handovers is not None
            and llc.handover_count != cfg.expected_handovers):
        tail = "\n".join(trace_sink[-30:]) if trace_sink else "(run without --event-log)"
        raise InvariantError(
            f"handover_count={llc.handover_count}, expected "
            f"{cfg.expected_handovers}\nevent-log tail:\n{tail}")

    flow = scenario.primary_flow
    loss = packet_loss_rate(flow)
    if cfg.application == "voip":
        report = compute_mos(flow)
        r_factor, mos = report.r_factor, report.mos
        dl = scenario.flows["voip-dl"]
        dl_loss = packet_loss_rate(dl) if dl.sent else None
    else:
        r_factor = mos = dl_loss = None

    gaps = [round(b - a, 9) for a, b in llc.gap_intervals]
    metrics = MetricsRecord(
        scheme=cfg.scheme, application=cfg.application,
        rate_bps=(cfg.video_rate_bps if cfg.application == "video"
                  else cfg.voip_codec_rate),
        speed=cfg.speed, seed=cfg.seed, sim_time=cfg.sim_time_resolved,
        handover_count=llc.handover_count, sent=flow.sent, received=flow.received,
        late=flow.late, lost=flow.lost, loss_rate=loss,
        mean_delay=flow.mean_delay, r_factor=r_factor, mos=mos,
        dl_loss_rate=dl_loss, gaps=gaps)
    return RunResult(metrics, scenario, wall)


def sweep(base_cfg: ScenarioConfig, speeds: list[float], schemes: list[str],
          apps: list[tuple[str, float]]) -> tuple[list[MetricsRecord], list[str]]:
    """Cross-product of speeds x schemes x (application, rate); failures are
    recorded and the sweep continues."""
    records: list[MetricsRecord] = []
    errors: list[str] = []
    for app, rate in apps:
        for scheme in schemes:
            for speed in speeds:
                cfg = replace(base_cfg, scheme=scheme, application=app,
                              speed=speed, mn_interfaces=None)
                if app == "video":
                    cfg = replace(cfg, video_rate_bps=rate)
                try:
                    records.append(run_experiment(cfg).metrics)
                except Exception as exc:  # keep sweeping
                    errors.append(f"{app}/{scheme}/speed={speed}: {exc}")
    return records, errors


def emit_csv(records: list[MetricsRecord], path: str | Path,
             metadata: Optional[dict] = None) -> None:
    lines = [",".join(MetricsRecord.COLUMNS)]
    for rec in records:
        lines.append(",".join(rec.to_row()))
    Path(path).write_text("\n".join(lines) + "\n")
    if metadata is not None:
        meta_lines = [f"{k}: {v}" for k, v in sorted(metadata.items())]
        Path(str(path) + ".meta.txt").write_text("\n".join(meta_lines) + "\n")


def parse_csv(path: str | Path) -> list[MetricsRecord]:
    lines = Path(path).read_text().splitlines()
    return [MetricsRecord.from_row(line.split(",")) for line in lines[1:]]


def run_metadata(cfg: ScenarioConfig) -> dict:
    """Self-describing output: defaults, formula identifier, geometry."""
    return {
        "mos_formula": "ITU-T G.107 simplified E-model (Ie=0, Bpl=25.1, G.711)",
        "geometry": (f"APs at ({cfg.ap_home_x},{cfg.ap_home_y}) and "
                     f"({cfg.ap_foreign_x},{cfg.ap_foreign_y}), field "
                     f"({cfg.field_x1},{cfg.field_y1})-({cfg.field_x2},{cfg.field_y2}) "
                     f"x {cfg.row_count} rows"),
        "dad_duration_s": cfg.dad_duration,
        "beacon_interval_s": cfg.beacon_interval,
        "miss_threshold": cfg.miss_threshold,
        "traffic_start_s": cfg.traffic_start,
        "note": ("2 Mbps video saturates the 2 Mbps link; reported loss is from "
                 "disconnection only (no queueing model)"),
    }
