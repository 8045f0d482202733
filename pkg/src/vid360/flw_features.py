"""Flow-level features: per-flow throughput, gap, size, retransmission and
burst statistics per direction, aggregated over the top-n flows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import FeatureVector
from .errors import EmptyInputError, InvalidArgumentError
from .records import Direction, FlowRecord, PacketRecord, Proto

US = 1_000_000
DEFAULT_BURST_GAP_S = 0.5

PER_DIRECTION_FEATURES = (
    "throughput_mean_Bps",
    "frame_gap_mean_s",
    "frame_size_mean_B",
    "retransmissions_count",
    "burst_size_max_B",
    "burst_rate_max_Bps",
    "burst_time_max_s",
    "burst_pkt_count_max",
    "burst_gap_mean_s",
    "burst_duration_mean_s",
)
FLOW_FEATURES = tuple(f"{f}_{d}" for d in ("ul", "dl") for f in PER_DIRECTION_FEATURES)
AGG_STATS = ("mean", "sum", "min", "max")


@dataclass(frozen=True)
class Burst:
    direction: Direction
    start_us: int
    end_us: int
    size: int
    pkt_count: int

    @property
    def duration_s(self) -> float:
        return (self.end_us - self.start_us) / US


@dataclass(frozen=True)
class FlowFeatureSet:
    """The 20 per-flow features plus the sort keys used for top-n selection.

    ``start_us`` only breaks ties between flows with equal ``bytes_dl``.
    """

    values: dict[str, float]
    bytes_dl: int
    start_us: int = 0

    def vector(self) -> tuple[float, ...]:
        return tuple(self.values[n] for n in FLOW_FEATURES)


def detect_bursts(flow: FlowRecord, direction: Direction, gap_threshold_s: float = DEFAULT_BURST_GAP_S) -> list[Burst]:
    """Split same-direction packets into maximal runs with gaps <= threshold."""
    pkts = [p for p in flow.packets if p.direction is direction]
    return _bursts(pkts, direction, gap_threshold_s)


def _bursts(pkts: Sequence[PacketRecord], direction: Direction, gap_threshold_s: float) -> list[Burst]:
    if not pkts:
        return []
    ts = np.fromiter((p.timestamp_us for p in pkts), dtype=np.int64, count=len(pkts))
    sizes = np.fromiter((p.pkt_len for p in pkts), dtype=np.int64, count=len(pkts))
    gaps_s = np.diff(ts) / US
    breaks = np.flatnonzero(gaps_s > gap_threshold_s) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [len(pkts)]))
    csum = np.concatenate(([0], np.cumsum(sizes)))
    return [
        Burst(direction, int(ts[a]), int(ts[b - 1]), int(csum[b] - csum[a]), int(b - a))
        for a, b in zip(starts, ends)
    ]


def count_retransmissions(pkts: Sequence[PacketRecord]) -> int:
    """TCP segments whose (sequence number, payload length) was already seen.

    Zero-payload segments (pure ACKs) are never counted.
    """
    seen = set()
    count = 0
    for p in pkts:
        if p.proto is not Proto.TCP or p.tcp_seq is None or p.payload_len <= 0:
            continue
        key = (p.tcp_seq, p.payload_len)
        if key in seen:
            count += 1
        else:
            seen.add(key)
    return count


def _direction_features(pkts, direction, flow_duration_s, gap_threshold_s) -> dict[str, float]:
    out = dict.fromkeys(PER_DIRECTION_FEATURES, 0.0)
    if not pkts:
        return out
    total = sum(p.pkt_len for p in pkts)
    out["throughput_mean_Bps"] = total / flow_duration_s if flow_duration_s > 0 else float(total)
    if len(pkts) > 1:
        out["frame_gap_mean_s"] = (pkts[-1].timestamp_us - pkts[0].timestamp_us) / US / (len(pkts) - 1)
    out["frame_size_mean_B"] = sum(p.frame_len for p in pkts) / len(pkts)
    out["retransmissions_count"] = float(count_retransmissions(pkts))

    bursts = _bursts(pkts, direction, gap_threshold_s)
    durations = [b.duration_s for b in bursts]
    out["burst_size_max_B"] = float(max(b.size for b in bursts))
    out["burst_rate_max_Bps"] = max(b.size / d if d > 0 else float(b.size) for b, d in zip(bursts, durations))
    out["burst_time_max_s"] = max(durations)
    out["burst_pkt_count_max"] = float(max(b.pkt_count for b in bursts))
    if len(bursts) > 1:
        gaps = [(b.start_us - a.end_us) / US for a, b in zip(bursts, bursts[1:])]
        out["burst_gap_mean_s"] = sum(gaps) / len(gaps)
    out["burst_duration_mean_s"] = sum(durations) / len(durations)
    return out


def compute_flow_features(flow: FlowRecord, gap_threshold_s: float = DEFAULT_BURST_GAP_S) -> FlowFeatureSet:
    if not flow.packets:
        raise EmptyInputError("flow has no packets")
    duration_s = (flow.end_us - flow.start_us) / US
    values: dict[str, float] = {}
    for d in (Direction.UPLINK, Direction.DOWNLINK):
        pkts = [p for p in flow.packets if p.direction is d]
        for name, v in _direction_features(pkts, d, duration_s, gap_threshold_s).items():
            values[f"{name}_{d.value}"] = v
    return FlowFeatureSet(values=values, bytes_dl=flow.bytes_dl, start_us=flow.start_us)


def select_top_flows(flow_features: Sequence[FlowFeatureSet], n: Optional[int]) -> list[FlowFeatureSet]:
    """Largest ``n`` flows by downlink bytes (earlier start wins ties); ``None`` = all."""
    if n is not None and n <= 0:
        raise InvalidArgumentError(f"n must be positive or ALL, got {n}")
    ranked = sorted(flow_features, key=lambda f: (-f.bytes_dl, f.start_us))
    return ranked if n is None else ranked[:n]


def aggregate_feature_names(n: Optional[int]) -> tuple[str, ...]:
    if n == 1:
        return tuple(f"{f}_mean" for f in FLOW_FEATURES)
    return tuple(f"{f}_{s}" for f in FLOW_FEATURES for s in AGG_STATS)


def aggregate_top_flows(
    flow_features: Sequence[FlowFeatureSet],
    n: Optional[int],
    label: Optional[int] = None,
    trace_id: str = "",
    video_id: str = "",
    platform: str = "",
) -> FeatureVector:
    """One vector per trace from its top-n flows.

    ``n == 1`` yields the 20 features of the largest flow; otherwise mean, sum,
    min and max of each feature over the selected flows (80 values).
    """
    if n is not None and n <= 0:
        raise InvalidArgumentError(f"n must be positive or ALL, got {n}")
    if not flow_features:
        raise EmptyInputError("no flows to aggregate")
    top = select_top_flows(flow_features, n)
    mat = np.array([f.vector() for f in top], dtype=float)
    if n == 1:
        values = mat[0]
    else:
        stats = np.stack([mat.mean(axis=0), mat.sum(axis=0), mat.min(axis=0), mat.max(axis=0)], axis=1)
        values = stats.ravel()
    return FeatureVector(aggregate_feature_names(n), tuple(values), label, trace_id, video_id, platform)


def parse_top_n(text: str) -> Optional[int]:
    """``"ALL"`` -> None, otherwise a positive integer."""
    if str(text).strip().upper() == "ALL":
        return None
    n = int(text)
    if n <= 0:
        raise InvalidArgumentError(f"n must be positive or ALL, got {text}")
    return n
