"""Packet-level features: sliding-window bins and their summary statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import FeatureVector
from .errors import EmptyInputError, InvalidArgumentError, InvalidIntervalError
from .records import Direction, PacketRecord

US = 1_000_000

BIN_FEATURES = (
    "ul_frame_len_total",
    "dl_pkt_size_total",
    "dl_tcp_hdr_total",
    "dl_pkt_count",
    "dl_pkt_size_mean",
    "dl_pkt_size_min",
    "dl_pkt_size_max",
    "dl_pkt_size_std",
)
SUMMARY_STATS = ("mean", "std", "min", "max", "p25", "p50", "p75")
SUMMARY_FEATURES = tuple(f"{f}_{s}" for f in BIN_FEATURES for s in SUMMARY_STATS)


@dataclass(frozen=True)
class BinFeatures:
    window_start_s: int
    ul_frame_len_total: int = 0
    dl_pkt_size_total: int = 0
    dl_tcp_hdr_total: int = 0
    dl_pkt_count: int = 0
    dl_pkt_size_mean: float = 0.0
    dl_pkt_size_min: float = 0.0
    dl_pkt_size_max: float = 0.0
    dl_pkt_size_std: float = 0.0

    def feature_values(self) -> tuple[float, ...]:
        return (
            self.ul_frame_len_total,
            self.dl_pkt_size_total,
            self.dl_tcp_hdr_total,
            self.dl_pkt_count,
            self.dl_pkt_size_mean,
            self.dl_pkt_size_min,
            self.dl_pkt_size_max,
            self.dl_pkt_size_std,
        )

    def to_vector(self, label: Optional[int] = None, trace_id: str = "", video_id: str = "", platform: str = "") -> FeatureVector:
        return FeatureVector(BIN_FEATURES, self.feature_values(), label, trace_id, video_id, platform)


def _features_from_arrays(start_s: int, is_dl, frame_len, pkt_len, tcp_hdr) -> BinFeatures:
    ul_total = int(frame_len[~is_dl].sum())
    dl = pkt_len[is_dl]
    if dl.size == 0:
        return BinFeatures(start_s, ul_frame_len_total=ul_total)
    return BinFeatures(
        window_start_s=start_s,
        ul_frame_len_total=ul_total,
        dl_pkt_size_total=int(dl.sum()),
        dl_tcp_hdr_total=int(tcp_hdr[is_dl].sum()),
        dl_pkt_count=int(dl.size),
        dl_pkt_size_mean=float(dl.mean()),
        dl_pkt_size_min=float(dl.min()),
        dl_pkt_size_max=float(dl.max()),
        dl_pkt_size_std=float(dl.std()),
    )


def compute_bin_features(packets: Sequence[PacketRecord], window_start_s: int = 0) -> BinFeatures:
    """Table-style features for the packets of one window; empty windows give zeros."""
    is_dl = np.array([p.direction is Direction.DOWNLINK for p in packets], dtype=bool)
    frame_len = np.array([p.frame_len for p in packets], dtype=np.int64)
    pkt_len = np.array([p.pkt_len for p in packets], dtype=np.int64)
    tcp_hdr = np.array([p.tcp_hdr_len for p in packets], dtype=np.int64)
    return _features_from_arrays(window_start_s, is_dl, frame_len, pkt_len, tcp_hdr)


def bin_count(duration_s: int, interval_s: Optional[int], window_s: int = 5, step_s: int = 1) -> int:
    limit = duration_s if interval_s is None else min(duration_s, interval_s)
    if limit < window_s:
        return 0
    return (limit - window_s) // step_s + 1


def trace_duration_s(packets: Sequence[PacketRecord]) -> int:
    if not packets:
        return 0
    return math.ceil(packets[-1].timestamp_us / US)


def bin_packets(
    packets: Sequence[PacketRecord],
    window_s: int = 5,
    step_s: int = 1,
    interval_s: Optional[int] = None,
    duration_s: Optional[int] = None,
) -> list[BinFeatures]:
    """Slide a ``window_s`` window by ``step_s`` over the trace.

    Bin ``i`` covers ``[i*step_s, i*step_s + window_s)`` seconds. ``interval_s``
    caps the analysed prefix; ``duration_s`` overrides the trace duration
    otherwise taken as the ceiling of the last timestamp.
    """
    if window_s < 1 or step_s < 1:
        raise InvalidArgumentError("window_s and step_s must be >= 1")
    if interval_s is not None and interval_s < window_s:
        raise InvalidIntervalError(f"interval {interval_s}s shorter than window {window_s}s")
    if duration_s is None:
        duration_s = trace_duration_s(packets)
    n_bins = bin_count(duration_s, interval_s, window_s, step_s)

    ts = np.array([p.timestamp_us for p in packets], dtype=np.int64)
    is_dl = np.array([p.direction is Direction.DOWNLINK for p in packets], dtype=bool)
    frame_len = np.array([p.frame_len for p in packets], dtype=np.int64)
    pkt_len = np.array([p.pkt_len for p in packets], dtype=np.int64)
    tcp_hdr = np.array([p.tcp_hdr_len for p in packets], dtype=np.int64)

    starts = np.arange(n_bins, dtype=np.int64) * step_s * US
    lo = np.searchsorted(ts, starts, side="left")
    hi = np.searchsorted(ts, starts + window_s * US, side="left")
    bins = []
    for i in range(n_bins):
        s = slice(lo[i], hi[i])
        bins.append(_features_from_arrays(i * step_s, is_dl[s], frame_len[s], pkt_len[s], tcp_hdr[s]))
    return bins


def summary_stats(column: np.ndarray) -> list[float]:
    p25, p50, p75 = np.percentile(column, [25, 50, 75], method="linear")
    return [
        float(column.mean()),
        float(column.std()),
        float(column.min()),
        float(column.max()),
        float(p25),
        float(p50),
        float(p75),
    ]


def summarize_bins(
    bins: Sequence[BinFeatures],
    label: Optional[int] = None,
    trace_id: str = "",
    video_id: str = "",
    platform: str = "",
) -> FeatureVector:
    """Seven statistics per bin feature, named ``<feature>_<stat>``."""
    if not bins:
        raise EmptyInputError("cannot summarize an empty bin list")
    mat = np.array([b.feature_values() for b in bins], dtype=float)
    values: list[float] = []
    for j in range(mat.shape[1]):
        values.extend(summary_stats(mat[:, j]))
    return FeatureVector(SUMMARY_FEATURES, tuple(values), label, trace_id, video_id, platform)
