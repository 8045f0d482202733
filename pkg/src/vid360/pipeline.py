"""Glue between capture files and feature sets: device filtering, rebasing,
binning and per-flow feature extraction for one trace."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from .errors import InvalidArgumentError
from .flw_features import DEFAULT_BURST_GAP_S, FlowFeatureSet, compute_flow_features
from .ingest import assemble_flows, assign_direction, detect_format, filter_video_flows, parse_capture, rebase
from .pkt_features import BinFeatures, bin_packets
from .records import ClientIdentity, PacketRecord


def load_packets(raw: bytes, client: Optional[ClientIdentity] = None, format: Optional[str] = None) -> list[PacketRecord]:
    """Parse a capture, keep the client's packets and rebase time to the first of them.

    pcap input carries no direction, so it needs ``client``.
    """
    format = format or detect_format(raw)
    packets = parse_capture(raw, format)
    if client is not None:
        packets = rebase(assign_direction(packets, client))
    elif any(p.direction is None for p in packets):
        raise InvalidArgumentError("pcap input needs --client-ip or --client-mac to assign directions")
    return packets


def load_packet_file(path: str | Path, client: Optional[ClientIdentity] = None) -> list[PacketRecord]:
    return load_packets(Path(path).read_bytes(), client)


def trace_bins(
    packets: list[PacketRecord], interval_s: Optional[int] = None, window_s: int = 5, step_s: int = 1
) -> list[BinFeatures]:
    return bin_packets(packets, window_s=window_s, step_s=step_s, interval_s=interval_s)


def trace_flow_features(
    packets: list[PacketRecord], platform: str = "ANY", gap_threshold_s: float = DEFAULT_BURST_GAP_S
) -> list[FlowFeatureSet]:
    """Features of the trace's platform video flows, largest download first."""
    flows = filter_video_flows(assemble_flows(packets), platform)
    return [compute_flow_features(f, gap_threshold_s) for f in flows]
