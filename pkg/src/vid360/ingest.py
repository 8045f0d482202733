"""Trace ingestion: capture parsing, client filtering, flow assembly and
platform keyword filtering."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import replace
from enum import Enum
from typing import Iterable

from .errors import AmbiguousIdentityError, ParseError, UnsupportedFormatError
from .pcap import ParseStats, read_pcap
from .records import ClientIdentity, Direction, FlowKey, FlowRecord, PacketRecord, Proto

PACKET_CSV_COLUMNS = (
    "timestamp_us",
    "direction",
    "frame_len",
    "pkt_len",
    "tcp_hdr_len",
    "src_ip",
    "dst_ip",
    "src_port",
    "dst_port",
    "proto",
    "sni_hint",
)
# optional trailing column, written only when some record carries a sequence number
SEQ_COLUMN = "tcp_seq"


class Platform(str, Enum):
    YT = "YT"
    FB = "FB"
    ANY = "ANY"


PLATFORM_KEYWORDS = {
    Platform.YT: ("googlevideo", "yt", "youtube"),
    Platform.FB: ("fb", "fbcdn", "facebook"),
}


def parse_capture(raw: bytes, format: str) -> list[PacketRecord]:
    """Parse ``raw`` (``"pcap-ethernet"`` or ``"packet-csv"``) into time-sorted,
    zero-rebased packet records."""
    return parse_capture_with_stats(raw, format)[0]


def parse_capture_with_stats(raw: bytes, format: str) -> tuple[list[PacketRecord], ParseStats]:
    if format == "pcap-ethernet":
        records, stats = read_pcap(raw)
    elif format == "packet-csv":
        records = read_packet_csv(raw)
        stats = ParseStats(frames=len(records), kept=len(records))
    else:
        raise UnsupportedFormatError(f"unknown capture format {format!r}")
    return rebase(records), stats


def detect_format(raw: bytes) -> str:
    if raw[:4] in (b"\xd4\xc3\xb2\xa1", b"\xa1\xb2\xc3\xd4", b"\x4d\x3c\xb2\xa1", b"\xa1\xb2\x3c\x4d"):
        return "pcap-ethernet"
    return "packet-csv"


def rebase(records: Iterable[PacketRecord]) -> list[PacketRecord]:
    """Stable-sort by timestamp and shift so the first packet is at 0."""
    records = sorted(records, key=lambda r: r.timestamp_us)
    if not records or records[0].timestamp_us == 0:
        return records
    t0 = records[0].timestamp_us
    return [replace(r, timestamp_us=r.timestamp_us - t0) for r in records]


# ---------------------------------------------------------------- packet CSV


def read_packet_csv(raw: bytes | str) -> list[PacketRecord]:
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    offset = 0
    header = None
    records = []
    for line in text.splitlines(keepends=True):
        line_offset = offset
        offset += len(line.encode("utf-8"))
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row = next(csv.reader([line]))
        if header is None:
            header = [c.strip() for c in row]
            expected = list(PACKET_CSV_COLUMNS)
            if header != expected and header != expected + [SEQ_COLUMN]:
                raise ParseError(f"unexpected packet CSV header {header!r}", offset=line_offset)
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", offset=line_offset)
        try:
            fields = dict(zip(header, row))
            proto = Proto(fields["proto"].strip().lower())
            rec = PacketRecord(
                timestamp_us=int(fields["timestamp_us"]),
                direction=Direction(fields["direction"].strip().lower()),
                frame_len=int(fields["frame_len"]),
                pkt_len=int(fields["pkt_len"]),
                tcp_hdr_len=int(fields["tcp_hdr_len"]),
                src_ip=fields["src_ip"].strip(),
                dst_ip=fields["dst_ip"].strip(),
                src_port=int(fields["src_port"]),
                dst_port=int(fields["dst_port"]),
                proto=proto,
                sni_hint=fields["sni_hint"].strip().lower(),
                tcp_seq=int(fields[SEQ_COLUMN]) if fields.get(SEQ_COLUMN, "").strip() else None,
            )
            rec.validate()
        except ValueError as exc:
            raise ParseError(f"bad packet row: {exc}", offset=line_offset) from exc
        records.append(rec)
    if header is None:
        raise ParseError("packet CSV has no header row", offset=0)
    return records


def write_packet_csv(records: Iterable[PacketRecord], comments: Iterable[str] = ()) -> str:
    records = list(records)
    with_seq = any(r.tcp_seq is not None for r in records)
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PACKET_CSV_COLUMNS + ((SEQ_COLUMN,) if with_seq else ()))
    for r in records:
        if r.direction is None:
            raise ValueError("cannot write a packet without an assigned direction")
        row = [
            r.timestamp_us,
            r.direction.value,
            r.frame_len,
            r.pkt_len,
            r.tcp_hdr_len,
            r.src_ip,
            r.dst_ip,
            r.src_port,
            r.dst_port,
            r.proto.value,
            r.sni_hint,
        ]
        if with_seq:
            row.append("" if r.tcp_seq is None else r.tcp_seq)
        w.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------- operations


def assign_direction(packets: Iterable[PacketRecord], client: ClientIdentity) -> list[PacketRecord]:
    """Keep packets that involve ``client``; client-sourced ones are uplink."""
    out = []
    for p in packets:
        src = client.matches_src(p)
        dst = client.matches_dst(p)
        if src and dst:
            raise AmbiguousIdentityError(
                f"client matches both endpoints of packet at t={p.timestamp_us}us"
            )
        if src:
            direction = Direction.UPLINK
        elif dst:
            direction = Direction.DOWNLINK
        else:
            continue
        out.append(p if p.direction is direction else replace(p, direction=direction))
    return out


def assemble_flows(packets: Iterable[PacketRecord]) -> list[FlowRecord]:
    groups: dict[FlowKey, list[PacketRecord]] = defaultdict(list)
    for p in packets:
        groups[FlowKey.for_packet(p)].append(p)
    flows = [
        FlowRecord.from_packets(key, sorted(pkts, key=lambda r: r.timestamp_us))
        for key, pkts in groups.items()
    ]
    flows.sort(key=lambda f: (-f.bytes_dl, f.start_us, f.key))
    return flows


def platform_keywords(platform: Platform | str) -> tuple[str, ...]:
    platform = Platform(platform)
    if platform is Platform.ANY:
        return PLATFORM_KEYWORDS[Platform.YT] + PLATFORM_KEYWORDS[Platform.FB]
    return PLATFORM_KEYWORDS[platform]


def filter_video_flows(flows: Iterable[FlowRecord], platform: Platform | str) -> list[FlowRecord]:
    keywords = platform_keywords(platform)
    return [f for f in flows if f.sni_hint and any(k in f.sni_hint for k in keywords)]
