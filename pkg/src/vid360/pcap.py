"""Classic libpcap reading and writing for Ethernet captures, plus the small
amount of TLS and DNS parsing needed to attach hostname hints to flows."""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, replace

from .errors import ParseError, UnsupportedFormatError
from .records import PacketRecord, Proto, endpoint_pair

LINKTYPE_ETHERNET = 1
PCAP_MAGIC_US = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D

ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD
ETH_VLAN = (0x8100, 0x88A8)

IPV6_EXT_HEADERS = (0, 43, 60)
IPV6_FRAGMENT = 44


@dataclass
class ParseStats:
    frames: int = 0
    kept: int = 0
    non_ip: int = 0
    non_tcp_udp: int = 0
    fragments: int = 0
    truncated: int = 0


def _mac_str(raw: bytes) -> str:
    return ":".join(f"{b:02x}" for b in raw)


def _mac_bytes(mac: str) -> bytes:
    return bytes(int(part, 16) for part in mac.replace("-", ":").split(":"))


# ---------------------------------------------------------------- TLS / DNS


def extract_sni(payload: bytes) -> str | None:
    """Return the server name from a TLS ClientHello at the start of ``payload``."""
    try:
        if len(payload) < 9 or payload[0] != 22 or payload[5] != 1:
            return None
        pos = 9  # record header (5) + handshake type (1) + length (3)
        pos += 2 + 32  # client version, random
        pos += 1 + payload[pos]  # session id
        (n,) = struct.unpack_from("!H", payload, pos)
        pos += 2 + n  # cipher suites
        pos += 1 + payload[pos]  # compression methods
        (ext_total,) = struct.unpack_from("!H", payload, pos)
        pos += 2
        end = min(len(payload), pos + ext_total)
        while pos + 4 <= end:
            ext_type, ext_len = struct.unpack_from("!HH", payload, pos)
            pos += 4
            if ext_type == 0:
                # server_name_list: u16 list length, then (u8 type, u16 len, name)
                name_type = payload[pos + 2]
                (name_len,) = struct.unpack_from("!H", payload, pos + 3)
                if name_type == 0:
                    return payload[pos + 5 : pos + 5 + name_len].decode("ascii").lower()
                return None
            pos += ext_len
    except (IndexError, struct.error, UnicodeDecodeError):
        return None
    return None


def _dns_name(msg: bytes, pos: int) -> tuple[str, int]:
    labels = []
    jumped = False
    end = pos
    for _ in range(64):
        length = msg[pos]
        if length & 0xC0 == 0xC0:
            if not jumped:
                end = pos + 2
            pos = ((length & 0x3F) << 8) | msg[pos + 1]
            jumped = True
            continue
        if length == 0:
            if not jumped:
                end = pos + 1
            return ".".join(labels), end
        labels.append(msg[pos + 1 : pos + 1 + length].decode("ascii"))
        pos += 1 + length
    raise ValueError("DNS name pointer loop")


def parse_dns_answers(msg: bytes) -> dict[str, str]:
    """Map answer addresses (A/AAAA) to the queried hostname. Empty on failure."""
    out: dict[str, str] = {}
    try:
        _, flags, qdcount, ancount = struct.unpack_from("!HHHH", msg, 0)
        if not flags & 0x8000 or qdcount == 0:
            return out
        pos = 12
        qname, pos = _dns_name(msg, pos)
        pos += 4
        for _ in range(qdcount - 1):
            _, pos = _dns_name(msg, pos)
            pos += 4
        for _ in range(ancount):
            _, pos = _dns_name(msg, pos)
            rtype, _, _, rdlen = struct.unpack_from("!HHIH", msg, pos)
            pos += 10
            rdata = msg[pos : pos + rdlen]
            if rtype == 1 and rdlen == 4:
                out[str(ipaddress.IPv4Address(rdata))] = qname.lower()
            elif rtype == 28 and rdlen == 16:
                out[str(ipaddress.IPv6Address(rdata))] = qname.lower()
            pos += rdlen
    except (IndexError, struct.error, ValueError, UnicodeDecodeError):
        return out
    return out


def build_client_hello(server_name: str) -> bytes:
    """Minimal TLS 1.2 ClientHello carrying only an SNI extension."""
    name = server_name.encode("ascii")
    sni_entry = b"\x00" + struct.pack("!H", len(name)) + name
    sni_ext = struct.pack("!HH", 0, len(sni_entry) + 2) + struct.pack("!H", len(sni_entry)) + sni_entry
    body = (
        b"\x03\x03"
        + bytes(32)
        + b"\x00"
        + struct.pack("!H", 2)
        + b"\x13\x01"
        + b"\x01\x00"
        + struct.pack("!H", len(sni_ext))
        + sni_ext
    )
    handshake = b"\x01" + len(body).to_bytes(3, "big") + body
    return b"\x16\x03\x01" + struct.pack("!H", len(handshake)) + handshake


def build_dns_response(qname: str, addresses: list[str], txid: int = 1) -> bytes:
    def encode(name: str) -> bytes:
        return b"".join(bytes([len(p)]) + p.encode("ascii") for p in name.split(".")) + b"\x00"

    question = encode(qname) + struct.pack("!HH", 1, 1)
    answers = b""
    for addr in addresses:
        ip = ipaddress.ip_address(addr)
        rtype = 1 if ip.version == 4 else 28
        answers += b"\xc0\x0c" + struct.pack("!HHIH", rtype, 1, 60, len(ip.packed)) + ip.packed
    header = struct.pack("!HHHHHH", txid, 0x8180, 1, len(addresses), 0, 0)
    return header + question + answers


# ---------------------------------------------------------------- reading


def _decode_frame(frame: bytes, orig_len: int, ts_us: int, stats: ParseStats):
    """Decode one Ethernet frame. Returns (record, transport payload) or None."""
    if len(frame) < 14:
        stats.truncated += 1
        return None
    dst_mac, src_mac = _mac_str(frame[0:6]), _mac_str(frame[6:12])
    (ethertype,) = struct.unpack_from("!H", frame, 12)
    off = 14
    while ethertype in ETH_VLAN and len(frame) >= off + 4:
        (ethertype,) = struct.unpack_from("!H", frame, off + 2)
        off += 4

    if ethertype == ETH_IPV4:
        if len(frame) < off + 20:
            stats.truncated += 1
            return None
        ihl = (frame[off] & 0x0F) * 4
        (total_len,) = struct.unpack_from("!H", frame, off + 2)
        (frag,) = struct.unpack_from("!H", frame, off + 6)
        if frag & 0x2000 or frag & 0x1FFF:
            stats.fragments += 1
            return None
        proto_num = frame[off + 9]
        src_ip = str(ipaddress.IPv4Address(frame[off + 12 : off + 16]))
        dst_ip = str(ipaddress.IPv4Address(frame[off + 16 : off + 20]))
        pkt_len = total_len - ihl
        off += ihl
    elif ethertype == ETH_IPV6:
        if len(frame) < off + 40:
            stats.truncated += 1
            return None
        (payload_len,) = struct.unpack_from("!H", frame, off + 4)
        proto_num = frame[off + 6]
        src_ip = str(ipaddress.IPv6Address(frame[off + 8 : off + 24]))
        dst_ip = str(ipaddress.IPv6Address(frame[off + 24 : off + 40]))
        off += 40
        pkt_len = payload_len
        while proto_num in IPV6_EXT_HEADERS:
            if len(frame) < off + 2:
                stats.truncated += 1
                return None
            ext_len = (frame[off + 1] + 1) * 8
            proto_num = frame[off]
            off += ext_len
            pkt_len -= ext_len
        if proto_num == IPV6_FRAGMENT:
            stats.fragments += 1
            return None
    else:
        stats.non_ip += 1
        return None

    if proto_num == 6:
        if len(frame) < off + 20:
            stats.truncated += 1
            return None
        src_port, dst_port, seq = struct.unpack_from("!HHI", frame, off)
        tcp_hdr_len = (frame[off + 12] >> 4) * 4
        proto = Proto.TCP
        payload = frame[off + tcp_hdr_len : off + pkt_len]
    elif proto_num == 17:
        if len(frame) < off + 8:
            stats.truncated += 1
            return None
        src_port, dst_port = struct.unpack_from("!HH", frame, off)
        seq = None
        tcp_hdr_len = 0
        proto = Proto.UDP
        payload = frame[off + 8 : off + pkt_len]
    else:
        stats.non_tcp_udp += 1
        return None

    rec = PacketRecord(
        timestamp_us=ts_us,
        direction=None,
        frame_len=orig_len,
        pkt_len=pkt_len,
        tcp_hdr_len=tcp_hdr_len,
        src_ip=src_ip,
        dst_ip=dst_ip,
        src_port=src_port,
        dst_port=dst_port,
        proto=proto,
        tcp_seq=seq,
        src_mac=src_mac,
        dst_mac=dst_mac,
    )
    return rec, payload


def read_pcap(raw: bytes) -> tuple[list[PacketRecord], ParseStats]:
    """Decode a classic pcap byte string.

    Records keep capture order and absolute timestamps here; sorting,
    rebasing and hostname hints are applied by the caller.
    """
    if len(raw) < 24:
        raise ParseError("pcap global header truncated", offset=len(raw))
    (magic,) = struct.unpack_from("<I", raw, 0)
    if magic in (PCAP_MAGIC_US, PCAP_MAGIC_NS):
        endian = "<"
    else:
        (magic,) = struct.unpack_from(">I", raw, 0)
        if magic not in (PCAP_MAGIC_US, PCAP_MAGIC_NS):
            raise ParseError(f"bad pcap magic 0x{magic:08x}", offset=0)
        endian = ">"
    nanos = magic == PCAP_MAGIC_NS
    linktype = struct.unpack_from(endian + "I", raw, 20)[0] & 0x0FFFFFFF
    if linktype != LINKTYPE_ETHERNET:
        raise UnsupportedFormatError(f"unsupported pcap link type {linktype} (only Ethernet)")

    stats = ParseStats()
    out: list[tuple[PacketRecord, bytes]] = []
    pos = 24
    rec_hdr = struct.Struct(endian + "IIII")
    while pos < len(raw):
        if pos + 16 > len(raw):
            raise ParseError("pcap record header truncated", offset=pos)
        ts_sec, ts_frac, incl_len, orig_len = rec_hdr.unpack_from(raw, pos)
        if pos + 16 + incl_len > len(raw):
            raise ParseError("pcap record data truncated", offset=pos)
        frame = raw[pos + 16 : pos + 16 + incl_len]
        ts_us = ts_sec * 1_000_000 + (ts_frac // 1000 if nanos else ts_frac)
        stats.frames += 1
        decoded = _decode_frame(frame, orig_len, ts_us, stats)
        if decoded is not None:
            out.append(decoded)
        pos += 16 + incl_len
    stats.kept = len(out)
    return attach_hostnames(out), stats


def attach_hostnames(decoded: list[tuple[PacketRecord, bytes]]) -> list[PacketRecord]:
    """Fill ``sni_hint`` per conversation: TLS SNI if seen, else a preceding DNS answer."""
    order = sorted(range(len(decoded)), key=lambda i: decoded[i][0].timestamp_us)
    ip_names: dict[str, str] = {}
    sni: dict[tuple, str] = {}
    dns_hint: dict[tuple, str] = {}
    for i in order:
        rec, payload = decoded[i]
        conv = endpoint_pair(rec)
        if conv not in dns_hint:
            dns_hint[conv] = ip_names.get(rec.dst_ip) or ip_names.get(rec.src_ip) or ""
        if rec.proto is Proto.UDP and rec.src_port == 53:
            ip_names.update(parse_dns_answers(payload))
        elif rec.proto is Proto.TCP and payload and conv not in sni:
            name = extract_sni(payload)
            if name:
                sni[conv] = name
    result = []
    for rec, _ in decoded:
        conv = endpoint_pair(rec)
        hint = sni.get(conv) or dns_hint.get(conv, "")
        if hint:
            rec = replace(rec, sni_hint=hint)
        result.append(rec)
    return result


# ---------------------------------------------------------------- writing

DEFAULT_CLIENT_MAC = "02:00:00:00:00:01"
DEFAULT_GATEWAY_MAC = "02:00:00:00:00:fe"


def _ip_header(rec: PacketRecord, proto_num: int) -> bytes:
    if ":" in rec.src_ip:
        return (
            struct.pack("!IHBB", 6 << 28, rec.pkt_len, proto_num, 64)
            + ipaddress.IPv6Address(rec.src_ip).packed
            + ipaddress.IPv6Address(rec.dst_ip).packed
        )
    return struct.pack(
        "!BBHHHBBH4s4s",
        0x45,
        0,
        rec.pkt_len + 20,
        0,
        0x4000,  # don't fragment
        64,
        proto_num,
        0,
        ipaddress.IPv4Address(rec.src_ip).packed,
        ipaddress.IPv4Address(rec.dst_ip).packed,
    )


def encode_frame(rec: PacketRecord, payload: bytes = b"") -> bytes:
    """Build the Ethernet frame for ``rec``; ``payload`` prefixes the zero-filled application data."""
    if rec.proto is Proto.TCP:
        if rec.tcp_hdr_len < 20 or rec.tcp_hdr_len % 4:
            raise ValueError(f"TCP header length {rec.tcp_hdr_len} not encodable")
        transport = struct.pack(
            "!HHIIBBHHH",
            rec.src_port,
            rec.dst_port,
            rec.tcp_seq or 0,
            0,
            (rec.tcp_hdr_len // 4) << 4,
            0x18,
            65535,
            0,
            0,
        ) + bytes(rec.tcp_hdr_len - 20)
        proto_num = 6
    elif rec.proto is Proto.UDP:
        transport = struct.pack("!HHHH", rec.src_port, rec.dst_port, rec.pkt_len, 0)
        proto_num = 17
    else:
        raise ValueError("only TCP and UDP records can be written to pcap")
    app_len = rec.pkt_len - len(transport)
    if app_len < len(payload):
        raise ValueError("pkt_len too small for transport header and payload")
    eth = (
        _mac_bytes(rec.dst_mac or DEFAULT_GATEWAY_MAC)
        + _mac_bytes(rec.src_mac or DEFAULT_CLIENT_MAC)
        + struct.pack("!H", ETH_IPV6 if ":" in rec.src_ip else ETH_IPV4)
    )
    frame = eth + _ip_header(rec, proto_num) + transport + payload + bytes(app_len - len(payload))
    if rec.frame_len < len(frame):
        raise ValueError(f"frame_len {rec.frame_len} shorter than encoded frame {len(frame)}")
    return frame + bytes(rec.frame_len - len(frame))


def write_pcap(records, base_ts_us: int = 1_600_000_000_000_000, payloads=None) -> bytes:
    """Serialize records as a little-endian microsecond pcap.

    ``payloads`` optionally maps record index to bytes placed at the start of
    that packet's application data (e.g. a ClientHello).
    """
    payloads = payloads or {}
    chunks = [struct.pack("<IHHiIII", PCAP_MAGIC_US, 2, 4, 0, 0, 65535, LINKTYPE_ETHERNET)]
    for i, rec in enumerate(records):
        frame = encode_frame(rec, payloads.get(i, b""))
        ts = base_ts_us + rec.timestamp_us
        chunks.append(struct.pack("<IIII", ts // 1_000_000, ts % 1_000_000, len(frame), len(frame)))
        chunks.append(frame)
    return b"".join(chunks)
