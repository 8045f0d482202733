"""Core packet and flow records shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import InvalidArgumentError


class Direction(str, Enum):
    UPLINK = "ul"
    DOWNLINK = "dl"


class Proto(str, Enum):
    TCP = "tcp"
    UDP = "udp"
    OTHER = "other"


@dataclass(frozen=True, slots=True)
class PacketRecord:
    """One captured packet.

    ``pkt_len`` is the IP payload length (transport header plus application
    data); ``frame_len`` is the layer-2 length on the wire. ``direction`` is
    ``None`` only for pcap input that has not been through
    :func:`vid360.ingest.assign_direction` yet.

    ``tcp_seq`` and the MAC fields are optional extras not carried by every
    input format: the sequence number feeds retransmission counting and the
    MACs feed client matching on pcap input.
    """

    timestamp_us: int
    direction: Optional[Direction]
    frame_len: int
    pkt_len: int
    tcp_hdr_len: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: Proto
    sni_hint: str = ""
    tcp_seq: Optional[int] = None
    src_mac: str = ""
    dst_mac: str = ""

    @property
    def payload_len(self) -> int:
        return self.pkt_len - self.tcp_hdr_len if self.proto is Proto.TCP else self.pkt_len

    def validate(self) -> None:
        if self.timestamp_us < 0:
            raise InvalidArgumentError(f"negative timestamp {self.timestamp_us}")
        if not self.frame_len >= self.pkt_len >= self.tcp_hdr_len >= 0:
            raise InvalidArgumentError(
                f"length ordering violated: frame={self.frame_len} pkt={self.pkt_len} "
                f"tcp_hdr={self.tcp_hdr_len}"
            )
        if self.proto is not Proto.TCP and self.tcp_hdr_len != 0:
            raise InvalidArgumentError("non-TCP packet with a TCP header length")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise InvalidArgumentError(f"port out of range: {port}")


@dataclass(frozen=True, slots=True, order=True)
class FlowKey:
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: Proto

    def swapped(self) -> "FlowKey":
        return FlowKey(self.dst_ip, self.src_ip, self.dst_port, self.src_port, self.proto)

    @classmethod
    def for_packet(cls, pkt: PacketRecord) -> "FlowKey":
        # client endpoint first: uplink packets are sourced at the client
        if pkt.direction is Direction.DOWNLINK:
            return cls(pkt.dst_ip, pkt.src_ip, pkt.dst_port, pkt.src_port, pkt.proto)
        if pkt.direction is Direction.UPLINK:
            return cls(pkt.src_ip, pkt.dst_ip, pkt.src_port, pkt.dst_port, pkt.proto)
        raise InvalidArgumentError("packet direction must be assigned before flow assembly")


def endpoint_pair(pkt: PacketRecord) -> tuple:
    """Direction-free conversation key; both directions map to the same tuple."""
    a = (pkt.src_ip, pkt.src_port)
    b = (pkt.dst_ip, pkt.dst_port)
    return (min(a, b), max(a, b), pkt.proto.value)


@dataclass(frozen=True)
class FlowRecord:
    key: FlowKey
    packets: tuple[PacketRecord, ...]
    bytes_dl: int
    bytes_ul: int
    start_us: int
    end_us: int
    sni_hint: str = ""

    @classmethod
    def from_packets(cls, key: FlowKey, packets) -> "FlowRecord":
        packets = tuple(packets)
        if not packets:
            raise InvalidArgumentError("a flow needs at least one packet")
        dl = sum(p.pkt_len for p in packets if p.direction is Direction.DOWNLINK)
        ul = sum(p.pkt_len for p in packets if p.direction is Direction.UPLINK)
        hint = next((p.sni_hint for p in packets if p.sni_hint), "")
        return cls(
            key=key,
            packets=packets,
            bytes_dl=dl,
            bytes_ul=ul,
            start_us=packets[0].timestamp_us,
            end_us=packets[-1].timestamp_us,
            sni_hint=hint,
        )


def _normalize_mac(mac: str) -> str:
    return mac.strip().lower().replace("-", ":")


@dataclass(frozen=True)
class ClientIdentity:
    """The device whose traffic is analysed. MAC wins over IP when both are set."""

    mac: Optional[str] = None
    ip: Optional[str] = None
    _mac_norm: str = field(init=False, repr=False, compare=False, default="")

    def __post_init__(self):
        if not self.mac and not self.ip:
            raise InvalidArgumentError("client identity needs a MAC or an IP address")
        if self.mac:
            object.__setattr__(self, "_mac_norm", _normalize_mac(self.mac))

    def matches_src(self, pkt: PacketRecord) -> bool:
        if self.mac and pkt.src_mac:
            return _normalize_mac(pkt.src_mac) == self._mac_norm
        return bool(self.ip) and pkt.src_ip == self.ip

    def matches_dst(self, pkt: PacketRecord) -> bool:
        if self.mac and pkt.dst_mac:
            return _normalize_mac(pkt.dst_mac) == self._mac_norm
        return bool(self.ip) and pkt.dst_ip == self.ip
