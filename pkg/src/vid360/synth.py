"""Deterministic synthetic video-session traces.

A trace is one dominant video flow fetched in on/off segment bursts plus a
few small side flows. The class effect is controlled by ``separability``:

* 360 sessions (label 1) download at ``base_rate * (1 + separability)`` and
  keep fetching until the end of the session;
* normal sessions (label 0) download at ``base_rate`` and stop fetching at a
  fraction ``1 - separability * (1 - u)`` of the duration, ``u ~ U(0.6, 0.7)``,
  after which only keep-alive packets remain;
* downlink packet sizes sit just under the MTU with a spread that is
  ``1 + 1.5 * separability`` times wider for 360 sessions;
* 360 sessions send on average ``separability`` extra uplink requests per
  segment.

Per-trace nuisance factors (bandwidth, segment period, size spread) are
drawn identically for both classes, and the random stream does not depend
on the label, so at ``separability = 0`` a label-0 and a label-1 trace with
the same seed are identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .records import Direction, PacketRecord, Proto

US = 1_000_000
ETH_IP_OVERHEAD = 34  # Ethernet (14) + IPv4 (20)
CLIENT_IP = "10.0.0.2"
CLIENT_MAC = "02:00:00:00:00:01"

VIDEO_HOSTS = {"YT": "rr3---sn-4g5e6nsz.googlevideo.com", "FB": "video.fmel1-1.fna.fbcdn.net"}
SIDE_HOSTS = {
    "YT": ("i.ytimg.com", "ads.doubleclick.net", "play.googleapis.com", "www.youtube.com", "clients4.google.com"),
    "FB": ("graph.facebook.com", "ads.doubleclick.net", "static.xx.fbcdn.net", "api.weather.example", "edge-chat.example.net"),
}
SERVER_PREFIX = {"YT": "172.217", "FB": "157.240"}
# typical spread (bytes) of downlink payload sizes below the MTU
SIZE_SPREAD = {"YT": 40.0, "FB": 75.0}


@dataclass(frozen=True)
class SynthParams:
    platform: str = "YT"
    label: int = 1
    duration_s: int = 120
    base_rate_Bps: float = 50_000.0
    separability: float = 0.8
    seed: int = 0
    n_side_flows: int = 3
    video_seed: Optional[int] = None

    def validate(self) -> None:
        if self.platform not in ("YT", "FB"):
            raise InvalidArgumentError(f"platform must be YT or FB, got {self.platform!r}")
        if self.label not in (0, 1):
            raise InvalidArgumentError("label must be 0 or 1")
        if self.duration_s < 30:
            raise InvalidArgumentError("duration_s must be >= 30")
        if not self.base_rate_Bps > 0:
            raise InvalidArgumentError("base_rate_Bps must be positive")
        if not 0.0 <= self.separability <= 1.0:
            raise InvalidArgumentError("separability must be within [0, 1]")
        if self.n_side_flows < 0:
            raise InvalidArgumentError("n_side_flows must be >= 0")


class _Columns:
    def __init__(self):
        self.ts: list[np.ndarray] = []
        self.dl: list[np.ndarray] = []
        self.pkt_len: list[np.ndarray] = []
        self.seq: list[np.ndarray] = []
        self.flow: list[np.ndarray] = []

    def add(self, flow: int, ts, dl, pkt_len, seq=None):
        ts = np.asarray(ts, dtype=np.int64)
        self.ts.append(ts)
        self.dl.append(np.broadcast_to(np.asarray(dl, dtype=bool), ts.shape))
        self.pkt_len.append(np.broadcast_to(np.asarray(pkt_len, dtype=np.int64), ts.shape))
        self.seq.append(np.full(ts.shape, -1, dtype=np.int64) if seq is None else np.asarray(seq, dtype=np.int64))
        self.flow.append(np.full(ts.shape, flow, dtype=np.int64))

    def arrays(self):
        return tuple(np.concatenate(c) for c in (self.ts, self.dl, self.pkt_len, self.seq, self.flow))


def _video_flow(p: SynthParams, rng: np.random.Generator, cols: _Columns) -> None:
    tcp = p.platform == "FB"
    hdr = 32 if tcp else 8
    max_payload = 1428 if tcp else 1350
    end_us = p.duration_s * US

    # nuisance, shared by both classes
    content_rng = np.random.default_rng([p.seed if p.video_seed is None else p.video_seed, 0xC0])
    content = math.exp(content_rng.normal(0.0, 0.2))
    bandwidth = math.exp(rng.normal(0.0, 0.25))
    period_s = rng.uniform(1.5, 2.5)
    spread0 = SIZE_SPREAD[p.platform] * math.exp(rng.normal(0.0, 0.2))
    link_Bps = 2_000_000.0 * bandwidth
    stop_u = rng.uniform(0.6, 0.7)
    req_size = int(rng.integers(450, 800))

    s = p.separability
    rate = p.base_rate_Bps * content * bandwidth * (1.0 + s * p.label)
    spread = spread0 * (1.0 + 1.5 * s * p.label)
    stop_frac = 1.0 if p.label == 1 else 1.0 - s * (1.0 - stop_u)
    stop_us = int(stop_frac * end_us)

    seq_dl = int(rng.integers(0, 2**31))
    seq_ul = int(rng.integers(0, 2**31))
    t = 0.0
    while True:
        start_us = int(t * US)
        if start_us >= end_us - US:
            break
        seg_period = period_s * rng.uniform(0.8, 1.2)
        startup = 3.0 if t < 8.0 else 1.0
        seg_bytes = rate * seg_period * startup * math.exp(rng.normal(0.0, 0.2))
        # draws happen every segment so the random stream is label-independent
        sizes_noise = np.abs(rng.normal(0.0, 1.0, size=int(seg_bytes // max_payload) + 2))
        gaps_noise = rng.uniform(0.7, 1.3, size=sizes_noise.size)
        extra_req = rng.random(2)
        if start_us < stop_us:
            payload = np.clip(max_payload - np.rint(sizes_noise * spread), 200, max_payload).astype(np.int64)
            cum = np.cumsum(payload)
            n = int(np.searchsorted(cum, seg_bytes)) + 1
            n = min(n, payload.size)
            payload = payload[:n]
            gaps = (payload + hdr + ETH_IP_OVERHEAD) / link_Bps * gaps_noise[:n]
            # request then the response burst, 20 ms server think time
            req_us = start_us
            dl_ts = req_us + 20_000 + np.cumsum(np.rint(gaps * US)).astype(np.int64)
            dl_ts = np.minimum(dl_ts, end_us - 1)
            seqs = seq_dl + np.concatenate(([0], np.cumsum(payload)[:-1])) if tcp else None
            if tcp:
                seq_dl += int(payload.sum())
            # 360 players issue extra range requests per segment
            n_req = 1 + int(np.sum(extra_req < 0.5 * s * p.label))
            req_ts = req_us + 3_000 * np.arange(n_req)
            cols.add(0, req_ts, False, hdr + req_size, seq_ul + req_size * np.arange(n_req) if tcp else None)
            if tcp:
                seq_ul += req_size * n_req
            cols.add(0, dl_ts, True, payload + hdr, seqs)
            ack_every = 2 if tcp else 10
            ack_ts = dl_ts[ack_every - 1 :: ack_every] + 500
            ack_len = 32 if tcp else 8 + 40
            cols.add(0, np.minimum(ack_ts, end_us - 1), False, ack_len, np.full(ack_ts.shape, seq_ul) if tcp else None)
            retransmit = rng.random() < 0.3
            j = int(rng.integers(0, n))
            if tcp and retransmit:
                cols.add(0, [min(int(dl_ts[-1]) + 30_000, end_us - 1)], True, [payload[j] + hdr], [seqs[j]])
        else:
            # idle keep-alive exchange
            cols.add(0, [start_us], False, [hdr + 20], [seq_ul] if tcp else None)
            cols.add(0, [start_us + 15_000], True, [hdr + 20], [seq_dl] if tcp else None)
        t += seg_period
    # closing packet keeps the trace length at the configured duration
    tail = end_us - int(rng.uniform(0.05, 0.5) * US)
    cols.add(0, [tail], False, [hdr + 20], [seq_ul] if tcp else None)


def _side_flows(p: SynthParams, rng: np.random.Generator, cols: _Columns) -> None:
    end_us = p.duration_s * US
    for i in range(p.n_side_flows):
        n = int(rng.integers(6, 40))
        start = rng.uniform(0, p.duration_s * 0.8)
        ts = np.sort(start + np.cumsum(rng.exponential(0.05, size=n)))
        ts_us = np.minimum(np.rint(ts * US).astype(np.int64), end_us - 1)
        dl = rng.random(n) < 0.7
        sizes = rng.integers(60, 1400, size=n)
        cols.add(1 + i, ts_us, dl, sizes)


def generate_trace(p: SynthParams) -> list[PacketRecord]:
    """Packet records for one session, sorted and starting at t = 0."""
    p.validate()
    rng = np.random.default_rng([p.seed, 0x360])
    cols = _Columns()
    _video_flow(p, rng, cols)
    _side_flows(p, rng, cols)
    ts, dl, pkt_len, seq, flow = cols.arrays()

    srv_rng = np.random.default_rng([p.seed, 0x5E])
    n_flows = 1 + p.n_side_flows
    tcp_video = p.platform == "FB"
    server_ips = [f"{SERVER_PREFIX[p.platform]}.{srv_rng.integers(1, 255)}.{srv_rng.integers(1, 255)}"]
    server_ips += [f"93.184.{srv_rng.integers(1, 255)}.{srv_rng.integers(1, 255)}" for _ in range(p.n_side_flows)]
    client_ports = [int(x) for x in srv_rng.choice(np.arange(40000, 60000), size=n_flows, replace=False)]
    hosts = [VIDEO_HOSTS[p.platform]] + [SIDE_HOSTS[p.platform][i % len(SIDE_HOSTS[p.platform])] for i in range(p.n_side_flows)]
    protos = [Proto.TCP if tcp_video else Proto.UDP] + [Proto.TCP] * p.n_side_flows
    hdr_len = [32 if pr is Proto.TCP else 0 for pr in protos]

    order = np.lexsort((np.arange(ts.size), ts))
    t0 = int(ts[order[0]]) if ts.size else 0
    records = []
    for i in order:
        f = int(flow[i])
        is_dl = bool(dl[i])
        proto = protos[f]
        plen = int(pkt_len[i])
        th = min(hdr_len[f], plen)
        if proto is Proto.TCP:
            plen = max(plen, th)
        cp, sp = client_ports[f], 443
        sip, dip = (server_ips[f], CLIENT_IP) if is_dl else (CLIENT_IP, server_ips[f])
        records.append(
            PacketRecord(
                timestamp_us=int(ts[i]) - t0,
                direction=Direction.DOWNLINK if is_dl else Direction.UPLINK,
                frame_len=max(plen + ETH_IP_OVERHEAD, 60),
                pkt_len=plen,
                tcp_hdr_len=th,
                src_ip=sip,
                dst_ip=dip,
                src_port=sp if is_dl else cp,
                dst_port=cp if is_dl else sp,
                proto=proto,
                sni_hint=hosts[f],
                tcp_seq=int(seq[i]) if proto is Proto.TCP and seq[i] >= 0 else None,
            )
        )
    return records


@dataclass(frozen=True)
class SynthTrace:
    trace_id: str
    video_id: str
    platform: str
    label: int
    seed: int
    packets: list[PacketRecord]


def generate_dataset(
    n_per_class: int,
    template: Optional[SynthParams] = None,
    seed: int = 0,
    traces_per_video: int = 1,
) -> list[SynthTrace]:
    """``n_per_class`` traces per label with derived seeds.

    With ``traces_per_video > 1`` consecutive traces of a class share a
    video_id and that video's content factor, modelling repeated sessions of
    one video.
    """
    if n_per_class < 1:
        raise InvalidArgumentError("n_per_class must be >= 1")
    if traces_per_video < 1:
        raise InvalidArgumentError("traces_per_video must be >= 1")
    template = template or SynthParams()
    out = []
    for label in (1, 0):
        tag = "360" if label == 1 else "nor"
        for i in range(n_per_class):
            v = i // traces_per_video
            trace_seed = int(np.random.SeedSequence([seed, label, i]).generate_state(1)[0])
            video_seed = int(np.random.SeedSequence([seed, label, v, 0xD1]).generate_state(1)[0])
            params = replace(template, label=label, seed=trace_seed, video_seed=video_seed)
            out.append(
                SynthTrace(
                    trace_id=f"{template.platform}-{tag}-{i:04d}",
                    video_id=f"{template.platform}-{tag}-v{v:04d}",
                    platform=template.platform,
                    label=label,
                    seed=trace_seed,
                    packets=generate_trace(params),
                )
            )
    return out

