import sys
from typing import Optional
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vid360.records import Direction, PacketRecord, Proto  # noqa: E402

# criterion number -> (name, passed, detail); filled by test_acceptance.py
# ok is None for an optional criterion that was skipped
ACCEPTANCE: dict[int, tuple[str, Optional[bool], str]] = {}


def make_pkt(t_s, direction="dl", pkt_len=1000, frame_len=None, proto="tcp", tcp_hdr=None, **kw):
    """Test helper: a packet at ``t_s`` seconds on a fixed default 5-tuple."""
    proto = Proto(proto)
    if tcp_hdr is None:
        tcp_hdr = 20 if proto is Proto.TCP else 0
    d = Direction(direction)
    client, server = kw.pop("client", ("10.0.0.2", 50000)), kw.pop("server", ("1.2.3.4", 443))
    src, dst = (client, server) if d is Direction.UPLINK else (server, client)
    return PacketRecord(
        timestamp_us=int(round(t_s * 1_000_000)),
        direction=d,
        frame_len=frame_len if frame_len is not None else pkt_len + 34,
        pkt_len=pkt_len,
        tcp_hdr_len=tcp_hdr,
        src_ip=src[0],
        dst_ip=dst[0],
        src_port=src[1],
        dst_port=dst[1],
        proto=proto,
        **kw,
    )


@pytest.fixture
def pkt():
    return make_pkt


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[num]
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {num:>2}. {name}: {detail}")
