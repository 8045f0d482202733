import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_pkt
from vid360.errors import AmbiguousIdentityError, ParseError, UnsupportedFormatError
from vid360.ingest import (
    PACKET_CSV_COLUMNS,
    Platform,
    assemble_flows,
    assign_direction,
    detect_format,
    filter_video_flows,
    parse_capture,
    read_packet_csv,
    rebase,
    write_packet_csv,
)
from vid360.records import ClientIdentity, Direction, FlowKey, FlowRecord, Proto

HEADER = ",".join(PACKET_CSV_COLUMNS) + "\n"


def test_header_only_csv_is_empty():
    assert parse_capture(HEADER.encode(), "packet-csv") == []


def test_single_row_is_rebased_to_zero():
    row = "5000000,dl,1514,1460,20,1.2.3.4,10.0.0.2,443,50000,tcp,r3---sn.googlevideo.com\n"
    (rec,) = parse_capture((HEADER + row).encode(), "packet-csv")
    assert rec.timestamp_us == 0
    assert rec.direction is Direction.DOWNLINK
    assert (rec.frame_len, rec.pkt_len, rec.tcp_hdr_len) == (1514, 1460, 20)
    assert (rec.src_ip, rec.dst_ip, rec.src_port, rec.dst_port) == ("1.2.3.4", "10.0.0.2", 443, 50000)
    assert rec.proto is Proto.TCP
    assert rec.sni_hint == "r3---sn.googlevideo.com"


def test_rows_are_sorted_by_time():
    rows = (
        "3000,ul,100,86,20,10.0.0.2,1.2.3.4,50000,443,tcp,\n"
        "1000,dl,100,86,20,1.2.3.4,10.0.0.2,443,50000,tcp,\n"
    )
    recs = parse_capture((HEADER + rows).encode(), "packet-csv")
    assert [r.timestamp_us for r in recs] == [0, 2000]
    assert [r.direction for r in recs] == [Direction.DOWNLINK, Direction.UPLINK]


def test_bad_row_reports_byte_offset():
    row = "1000,dl,100,86,20,1.2.3.4,10.0.0.2,443,50000,tcp,\n"
    bad = "oops,dl,100,86,20,1.2.3.4,10.0.0.2,443,50000,tcp,\n"
    with pytest.raises(ParseError) as exc:
        read_packet_csv(HEADER + row + bad)
    assert exc.value.offset == len(HEADER) + len(row)
    assert "offset" in str(exc.value)


def test_length_invariant_violation_is_a_parse_error():
    row = "0,dl,100,200,20,1.2.3.4,10.0.0.2,443,50000,tcp,\n"
    with pytest.raises(ParseError):
        read_packet_csv(HEADER + row)


def test_wrong_header_rejected():
    with pytest.raises(ParseError):
        read_packet_csv("a,b,c\n1,2,3\n")


def test_unknown_format_rejected():
    with pytest.raises(UnsupportedFormatError):
        parse_capture(b"", "pcapng")


def test_detect_format():
    assert detect_format(HEADER.encode()) == "packet-csv"
    assert detect_format(b"\xd4\xc3\xb2\xa1" + bytes(20)) == "pcap-ethernet"


def _random_records(rng, n):
    out = []
    t = 0
    for _ in range(n):
        t += rng.randrange(0, 50_000)
        proto = rng.choice([Proto.TCP, Proto.UDP])
        hdr = rng.choice([20, 32]) if proto is Proto.TCP else 0
        pkt_len = rng.randrange(hdr, 1500)
        out.append(
            make_pkt(
                t / 1e6,
                rng.choice(["ul", "dl"]),
                pkt_len=pkt_len,
                frame_len=pkt_len + rng.choice([14, 18]),
                proto=proto.value,
                tcp_hdr=hdr,
                sni_hint=rng.choice(["", "a.googlevideo.com", "x.fbcdn.net"]),
                tcp_seq=rng.randrange(0, 2**32) if proto is Proto.TCP and rng.random() < 0.5 else None,
            )
        )
    return out


def test_csv_round_trip_is_bit_exact():
    rng = random.Random(3)
    recs = rebase(_random_records(rng, 300))
    text = write_packet_csv(recs, comments=["made by a test"])
    back = parse_capture(text.encode(), "packet-csv")
    assert back == recs
    assert write_packet_csv(back, comments=["made by a test"]) == text


# ---------------------------------------------------------------- direction


def _raw(src, dst, t=0.0):
    return replace(make_pkt(t, "ul", server=("9.9.9.9", 443)), src_ip=src, dst_ip=dst, direction=None)


def test_direction_from_client_ip():
    client = ClientIdentity(ip="10.0.0.2")
    up, down = assign_direction([_raw("10.0.0.2", "1.1.1.1"), _raw("1.1.1.1", "10.0.0.2", 1)], client)
    assert up.direction is Direction.UPLINK
    assert down.direction is Direction.DOWNLINK


def test_direction_hand_table():
    client = ClientIdentity(ip="10.0.0.2")
    pairs = [
        ("10.0.0.2", "1.1.1.1"),
        ("1.1.1.1", "10.0.0.3"),
        ("8.8.8.8", "10.0.0.2"),
        ("10.0.0.3", "1.1.1.1"),
        ("1.1.1.1", "8.8.8.8"),
        ("10.0.0.2", "8.8.4.4"),
        ("5.5.5.5", "6.6.6.6"),
        ("1.1.1.1", "10.0.0.2"),
        ("10.0.0.4", "10.0.0.5"),
        ("7.7.7.7", "10.0.0.9"),
    ]
    out = assign_direction([_raw(s, d, i) for i, (s, d) in enumerate(pairs)], client)
    assert len(out) == 4
    assert [p.direction.value for p in out] == ["ul", "dl", "ul", "dl"]


def test_mac_preferred_over_ip():
    client = ClientIdentity(mac="02:00:00:00:00:01", ip="10.0.0.99")
    p = replace(_raw("10.0.0.2", "1.1.1.1"), src_mac="02:00:00:00:00:01", dst_mac="02:00:00:00:00:fe")
    (out,) = assign_direction([p], client)
    assert out.direction is Direction.UPLINK


def test_ambiguous_identity():
    with pytest.raises(AmbiguousIdentityError):
        assign_direction([_raw("10.0.0.2", "10.0.0.2")], ClientIdentity(ip="10.0.0.2"))


def test_client_identity_requires_a_field():
    with pytest.raises(ValueError):
        ClientIdentity()


# ---------------------------------------------------------------- flows


def test_single_five_tuple_is_one_flow():
    pk = [make_pkt(i * 0.1, "dl" if i % 2 else "ul") for i in range(6)]
    (flow,) = assemble_flows(pk)
    assert len(flow.packets) == 6


def test_interleaved_flows_partition():
    a = [make_pkt(t, "dl", server=("1.1.1.1", 443)) for t in (0.0, 0.2, 0.4)]
    b = [make_pkt(t, "ul", server=("2.2.2.2", 443)) for t in (0.1, 0.3)]
    flows = assemble_flows(sorted(a + b, key=lambda p: p.timestamp_us))
    assert sorted(len(f.packets) for f in flows) == [2, 3]


def test_flow_key_canonicalization_is_involutive():
    up = make_pkt(0, "ul")
    down = make_pkt(0, "dl")
    assert FlowKey.for_packet(up) == FlowKey.for_packet(down)
    k = FlowKey.for_packet(up)
    assert k.swapped().swapped() == k
    assert k.src_ip == "10.0.0.2"


def test_flow_byte_totals_match_group_by_oracle():
    rng = random.Random(11)
    servers = [(f"1.1.1.{i}", 443 + i) for i in range(8)]
    pk = []
    for i in range(200):
        pk.append(make_pkt(i * 0.01, rng.choice(["ul", "dl"]), pkt_len=rng.randrange(40, 1400), server=rng.choice(servers)))
    expected = {}
    for p in pk:
        server = p.dst_ip if p.direction is Direction.UPLINK else p.src_ip
        dl, ul = expected.get(server, (0, 0))
        if p.direction is Direction.DOWNLINK:
            dl += p.pkt_len
        else:
            ul += p.pkt_len
        expected[server] = (dl, ul)
    flows = assemble_flows(pk)
    got = {f.key.dst_ip: (f.bytes_dl, f.bytes_ul) for f in flows}
    assert got == expected
    assert [f.bytes_dl for f in flows] == sorted((f.bytes_dl for f in flows), reverse=True)
    for f in flows:
        assert f.bytes_dl + f.bytes_ul == sum(p.pkt_len for p in f.packets)


def test_shuffled_input_gives_same_flows():
    rng = random.Random(5)
    servers = [(f"1.1.1.{i}", 443) for i in range(4)]
    pk = [make_pkt(i * 0.013, rng.choice(["ul", "dl"]), server=rng.choice(servers), pkt_len=rng.randrange(40, 1400)) for i in range(100)]
    shuffled = pk[:]
    rng.shuffle(shuffled)
    assert assemble_flows(rebase(shuffled)) == assemble_flows(rebase(pk))


# ---------------------------------------------------------------- platform filter


def _flow(hint, i=0):
    p = make_pkt(0, "dl", server=(f"3.3.3.{i}", 443), sni_hint=hint)
    return FlowRecord.from_packets(FlowKey.for_packet(p), [p])


def test_keyword_examples():
    assert filter_video_flows([_flow("r3---sn.googlevideo.com")], Platform.YT)
    assert not filter_video_flows([_flow("scontent.fbcdn.net")], "YT")
    assert not filter_video_flows([_flow("")], "ANY")


def test_keyword_substring_scan():
    hosts = ["r1.googlevideo.com", "i.ytimg.com", "video.fbcdn.net", "graph.facebook.com", "example.org", "www.youtube.com"]
    flows = [_flow(h, i) for i, h in enumerate(hosts)]
    assert [f.sni_hint for f in filter_video_flows(flows, "YT")] == ["r1.googlevideo.com", "i.ytimg.com", "www.youtube.com"]
    assert [f.sni_hint for f in filter_video_flows(flows, "FB")] == ["video.fbcdn.net", "graph.facebook.com"]
    assert len(filter_video_flows(flows, "ANY")) == 5


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["a.googlevideo.com", "fbcdn.net", "", "x.org", "yt.be", "facebook.com"]), max_size=12))
def test_filter_is_subset_and_idempotent(hosts):
    flows = [_flow(h, i) for i, h in enumerate(hosts)]
    for platform in ("YT", "FB", "ANY"):
        once = filter_video_flows(flows, platform)
        assert all(f in flows for f in once)
        assert filter_video_flows(once, platform) == once
