import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_pkt
from oracles import bursts_oracle, flow_features_oracle, top_n_oracle
from vid360.errors import EmptyInputError, InvalidArgumentError
from vid360.flw_features import (
    FLOW_FEATURES,
    FlowFeatureSet,
    aggregate_feature_names,
    aggregate_top_flows,
    compute_flow_features,
    count_retransmissions,
    detect_bursts,
    parse_top_n,
    select_top_flows,
)
from vid360.ingest import assemble_flows, filter_video_flows
from vid360.records import Direction, FlowKey, FlowRecord
from vid360.synth import SynthParams, generate_trace


def _flow(packets):
    packets = sorted(packets, key=lambda p: p.timestamp_us)
    return FlowRecord.from_packets(FlowKey.for_packet(packets[0]), packets)


def test_one_burst_for_small_gaps():
    f = _flow([make_pkt(i * 0.1, "dl") for i in range(10)])
    (b,) = detect_bursts(f, Direction.DOWNLINK, 0.5)
    assert b.pkt_count == 10


def test_two_bursts():
    f = _flow([make_pkt(t, "dl") for t in (0, 0.2, 1.0, 1.1)])
    assert [b.pkt_count for b in detect_bursts(f, Direction.DOWNLINK, 0.5)] == [2, 2]


def test_no_packets_in_direction():
    f = _flow([make_pkt(0, "dl")])
    assert detect_bursts(f, Direction.UPLINK) == []


def test_500_random_gaps_match_linear_scan():
    rng = random.Random(8)
    t, pk = 0.0, []
    for _ in range(500):
        t += rng.expovariate(3.0)
        pk.append(make_pkt(t, "dl", pkt_len=rng.randrange(40, 1500)))
    f = _flow(pk)
    got = [(b.start_us, b.end_us, b.size, b.pkt_count) for b in detect_bursts(f, Direction.DOWNLINK, 0.5)]
    assert got == bursts_oracle([p.timestamp_us for p in f.packets], [p.pkt_len for p in f.packets], 0.5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 3_000_000), min_size=1, max_size=40), st.floats(0.0, 2.0))
def test_burst_partition_properties(gaps, thr):
    t, pk = 0, []
    for g in gaps:
        t += g
        pk.append(make_pkt(t / 1e6, "dl", pkt_len=100 + g % 900))
    f = _flow(pk)
    bursts = detect_bursts(f, Direction.DOWNLINK, thr)
    assert sum(b.pkt_count for b in bursts) == len(pk)
    assert sum(b.size for b in bursts) == sum(p.pkt_len for p in pk)
    assert len(detect_bursts(f, Direction.DOWNLINK, float("inf"))) == 1
    assert len(detect_bursts(f, Direction.DOWNLINK, 0.0)) == len(pk)


def test_throughput_is_total_over_duration():
    f = _flow([make_pkt(0, "dl", pkt_len=600), make_pkt(4, "dl", pkt_len=600)])
    assert compute_flow_features(f).values["throughput_mean_Bps_dl"] == 300


def test_single_packet_direction():
    f = _flow([make_pkt(0, "dl", pkt_len=800), make_pkt(1, "ul", pkt_len=100), make_pkt(3, "dl", pkt_len=800)])
    v = compute_flow_features(f).values
    assert v["frame_gap_mean_s_ul"] == 0
    assert v["burst_duration_mean_s_ul"] == 0
    assert v["burst_rate_max_Bps_ul"] == 100
    assert v["burst_pkt_count_max_ul"] == 1


def test_zero_duration_flow_throughput_is_total():
    f = _flow([make_pkt(1, "dl", pkt_len=500), make_pkt(1, "dl", pkt_len=700)])
    assert compute_flow_features(f).values["throughput_mean_Bps_dl"] == 1200


def test_retransmissions():
    pk = [
        make_pkt(0.0, "dl", pkt_len=1020, tcp_seq=1),
        make_pkt(0.1, "dl", pkt_len=1020, tcp_seq=1001),
        make_pkt(0.2, "dl", pkt_len=1020, tcp_seq=1),  # repeat
        make_pkt(0.3, "dl", pkt_len=520, tcp_seq=1),  # same seq, different length
        make_pkt(0.4, "dl", pkt_len=20, tcp_seq=5),  # pure ACK
        make_pkt(0.5, "dl", pkt_len=20, tcp_seq=5),  # pure ACK again, not counted
    ]
    assert count_retransmissions(pk) == 1
    udp = [make_pkt(t, "dl", proto="udp", pkt_len=1000) for t in (0, 1)]
    assert compute_flow_features(_flow(udp)).values["retransmissions_count_dl"] == 0


def test_empty_flow_rejected():
    f = FlowRecord(FlowKey("a", "b", 1, 2, make_pkt(0).proto), (), 0, 0, 0, 0)
    with pytest.raises(EmptyInputError):
        compute_flow_features(f)


def test_synthetic_flows_match_brute_force():
    pk = generate_trace(SynthParams(platform="FB", duration_s=40, seed=77))
    flows = assemble_flows(pk)
    assert len(flows) >= 2
    for f in flows:
        got = compute_flow_features(f, 0.5)
        expect = flow_features_oracle(list(f.packets), 0.5)
        assert set(got.values) == set(FLOW_FEATURES)
        for name in FLOW_FEATURES:
            assert got.values[name] == pytest.approx(expect[name], rel=1e-9, abs=1e-12), name
        assert all(v >= 0 for v in got.values.values())
        assert got.bytes_dl == sum(p.pkt_len for p in f.packets if p.direction is Direction.DOWNLINK)


def test_video_flow_filter_on_synthetic_trace():
    for platform in ("YT", "FB"):
        flows = assemble_flows(generate_trace(SynthParams(platform=platform, duration_s=30, seed=1)))
        kept = filter_video_flows(flows, platform)
        assert kept and kept[0] is flows[0]  # the dominant flow is a video flow


# ---------------------------------------------------------------- aggregation


def _ffs(rng, i):
    return FlowFeatureSet({n: rng.uniform(0, 100) for n in FLOW_FEATURES}, rng.randrange(0, 5), start_us=rng.randrange(0, 10**6) + i)


def test_n1_has_20_features():
    rng = random.Random(1)
    v = aggregate_top_flows([_ffs(rng, i) for i in range(3)], 1)
    assert len(v.values) == 20
    assert v.names == tuple(f"{f}_mean" for f in FLOW_FEATURES)


@pytest.mark.parametrize("n", [2, 4, 6, 8, None])
def test_multi_flow_has_80_features(n):
    rng = random.Random(2)
    v = aggregate_top_flows([_ffs(rng, i) for i in range(5)], n)
    assert len(v.values) == 80
    assert v.names == aggregate_feature_names(n)


def test_identical_flows():
    f = FlowFeatureSet({n: float(i + 1) for i, n in enumerate(FLOW_FEATURES)}, 10)
    v = aggregate_top_flows([f] * 4, 4)
    for i, name in enumerate(FLOW_FEATURES):
        x = float(i + 1)
        assert (v.get(f"{name}_mean"), v.get(f"{name}_sum"), v.get(f"{name}_min"), v.get(f"{name}_max")) == (x, 4 * x, x, x)


def test_top6_of_10_matches_oracle():
    rng = random.Random(6)
    flows = [_ffs(rng, i) for i in range(10)]
    chosen = [c[2] for c in top_n_oracle([(f.bytes_dl, f.start_us, f) for f in flows], 6)]
    v = aggregate_top_flows(flows, 6)
    for j, name in enumerate(FLOW_FEATURES):
        col = [f.values[name] for f in chosen]
        assert v.get(f"{name}_mean") == pytest.approx(sum(col) / 6, rel=1e-12)
        assert v.get(f"{name}_sum") == pytest.approx(sum(col), rel=1e-12)
        assert v.get(f"{name}_min") == min(col)
        assert v.get(f"{name}_max") == max(col)


def test_invalid_n():
    with pytest.raises(InvalidArgumentError):
        aggregate_top_flows([FlowFeatureSet(dict.fromkeys(FLOW_FEATURES, 0.0), 1)], 0)
    with pytest.raises(EmptyInputError):
        aggregate_top_flows([], 2)
    assert parse_top_n("ALL") is None and parse_top_n("all") is None and parse_top_n("3") == 3
    with pytest.raises(InvalidArgumentError):
        parse_top_n("-1")


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.randoms(use_true_random=False))
def test_aggregation_order_invariant_and_sum_monotone(k, rnd):
    rng = random.Random(rnd.random())
    flows = [_ffs(rng, i) for i in range(k)]
    shuffled = flows[:]
    rnd.shuffle(shuffled)
    for n in (1, 2, 4, None):
        assert aggregate_top_flows(flows, n).values == aggregate_top_flows(shuffled, n).values
    sums = [aggregate_top_flows(flows, n) for n in (2, 4, 6, 8)]
    for a, b in zip(sums, sums[1:]):
        for name in FLOW_FEATURES:
            assert b.get(f"{name}_sum") >= a.get(f"{name}_sum") - 1e-9


def test_select_top_flows_tie_break_on_start():
    a = FlowFeatureSet(dict.fromkeys(FLOW_FEATURES, 1.0), 100, start_us=5)
    b = FlowFeatureSet(dict.fromkeys(FLOW_FEATURES, 2.0), 100, start_us=3)
    c = FlowFeatureSet(dict.fromkeys(FLOW_FEATURES, 3.0), 200, start_us=9)
    assert select_top_flows([a, b, c], 2) == [c, b]
