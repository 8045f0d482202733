import pytest

from builders import bin_traces, flow_traces, pkt_dataset, traces
from vid360.errors import ParseError, SchemaMismatchError
from vid360.evaluate import flow_dataset
from vid360.formats import (
    ManifestEntry,
    attach_bin_labels,
    comment_lines,
    provenance_config,
    read_bin_csv,
    read_feature_csv,
    read_flow_csv,
    read_manifest,
    sniff_kind,
    write_bin_csv,
    write_feature_csv,
    write_flow_csv,
    write_manifest,
)

PROV = ["vid360 0.1.0", 'config {"interval": 30}']


def test_manifest_round_trip():
    entries = [ManifestEntry("t1", "v1", "YT", 1, "traces/t1.csv"), ManifestEntry("t2", "v2", "FB", None, "x.pcap")]
    text = write_manifest(entries, PROV)
    assert read_manifest(text) == entries
    assert comment_lines(text) == PROV
    with pytest.raises(ParseError):
        read_manifest("a,b\n1,2\n")


def test_feature_csv_round_trip_exact():
    vecs = pkt_dataset(traces("FB", 3, 0.8, 1, 30)).vectors
    text = write_feature_csv(vecs, PROV)
    assert read_feature_csv(text) == vecs
    assert sniff_kind(text) == "pkt"
    assert provenance_config(text) == {"interval": 30}
    assert write_feature_csv(read_feature_csv(text), PROV) == text


def test_feature_csv_errors():
    vecs = pkt_dataset(traces("FB", 3, 0.8, 1, 30)).vectors
    text = write_feature_csv(vecs)
    with pytest.raises(ParseError):
        read_feature_csv(text.rstrip("\n").rsplit(",", 1)[0] + ",abc\n")  # last value not a number
    with pytest.raises(SchemaMismatchError):
        write_feature_csv([])


def test_flow_csv_round_trip_preserves_aggregates():
    trs = flow_traces(traces("YT", 3, 0.8, 2, 30))
    text = write_flow_csv(trs, PROV)
    back = read_flow_csv(text)
    assert sniff_kind(text) == "flw"
    assert [t.trace_id for t in back] == [t.trace_id for t in trs]
    for n in (1, 2, None):
        assert [v.values for v in flow_dataset(back, n).vectors] == [v.values for v in flow_dataset(trs, n).vectors]


def test_bin_csv_round_trip_and_labels():
    trs = bin_traces(traces("YT", 2, 0.8, 3, 30))
    text = write_bin_csv([(t.trace_id, t.bins) for t in trs], PROV)
    back = read_bin_csv(text)
    assert sniff_kind(text) == "bin"
    assert {k: tuple(v) for k, v in back.items()} == {t.trace_id: t.bins for t in trs}
    manifest = [ManifestEntry(t.trace_id, t.video_id, t.platform, t.label, "") for t in trs]
    assert attach_bin_labels(back, manifest) == trs
    with pytest.raises(SchemaMismatchError):
        attach_bin_labels(back, manifest[1:])
