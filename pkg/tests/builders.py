"""Cached synthetic datasets shared by the pipeline-level tests."""

from functools import lru_cache

from vid360.dataset import LabeledDataset, merge
from vid360.evaluate import TraceBins, TraceFlows
from vid360.pkt_features import bin_packets, summarize_bins
from vid360.pipeline import trace_flow_features
from vid360.synth import SynthParams, generate_dataset


@lru_cache(maxsize=None)
def traces(platform="YT", n_per_class=50, separability=0.8, seed=0, duration_s=120, traces_per_video=1):
    template = SynthParams(platform=platform, duration_s=duration_s, separability=separability)
    return tuple(generate_dataset(n_per_class, template, seed, traces_per_video))


def both_traces(n_per_class=50, separability=0.8, seed=0, duration_s=120):
    half = n_per_class // 2
    return traces("YT", half, separability, seed, duration_s) + traces("FB", half, separability, seed, duration_s)


def pkt_dataset(trs, interval_s=30) -> LabeledDataset:
    return LabeledDataset(
        [
            summarize_bins(bin_packets(t.packets, interval_s=interval_s), t.label, t.trace_id, t.video_id, t.platform)
            for t in trs
        ]
    )


def pkt_both(n_per_class=50, separability=0.8, seed=0, interval_s=30) -> LabeledDataset:
    half = n_per_class // 2
    return merge(
        [
            pkt_dataset(traces(p, half, separability, seed, interval_s), interval_s)
            for p in ("YT", "FB")
        ]
    )


def flow_traces(trs):
    return [TraceFlows(t.trace_id, t.video_id, t.platform, t.label, tuple(trace_flow_features(t.packets, t.platform))) for t in trs]


def bin_traces(trs):
    return [TraceBins(t.trace_id, t.video_id, t.platform, t.label, tuple(bin_packets(t.packets))) for t in trs]
