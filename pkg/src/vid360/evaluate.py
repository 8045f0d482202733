"""Evaluation protocol: repeated random train/test splits, accuracy and F1,
interval and flow-count sweeps, real-time accuracy curves and per-video
accuracy."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .dataset import FeatureVector, LabeledDataset
from .errors import DegenerateSplitError, InvalidArgumentError, SchemaMismatchError
from .flw_features import FlowFeatureSet, aggregate_feature_names, aggregate_top_flows
from .gbt import GbtHyperparams, feature_importance, predict_dataset, train
from .heuristic import fit_thresholds, heuristic_predict_matrix
from .pkt_features import BIN_FEATURES, BinFeatures
from .realtime import DECISION_PERIOD_S, decisions_from_labels, max_decisions

VIDEO_DISJOINT = "video_disjoint"
TRACE_LEVEL = "trace_level"
MAX_SPLIT_ATTEMPTS = 100


@dataclass(frozen=True)
class SplitSpec:
    strategy: str = VIDEO_DISJOINT
    train_fraction: float = 0.7
    n_repeats: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in (VIDEO_DISJOINT, TRACE_LEVEL):
            raise InvalidArgumentError(f"unknown split strategy {self.strategy!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidArgumentError("train_fraction must be in (0, 1)")
        if self.n_repeats < 1:
            raise InvalidArgumentError("n_repeats must be >= 1")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_indices(
    video_ids: Sequence[str], labels: Sequence[int], spec: SplitSpec, repeat_index: int
) -> tuple[list[int], list[int]]:
    """Deterministic (train, test) index lists for one repeat.

    Splits missing a class in train are redrawn up to ``MAX_SPLIT_ATTEMPTS``
    times.
    """
    labels = np.asarray(labels)
    by_video: dict[str, list[int]] = defaultdict(list)
    for i, v in enumerate(video_ids):
        by_video[v].append(i)
    videos = sorted(by_video)
    for attempt in range(MAX_SPLIT_ATTEMPTS):
        rng = np.random.default_rng([spec.seed, repeat_index, attempt])
        train_idx: list[int] = []
        if spec.strategy == VIDEO_DISJOINT:
            perm = rng.permutation(len(videos))
            n_train = _round_half_up(spec.train_fraction * len(videos))
            for j in perm[:n_train]:
                train_idx.extend(by_video[videos[j]])
        else:
            for v in videos:
                members = by_video[v]
                perm = rng.permutation(len(members))
                n_train = _round_half_up(spec.train_fraction * len(members))
                train_idx.extend(members[j] for j in perm[:n_train])
        train_set = set(train_idx)
        train_idx = sorted(train_set)
        test_idx = [i for i in range(len(labels)) if i not in train_set]
        if test_idx and len(set(labels[train_idx].tolist())) == 2:
            return train_idx, test_idx
    raise DegenerateSplitError(
        f"no split with both classes in train after {MAX_SPLIT_ATTEMPTS} attempts (repeat {repeat_index})"
    )


def split(data: LabeledDataset, spec: SplitSpec, repeat_index: int) -> tuple[LabeledDataset, LabeledDataset]:
    train_idx, test_idx = split_indices(data.video_ids, data.y, spec, repeat_index)
    return data.subset(train_idx), data.subset(test_idx)


def metrics(predictions: Sequence[int], labels: Sequence[int]) -> tuple[float, float]:
    """Accuracy and F1 with class 1 (360) as the positive class."""
    if len(predictions) != len(labels):
        raise InvalidArgumentError(f"{len(predictions)} predictions for {len(labels)} labels")
    if len(labels) == 0:
        raise InvalidArgumentError("metrics need at least one prediction")
    tp, fp, tn, fn = confusion(predictions, labels)
    acc = (tp + tn) / len(labels)
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom and tp else 0.0
    return acc, f1


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> tuple[int, int, int, int]:
    p = np.asarray(predictions, dtype=int)
    y = np.asarray(labels, dtype=int)
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    tn = int(np.sum((p == 0) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    return tp, fp, tn, fn


@dataclass
class EvalReport:
    accuracies: list[float] = field(default_factory=list)
    f1s: list[float] = field(default_factory=list)
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    # (repeat index, video_id, trace correct)
    outcomes: list[tuple[int, str, bool]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def acc_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def acc_std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def f1_mean(self) -> float:
        return float(np.mean(self.f1s))

    @property
    def f1_std(self) -> float:
        return float(np.std(self.f1s))

    def add_repeat(self, repeat: int, predictions, labels, video_ids) -> None:
        acc, f1 = metrics(predictions, labels)
        self.accuracies.append(acc)
        self.f1s.append(f1)
        tp, fp, tn, fn = confusion(predictions, labels)
        self.tp += tp
        self.fp += fp
        self.tn += tn
        self.fn += fn
        for p, y, v in zip(predictions, labels, video_ids):
            self.outcomes.append((repeat, v, int(p) == int(y)))

    @property
    def per_video(self) -> dict[str, float]:
        return per_video_accuracy([self])

    def summary(self) -> dict[str, Any]:
        return {
            "metadata": self.metadata,
            "acc_mean": self.acc_mean,
            "acc_std": self.acc_std,
            "f1_mean": self.f1_mean,
            "f1_std": self.f1_std,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "accuracies": self.accuracies,
            "f1s": self.f1s,
        }


def per_video_accuracy(reports: Sequence[EvalReport]) -> dict[str, float]:
    """Mean over repeats of each video's test accuracy; untested videos are absent."""
    per_repeat: dict[str, dict[tuple[int, int], list[bool]]] = defaultdict(lambda: defaultdict(list))
    for r_i, report in enumerate(reports):
        for repeat, video, ok in report.outcomes:
            per_repeat[video][(r_i, repeat)].append(ok)
    return {
        v: float(np.mean([np.mean(oks) for oks in reps.values()]))
        for v, reps in sorted(per_repeat.items())
    }


# ---------------------------------------------------------------- offline


def evaluate_offline(
    data: LabeledDataset,
    spec: SplitSpec,
    hp: Optional[GbtHyperparams] = None,
    metadata: Optional[dict] = None,
) -> EvalReport:
    report = EvalReport(metadata=dict(metadata or {}, model="gbt", strategy=spec.strategy, n_repeats=spec.n_repeats))
    for r in range(spec.n_repeats):
        train_set, test_set = split(data, spec, r)
        model = train(train_set, hp)
        preds = (predict_dataset(model, test_set) >= 0.5).astype(int)
        report.add_repeat(r, preds, test_set.y, test_set.video_ids)
    return report


def compare_heuristic(
    data: LabeledDataset,
    spec: SplitSpec,
    hp: Optional[GbtHyperparams] = None,
    k: int = 5,
    metadata: Optional[dict] = None,
) -> tuple[EvalReport, EvalReport]:
    """GBT versus the threshold heuristic on identical splits.

    The heuristic uses the top-``k`` features by GBT gain from the same
    training split.
    """
    if not 1 <= k <= 5:
        raise InvalidArgumentError("heuristic k must be within 1..5")
    meta = dict(metadata or {}, strategy=spec.strategy, n_repeats=spec.n_repeats)
    gbt_report = EvalReport(metadata=dict(meta, model="gbt"))
    heur_report = EvalReport(metadata=dict(meta, model="heuristic", k=k))
    for r in range(spec.n_repeats):
        train_set, test_set = split(data, spec, r)
        model = train(train_set, hp)
        gbt_report.add_repeat(r, (predict_dataset(model, test_set) >= 0.5).astype(int), test_set.y, test_set.video_ids)
        top = [name for name, _ in feature_importance(model, k)] or [train_set.feature_names[0]]
        thr = fit_thresholds(train_set, top)
        heur_report.add_repeat(r, heuristic_predict_matrix(thr, test_set), test_set.y, test_set.video_ids)
    return gbt_report, heur_report


def run_offline_pkt_sweep(
    datasets: Mapping[str, Mapping[int, LabeledDataset]],
    spec: SplitSpec,
    hp: Optional[GbtHyperparams] = None,
) -> list[EvalReport]:
    """One report per (traffic type, interval). ``datasets[traffic][interval]``."""
    reports = []
    for traffic, by_interval in datasets.items():
        for interval in sorted(by_interval):
            reports.append(
                evaluate_offline(by_interval[interval], spec, hp, {"traffic": traffic, "interval_s": interval, "features": "pkt"})
            )
    return reports


@dataclass(frozen=True)
class TraceFlows:
    trace_id: str
    video_id: str
    platform: str
    label: int
    flows: tuple[FlowFeatureSet, ...]


def flow_dataset(traces: Sequence[TraceFlows], n: Optional[int]) -> LabeledDataset:
    vectors = [
        aggregate_top_flows(t.flows, n, t.label, t.trace_id, t.video_id, t.platform) for t in traces
    ]
    expected = len(aggregate_feature_names(n))
    if any(len(v.names) != expected for v in vectors):
        raise SchemaMismatchError(f"flow vectors for n={n} do not have {expected} features")
    return LabeledDataset(vectors)


def run_offline_flw_sweep(
    datasets: Mapping[str, Sequence[TraceFlows]],
    spec: SplitSpec,
    hp: Optional[GbtHyperparams] = None,
    n_values: Sequence[Optional[int]] = (1, 2, 4, 6, 8, None),
) -> list[EvalReport]:
    reports = []
    for traffic, traces in datasets.items():
        for n in n_values:
            data = flow_dataset(traces, n)
            reports.append(
                evaluate_offline(
                    data, spec, hp, {"traffic": traffic, "n_flows": "ALL" if n is None else n, "features": "flw"}
                )
            )
    return reports


# ---------------------------------------------------------------- real time


@dataclass(frozen=True)
class TraceBins:
    trace_id: str
    video_id: str
    platform: str
    label: int
    bins: tuple[BinFeatures, ...]


@dataclass
class RealtimeCurve:
    times_s: list[int]
    # accuracy[r][k] = repeat r, decision time times_s[k]
    accuracy: list[list[float]] = field(default_factory=list)
    f1: list[list[float]] = field(default_factory=list)
    bin_accuracy: list[float] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def mean_accuracy(self) -> list[float]:
        return [float(x) for x in np.mean(np.asarray(self.accuracy), axis=0)]

    @property
    def mean_f1(self) -> list[float]:
        return [float(x) for x in np.mean(np.asarray(self.f1), axis=0)]


def bin_dataset(traces: Sequence[TraceBins]) -> LabeledDataset:
    """Every bin becomes a training row labeled with its trace's label."""
    vectors = [
        FeatureVector(BIN_FEATURES, b.feature_values(), t.label, f"{t.trace_id}@{b.window_start_s}", t.video_id, t.platform)
        for t in traces
        for b in t.bins
    ]
    return LabeledDataset(vectors, BIN_FEATURES)


def run_realtime_curve(
    traces: Sequence[TraceBins],
    spec: SplitSpec,
    hp: Optional[GbtHyperparams] = None,
    stop_s: int = 120,
    model_factory=None,
) -> RealtimeCurve:
    """Mean test accuracy of streaming decisions at t = 10, 15, ..., ``stop_s``.

    Traces too short to reach a decision time count as wrong at that time.
    ``model_factory(train_dataset)`` replaces GBT training when given.
    """
    n_dec = max_decisions(stop_s)
    times = [(k + 2) * DECISION_PERIOD_S for k in range(n_dec)]
    curve = RealtimeCurve(times, metadata={"strategy": spec.strategy, "n_repeats": spec.n_repeats, "stop_s": stop_s})
    labels = [t.label for t in traces]
    videos = [t.video_id for t in traces]
    for r in range(spec.n_repeats):
        train_idx, test_idx = split_indices(videos, labels, spec, r)
        train_set = bin_dataset([traces[i] for i in train_idx])
        model = model_factory(train_set) if model_factory else train(train_set, hp)
        decided = np.full((len(test_idx), n_dec), -1, dtype=int)
        bin_hits = []
        for row, i in enumerate(test_idx):
            t = traces[i]
            if not t.bins:
                continue
            X = np.array([b.feature_values() for b in t.bins], dtype=float)
            bin_labels = model.predict_labels(X)
            bin_hits.extend((bin_labels == t.label).tolist())
            for k, d in enumerate(decisions_from_labels(bin_labels, stop_s)):
                decided[row, k] = d.label
        y = np.array([traces[i].label for i in test_idx])
        accs, f1s = [], []
        for k in range(n_dec):
            preds = np.where(decided[:, k] < 0, 1 - y, decided[:, k])
            a, f = metrics(preds, y)
            accs.append(a)
            f1s.append(f)
        curve.accuracy.append(accs)
        curve.f1.append(f1s)
        curve.bin_accuracy.append(float(np.mean(bin_hits)) if bin_hits else 0.0)
    return curve


# ---------------------------------------------------------------- outputs


def _csv_text(header: Sequence[str], rows, comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def sweep_table_csv(reports: Sequence[EvalReport], key: str, comments: Sequence[str] = ()) -> str:
    """Wide table: one row per ``key`` value, accuracy/F1 columns per traffic type."""
    traffics: list[str] = []
    keys: list[Any] = []
    cell: dict[tuple[Any, str], EvalReport] = {}
    for r in reports:
        t, k = r.metadata.get("traffic", "ALL"), r.metadata[key]
        if t not in traffics:
            traffics.append(t)
        if k not in keys:
            keys.append(k)
        cell[(k, t)] = r
    header = [key]
    for t in traffics:
        header += [f"{t}_acc", f"{t}_acc_std", f"{t}_f1", f"{t}_f1_std"]
    rows = []
    for k in keys:
        row = [k]
        for t in traffics:
            r = cell.get((k, t))
            row += [_fmt(r.acc_mean), _fmt(r.acc_std), _fmt(r.f1_mean), _fmt(r.f1_std)] if r else ["", "", "", ""]
        rows.append(row)
    return _csv_text(header, rows, comments)


def report_csv(report: EvalReport, comments: Sequence[str] = ()) -> str:
    rows = [[i, _fmt(a), _fmt(f)] for i, (a, f) in enumerate(zip(report.accuracies, report.f1s))]
    rows.append(["mean", _fmt(report.acc_mean), _fmt(report.f1_mean)])
    rows.append(["std", _fmt(report.acc_std), _fmt(report.f1_std)])
    return _csv_text(["repeat", "accuracy", "f1"], rows, comments)


def curve_csv(curve: RealtimeCurve, comments: Sequence[str] = ()) -> str:
    rows = [[t, _fmt(a), _fmt(f)] for t, a, f in zip(curve.times_s, curve.mean_accuracy, curve.mean_f1)]
    return _csv_text(["t_s", "accuracy", "f1"], rows, comments)


def per_video_csv(per_video: Mapping[str, float], comments: Sequence[str] = ()) -> str:
    return _csv_text(["video_id", "accuracy"], [[v, _fmt(a)] for v, a in per_video.items()], comments)


def summary_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"
