"""Threshold-per-feature baseline with majority voting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import FeatureVector, LabeledDataset
from .errors import DegenerateLabelsError, DeserializationError, InvalidArgumentError, SchemaMismatchError
from .gbt import dumps_document, loads_document, FORMAT_VERSION

ABOVE = "above"  # x > threshold votes 360
BELOW = "below"  # x <= threshold votes 360


@dataclass(frozen=True)
class ThresholdEntry:
    feature: str
    threshold: float
    polarity: str

    def vote(self, value: float) -> int:
        above = value > self.threshold
        return int(above) if self.polarity == ABOVE else int(not above)


@dataclass(frozen=True)
class ThresholdModel:
    entries: tuple[ThresholdEntry, ...]

    def __post_init__(self):
        names = [e.feature for e in self.entries]
        if not names:
            raise InvalidArgumentError("threshold model needs at least one feature")
        if len(set(names)) != len(names):
            raise InvalidArgumentError("duplicate features in threshold model")


def best_threshold(x: np.ndarray, y: np.ndarray) -> tuple[float, str, float]:
    """Accuracy-maximizing (threshold, polarity, accuracy) for one feature.

    Candidates are midpoints between consecutive distinct values plus the
    maximum (which turns the rule into a constant prediction). Ties prefer
    the lower threshold, then ``above``.
    """
    n = len(x)
    uniq = np.unique(x)
    candidates = np.concatenate(((uniq[:-1] + uniq[1:]) / 2.0, uniq[-1:]))
    xs = np.sort(x)
    ys = y[np.argsort(x, kind="stable")]
    pos_total = int(y.sum())
    cum_pos = np.concatenate(([0], np.cumsum(ys)))
    # number of samples <= t for every candidate
    k = np.searchsorted(xs, candidates, side="right")
    pos_below = cum_pos[k]
    neg_below = k - pos_below
    pos_above = pos_total - pos_below
    acc_above = (pos_above + neg_below) / n
    acc_below = 1.0 - acc_above
    best = (-1.0, 0.0, ABOVE)
    for t, a_up, a_down in zip(candidates, acc_above, acc_below):
        if a_up > best[0]:
            best = (float(a_up), float(t), ABOVE)
        if a_down > best[0]:
            best = (float(a_down), float(t), BELOW)
    acc, thr, pol = best
    return thr, pol, acc


def fit_thresholds(data: LabeledDataset, features: Sequence[str]) -> ThresholdModel:
    if len(set(data.y.tolist())) < 2:
        raise DegenerateLabelsError("threshold fitting needs both classes")
    entries = []
    for name in features:
        if name not in data.feature_names:
            raise SchemaMismatchError(f"feature {name!r} not in dataset")
        col = data.X[:, data.feature_names.index(name)]
        thr, pol, _ = best_threshold(col, data.y)
        entries.append(ThresholdEntry(name, thr, pol))
    return ThresholdModel(tuple(entries))


def heuristic_predict(model: ThresholdModel, x: FeatureVector) -> int:
    """Majority of per-feature votes; a tie goes to normal (0)."""
    votes = sum(e.vote(x.get(e.feature)) for e in model.entries)
    return int(2 * votes > len(model.entries))


def heuristic_predict_matrix(model: ThresholdModel, data: LabeledDataset) -> np.ndarray:
    votes = np.zeros(len(data), dtype=int)
    for e in model.entries:
        if e.feature not in data.feature_names:
            raise SchemaMismatchError(f"feature {e.feature!r} missing from input")
        col = data.X[:, data.feature_names.index(e.feature)]
        above = col > e.threshold
        votes += above if e.polarity == ABOVE else ~above
    return (2 * votes > len(model.entries)).astype(int)


def save_threshold_model(model: ThresholdModel) -> bytes:
    return dumps_document(
        {
            "format_version": FORMAT_VERSION,
            "kind": "threshold",
            "entries": [
                {"feature": e.feature, "threshold": e.threshold, "polarity": e.polarity} for e in model.entries
            ],
        }
    )


def load_threshold_model(payload: bytes | str) -> ThresholdModel:
    doc = loads_document(payload, "threshold")
    entries = []
    for i, e in enumerate(doc.get("entries", [])):
        try:
            thr = e["threshold"]
            if isinstance(thr, bool) or not isinstance(thr, (int, float)):
                raise TypeError
            if e["polarity"] not in (ABOVE, BELOW):
                raise ValueError
            entries.append(ThresholdEntry(str(e["feature"]), float(thr), e["polarity"]))
        except (KeyError, TypeError, ValueError):
            raise DeserializationError(f"entries[{i}]: malformed threshold entry") from None
    try:
        return ThresholdModel(tuple(entries))
    except InvalidArgumentError as exc:
        raise DeserializationError(f"entries: {exc}") from None
