"""Streaming classification: one bin-level prediction per second, and a
trace-level majority decision every five bins."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import EmptyInputError, OrderingError, SchemaMismatchError
from .gbt import GbtModel
from .pkt_features import BIN_FEATURES, BinFeatures

GROUP_BINS = 5
DECISION_PERIOD_S = 5


@dataclass(frozen=True)
class Decision:
    t_s: int
    label: int
    votes_for_1: int
    votes_total: int

    def as_dict(self) -> dict:
        return {"t_s": self.t_s, "label": self.label, "votes_for_1": self.votes_for_1, "votes_total": self.votes_total}


@dataclass
class StreamState:
    """Per-session state. Owned by a single caller; not thread-safe."""

    bin_predictions: list[int] = field(default_factory=list)
    decisions: list[Decision] = field(default_factory=list)
    last_label: Optional[int] = None
    next_window_start_s: Optional[int] = None
    ones: int = 0

    def push_label(self, label: int) -> Optional[Decision]:
        self.bin_predictions.append(int(label))
        self.ones += int(label)
        total = len(self.bin_predictions)
        if total % GROUP_BINS:
            return None
        n = total // GROUP_BINS
        label_out = _majority(self.ones, total, self.last_label)
        decision = Decision((n + 1) * DECISION_PERIOD_S, label_out, self.ones, total)
        self.decisions.append(decision)
        self.last_label = label_out
        return decision


def _majority(ones: int, total: int, prev: Optional[int]) -> int:
    zeros = total - ones
    if ones > zeros:
        return 1
    if zeros > ones:
        return 0
    return prev if prev is not None else 0


def mode_vote(bits: Sequence[int], prev: Optional[int] = None) -> int:
    """Majority of ``bits``; an exact tie returns ``prev`` (or 0 without one)."""
    if not bits:
        raise EmptyInputError("mode_vote needs at least one value")
    return _majority(sum(int(b) for b in bits), len(bits), prev)


def push_bin(state: StreamState, model: GbtModel, bin: BinFeatures) -> Optional[Decision]:
    """Classify one completed bin and emit a decision when a group of five closes."""
    expected = state.next_window_start_s
    if expected is not None and bin.window_start_s != expected:
        raise OrderingError(f"expected bin starting at {expected}s, got {bin.window_start_s}s")
    if model.feature_names != BIN_FEATURES:
        raise SchemaMismatchError("stream model must be trained on bin-level features")
    label = int(model.proba_one(bin.feature_values()) >= 0.5)
    state.next_window_start_s = bin.window_start_s + 1
    return state.push_label(label)


def max_decisions(stop_s: int) -> int:
    return max(0, stop_s // DECISION_PERIOD_S - 1)


def classify_stream(model: GbtModel, bins: Sequence[BinFeatures], stop_s: int = 120) -> list[Decision]:
    """Replay ``bins`` and return decisions stamped t = 10, 15, ... up to ``stop_s``."""
    state = StreamState()
    limit = max_decisions(stop_s)
    for b in bins:
        if len(state.decisions) >= limit:
            break
        push_bin(state, model, b)
    return state.decisions


def decisions_from_labels(labels: Sequence[int], stop_s: int = 120) -> list[Decision]:
    """Decision schedule for precomputed per-bin labels (batch evaluation path)."""
    state = StreamState()
    limit = max_decisions(stop_s)
    for lbl in labels:
        if len(state.decisions) >= limit:
            break
        state.push_label(lbl)
    return state.decisions
