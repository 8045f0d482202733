"""Gradient-boosted decision trees for binary classification.

Second-order boosting on the logistic loss with exact greedy split search:
every round fits one regression tree to the per-sample gradients
``g = p - y`` and hessians ``h = p * (1 - p)``. Leaves carry the Newton
weight ``-G / (H + l2_reg)`` and a split is scored by

    gain = 1/2 * (GL^2 / (HL + l2) + GR^2 / (HR + l2) - G^2 / (H + l2))

Samples with ``x < threshold`` go left. Thresholds are midpoints between
consecutive distinct training values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .dataset import FeatureVector, LabeledDataset
from .errors import (
    DegenerateLabelsError,
    DeserializationError,
    InvalidArgumentError,
    InvalidFeatureError,
    SchemaMismatchError,
)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GbtHyperparams:
    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    min_child_weight: float = 1.0
    l2_reg: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidArgumentError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise InvalidArgumentError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise InvalidArgumentError("learning_rate must be in (0, 1]")
        if self.min_child_weight < 0 or self.l2_reg < 0:
            raise InvalidArgumentError("min_child_weight and l2_reg must be non-negative")


class Tree:
    """Flat array representation; ``feature[i] == -1`` marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "gain", "_arrays")

    def __init__(self, feature, threshold, left, right, value, gain):
        self.feature = list(feature)
        self.threshold = list(threshold)
        self.left = list(left)
        self.right = list(right)
        self.value = list(value)
        self.gain = list(gain)
        self._arrays = (
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=float),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=float),
        )

    def predict_one(self, x: Sequence[float]) -> float:
        node = 0
        feature, threshold, left, right = self.feature, self.threshold, self.left, self.right
        while feature[node] >= 0:
            node = left[node] if x[feature[node]] < threshold[node] else right[node]
        return self.value[node]

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature, threshold, left, right, value = self._arrays
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = feature[node]
            active = f >= 0
            if not active.any():
                return value[node]
            r = rows[active]
            nd = node[active]
            go_left = X[r, f[active]] < threshold[nd]
            node[active] = np.where(go_left, left[nd], right[nd])

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": self.value[node]}
        return {
            "feature": self.feature[node],
            "threshold": self.threshold[node],
            "gain": self.gain[node],
            "left": self.to_dict(self.left[node]),
            "right": self.to_dict(self.right[node]),
        }

    @classmethod
    def from_dict(cls, d: dict, n_features: int, where: str) -> "Tree":
        cols: dict[str, list] = {k: [] for k in ("feature", "threshold", "left", "right", "value", "gain")}

        def add(node: Any, path: str) -> int:
            if not isinstance(node, dict):
                raise DeserializationError(f"{path}: expected a node object")
            idx = len(cols["feature"])
            for k in cols:
                cols[k].append(-1 if k in ("feature", "left", "right") else 0.0)
            if "leaf" in node:
                cols["value"][idx] = _as_float(node["leaf"], f"{path}.leaf")
                return idx
            try:
                feat = node["feature"]
                thr = node["threshold"]
                gain = node["gain"]
                left, right = node["left"], node["right"]
            except KeyError as exc:
                raise DeserializationError(f"{path}: missing field {exc.args[0]!r}") from None
            if not isinstance(feat, int) or not 0 <= feat < n_features:
                raise DeserializationError(f"{path}.feature: index {feat!r} out of range")
            cols["feature"][idx] = feat
            cols["threshold"][idx] = _as_float(thr, f"{path}.threshold")
            cols["gain"][idx] = _as_float(gain, f"{path}.gain")
            cols["left"][idx] = add(left, f"{path}.left")
            cols["right"][idx] = add(right, f"{path}.right")
            return idx

        add(d, where)
        return cls(**cols)


def _as_float(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DeserializationError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _sigmoid_exact(z: np.ndarray) -> np.ndarray:
    # scalar tanh per element: vectorized tanh can differ in the last ulp,
    # and batch scores must match proba_one exactly
    return np.fromiter((0.5 * (1.0 + math.tanh(0.5 * v)) for v in z.tolist()), dtype=float, count=len(z))


@dataclass
class GbtModel:
    trees: list[Tree]
    base_score: float
    feature_names: tuple[str, ...]
    importance: dict[str, float]
    hyperparams: GbtHyperparams = field(default_factory=GbtHyperparams)
    metadata: dict[str, Any] = field(default_factory=dict)

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(len(X), self.base_score)
        for t in self.trees:
            out += self.hyperparams.learning_rate * t.predict(X)
        return out

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid_exact(self.margin(X))

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba_matrix(X) >= 0.5).astype(int)

    def proba_one(self, values: Sequence[float]) -> float:
        lr = self.hyperparams.learning_rate
        z = self.base_score
        for t in self.trees:
            z += lr * t.predict_one(values)
        return 0.5 * (1.0 + math.tanh(0.5 * z))


def _check_schema(model: GbtModel, names: Sequence[str]) -> None:
    if tuple(names) != model.feature_names:
        missing = [n for n in model.feature_names if n not in names]
        detail = f"missing {missing[:5]}" if missing else "different ordering or extra features"
        raise SchemaMismatchError(
            f"input has {len(names)} features, model expects {len(model.feature_names)} ({detail})"
        )


def predict_proba(model: GbtModel, x: FeatureVector) -> float:
    _check_schema(model, x.names)
    return model.proba_one(x.values)


def predict_label(model: GbtModel, x: FeatureVector) -> int:
    return int(predict_proba(model, x) >= 0.5)


def predict_dataset(model: GbtModel, data: LabeledDataset) -> np.ndarray:
    _check_schema(model, data.feature_names)
    return model.predict_proba_matrix(data.X)


# ---------------------------------------------------------------- training


def log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def _best_split(X, g, h, sub, G, H, hp: GbtHyperparams):
    """Best split of one node, or None.

    ``sub`` holds the node's sample indices sorted by each feature, one row
    per feature. Returns (gain, feature, threshold).
    """
    n_features, m = sub.shape
    if m < 2:
        return None
    xs = X[sub, np.arange(n_features)[:, None]]
    GL = np.cumsum(g[sub], axis=1)[:, :-1]
    HL = np.cumsum(h[sub], axis=1)[:, :-1]
    GR = G - GL
    HR = H - HL
    lam = hp.l2_reg
    gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam))
    valid = (xs[:, 1:] > xs[:, :-1]) & (HL >= hp.min_child_weight) & (HR >= hp.min_child_weight)
    gain = np.where(valid, gain, -np.inf)
    # argmax returns the first maximum: lowest feature index, then lowest threshold
    flat = int(np.argmax(gain))
    f, j = divmod(flat, m - 1)
    best = gain[f, j]
    if not np.isfinite(best) or best <= 0.0:
        return None
    lo, hi = xs[f, j], xs[f, j + 1]
    thr = (lo + hi) / 2.0
    if not lo < thr <= hi:
        thr = hi
    return float(best), f, float(thr)


def _build_tree(X, g, h, order, hp: GbtHyperparams) -> Tree:
    feature, threshold, left, right, value, gain = [], [], [], [], [], []

    def new_node() -> int:
        for col, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0), (gain, 0.0)):
            col.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, order, 0)]
    while stack:
        node, sub, depth = stack.pop()
        idx = sub[0]
        G = float(g[idx].sum())
        H = float(h[idx].sum())
        value[node] = -G / (H + hp.l2_reg)
        if depth >= hp.max_depth:
            continue
        split = _best_split(X, g, h, sub, G, H, hp)
        if split is None:
            continue
        gn, f, thr = split
        go_left = (X[:, f] < thr)[sub]
        n_left = int(go_left[0].sum())
        n_features = sub.shape[0]
        feature[node], threshold[node], gain[node] = f, thr, gn
        value[node] = 0.0
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], sub[~go_left].reshape(n_features, -1), depth + 1))
        stack.append((left[node], sub[go_left].reshape(n_features, n_left), depth + 1))
    return Tree(feature, threshold, left, right, value, gain)


def train(
    data: LabeledDataset,
    hp: Optional[GbtHyperparams] = None,
    metadata: Optional[dict] = None,
    loss_trace: Optional[list] = None,
) -> GbtModel:
    """Fit a boosted ensemble. ``loss_trace``, if given, receives the training
    log-loss before the first round and after every round."""
    hp = hp or GbtHyperparams()
    X, y = data.X, data.y.astype(float)
    if len(X) == 0:
        raise DegenerateLabelsError("empty training set")
    if not np.all(np.isfinite(X)):
        raise InvalidFeatureError("training features contain NaN or infinite values")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise DegenerateLabelsError("training labels contain a single class")

    prevalence = n_pos / len(y)
    base = math.log(prevalence / (1 - prevalence))
    order = np.argsort(X, axis=0, kind="stable").T.copy()
    F = np.full(len(y), base)
    trees = []
    importance = np.zeros(X.shape[1])
    if loss_trace is not None:
        loss_trace.append(log_loss(y, _sigmoid(F)))
    for _ in range(hp.n_trees):
        p = _sigmoid(F)
        g = p - y
        h = p * (1.0 - p)
        tree = _build_tree(X, g, h, order, hp)
        trees.append(tree)
        for f, gn in zip(tree.feature, tree.gain):
            if f >= 0:
                importance[f] += gn
        F += hp.learning_rate * tree.predict(X)
        if loss_trace is not None:
            loss_trace.append(log_loss(y, _sigmoid(F)))

    names = data.feature_names
    imp = {names[i]: float(importance[i]) for i in range(len(names)) if importance[i] > 0}
    meta = {"n_samples": len(y), "n_positive": n_pos}
    meta.update(metadata or {})
    return GbtModel(trees, base, names, imp, hp, meta)


def feature_importance(model: GbtModel, top_k: Optional[int] = None) -> list[tuple[str, float]]:
    """Features with positive accumulated gain, highest first."""
    position = {n: i for i, n in enumerate(model.feature_names)}
    ranked = sorted(
        ((n, g) for n, g in model.importance.items() if g > 0),
        key=lambda kv: (-kv[1], position[kv[0]]),
    )
    return ranked if top_k is None else ranked[:top_k]


# ---------------------------------------------------------------- serialization


def model_to_dict(model: GbtModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "gbt",
        "hyperparams": asdict(model.hyperparams),
        "feature_names": list(model.feature_names),
        "base_score": model.base_score,
        "trees": [t.to_dict() for t in model.trees],
        "importance": {n: model.importance[n] for n in model.feature_names if n in model.importance},
        "metadata": model.metadata,
    }


def dumps_document(doc: dict) -> bytes:
    return (json.dumps(doc, indent=1, allow_nan=False) + "\n").encode("utf-8")


def loads_document(payload: bytes | str, kind: str) -> dict:
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise DeserializationError(
            f"malformed model document at line {exc.lineno} column {exc.colno} (offset {exc.pos}): {exc.msg}"
        ) from None
    except UnicodeDecodeError as exc:
        raise DeserializationError(f"model document is not UTF-8 (offset {exc.start})") from None
    if not isinstance(doc, dict):
        raise DeserializationError("model document root must be an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DeserializationError(f"format_version: unsupported value {doc.get('format_version')!r}")
    if doc.get("kind") != kind:
        raise DeserializationError(f"kind: expected {kind!r}, got {doc.get('kind')!r}")
    return doc


def save_model(model: GbtModel) -> bytes:
    return dumps_document(model_to_dict(model))


def load_model(payload: bytes | str) -> GbtModel:
    doc = loads_document(payload, "gbt")
    try:
        names = doc["feature_names"]
        hp_doc = doc["hyperparams"]
        base = doc["base_score"]
        trees_doc = doc["trees"]
        imp = doc["importance"]
    except KeyError as exc:
        raise DeserializationError(f"missing top-level field {exc.args[0]!r}") from None
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise DeserializationError("feature_names: expected a list of strings")
    try:
        hp = GbtHyperparams(**hp_doc)
    except (TypeError, InvalidArgumentError) as exc:
        raise DeserializationError(f"hyperparams: {exc}") from None
    if not isinstance(trees_doc, list):
        raise DeserializationError("trees: expected a list")
    trees = [Tree.from_dict(t, len(names), f"trees[{i}]") for i, t in enumerate(trees_doc)]
    if not isinstance(imp, dict) or any(k not in names for k in imp):
        raise DeserializationError("importance: keys must be feature names")
    importance = {k: _as_float(v, f"importance.{k}") for k, v in imp.items()}
    metadata = doc.get("metadata", {})
    return GbtModel(trees, _as_float(base, "base_score"), tuple(names), importance, hp, metadata)
