"""Named feature vectors and labeled datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateLabelsError, InvalidFeatureError, SchemaMismatchError

NORMAL = 0
DEG360 = 1


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: tuple[float, ...]
    label: Optional[int] = None
    trace_id: str = ""
    video_id: str = ""
    platform: str = ""

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.names) != len(self.values):
            raise SchemaMismatchError(
                f"{len(self.names)} feature names but {len(self.values)} values"
            )
        if len(set(self.names)) != len(self.names):
            raise SchemaMismatchError("duplicate feature names")
        if self.label is not None and self.label not in (0, 1):
            raise InvalidFeatureError(f"label must be 0 or 1, got {self.label!r}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def get(self, name: str) -> float:
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise SchemaMismatchError(f"feature {name!r} missing from vector") from None


@dataclass
class LabeledDataset:
    """A list of labeled vectors sharing one feature ordering.

    ``X`` and ``y`` are materialized once on construction.
    """

    vectors: list[FeatureVector]
    feature_names: tuple[str, ...] = ()
    X: np.ndarray = field(init=False, repr=False)
    y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = list(self.vectors)
        if not self.feature_names and self.vectors:
            self.feature_names = self.vectors[0].names
        self.feature_names = tuple(self.feature_names)
        for v in self.vectors:
            if v.names != self.feature_names:
                raise SchemaMismatchError(f"vector {v.trace_id!r} has a different feature schema")
            if v.label is None:
                raise DegenerateLabelsError(f"vector {v.trace_id!r} has no label")
        self.X = np.array([v.values for v in self.vectors], dtype=float).reshape(
            len(self.vectors), len(self.feature_names)
        )
        self.y = np.array([v.label for v in self.vectors], dtype=int)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def video_ids(self) -> list[str]:
        return [v.video_id for v in self.vectors]

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        return LabeledDataset([self.vectors[i] for i in indices], self.feature_names)

    def select_features(self, names: Sequence[str]) -> "LabeledDataset":
        idx = [self.feature_names.index(n) for n in names]
        vecs = [
            FeatureVector(tuple(names), tuple(v.values[i] for i in idx), v.label, v.trace_id, v.video_id, v.platform)
            for v in self.vectors
        ]
        return LabeledDataset(vecs, tuple(names))

    @classmethod
    def from_arrays(cls, X, y, feature_names=None, video_ids=None) -> "LabeledDataset":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        names = tuple(feature_names or (f"f{i}" for i in range(X.shape[1])))
        vids = video_ids if video_ids is not None else [f"v{i}" for i in range(len(X))]
        vecs = [
            FeatureVector(names, tuple(row), int(lbl), trace_id=f"t{i}", video_id=str(vid))
            for i, (row, lbl, vid) in enumerate(zip(X, y, vids))
        ]
        return cls(vecs, names)


def merge(datasets: Sequence[LabeledDataset]) -> LabeledDataset:
    """Union of datasets with a shared schema (the BOTH traffic type)."""
    vectors = [v for d in datasets for v in d.vectors]
    return LabeledDataset(vectors, datasets[0].feature_names if datasets else ())
