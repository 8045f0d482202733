"""CSV interchange files: trace manifests, packet-level feature vectors,
per-bin features and per-flow features.

Every writer accepts ``comments`` emitted as leading ``# `` lines; every
reader skips them.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

from .dataset import FeatureVector
from .errors import ParseError, SchemaMismatchError
from .evaluate import TraceBins, TraceFlows
from .flw_features import FLOW_FEATURES, FlowFeatureSet
from .pkt_features import BIN_FEATURES, BinFeatures

META_COLUMNS = ("trace_id", "video_id", "platform", "label")
BIN_PREFIX = ("trace_id", "window_start_s")
FLOW_PREFIX = META_COLUMNS + ("flow_rank", "bytes_dl")
MANIFEST_COLUMNS = META_COLUMNS + ("path",)


def _num(v: float) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() and abs(f) < 2**53 else repr(f)


def _writer(comments: Iterable[str]):
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    return buf, csv.writer(buf, lineterminator="\n")


def _rows(text: str) -> tuple[list[str], list[tuple[int, list[str]]]]:
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError("CSV has no header row")
    header = next(csv.reader([lines[0][1]]))
    rows = [(n, next(csv.reader([ln]))) for n, ln in lines[1:]]
    for n, row in rows:
        if len(row) != len(header):
            raise ParseError(f"line {n}: expected {len(header)} fields, got {len(row)}")
    return header, rows


def comment_lines(text: str) -> list[str]:
    out = []
    for ln in text.splitlines():
        s = ln.strip()
        if not s:
            continue
        if not s.startswith("#"):
            break
        out.append(s[1:].strip())
    return out


def provenance_config(text: str) -> dict[str, Any]:
    """The ``config {...}`` provenance comment of a file written by the CLI, or {}."""
    for c in comment_lines(text):
        if c.startswith("config "):
            try:
                return json.loads(c[len("config ") :])
            except json.JSONDecodeError:
                return {}
    return {}


def sniff_kind(text: str) -> str:
    """``pkt``, ``flw`` or ``bin`` from a feature file's header."""
    header, _ = _rows(text)
    if tuple(header[:2]) == BIN_PREFIX:
        return "bin"
    if tuple(header[: len(FLOW_PREFIX)]) == FLOW_PREFIX:
        return "flw"
    if tuple(header[: len(META_COLUMNS)]) == META_COLUMNS:
        return "pkt"
    raise ParseError(f"unrecognized feature file header {header[:6]!r}")


def _label(text: str, where: str) -> Optional[int]:
    text = text.strip()
    if text == "":
        return None
    if text not in ("0", "1"):
        raise ParseError(f"{where}: label must be 0, 1 or empty, got {text!r}")
    return int(text)


# ---------------------------------------------------------------- manifest


@dataclass(frozen=True)
class ManifestEntry:
    trace_id: str
    video_id: str
    platform: str
    label: Optional[int]
    path: str


def write_manifest(entries: Sequence[ManifestEntry], comments: Iterable[str] = ()) -> str:
    buf, w = _writer(comments)
    w.writerow(MANIFEST_COLUMNS)
    for e in entries:
        w.writerow([e.trace_id, e.video_id, e.platform, "" if e.label is None else e.label, e.path])
    return buf.getvalue()


def read_manifest(text: str) -> list[ManifestEntry]:
    header, rows = _rows(text)
    if tuple(header) != MANIFEST_COLUMNS:
        raise ParseError(f"manifest header must be {','.join(MANIFEST_COLUMNS)}")
    return [ManifestEntry(r[0], r[1], r[2], _label(r[3], f"line {n}"), r[4]) for n, r in rows]


# ---------------------------------------------------------------- feature vectors


def write_feature_csv(vectors: Sequence[FeatureVector], comments: Iterable[str] = ()) -> str:
    if not vectors:
        raise SchemaMismatchError("no feature vectors to write")
    names = vectors[0].names
    buf, w = _writer(comments)
    w.writerow(META_COLUMNS + names)
    for v in vectors:
        if v.names != names:
            raise SchemaMismatchError(f"vector {v.trace_id!r} has a different schema")
        w.writerow([v.trace_id, v.video_id, v.platform, "" if v.label is None else v.label] + [_num(x) for x in v.values])
    return buf.getvalue()


def read_feature_csv(text: str) -> list[FeatureVector]:
    header, rows = _rows(text)
    if tuple(header[: len(META_COLUMNS)]) != META_COLUMNS:
        raise ParseError(f"feature CSV must start with {','.join(META_COLUMNS)}")
    names = tuple(header[len(META_COLUMNS) :])
    out = []
    for n, r in rows:
        try:
            values = tuple(float(x) for x in r[len(META_COLUMNS) :])
        except ValueError as exc:
            raise ParseError(f"line {n}: {exc}") from None
        out.append(FeatureVector(names, values, _label(r[3], f"line {n}"), r[0], r[1], r[2]))
    return out


# ---------------------------------------------------------------- bins


def write_bin_csv(traces: Sequence[tuple[str, Sequence[BinFeatures]]], comments: Iterable[str] = ()) -> str:
    buf, w = _writer(comments)
    w.writerow(BIN_PREFIX + BIN_FEATURES)
    for trace_id, bins in traces:
        for b in bins:
            w.writerow([trace_id, b.window_start_s] + [_num(x) for x in b.feature_values()])
    return buf.getvalue()


def read_bin_csv(text: str) -> dict[str, list[BinFeatures]]:
    header, rows = _rows(text)
    if tuple(header) != BIN_PREFIX + BIN_FEATURES:
        raise ParseError("bin CSV header mismatch")
    out: dict[str, list[BinFeatures]] = {}
    for n, r in rows:
        try:
            v = [float(x) for x in r[2:]]
            b = BinFeatures(int(r[1]), int(v[0]), int(v[1]), int(v[2]), int(v[3]), v[4], v[5], v[6], v[7])
        except ValueError as exc:
            raise ParseError(f"line {n}: {exc}") from None
        out.setdefault(r[0], []).append(b)
    return out


def attach_bin_labels(bins: dict[str, list[BinFeatures]], manifest: Sequence[ManifestEntry]) -> list[TraceBins]:
    meta = {e.trace_id: e for e in manifest}
    out = []
    for trace_id, trace_bins in bins.items():
        e = meta.get(trace_id)
        if e is None or e.label is None:
            raise SchemaMismatchError(f"no label for trace {trace_id!r} in manifest")
        out.append(TraceBins(trace_id, e.video_id, e.platform, e.label, tuple(trace_bins)))
    return out


# ---------------------------------------------------------------- flows


def write_flow_csv(traces: Sequence[TraceFlows], comments: Iterable[str] = ()) -> str:
    buf, w = _writer(comments)
    w.writerow(FLOW_PREFIX + FLOW_FEATURES)
    for t in traces:
        ranked = sorted(t.flows, key=lambda f: (-f.bytes_dl, f.start_us))
        for rank, f in enumerate(ranked, start=1):
            w.writerow(
                [t.trace_id, t.video_id, t.platform, "" if t.label is None else t.label, rank, f.bytes_dl]
                + [_num(x) for x in f.vector()]
            )
    return buf.getvalue()


def read_flow_csv(text: str) -> list[TraceFlows]:
    """Flow rows grouped per trace; ``flow_rank`` stands in for start time as tie-break."""
    header, rows = _rows(text)
    if tuple(header) != FLOW_PREFIX + FLOW_FEATURES:
        raise ParseError("flow-feature CSV header mismatch")
    grouped: dict[str, tuple[list[str], list[FlowFeatureSet]]] = {}
    for n, r in rows:
        try:
            values = dict(zip(FLOW_FEATURES, (float(x) for x in r[len(FLOW_PREFIX) :])))
            fs = FlowFeatureSet(values, int(r[5]), start_us=int(r[4]))
        except ValueError as exc:
            raise ParseError(f"line {n}: {exc}") from None
        entry = grouped.setdefault(r[0], (r, []))
        entry[1].append(fs)
    return [
        TraceFlows(tid, r[1], r[2], _label(r[3], f"trace {tid}"), tuple(flows))
        for tid, (r, flows) in grouped.items()
    ]
