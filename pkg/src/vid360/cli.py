"""Command-line entry point.

Every stage reads and writes plain files (packet CSVs, feature CSVs, model
JSON, report CSVs) so runs can be chained and diffed. Outputs start with a
provenance header holding the tool version and the full run configuration.

Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .dataset import LabeledDataset
from .errors import InvalidArgumentError, SchemaMismatchError, Vid360Error
from .evaluate import (
    SplitSpec,
    TraceFlows,
    bin_dataset,
    compare_heuristic,
    curve_csv,
    evaluate_offline,
    flow_dataset,
    per_video_accuracy,
    per_video_csv,
    run_offline_flw_sweep,
    run_realtime_curve,
    summary_json,
    sweep_table_csv,
)
from .flw_features import DEFAULT_BURST_GAP_S, aggregate_top_flows, parse_top_n
from .formats import (
    ManifestEntry,
    attach_bin_labels,
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
from .gbt import GbtHyperparams, feature_importance, load_model, save_model, train
from .ingest import write_packet_csv
from .pipeline import load_packet_file, trace_bins, trace_flow_features
from .pkt_features import summarize_bins
from .realtime import classify_stream
from .records import ClientIdentity
from .synth import SynthParams, generate_dataset

log = logging.getLogger("vid360")

SUBCOMMANDS = ("synth", "extract-pkt", "extract-flw", "train", "predict", "stream", "evaluate", "importance")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- argument types


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _non_negative_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must be within [0, 1], got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _top_n(text: str) -> Optional[int]:
    try:
        return parse_top_n(text)
    except (ValueError, InvalidArgumentError):
        raise argparse.ArgumentTypeError(f"expected a positive integer or ALL, got {text!r}") from None


def _top_n_list(text: str) -> list[Optional[int]]:
    return [_top_n(t) for t in text.replace(",", " ").split()]


def _label(text: str) -> int:
    if text not in ("0", "1"):
        raise argparse.ArgumentTypeError("label must be 0 or 1")
    return int(text)


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key = value file; command-line flags override it")
    p.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="diagnostic verbosity")


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice in the run")


def _add_trace_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="manifest CSV listing traces (trace_id,video_id,platform,label,path)")
    p.add_argument("--input", help="a single capture (pcap or packet CSV) instead of a manifest")
    p.add_argument("--trace-id", default="trace", help="trace id for --input")
    p.add_argument("--video-id", default="", help="video id for --input (defaults to the trace id)")
    p.add_argument("--platform", choices=("YT", "FB", "ANY"), help="platform of --input; for extract-flw it also overrides the manifest")
    p.add_argument("--label", type=_label, help="label of --input (0 normal, 1 360-degree)")
    p.add_argument("--client-ip", help="client IP used to keep the device's packets and assign direction")
    p.add_argument("--client-mac", help="client MAC; preferred over --client-ip when frames carry MACs")


def _add_hyperparams(p: argparse.ArgumentParser) -> None:
    d = GbtHyperparams()
    p.add_argument("--n-trees", type=_positive_int, default=d.n_trees, help="boosting rounds")
    p.add_argument("--max-depth", type=_positive_int, default=d.max_depth, help="maximum tree depth")
    p.add_argument("--learning-rate", type=_positive_float, default=d.learning_rate, help="shrinkage per tree")
    p.add_argument("--min-child-weight", type=float, default=d.min_child_weight, help="minimum hessian sum per leaf")
    p.add_argument("--l2-reg", type=float, default=d.l2_reg, help="L2 penalty on leaf weights")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vid360", description="Detect 360-degree video sessions from encrypted traffic statistics.")
    parser.add_argument("--version", action="version", version=f"vid360 {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate labeled synthetic traces and a manifest")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory (manifest.csv plus traces/)")
    p.add_argument("--n-per-class", type=_positive_int, default=50, help="traces per label and platform")
    p.add_argument("--platform", choices=("YT", "FB", "BOTH"), default="YT", help="platform(s) to simulate")
    p.add_argument("--duration", type=int, default=120, help="trace duration in seconds (>= 30)")
    p.add_argument("--base-rate", type=_positive_float, default=50_000.0, help="normal-session download rate, bytes/s")
    p.add_argument("--separability", type=_fraction, default=0.8, help="class effect strength in [0, 1]")
    p.add_argument("--n-side-flows", type=_non_negative_int, default=3, help="non-video flows per trace")
    p.add_argument("--traces-per-video", type=_positive_int, default=1, help="traces sharing one video id")
    _add_seed(p)

    p = sub.add_parser("extract-pkt", help="packet-level summary features (and optional per-bin features)")
    _add_common(p)
    _add_trace_input(p)
    p.add_argument("--interval", type=_positive_int, default=30, help="analysed prefix in seconds")
    p.add_argument("--window", type=_positive_int, default=5, help="bin width in seconds")
    p.add_argument("--step", type=_positive_int, default=1, help="bin step in seconds")
    p.add_argument("--out", required=True, help="feature CSV, one row per trace")
    p.add_argument("--bins-out", help="also write per-bin features over the whole trace (real-time path)")

    p = sub.add_parser("extract-flw", help="per-flow features of the platform video flows")
    _add_common(p)
    _add_trace_input(p)
    p.add_argument("--burst-gap", type=_positive_float, default=DEFAULT_BURST_GAP_S, help="burst gap threshold in seconds")
    p.add_argument("--out", required=True, help="flow-feature CSV, one row per flow")

    p = sub.add_parser("train", help="fit a gradient-boosted tree model")
    _add_common(p)
    p.add_argument("--features", required=True, help="packet-level, flow or bin feature CSV")
    p.add_argument("--manifest", help="labels for a bin feature CSV")
    p.add_argument("--top-n", type=_top_n, default=4, help="flows aggregated per trace for flow features (integer or ALL)")
    _add_hyperparams(p)
    _add_seed(p)
    p.add_argument("--out", required=True, help="model JSON")

    p = sub.add_parser("predict", help="classify traces with a trained model")
    _add_common(p)
    p.add_argument("--model", required=True, help="model JSON from train")
    p.add_argument("--features", required=True, help="feature CSV with the model's schema")
    p.add_argument("--out", help="prediction CSV (default: stdout)")

    p = sub.add_parser("stream", help="replay a capture through the real-time engine")
    _add_common(p)
    p.add_argument("--model", required=True, help="bin-level model JSON (train on a --bins-out file)")
    p.add_argument("--input", required=True, help="capture (pcap or packet CSV)")
    p.add_argument("--client-ip", help="client IP for pcap input")
    p.add_argument("--client-mac", help="client MAC for pcap input")
    p.add_argument("--stop", type=_positive_int, default=120, help="last decision time in seconds")
    p.add_argument("--jsonl", action="store_true", help="emit JSON lines instead of CSV")
    p.add_argument("--out", help="decision output (default: stdout)")

    p = sub.add_parser("evaluate", help="repeated train/test evaluation")
    _add_common(p)
    p.add_argument("--features", required=True, nargs="+", help="feature CSV(s); several packet-level files form an interval sweep")
    p.add_argument("--manifest", help="labels for a bin feature CSV")
    p.add_argument("--strategy", choices=("video_disjoint", "trace_level"), default="video_disjoint", help="split strategy")
    p.add_argument("--train-fraction", type=float, default=0.7, help="fraction of videos (or traces) used for training")
    p.add_argument("--repeats", type=_positive_int, default=20, help="number of random splits")
    p.add_argument("--top-n", type=_top_n_list, default=[1, 2, 4, 6, 8, None], help="flow counts swept for flow features, e.g. 1,2,4,ALL")
    p.add_argument("--heuristic-k", type=_non_negative_int, default=0, help="also score the threshold heuristic on the top-k GBT features (1..5; 0 = off)")
    p.add_argument("--by-platform", action="store_true", help="report each platform separately as well as BOTH")
    p.add_argument("--stop", type=_positive_int, default=120, help="last decision time for bin features")
    _add_hyperparams(p)
    _add_seed(p)
    p.add_argument("--out", required=True, help="report CSV")
    p.add_argument("--summary", help="JSON with per-repeat results")
    p.add_argument("--per-video", help="CSV of per-video accuracy across repeats")

    p = sub.add_parser("importance", help="rank model features by accumulated split gain")
    _add_common(p)
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--top-k", type=_positive_int, default=10, help="number of features listed")
    p.add_argument("--out", help="CSV (default: stdout)")
    return parser


# ---------------------------------------------------------------- config file


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _config_path(argv: Sequence[str]) -> Optional[str]:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _convert(action: argparse.Action, key: str, raw: str) -> Any:
    if isinstance(action, argparse._StoreTrueAction):
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"config key {key!r}: expected a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    conv = action.type or str
    try:
        if action.nargs in ("+", "*"):
            return [conv(x) for x in raw.split()]
        value = conv(raw)
    except (argparse.ArgumentTypeError, ValueError) as exc:
        raise UsageError(f"config key {key!r}: {exc}") from None
    if action.choices is not None and value not in action.choices:
        raise UsageError(f"config key {key!r}: {raw!r} not in {sorted(action.choices)}")
    return value


def apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Turn config-file entries into subcommand defaults so flags still win."""
    path = _config_path(argv)
    command = next((a for a in argv if a in SUBCOMMANDS), None)
    if path is None or command is None:
        return
    try:
        values = read_config_file(path)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    sp = _subparser(parser, command)
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in values.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r} for {command}")
        defaults[key] = _convert(actions[key], key, raw)
        actions[key].required = False
    sp.set_defaults(**defaults)


# ---------------------------------------------------------------- helpers


def _run_config(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "log_level", "config")}


def _provenance(args: argparse.Namespace) -> list[str]:
    return [f"vid360 {__version__}", "config " + json.dumps(_run_config(args), sort_keys=True, separators=(",", ":"))]


def _write(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def _write_bytes(path: str, data: bytes) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(data)


def _client(args) -> Optional[ClientIdentity]:
    if args.client_mac or args.client_ip:
        return ClientIdentity(mac=args.client_mac, ip=args.client_ip)
    return None


def _traces(args) -> list[tuple[ManifestEntry, Path]]:
    """(entry, resolved path) per trace from --manifest or --input."""
    if bool(args.manifest) == bool(args.input):
        raise UsageError("give exactly one of --manifest or --input")
    if args.input:
        entry = ManifestEntry(args.trace_id, args.video_id or args.trace_id, args.platform or "ANY", args.label, args.input)
        return [(entry, Path(args.input))]
    base = Path(args.manifest).parent
    entries = read_manifest(Path(args.manifest).read_text(encoding="utf-8"))
    return [(e, base / e.path) for e in entries]


def _hyperparams(args) -> GbtHyperparams:
    return GbtHyperparams(
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        learning_rate=args.learning_rate,
        min_child_weight=args.min_child_weight,
        l2_reg=args.l2_reg,
        seed=args.seed,
    )


def _traffic_of(platforms) -> str:
    u = sorted(set(platforms))
    return u[0] if len(u) == 1 else "BOTH"


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    template = SynthParams(
        duration_s=args.duration,
        base_rate_Bps=args.base_rate,
        separability=args.separability,
        n_side_flows=args.n_side_flows,
    )
    template.validate()
    platforms = ("YT", "FB") if args.platform == "BOTH" else (args.platform,)
    out = Path(args.out)
    header = _provenance(args)
    entries = []
    for platform in platforms:
        tmpl = replace(template, platform=platform)
        for t in generate_dataset(args.n_per_class, tmpl, seed=args.seed, traces_per_video=args.traces_per_video):
            rel = f"traces/{t.trace_id}.csv"
            _write(str(out / rel), write_packet_csv(t.packets, header + [f"trace {t.trace_id} seed {t.seed}"]))
            entries.append(ManifestEntry(t.trace_id, t.video_id, t.platform, t.label, rel))
    _write(str(out / "manifest.csv"), write_manifest(entries, header))
    log.info("wrote %d traces to %s", len(entries), out)
    return 0


def cmd_extract_pkt(args) -> int:
    if args.interval < args.window:
        raise UsageError(f"--interval ({args.interval}) must be >= --window ({args.window})")
    client = _client(args)
    vectors, all_bins = [], []
    for entry, path in _traces(args):
        packets = load_packet_file(path, client)
        bins = trace_bins(packets, args.interval, args.window, args.step)
        vectors.append(summarize_bins(bins, entry.label, entry.trace_id, entry.video_id, entry.platform))
        if args.bins_out:
            all_bins.append((entry.trace_id, trace_bins(packets, None, args.window, args.step)))
    header = _provenance(args)
    _write(args.out, write_feature_csv(vectors, header))
    if args.bins_out:
        _write(args.bins_out, write_bin_csv(all_bins, header))
    return 0


def cmd_extract_flw(args) -> int:
    client = _client(args)
    traces = []
    for entry, path in _traces(args):
        platform = args.platform or entry.platform
        if platform not in ("YT", "FB", "ANY"):
            platform = "ANY"
        flows = trace_flow_features(load_packet_file(path, client), platform, args.burst_gap)
        if not flows:
            log.warning("trace %s has no %s video flows", entry.trace_id, platform)
        traces.append(TraceFlows(entry.trace_id, entry.video_id, entry.platform, entry.label, tuple(flows)))
    _write(args.out, write_flow_csv(traces, _provenance(args)))
    return 0


def _load_training_set(args, text: str, kind: str, top_n: Optional[int]) -> LabeledDataset:
    if kind == "pkt":
        return LabeledDataset(read_feature_csv(text))
    if kind == "flw":
        return flow_dataset(read_flow_csv(text), top_n)
    if not args.manifest:
        raise UsageError("bin features need --manifest for labels")
    manifest = read_manifest(Path(args.manifest).read_text(encoding="utf-8"))
    return bin_dataset(attach_bin_labels(read_bin_csv(text), manifest))


def cmd_train(args) -> int:
    text = Path(args.features).read_text(encoding="utf-8")
    kind = sniff_kind(text)
    data = _load_training_set(args, text, kind, args.top_n)
    meta = {"kind": kind, "provenance": _provenance(args)}
    if kind == "flw":
        meta["top_n"] = "ALL" if args.top_n is None else args.top_n
    model = train(data, _hyperparams(args), meta)
    _write_bytes(args.out, save_model(model))
    log.info("trained %d trees on %d rows", len(model.trees), len(data))
    return 0


def cmd_predict(args) -> int:
    model = load_model(Path(args.model).read_bytes())
    text = Path(args.features).read_text(encoding="utf-8")
    kind = sniff_kind(text)
    if kind == "pkt":
        vectors = read_feature_csv(text)
    elif kind == "flw":
        n = parse_top_n(str(model.metadata.get("top_n", "ALL")))
        vectors = [
            aggregate_top_flows(t.flows, n, t.label, t.trace_id, t.video_id, t.platform) for t in read_flow_csv(text)
        ]
    else:
        raise SchemaMismatchError("predict takes trace-level features; use stream for bin features")
    if not vectors:
        raise SchemaMismatchError("no rows to predict")
    if vectors[0].names != model.feature_names:
        raise SchemaMismatchError(
            f"schema mismatch: input has {len(vectors[0].names)} features, model expects {len(model.feature_names)}"
        )
    proba = model.predict_proba_matrix(np.array([v.values for v in vectors], dtype=float))
    lines = [f"# {c}\n" for c in _provenance(args)] + ["trace_id,video_id,label,proba_360,pred\n"]
    for v, p in zip(vectors, proba):
        lines.append(f"{v.trace_id},{v.video_id},{'' if v.label is None else v.label},{p:.6f},{int(p >= 0.5)}\n")
    _write(args.out, "".join(lines))
    return 0


def cmd_stream(args) -> int:
    model = load_model(Path(args.model).read_bytes())
    packets = load_packet_file(args.input, _client(args))
    decisions = classify_stream(model, trace_bins(packets), stop_s=args.stop)
    if args.jsonl:
        lines = [json.dumps({"provenance": _run_config(args), "version": __version__}, sort_keys=True) + "\n"]
        lines += [json.dumps(d.as_dict()) + "\n" for d in decisions]
    else:
        lines = [f"# {c}\n" for c in _provenance(args)] + ["t_s,label,votes_for_1,votes_total\n"]
        lines += [f"{d.t_s},{d.label},{d.votes_for_1},{d.votes_total}\n" for d in decisions]
    _write(args.out, "".join(lines))
    return 0


def _split_by_platform(data: LabeledDataset, by_platform: bool) -> dict[str, LabeledDataset]:
    platforms = sorted({v.platform for v in data.vectors})
    out = {}
    if by_platform and len(platforms) > 1:
        for p in platforms:
            out[p] = LabeledDataset([v for v in data.vectors if v.platform == p], data.feature_names)
    out[_traffic_of(platforms)] = data
    return out


def _offline(data: LabeledDataset, spec: SplitSpec, hp: GbtHyperparams, k: int, meta: dict) -> list:
    if k:
        gbt_report, heur = compare_heuristic(data, spec, hp, k, meta)
        heur.metadata["traffic"] = f"{meta['traffic']}_heuristic"
        return [gbt_report, heur]
    return [evaluate_offline(data, spec, hp, meta)]


def cmd_evaluate(args) -> int:
    if args.heuristic_k > 5:
        raise UsageError("--heuristic-k must be within 0..5")
    spec = SplitSpec(args.strategy, args.train_fraction, args.repeats, args.seed)
    hp = _hyperparams(args)
    texts = [Path(f).read_text(encoding="utf-8") for f in args.features]
    kinds = {sniff_kind(t) for t in texts}
    if len(kinds) != 1:
        raise UsageError("all --features files must be of one kind")
    kind = kinds.pop()
    header = _provenance(args)
    reports = []
    if kind == "pkt":
        for path, text in zip(args.features, texts):
            interval = provenance_config(text).get("interval", Path(path).stem)
            data = LabeledDataset(read_feature_csv(text))
            for traffic, d in _split_by_platform(data, args.by_platform).items():
                reports += _offline(d, spec, hp, args.heuristic_k, {"traffic": traffic, "interval_s": interval, "features": "pkt"})
        table = sweep_table_csv(reports, "interval_s", header)
    elif kind == "flw":
        if len(texts) != 1:
            raise UsageError("flow evaluation takes one --features file")
        traces = read_flow_csv(texts[0])
        groups: dict[str, list[TraceFlows]] = {}
        platforms = sorted({t.platform for t in traces})
        if args.by_platform and len(platforms) > 1:
            for p in platforms:
                groups[p] = [t for t in traces if t.platform == p]
        groups[_traffic_of(platforms)] = traces
        if args.heuristic_k:
            for traffic, ts in groups.items():
                for n in args.top_n:
                    reports += _offline(
                        flow_dataset(ts, n), spec, hp, args.heuristic_k,
                        {"traffic": traffic, "n_flows": "ALL" if n is None else n, "features": "flw"},
                    )
        else:
            reports = run_offline_flw_sweep(groups, spec, hp, args.top_n)
        table = sweep_table_csv(reports, "n_flows", header)
    else:
        if len(texts) != 1 or not args.manifest:
            raise UsageError("bin evaluation takes one --features file and --manifest")
        manifest = read_manifest(Path(args.manifest).read_text(encoding="utf-8"))
        curve = run_realtime_curve(attach_bin_labels(read_bin_csv(texts[0]), manifest), spec, hp, args.stop)
        _write(args.out, curve_csv(curve, header))
        if args.summary:
            payload = {
                "provenance": header,
                "times_s": curve.times_s,
                "mean_accuracy": curve.mean_accuracy,
                "mean_f1": curve.mean_f1,
                "bin_accuracy": curve.bin_accuracy,
                "metadata": curve.metadata,
            }
            _write(args.summary, summary_json(payload))
        return 0
    _write(args.out, table)
    if args.summary:
        _write(args.summary, summary_json({"provenance": header, "reports": [r.summary() for r in reports]}))
    if args.per_video:
        gbt_reports = [r for r in reports if r.metadata.get("model") == "gbt"]
        _write(args.per_video, per_video_csv(per_video_accuracy(gbt_reports), header))
    return 0


def cmd_importance(args) -> int:
    model = load_model(Path(args.model).read_bytes())
    lines = [f"# {c}\n" for c in _provenance(args)] + ["rank,feature,gain\n"]
    for rank, (name, gain) in enumerate(feature_importance(model, args.top_k), start=1):
        lines.append(f"{rank},{name},{gain:.6f}\n")
    _write(args.out, "".join(lines))
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "extract-pkt": cmd_extract_pkt,
    "extract-flw": cmd_extract_flw,
    "train": cmd_train,
    "predict": cmd_predict,
    "stream": cmd_stream,
    "evaluate": cmd_evaluate,
    "importance": cmd_importance,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (Vid360Error, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
