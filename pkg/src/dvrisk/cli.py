"""Command-line pipeline: generate, preprocess, eda, train, evaluate,
aggregate, serve.

Every command writes a run manifest with config and artifact hashes.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import boundaries as boundaries_mod
from . import forest as forest_mod
from . import geo as geo_mod
from . import metrics as metrics_mod
from . import preprocess as preprocess_mod
from . import synthgen as synthgen_mod
from .manifest import write_manifest
from .records import REPORTER_OCCUPATIONS, DataError, read_records_csv, write_records_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

EDA_NUMERIC_COLUMNS = ("tipvda_score", "dv_duration_months", "victim_age")
PAIRWISE_GROUPS = REPORTER_OCCUPATIONS[:3]


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> Parser:
    parser = Parser(prog="dvrisk", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master random seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers")
    common.add_argument(
        "--lenient",
        action="store_true",
        help="skip malformed CSV rows (reported) instead of failing",
    )
    common.add_argument(
        "--config",
        default=None,
        help="flat key=value generator config file (generate command)",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic case CSV")
    p.add_argument("--mode", choices=("map", "model"), default="model")
    p.add_argument("--n", type=int, default=None, help="record count override")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any generator config field (repeatable)",
    )
    p.add_argument("--positive-rate", type=float, default=None)
    p.add_argument("--signal-strength", type=float, default=None)

    p = sub.add_parser("preprocess", parents=[common], help="build the feature frame")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="output frame JSON path")
    p.add_argument(
        "--replay-schema",
        default=None,
        help="frame or model JSON whose fitted schema is replayed",
    )

    p = sub.add_parser("eda", parents=[common], help="exploratory report with figures")
    p.add_argument("--records", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train", parents=[common], help="train and evaluate the ensemble")
    p.add_argument("--frame", required=True)
    p.add_argument("--out-dir", required=True)
    scale = p.add_mutually_exclusive_group()
    scale.add_argument(
        "--paper-scale",
        action="store_true",
        help="500 holdout, 500/class, 200 trees, 50 inner, 200 outer",
    )
    scale.add_argument(
        "--desk-scale",
        action="store_true",
        help="500 holdout, 200/class, 50 trees, 5 inner, 20 outer",
    )
    p.add_argument("--holdout", type=int, default=None)
    p.add_argument("--outer", type=int, default=None)
    p.add_argument("--inner", type=int, default=None)
    p.add_argument("--trees", type=int, default=None)
    p.add_argument("--per-class", type=int, default=None)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-leaf", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--stratified", action="store_true")

    p = sub.add_parser("evaluate", parents=[common], help="score labeled records")
    p.add_argument("--model", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("aggregate", parents=[common], help="village/district map export")
    p.add_argument("--records", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model", default=None, help="count predicted high-risk cases")
    p.add_argument("--boundaries", default=None, help="GeoJSON boundary file")
    p.add_argument("--mapping", default=None, help="case-type mapping CSV")

    p = sub.add_parser("serve", parents=[common], help="run the scoring/map API")
    p.add_argument("--model", default=os.environ.get("DVRISK_MODEL"),
                   help="model JSON (env DVRISK_MODEL)")
    p.add_argument("--map", dest="map_path", default=os.environ.get("DVRISK_MAP"),
                   help="aggregated GeoJSON (env DVRISK_MAP)")
    p.add_argument("--listen", default=os.environ.get("DVRISK_LISTEN", "127.0.0.1:8645"),
                   help="host:port (env DVRISK_LISTEN)")

    return parser


def _load_records(path, lenient):
    records, skipped = read_records_csv(path, lenient=lenient)
    for line, message in skipped:
        print(f"warning: skipped line {line}: {message}", file=sys.stderr)
    return records


def _load_boundaries(path):
    if path is None:
        return boundaries_mod.bundled_boundaries()
    return boundaries_mod.load_boundaries(path)


def _load_schema(path) -> preprocess_mod.FrameSchema:
    with open(path, "rb") as fh:
        doc = json.loads(fh.read().decode("utf-8"))
    if doc.get("kind") not in ("dvrisk-frame", "dvrisk-ensemble"):
        raise DataError(f"{path}: not a frame or model file")
    return preprocess_mod.FrameSchema.from_list(doc["schema"])


def cmd_generate(args) -> int:
    t0 = time.time()
    base = (
        synthgen_mod.GeneratorConfig.map_mode()
        if args.mode == "map"
        else synthgen_mod.GeneratorConfig.model_mode()
    )
    overrides = {}
    if args.config:
        overrides.update(synthgen_mod.load_config_file(args.config))
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        overrides[key.strip()] = synthgen_mod.parse_override(key.strip(), raw.strip())
    if args.n is not None:
        overrides["n_cases"] = args.n
    if args.positive_rate is not None:
        overrides["positive_rate"] = args.positive_rate
    if args.signal_strength is not None:
        overrides["signal_strength"] = args.signal_strength
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = synthgen_mod.config_with_overrides(base, overrides)

    records = synthgen_mod.generate(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out)
    print(f"wrote {len(records)} records to {out}")
    write_manifest(
        out.parent,
        "generate",
        {"mode": args.mode, **{k: repr(v) for k, v in overrides.items()}},
        config.seed,
        [],
        [out],
        time.time() - t0,
    )
    return EXIT_OK


def cmd_preprocess(args) -> int:
    t0 = time.time()
    records = _load_records(args.records, args.lenient)
    if args.replay_schema:
        schema = _load_schema(args.replay_schema)
        frame = preprocess_mod.build_frame(records, fit=False, prior_schema=schema)
    else:
        frame = preprocess_mod.build_frame(records)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.save(out)
    positives = int(frame.labels.sum())
    print(
        f"frame: {frame.n_rows} rows x {len(frame.schema)} features, "
        f"{positives} positive ({positives / frame.n_rows:.1%})"
        if frame.n_rows
        else "frame: empty"
    )
    for flag in frame.flags:
        print(f"warning: {flag}", file=sys.stderr)
    write_manifest(
        out.parent,
        "preprocess",
        {"records": args.records, "replay_schema": args.replay_schema},
        args.seed,
        [args.records],
        [out],
        time.time() - t0,
    )
    return EXIT_OK


def _reporter_stats(records) -> list[dict]:
    stats = []
    for group in REPORTER_OCCUPATIONS:
        scores = [
            r.tipvda_score
            for r in records
            if r.reporter_occupation == group and r.tipvda_score is not None
        ]
        if not scores:
            continue
        arr = np.asarray(scores, dtype=float)
        stats.append(
            {
                "group": group,
                "n": len(scores),
                "mean": float(arr.mean()),
                "sd": float(arr.std(ddof=1)) if len(scores) > 1 else 0.0,
            }
        )
    return stats


def cmd_eda(args) -> int:
    from . import plots

    t0 = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = _load_records(args.records, args.lenient)
    if not records:
        print("warning: no records; writing empty report", file=sys.stderr)
        (out_dir / "eda_report.json").write_text("{}\n")
        return EXIT_OK

    summary = metrics_mod.report_count_histogram(records)
    stats = _reporter_stats(records)

    tests = []
    by_group = {s["group"]: s for s in stats}
    for i, a in enumerate(PAIRWISE_GROUPS):
        for b in PAIRWISE_GROUPS[i + 1 :]:
            if a not in by_group or b not in by_group:
                continue
            sample_a = [
                r.tipvda_score
                for r in records
                if r.reporter_occupation == a and r.tipvda_score is not None
            ]
            sample_b = [
                r.tipvda_score
                for r in records
                if r.reporter_occupation == b and r.tipvda_score is not None
            ]
            result = metrics_mod.mann_whitney_u(sample_a, sample_b)
            tests.append({"group_a": a, "group_b": b, **result.to_dict()})

    labeled = [r for r in records if r.report_count is not None]
    labels = [1 if r.report_count > 2 else 0 for r in labeled]
    correlations = {}
    for column in EDA_NUMERIC_COLUMNS:
        pairs = [
            (getattr(r, column), lab)
            for r, lab in zip(labeled, labels)
            if getattr(r, column) is not None
        ]
        if not pairs:
            correlations[column] = None
            continue
        correlations[column] = metrics_mod.rank_correlation(
            [p[0] for p in pairs], [p[1] for p in pairs]
        )

    report = {
        "n_records": len(records),
        "report_counts": summary.to_dict(),
        "reporter_scores": stats,
        "mann_whitney": tests,
        "correlations": correlations,
    }
    report_path = out_dir / "eda_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    with open(out_dir / "report_counts.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["report_count", "cases"])
        for k in sorted(summary.histogram):
            writer.writerow([k, summary.histogram[k]])
    with open(out_dir / "reporter_scores.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "n", "mean", "sd"])
        for s in stats:
            writer.writerow([s["group"], s["n"], f"{s['mean']:.4f}", f"{s['sd']:.4f}"])
    with open(out_dir / "mann_whitney.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_a", "group_b", "u", "z", "p_value", "method"])
        for t in tests:
            writer.writerow(
                [t["group_a"], t["group_b"], t["u_statistic"], f"{t['z']:.4f}",
                 f"{t['p_value']:.6g}", t["method"]]
            )
    with open(out_dir / "correlations.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "rank_correlation"])
        for name, value in correlations.items():
            writer.writerow([name, "" if value is None else f"{value:.4f}"])

    figures = [
        plots.save_report_count_hist(summary.histogram, out_dir / "report_counts.png"),
    ]
    if stats:
        figures.append(
            plots.save_reporter_scores(stats, out_dir / "reporter_scores.png")
        )
    figures.append(
        plots.save_correlation_bars(correlations, out_dir / "correlations.png")
    )

    lines = [f"records: {len(records)}"]
    share = summary.positive_share
    lines.append(
        f"positive share (count > 2): {share:.3%}" if share is not None else ""
    )
    lines.append("")
    lines.append("scores by reporter occupation:")
    for s in stats:
        lines.append(f"  {s['group']:<16} mean {s['mean']:.2f} (sd {s['sd']:.2f}, n={s['n']})")
    lines.append("")
    for t in tests:
        lines.append(
            f"Mann-Whitney {t['group_a']} vs {t['group_b']}: "
            f"U={t['u_statistic']:.1f}, p={t['p_value']:.2g} ({t['method']})"
        )
    lines.append("")
    for name, value in correlations.items():
        shown = "undefined" if value is None else f"{value:+.3f}"
        lines.append(f"rank correlation {name} vs response: {shown}")
    (out_dir / "eda_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))

    outputs = [report_path, out_dir / "eda_report.txt",
               out_dir / "report_counts.csv", out_dir / "reporter_scores.csv",
               out_dir / "mann_whitney.csv", out_dir / "correlations.csv"] + figures
    write_manifest(
        out_dir, "eda", {"records": args.records}, args.seed,
        [args.records], outputs, time.time() - t0,
    )
    return EXIT_OK


def _train_config(args, n_features: int) -> tuple[forest_mod.EnsembleConfig, int]:
    if args.paper_scale:
        config = forest_mod.PAPER_CONFIG
    elif args.desk_scale:
        config = forest_mod.DESK_CONFIG
    else:
        config = forest_mod.DESK_CONFIG
    holdout = 500
    if args.holdout is not None:
        holdout = args.holdout
    updates = {}
    for flag, field in (
        ("outer", "outer_rounds"),
        ("inner", "inner_repeats"),
        ("trees", "trees_per_forest"),
        ("per_class", "per_class_sample"),
        ("mtry", "mtry"),
        ("max_depth", "max_depth"),
        ("min_leaf", "min_leaf"),
        ("threshold", "threshold"),
    ):
        value = getattr(args, flag)
        if value is not None:
            updates[field] = value
    if args.seed is not None:
        updates["master_seed"] = args.seed
    config = replace(config, **updates)
    config.validate()
    config.resolve_mtry(n_features)
    return config, holdout


def cmd_train(args) -> int:
    from . import plots

    t0 = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = preprocess_mod.FeatureFrame.load(args.frame)
    if frame.n_rows == 0:
        raise DataError("cannot train on an empty frame")
    config, holdout_size = _train_config(args, len(frame.schema))
    if holdout_size >= frame.n_rows:
        raise DataError(
            f"holdout {holdout_size} must be smaller than the dataset ({frame.n_rows})"
        )

    split_rng = forest_mod._rng_for(config.master_seed, 2)
    train_idx, hold_idx = forest_mod.split_holdout(
        frame, holdout_size, split_rng, stratified=args.stratified
    )
    train_frame = preprocess_mod.FeatureFrame(
        schema=frame.schema,
        rows=frame.rows[train_idx],
        labels=frame.labels[train_idx],
    )
    model = forest_mod.train_ensemble(train_frame, config, jobs=args.jobs)

    probs = forest_mod.predict_matrix(model, frame.rows[hold_idx])
    predictions = (probs >= config.threshold).astype(int)
    report = metrics_mod.confusion_and_metrics(frame.labels[hold_idx], predictions)

    model_path = out_dir / "model.json"
    model.save(model_path)
    report_path = out_dir / "eval_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    text_path = out_dir / "eval_report.txt"
    text_path.write_text(report.format_table() + "\n")
    figure = plots.save_metrics_panel(report, out_dir / "metrics.png")

    print(f"trained {len(model.forests)} forests "
          f"({config.outer_rounds} outer x {config.inner_repeats} inner, "
          f"{config.trees_per_forest} trees each)")
    print(report.format_table())

    write_manifest(
        out_dir,
        "train",
        {
            "frame": args.frame,
            "holdout": holdout_size,
            "stratified": args.stratified,
            "outer_rounds": config.outer_rounds,
            "inner_repeats": config.inner_repeats,
            "trees_per_forest": config.trees_per_forest,
            "per_class_sample": config.per_class_sample,
            "mtry": config.mtry,
            "max_depth": config.max_depth,
            "min_leaf": config.min_leaf,
            "threshold": config.threshold,
        },
        config.master_seed,
        [args.frame],
        [model_path, report_path, text_path, figure],
        time.time() - t0,
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from . import plots

    t0 = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = forest_mod.EnsembleModel.load(args.model)
    records = _load_records(args.records, args.lenient)
    frame = preprocess_mod.build_frame(records, fit=False, prior_schema=model.schema)
    if frame.n_rows == 0:
        raise DataError("no scorable records (model variables missing)")
    probs = forest_mod.predict_matrix(model, frame.rows)
    predictions = (probs >= model.threshold).astype(int)
    report = metrics_mod.confusion_and_metrics(frame.labels, predictions)

    report_path = out_dir / "eval_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    text_path = out_dir / "eval_report.txt"
    text_path.write_text(report.format_table() + "\n")
    figure = plots.save_metrics_panel(report, out_dir / "metrics.png")
    print(report.format_table())

    write_manifest(
        out_dir,
        "evaluate",
        {"model": args.model, "records": args.records},
        args.seed,
        [args.model, args.records],
        [report_path, text_path, figure],
        time.time() - t0,
    )
    return EXIT_OK


def cmd_aggregate(args) -> int:
    from . import plots

    t0 = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = _load_records(args.records, args.lenient)
    boundary_set = _load_boundaries(args.boundaries)
    mapping = (
        geo_mod.load_case_type_mapping(args.mapping)
        if args.mapping
        else geo_mod.bundled_case_type_mapping()
    )
    model = forest_mod.EnsembleModel.load(args.model) if args.model else None

    aggregates = geo_mod.aggregate(
        records,
        boundary_set,
        mapping=mapping,
        model=model,
        geocoder=geo_mod.bundled_geocoder() if args.boundaries is None else None,
    )
    geojson_bytes = geo_mod.export_geojson(aggregates, boundary_set)
    map_path = out_dir / "map.geojson"
    map_path.write_bytes(geojson_bytes)

    rows = geo_mod.table1_summary(records, mapping=mapping)
    table_csv = out_dir / "table1.csv"
    with open(table_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["category", "n", "proportion_pct", "male_pct", "female_pct",
             "low_mid_income_pct", "disability_pct"]
        )
        for row in rows:
            writer.writerow([row[k] for k in
                             ("category", "n", "proportion_pct", "male_pct",
                              "female_pct", "low_mid_income_pct", "disability_pct")])
    table_txt = out_dir / "table1.txt"
    table_txt.write_text(geo_mod.format_table1(rows) + "\n")
    print(geo_mod.format_table1(rows))
    if aggregates.unlocated.total:
        print(f"warning: {aggregates.unlocated.total} records unlocated", file=sys.stderr)
    if aggregates.classifier.fallback_count:
        print(
            f"warning: {aggregates.classifier.fallback_count} records with "
            f"unmapped case types", file=sys.stderr,
        )

    figures = [plots.save_table1_bars(rows, out_dir / "table1.png")] if rows else []
    figures.append(
        plots.save_choropleth(json.loads(geojson_bytes), out_dir / "choropleth.png")
    )

    write_manifest(
        out_dir,
        "aggregate",
        {"records": args.records, "model": args.model,
         "boundaries": args.boundaries or "(bundled)"},
        args.seed,
        [args.records],
        [map_path, table_csv, table_txt] + figures,
        time.time() - t0,
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import run_server

    if not args.model or not args.map_path:
        raise UsageError("serve requires --model and --map (or DVRISK_MODEL/DVRISK_MAP)")
    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        raise UsageError(f"--listen expects host:port, got {args.listen!r}")
    run_server(
        model_path=args.model,
        map_path=args.map_path,
        host=host,
        port=int(port),
    )
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "preprocess": cmd_preprocess,
    "eda": cmd_eda,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "aggregate": cmd_aggregate,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        raise
    except Exception as exc:  # noqa: BLE001 - internal invariant violations
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
