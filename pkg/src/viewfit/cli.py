"""Command-line interface: fit, classify, predict, synth and report.

Every command writes its outputs plus a ``manifest.json`` capturing the
command, config snapshot, seed and content hashes of the inputs, so any
published table can be regenerated from the manifest alone.  Outputs
are deterministic given (inputs, flags, seed): manifests record
basenames and hashes rather than absolute paths or timestamps.

Exit codes: 0 success, 1 partial (some records rejected or skipped),
2 fatal (unreadable input, parse error, bad arguments).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (
    UNCLASSIFIED,
    classify_corpus,
    corpus_report,
    proportion_ci,
)
from .errors import ParseError, ViewfitError
from .models import KIND_ORDER, ModelKind, ParamSet, evaluate
from .predict import PredictionSetup, run_scenario
from .regress import LmConfig
from .series import ingest, write_csv, write_json
from .synth import (
    full_mix,
    generate_corpus,
    match_label,
    read_labels,
    write_labels,
)

_CONFIG_KEYS = (
    "max_iterations", "initial_damping", "damping_up", "damping_down",
    "msc_rtol", "grad_tol", "multistart_count", "seed",
)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=1) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _manifest(command: str, args, inputs: list, outputs: list, config: LmConfig,
              extra: dict | None = None) -> dict:
    payload = {
        "command": command,
        "tool": "viewfit",
        "version": __version__,
        "inputs": {Path(p).name: _sha256(p) for p in inputs},
        "config": {key: getattr(config, key) for key in _CONFIG_KEYS},
        "outputs": sorted(Path(p).name for p in outputs),
    }
    if extra:
        payload.update(extra)
    return payload


def _load_config(args) -> LmConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        values = {k: raw[k] for k in _CONFIG_KEYS if k in raw}
    overrides = {
        "max_iterations": getattr(args, "max_iter", None),
        "multistart_count": getattr(args, "multistart", None),
        "seed": getattr(args, "seed", None),
        "msc_rtol": getattr(args, "msc_rtol", None),
        "grad_tol": getattr(args, "grad_tol", None),
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    config = LmConfig(**values)
    config.validate()
    return config


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for per-record work")
    parser.add_argument("--config", help="JSON file with solver settings")
    parser.add_argument("--max-iter", type=int, default=None, help="LM iteration budget")
    parser.add_argument("--multistart", type=int, default=None, help="LM starts per fit")
    parser.add_argument("--msc-rtol", type=float, default=None, help="relative MSC stop tolerance")
    parser.add_argument("--grad-tol", type=float, default=None, help="gradient-norm stop floor")
    parser.add_argument("-o", "--out", default=".", help="output directory")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_input(path, metadata=None):
    try:
        return ingest(path, metadata_path=metadata)
    except (OSError, ParseError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        raise SystemExit(2) from None


# ---------------------------------------------------------------- commands


def cmd_fit(args) -> int:
    config = _load_config(args)
    records, diagnostics = _read_input(args.input, getattr(args, "metadata", None))
    for diag in diagnostics:
        print(f"rejected: {diag}", file=sys.stderr)
    if not records:
        print("fatal: no valid records in input", file=sys.stderr)
        return 2
    out = _outdir(args)

    kinds = list(KIND_ORDER) if args.model == "all" else [ModelKind(args.model)]
    from .classify import _score  # scoring shared with classification
    from .regress import LinearFit, default_init, linear_fit, lm_fit
    from .series import normalize

    results = []
    curve_rows = []
    for record in records:
        series = normalize(record)
        per_series = {"id": record.id, "fits": []}
        for kind in kinds:
            if kind is ModelKind.LINEAR:
                try:
                    line = linear_fit(series)
                except ViewfitError as exc:
                    print(f"rejected: [{exc.code}] {record.id}: {exc}", file=sys.stderr)
                    continue
                params = ParamSet(s0=line.intercept, lam=line.slope)
                fit = _score(kind, params, series, converged=True, r=line.r)
            else:
                lm = lm_fit(kind, series, init=default_init(kind, series), config=config)
                fit = _score(kind, lm.params, series, converged=lm.converged,
                             iterations=lm.iterations)
            per_series["fits"].append(fit.to_dict())
            if args.curves:
                t_n, y_n = series.scale
                fitted = evaluate(kind, fit.params, series.u)
                for u, v, s in zip(series.u, series.v, np.atleast_1d(fitted)):
                    curve_rows.append(
                        [record.id, kind.value, _cell(u * t_n), _cell(v * y_n), _cell(s * y_n)])
        results.append(per_series)

    outputs = [out / "fits.json"]
    if args.curves:
        outputs.append(out / "curves.csv")
        _write_rows(out / "curves.csv", ["id", "kind", "t", "observed", "fitted"], curve_rows)
    manifest = _manifest("fit", args, [args.input], outputs + [out / "manifest.json"], config,
                         extra={"model": args.model})
    _write_json(out / "fits.json", {"manifest": manifest, "series": results})
    _write_json(out / "manifest.json", manifest)
    return 1 if diagnostics else 0


def cmd_classify(args) -> int:
    config = _load_config(args)
    records, diagnostics = _read_input(args.input, getattr(args, "metadata", None))
    for diag in diagnostics:
        print(f"rejected: {diag}", file=sys.stderr)
    if not records:
        print("fatal: no valid records in input", file=sys.stderr)
        return 2
    out = _outdir(args)

    classified, class_diags = classify_corpus(
        records, config, mer_threshold=args.mer_threshold, threads=args.threads)
    for diag in class_diags:
        print(f"skipped: {diag}", file=sys.stderr)
    if not classified:
        print("fatal: no classifiable records", file=sys.stderr)
        return 2

    report = corpus_report(classified, group_by=args.group_by)
    outputs = _write_classification_outputs(out, classified, report)

    if args.labels:
        labels = read_labels(args.labels)
        known = [c for c in classified if c.id in labels]
        if known:
            hits = sum(match_label(c.selected, labels[c.id].kind) for c in known)
            accuracy = 100.0 * hits / len(known)
            print(f"accuracy: {accuracy:.1f}% ({hits}/{len(known)} labeled records)")

    manifest = _manifest("classify", args, [args.input], outputs + [out / "manifest.json"], config,
                         extra={"mer_threshold": args.mer_threshold, "group_by": args.group_by})
    payload = {"manifest": manifest, "records": [c.to_dict() for c in classified]}
    _write_json(out / "classifications.json", payload)
    _write_json(out / "manifest.json", manifest)
    return 1 if (diagnostics or class_diags) else 0


def _write_classification_outputs(out: Path, classified, report) -> list:
    summary_rows = [
        [c.id, c.selected, _cell(c.selected_fit.mer), _cell(c.selected_fit.gof),
         _cell(c.selected_fit.msc), c.selected_fit.df, c.selected_fit.converged,
         c.category or "", c.total_views]
        for c in classified
    ]
    _write_rows(out / "summary.csv",
                ["id", "selected", "mer", "gof", "msc", "df", "converged",
                 "category", "total_views"],
                summary_rows)

    groups = sorted(report["groups"])
    kinds = report["kinds"]
    _write_rows(out / "distribution.csv",
                ["model"] + groups,
                [[kind] + [_cell(report["groups"][g]["percent"][kind]) for g in groups]
                 for kind in kinds])
    _write_rows(out / "distribution_counts.csv",
                ["model"] + groups,
                [[kind] + [report["groups"][g]["by_kind"][kind] for g in groups]
                 for kind in kinds])
    hist = report["mer_histogram"]
    total = report["total"]
    _write_rows(out / "mer_histogram.csv",
                ["bin", "count", "percent"],
                [[name, count, _cell(100.0 * count / total)] for name, count in hist.items()])
    return [out / "classifications.json", out / "summary.csv", out / "distribution.csv",
            out / "distribution_counts.csv", out / "mer_histogram.csv"]


def cmd_predict(args) -> int:
    config = _load_config(args)
    records, diagnostics = _read_input(args.input, getattr(args, "metadata", None))
    for diag in diagnostics:
        print(f"rejected: {diag}", file=sys.stderr)
    if not records:
        print("fatal: no valid records in input", file=sys.stderr)
        return 2
    out = _outdir(args)

    setup = PredictionSetup.from_name(args.scenario, error_bound=args.bound,
                                      horizon_multiplier=args.horizon_mult)
    try:
        outcome = run_scenario(records, setup, config, mer_threshold=args.mer_threshold)
    except ViewfitError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2
    for diag in outcome.skipped:
        print(f"skipped: {diag}", file=sys.stderr)

    window_rows = [
        [r.id, r.kind, _cell(r.t_f), _cell(r.t_n), _cell(r.soft_days), _cell(r.soft_norm),
         r.soft_bounded, _cell(r.hard_days), _cell(r.hard_norm), r.hard_bounded,
         _cell(r.horizon_days), r.n_future]
        for r in outcome.results
    ]
    _write_rows(out / "windows.csv",
                ["id", "kind", "t_f", "t_n", "soft_days", "soft_norm", "soft_bounded",
                 "hard_days", "hard_norm", "hard_bounded", "horizon_days", "n_future"],
                window_rows)

    agg_rows = [
        [kind, stats["count"], _cell(stats["distribution_pct"]),
         _cell(stats["hard_mean"]), _cell(stats["hard_var"]), _cell(stats["hard_bounded_pct"]),
         _cell(stats["soft_mean"]), _cell(stats["soft_var"]), _cell(stats["soft_bounded_pct"])]
        for kind, stats in outcome.aggregate.items()
    ]
    _write_rows(out / "aggregate.csv",
                ["model", "count", "distribution_pct", "hard_mean", "hard_var",
                 "hard_bounded_pct", "soft_mean", "soft_var", "soft_bounded_pct"],
                agg_rows)
    _write_rows(out / "skipped.csv", ["id", "code", "message"],
                [[d.record_id, d.code, d.message] for d in outcome.skipped])

    outputs = [out / "windows.csv", out / "aggregate.csv", out / "skipped.csv",
               out / "aggregate.json"]
    manifest = _manifest("predict", args, [args.input], outputs + [out / "manifest.json"], config,
                         extra={"scenario": args.scenario, "bound": args.bound,
                                "horizon_multiplier": args.horizon_mult})
    _write_json(out / "aggregate.json", {"manifest": manifest, "aggregate": outcome.aggregate})
    _write_json(out / "manifest.json", manifest)
    return 1 if (diagnostics or outcome.skipped) else 0


def _parse_mix(spec: str) -> list:
    """Mix syntax: 'all:100' or 'gompertz:50,negexp:25'."""
    entries = []
    for part in spec.split(","):
        name, _, count = part.partition(":")
        count = int(count) if count else 1
        if name == "all":
            entries.extend(full_mix(count))
        else:
            entries.append((ModelKind(name), count))
    return entries


def cmd_synth(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    try:
        mix = _parse_mix(args.mix)
    except (ValueError, KeyError):
        print(f"fatal: bad mix spec {args.mix!r}", file=sys.stderr)
        return 2
    scale = None
    if args.scale:
        days, _, views = args.scale.partition(":")
        scale = (float(days), float(views))
    records, labels = generate_corpus(
        mix, seed=config.seed, n=args.n, noise_sigma=args.noise, denorm_scale=scale)

    if args.format == "json":
        series_path = out / "series.json"
        write_json(records, series_path)
        outputs = [series_path]
    else:
        series_path = out / "series.csv"
        write_csv(records, series_path, metadata_path=out / "metadata.csv")
        outputs = [series_path, out / "metadata.csv"]
    write_labels(labels, out / "labels.csv")
    outputs.append(out / "labels.csv")

    manifest = _manifest("synth", args, [], outputs + [out / "manifest.json"], config,
                         extra={"mix": args.mix, "n": args.n, "noise": args.noise,
                                "records": len(records)})
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {len(records)} records to {series_path}")
    return 0


def cmd_report(args) -> int:
    try:
        with open(args.input, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2
    from .classify import ClassificationRecord, FitResult
    from .regress import LinearFit

    classified = []
    for obj in payload.get("records", []):
        fit_obj = obj["selected_fit"]
        fit = FitResult(
            kind=ModelKind(fit_obj["kind"]),
            params=ParamSet.from_dict(fit_obj["params"]),
            msc=fit_obj["msc"], mer=fit_obj["mer"], gof=fit_obj["gof"],
            df=fit_obj["df"], converged=fit_obj["converged"],
            r=fit_obj.get("r"), iterations=fit_obj.get("iterations", 0),
        )
        classified.append(ClassificationRecord(
            id=obj["id"], selected=obj["selected"], selected_fit=fit,
            mer_threshold=obj.get("mer_threshold", 0.05),
            category=obj.get("category"), total_views=obj.get("total_views", 0)))
    if not classified:
        print("fatal: no records in classification file", file=sys.stderr)
        return 2

    out = _outdir(args)
    report = corpus_report(classified, group_by=args.group_by)
    outputs = _write_classification_outputs_report(out, report)

    counts = {}
    for record in classified:
        counts[record.selected] = counts.get(record.selected, 0) + 1
    total = len(classified)
    ci_rows = []
    for kind in report["kinds"]:
        low, point, high = proportion_ci(counts.get(kind, 0), total, level=args.level)
        ci_rows.append([kind, counts.get(kind, 0), total, _cell(low), _cell(point), _cell(high)])
    _write_rows(out / "proportion_ci.csv",
                ["model", "successes", "trials", "low", "point", "high"], ci_rows)
    outputs.append(out / "proportion_ci.csv")

    config = LmConfig()
    manifest = _manifest("report", args, [args.input], outputs + [out / "manifest.json"], config,
                         extra={"group_by": args.group_by, "level": args.level})
    _write_json(out / "manifest.json", manifest)
    return 0


def _write_classification_outputs_report(out: Path, report) -> list:
    groups = sorted(report["groups"])
    kinds = report["kinds"]
    _write_rows(out / "distribution.csv",
                ["model"] + groups,
                [[kind] + [_cell(report["groups"][g]["percent"][kind]) for g in groups]
                 for kind in kinds])
    hist = report["mer_histogram"]
    total = report["total"]
    _write_rows(out / "mer_histogram.csv",
                ["bin", "count", "percent"],
                [[name, count, _cell(100.0 * count / total)] for name, count in hist.items()])
    return [out / "distribution.csv", out / "mer_histogram.csv"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewfit",
        description="Fit, classify and predict cumulative view-count growth curves.",
    )
    parser.add_argument("--version", action="version", version=f"viewfit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one or all models to each series")
    p_fit.add_argument("input", help="series CSV or JSON")
    p_fit.add_argument("--metadata", help="optional metadata sidecar CSV")
    p_fit.add_argument("--model", default="all",
                       choices=["all"] + [k.value for k in KIND_ORDER])
    p_fit.add_argument("--curves", action="store_true",
                       help="also write (t, observed, fitted) CSV for plotting")
    _common_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_cls = sub.add_parser("classify", help="select the best model per series")
    p_cls.add_argument("input")
    p_cls.add_argument("--metadata")
    p_cls.add_argument("--mer-threshold", type=float, default=0.05)
    p_cls.add_argument("--group-by", default="none", choices=["none", "category", "popularity"])
    p_cls.add_argument("--labels", help="ground-truth labels CSV; prints accuracy")
    _common_flags(p_cls)
    p_cls.set_defaults(func=cmd_classify)

    p_pred = sub.add_parser("predict", help="evaluate prediction windows")
    p_pred.add_argument("input")
    p_pred.add_argument("--metadata")
    p_pred.add_argument("--scenario", default="halflife",
                        choices=sorted(PredictionSetup.SCENARIOS))
    p_pred.add_argument("--bound", type=float, default=0.05)
    p_pred.add_argument("--horizon-mult", type=float, default=3.0)
    p_pred.add_argument("--mer-threshold", type=float, default=0.05)
    _common_flags(p_pred)
    p_pred.set_defaults(func=cmd_predict)

    p_syn = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p_syn.add_argument("--mix", default="all:100", help="e.g. all:100 or gompertz:50,negexp:25")
    p_syn.add_argument("--n", type=int, default=200, help="observations per series")
    p_syn.add_argument("--noise", type=float, default=0.0, help="multiplicative noise sigma")
    p_syn.add_argument("--scale", help="denormalize to raw units, e.g. 365:100000")
    p_syn.add_argument("--format", default="csv", choices=["csv", "json"])
    _common_flags(p_syn)
    p_syn.set_defaults(func=cmd_synth)

    p_rep = sub.add_parser("report", help="distribution tables from a classification JSON")
    p_rep.add_argument("input", help="classifications.json from the classify command")
    p_rep.add_argument("--group-by", default="none", choices=["none", "category", "popularity"])
    p_rep.add_argument("--level", type=float, default=0.95, help="confidence level")
    _common_flags(p_rep)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
