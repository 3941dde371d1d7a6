"""Command-line entry point.

Subcommands: preprocess, screen, sample, train, predict, evaluate, synth,
report. Each run writes ``<command>.manifest.json`` next to its artifacts.
Exit codes: 0 success, 1 runtime error, 2 configuration or validation error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import MANIFEST_SCHEMA, RunConfig, parse_config, read_config_file
from .data import (
    Dataset,
    Schema,
    derive_survival_label,
    drop_incomplete,
    filter_range,
    label_histogram,
    load_csv,
    merge_rare_categories,
    months_histogram,
)
from .errors import ConfigError, ImbsurvError, ParseError, SchemaError
from .evaluation import METRIC_NAMES, ExperimentSpec, run_experiment
from .models import OneHotEncoding, encode_onehot, fit_model, model_from_dict, model_to_dict, predict_proba
from .sampling import SampleSet, SamplerSpec, run_pipeline
from .stats import association_matrix, screen_by_anova
from .synthgen import CALIBRATED_OVERLAP, MONTHS_COLUMN, BlobConfig, CatGenConfig, generate_blobs, generate_categorical


# --------------------------------------------------------------------------
# small I/O helpers


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(obj, sort_keys: bool = True) -> str:
    return json.dumps(obj, indent=2, sort_keys=sort_keys, allow_nan=False) + "\n"


def _num(v: float) -> str:
    return repr(float(v))


class _Artifacts:
    """Collects written files and their hashes for the manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.hashes: dict[str, str] = {}
        out_dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        data = text.encode("utf-8")
        path = self.out_dir / name
        path.write_bytes(data)
        self.hashes[name] = hashlib.sha256(data).hexdigest()
        return path

    def manifest(self, command: str, seed, config: Optional[dict], args: dict) -> Path:
        doc = {
            "manifest": MANIFEST_SCHEMA,
            "command": command,
            "version": __version__,
            "seed": seed,
            "config": config,
            "args": args,
            "artifacts": dict(sorted(self.hashes.items())),
        }
        path = self.out_dir / f"{command}.manifest.json"
        # insertion order kept: sampler and model order define the report layout
        path.write_text(_json_text(doc, sort_keys=False), encoding="utf-8")
        return path


def _read_header(path: Path) -> list[str]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return [h.strip() for h in next(csv.reader(fh))]
    except StopIteration:
        raise ParseError("empty file: no header row") from None


def _read_rows(path: Path, columns: list[str]) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file: no header row") from None
        for c in columns:
            if c not in header:
                raise SchemaError(f"column not found in CSV header: {c}", key=c)
        idx = [header.index(c) for c in columns]
        rows = []
        for i, rec in enumerate(reader):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"row {i}: expected {len(header)} cells, found {len(rec)}", row=i)
            rows.append([rec[j].strip() for j in idx])
    return rows


# --------------------------------------------------------------------------
# data preparation shared by the config-driven subcommands


@dataclass
class Prepared:
    kind: str
    feature_names: list[str]
    samples: SampleSet
    dataset: Optional[Dataset] = None
    encoding: Optional[OneHotEncoding] = None
    info: dict = field(default_factory=dict)

    def model_matrix(self, X) -> np.ndarray:
        return self.encoding.transform(X) if self.encoding is not None else np.asarray(X, dtype=np.float64)


def _prepare_categorical(cfg: RunConfig) -> Prepared:
    filter_cols = [f.column for f in cfg.filters]
    features = cfg.features
    if features is None:
        header = _read_header(cfg.data_path)
        skip = {cfg.label_source, cfg.label_column, *filter_cols}
        features = [c for c in header if c not in skip]
    try:
        schema = Schema.from_names(features, cfg.label_source, cfg.missing_tokens)
    except ValueError as exc:
        raise ConfigError(str(exc), key="data.features") from None
    table = load_csv(cfg.data_path, schema, extra_columns=filter_cols)
    n_read = len(table)
    for f in cfg.filters:
        table = filter_range(table, f.column, f.lo, f.hi)
    n_filtered = n_read - len(table)
    table, n_dropped = drop_incomplete(table)
    merge = None
    if cfg.merge_threshold is not None:
        table, mm = merge_rare_categories(table, cfg.merge_threshold)
        merge = mm.to_dict()
    ds = derive_survival_label(table, cfg.horizon, cfg.cutoff_inclusive)
    hist = label_histogram(ds)
    info = {
        "rows_read": n_read,
        "rows_filtered": n_filtered,
        "rows_dropped_incomplete": n_dropped,
        "rows_kept": len(ds),
        "merge_map": merge,
        "horizon_years": cfg.horizon.years,
        "cutoff_months": cfg.horizon.cutoff_months,
        "cutoff_inclusive": cfg.cutoff_inclusive,
        "label_histogram": {
            "not_survived": hist.count_positive,
            "survived": hist.count_negative,
            "not_survived_fraction": hist.positive_fraction,
            "empty": hist.empty,
        },
    }
    _, enc = encode_onehot(ds)
    return Prepared("categorical", ds.feature_names, SampleSet.from_dataset(ds), ds, enc, info)


def _prepare_numeric(cfg: RunConfig) -> Prepared:
    header = _read_header(cfg.data_path)
    if cfg.label_column not in header:
        raise SchemaError(f"column not found in CSV header: {cfg.label_column}", key="data.label_column")
    features = cfg.features or [c for c in header if c != cfg.label_column]
    rows = _read_rows(cfg.data_path, features + [cfg.label_column])
    kept = [r for r in rows if not any(c in cfg.missing_tokens for c in r)]
    X = np.empty((len(kept), len(features)))
    y = np.empty(len(kept), dtype=np.int64)
    for i, r in enumerate(kept):
        try:
            X[i] = [float(c) for c in r[:-1]]
        except ValueError:
            raise ParseError(f"row {i}: non-numeric feature value", row=i) from None
        if r[-1] not in ("0", "1"):
            raise ParseError(f"row {i}: label must be 0 or 1, got {r[-1]!r}", row=i)
        y[i] = int(r[-1])
    info = {
        "rows_read": len(rows),
        "rows_dropped_incomplete": len(rows) - len(kept),
        "rows_kept": len(kept),
        "label_histogram": {
            "positive": int(y.sum()),
            "negative": int(len(y) - y.sum()),
            "positive_fraction": float(y.mean()) if len(y) else 0.0,
            "empty": len(y) == 0,
        },
    }
    return Prepared("numeric", list(features), SampleSet(X, y), info=info)


def prepare(cfg: RunConfig, apply_screen: Optional[bool] = None) -> Prepared:
    prep = _prepare_categorical(cfg) if cfg.kind == "categorical" else _prepare_numeric(cfg)
    if apply_screen is None:
        apply_screen = cfg.apply_screen
    if apply_screen and prep.dataset is not None:
        report = screen_by_anova(prep.dataset, cfg.alpha)
        if not report.kept:
            raise ImbsurvError("screening dropped every feature")
        ds = prep.dataset.select_features(report.kept)
        _, enc = encode_onehot(ds)
        prep = Prepared("categorical", ds.feature_names, SampleSet.from_dataset(ds), ds, enc,
                        {**prep.info, "screened_out": report.dropped})
    return prep


def _decoded_rows(prep: Prepared, X) -> list[list[str]]:
    if prep.dataset is None:
        return [[_num(v) for v in row] for row in np.asarray(X, dtype=np.float64)]
    vocab = prep.dataset.vocab
    return [[vocab[j][c] for j, c in enumerate(row)] for row in np.asarray(X).tolist()]


# --------------------------------------------------------------------------
# subcommands


def _apply_manifest_args(args, names):
    """Fill flags left unset on the command line from a manifest's args."""
    path = getattr(args, "config", None)
    if path is None or Path(path).suffix.lower() != ".json":
        return
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return
    if not isinstance(doc, dict) or doc.get("manifest") != MANIFEST_SCHEMA:
        return
    for name in names:
        if getattr(args, name, None) is None and name in doc.get("args", {}):
            setattr(args, name, doc["args"][name])


def _load_run_config(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required", key="config")
    raw, base = read_config_file(args.config)
    raw = json.loads(json.dumps(raw))
    if getattr(args, "cutoff_inclusive", False):
        raw.setdefault("data", {})["cutoff_inclusive"] = True
    if getattr(args, "resample_before_cv", False):
        raw.setdefault("evaluation", {})["resample_before_cv"] = True
    if getattr(args, "out", None) is not None:
        raw.setdefault("output", {})["dir"] = str(Path(args.out).resolve())
    if not isinstance(raw.get("output", {}), dict):
        raise ConfigError("output must be a table", key="output")
    cfg = parse_config(raw, base)
    cfg.raw.setdefault("output", {})["dir"] = str(cfg.output_dir.resolve())
    return cfg


def cmd_preprocess(args) -> int:
    cfg = _load_run_config(args)
    prep = prepare(cfg, apply_screen=False)
    art = _Artifacts(cfg.output_dir)
    if prep.dataset is not None:
        ds = prep.dataset
        header = prep.feature_names + [cfg.label_source, "label"]
        rows = [r + [str(m), str(l)] for r, m, l in zip(ds.decode(), ds.months.tolist(), ds.labels.tolist())]
        art.write("preprocessed.csv", _csv_text(header, rows))
        art.write("months_histogram.csv", _csv_text(
            ["bin_start", "bin_end", "count"], months_histogram(ds)))
    else:
        header = prep.feature_names + ["label"]
        rows = [r + [str(l)] for r, l in zip(_decoded_rows(prep, prep.samples.X), prep.samples.y.tolist())]
        art.write("preprocessed.csv", _csv_text(header, rows))
    art.write("preprocess.json", _json_text(prep.info))
    art.manifest("preprocess", cfg.seed, cfg.echo(), {})
    return 0


def cmd_screen(args) -> int:
    cfg = _load_run_config(args)
    if cfg.kind != "categorical":
        raise ConfigError("screening needs categorical data", key="data.kind")
    prep = prepare(cfg, apply_screen=False)
    art = _Artifacts(cfg.output_dir)
    art.write("screening.csv", screen_by_anova(prep.dataset, cfg.alpha).to_csv())
    art.write("association.csv", association_matrix(prep.dataset).to_csv())
    art.manifest("screen", cfg.seed, cfg.echo(), {})
    return 0


def cmd_sample(args) -> int:
    _apply_manifest_args(args, ["sampler"])
    cfg = _load_run_config(args)
    if args.sampler is None:
        raise ConfigError("--sampler is required", key="sampler")
    stages = cfg.sampler(args.sampler, key="sampler")
    prep = prepare(cfg)
    out, log = run_pipeline(SamplerSpec(tuple(stages), cfg.seed), prep.samples)
    art = _Artifacts(cfg.output_dir)
    header = prep.feature_names + ["label", "provenance", "source_row"]
    rows = [r + [str(l), p, str(i)] for r, l, p, i in
            zip(_decoded_rows(prep, out.X), out.y.tolist(), out.provenance, out.ids.tolist())]
    art.write("sampled.csv", _csv_text(header, rows))
    art.write("sample_log.json", _json_text({"sampler": args.sampler, "stages": log}))
    art.manifest("sample", cfg.seed, cfg.echo(), {"sampler": args.sampler})
    return 0


def cmd_train(args) -> int:
    _apply_manifest_args(args, ["model", "sampler"])
    cfg = _load_run_config(args)
    if args.model is None:
        raise ConfigError("--model is required", key="model")
    model_cfg = cfg.model(args.model, key="model")
    prep = prepare(cfg)
    data, log = prep.samples, []
    if args.sampler is not None:
        stages = cfg.sampler(args.sampler, key="sampler")
        data, log = run_pipeline(SamplerSpec(tuple(stages), cfg.seed), data)
    model = fit_model(prep.model_matrix(data.X), data.y, model_cfg, prep.encoding)
    doc = model_to_dict(model)
    doc["data_kind"] = prep.kind
    doc["input_columns"] = prep.feature_names
    doc["sampler"] = args.sampler
    doc["sample_log"] = log
    art = _Artifacts(cfg.output_dir)
    art.write("model.json", _json_text(doc))
    art.manifest("train", cfg.seed, cfg.echo(), {"model": args.model, "sampler": args.sampler})
    return 0


def cmd_predict(args) -> int:
    _apply_manifest_args(args, ["model", "input", "threshold"])
    for name in ("model", "input"):
        if getattr(args, name) is None:
            raise ConfigError(f"--{name} is required", key=name)
    threshold = 0.5 if args.threshold is None else float(args.threshold)
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError("threshold must lie in [0, 1]", key="threshold")
    try:
        doc = json.loads(Path(args.model).read_text(encoding="utf-8"))
        model = model_from_dict(doc)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load model: {exc}", key="model") from None
    columns = doc.get("input_columns") or (model.encoding.feature_names if model.encoding else None)
    if columns is None:
        raise ConfigError("model document lists no input columns", key="model")
    rows = _read_rows(Path(args.input), list(columns))
    if model.encoding is not None:
        X = model.encoding.transform(model.encoding.codes_from_text(rows))
    else:
        try:
            X = np.array([[float(c) for c in r] for r in rows], dtype=np.float64).reshape(len(rows), len(columns))
        except ValueError:
            raise ParseError("non-numeric feature value in input") from None
    p = predict_proba(model, X)
    out_dir = Path(args.out) if args.out is not None else Path(args.input).resolve().parent
    art = _Artifacts(out_dir)
    art.write("predictions.csv", _csv_text(
        ["row", "probability", "label"],
        [[i, _num(v), int(v >= threshold)] for i, v in enumerate(p.tolist())]))
    art.manifest("predict", None, None, {
        "model": str(Path(args.model).resolve()), "input": str(Path(args.input).resolve()),
        "threshold": threshold})
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_run_config(args)
    if not cfg.samplers:
        raise ConfigError("no samplers configured", key="samplers")
    if not cfg.models:
        raise ConfigError("no models configured", key="models")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1", key="threads")
    prep = prepare(cfg)
    s_names = cfg.eval_samplers or list(cfg.samplers)
    m_names = cfg.eval_models or list(cfg.models)
    spec = ExperimentSpec(
        data=prep.samples,
        samplers=[(n, cfg.samplers[n]) for n in s_names],
        models=[(n, cfg.models[n]) for n in m_names],
        seed=cfg.seed,
        k=cfg.k,
        threshold=cfg.threshold,
        aggregation=cfg.aggregation,
        resample_before_cv=cfg.resample_before_cv,
        encoding=prep.encoding,
    )
    report = run_experiment(spec, threads=args.threads)
    art = _Artifacts(cfg.output_dir)
    art.write("report.csv", report.to_csv())
    art.write("report.json", report.to_json({"data": prep.info, "version": __version__}))
    art.manifest("evaluate", cfg.seed, cfg.echo(), {})
    return 0 if not report.errors else 1


def cmd_synth(args) -> int:
    _apply_manifest_args(args, ["kind", "n", "minority_frac", "seed", "overlap", "n_features",
                                "categories", "signal", "out"])
    if args.seed is None:
        raise ConfigError("--seed is required", key="seed")
    kind = args.kind or "blobs"
    out = Path(args.out if args.out is not None else "synth.csv")
    try:
        if kind == "blobs":
            gcfg = BlobConfig(
                n=1000 if args.n is None else args.n,
                minority_frac=0.104 if args.minority_frac is None else args.minority_frac,
                overlap=CALIBRATED_OVERLAP if args.overlap is None else args.overlap,
                seed=args.seed,
            )
        else:
            gcfg = CatGenConfig(
                n=2000 if args.n is None else args.n,
                n_features=6 if args.n_features is None else args.n_features,
                categories_per_feature=4 if args.categories is None else args.categories,
                minority_frac=0.104 if args.minority_frac is None else args.minority_frac,
                signal_strength=0.5 if args.signal is None else args.signal,
                seed=args.seed,
            )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key="synth") from None
    if kind == "blobs":
        data = generate_blobs(gcfg)
        text = _csv_text(["x1", "x2", "label"],
                         [[_num(a), _num(b), int(c)] for (a, b), c in zip(data.X.tolist(), data.y.tolist())])
    else:
        ds = generate_categorical(gcfg)
        text = _csv_text(ds.feature_names + [MONTHS_COLUMN, "label"],
                         [r + [m, l] for r, m, l in zip(ds.decode(), ds.months.tolist(), ds.labels.tolist())])
    art = _Artifacts(out.resolve().parent)
    art.write(out.name, text)
    sidecar = {"kind": kind, "config": gcfg.to_dict(), "version": __version__}
    art.write(out.stem + ".json", _json_text(sidecar))
    art.manifest("synth", args.seed, None, {
        "kind": kind, "n": gcfg.n, "minority_frac": gcfg.minority_frac, "seed": args.seed,
        "overlap": getattr(gcfg, "overlap", None), "n_features": getattr(gcfg, "n_features", None),
        "categories": getattr(gcfg, "categories_per_feature", None),
        "signal": getattr(gcfg, "signal_strength", None), "out": str(out.resolve()),
    })
    return 0


def _pct(v) -> str:
    return "NA" if v is None else f"{100.0 * v:.2f}"


def cmd_report(args) -> int:
    _apply_manifest_args(args, ["input"])
    if args.input is None:
        raise ConfigError("--input is required", key="input")
    try:
        doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
        rows = [r for r in doc["rows"] if r["fold"] in ("mean", "error")]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read report: {exc}", key="input") from None
    header = ["model", "sampler"] + [f"{m} (%)" for m in METRIC_NAMES]
    table = [[r["model"], r["sampler"]] + [_pct(r[m]) for m in METRIC_NAMES] for r in rows]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *table)]
    for line in [header] + table:
        print("  ".join(str(x).ljust(w) for x, w in zip(line, widths)).rstrip())
    out_dir = Path(args.out) if args.out is not None else Path(args.input).resolve().parent
    art = _Artifacts(out_dir)
    art.write("table.csv", _csv_text(header, table))
    art.manifest("report", doc.get("experiment", {}).get("seed"), None,
                 {"input": str(Path(args.input).resolve())})
    return 0


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imbsurv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"imbsurv {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_, config=True):
        sp = sub.add_parser(name, help=help_, description=help_)
        if config:
            sp.add_argument("--config", help="TOML or JSON config, or a manifest from an earlier run")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.set_defaults(func=func)
        return sp

    sp = add("preprocess", cmd_preprocess, "Clean, merge rare categories and label the cohort.")
    sp.add_argument("--cutoff-inclusive", action="store_true", help="count death exactly at the cutoff month as not survived")
    sp = add("screen", cmd_screen, "ANOVA screening and pairwise Cramér's V.")
    sp.add_argument("--cutoff-inclusive", action="store_true")
    sp = add("sample", cmd_sample, "Run one sampler pipeline on the prepared data.")
    sp.add_argument("--sampler", help="name of a pipeline under [samplers]")
    sp.add_argument("--cutoff-inclusive", action="store_true")
    sp = add("train", cmd_train, "Fit one model on the (optionally resampled) data.")
    sp.add_argument("--model", help="name of a model under [models]")
    sp.add_argument("--sampler", help="resample with this pipeline first")
    sp.add_argument("--cutoff-inclusive", action="store_true")
    sp = add("predict", cmd_predict, "Score a CSV with a saved model.")
    sp.add_argument("--model", help="model.json written by train")
    sp.add_argument("--input", help="CSV with the model's input columns")
    sp.add_argument("--threshold", type=float, help="probability cutoff for label 1 (default 0.5)")
    sp = add("evaluate", cmd_evaluate, "Stratified k-fold evaluation of every sampler and model pair.")
    sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    sp.add_argument("--cutoff-inclusive", action="store_true")
    sp.add_argument("--resample-before-cv", action="store_true",
                    help="resample the full data before splitting (leaks; for comparison only)")
    sp = add("synth", cmd_synth, "Generate a seeded synthetic dataset.")
    sp.add_argument("--kind", choices=("blobs", "categorical"))
    sp.add_argument("--n", type=int)
    sp.add_argument("--minority-frac", type=float)
    sp.add_argument("--seed", type=int, help="required")
    sp.add_argument("--overlap", type=float, help=f"blobs only (default {CALIBRATED_OVERLAP})")
    sp.add_argument("--n-features", type=int, help="categorical only")
    sp.add_argument("--categories", type=int, help="categorical only: categories per feature")
    sp.add_argument("--signal", type=float, help="categorical only: signal strength in [0, 1]")
    sp.set_defaults(out=None)
    # synth writes a file, not a directory
    for action in sp._actions:
        if action.dest == "out":
            action.help = "output CSV path (default synth.csv)"
    sp = add("report", cmd_report, "Print the mean table of a report.json.")
    sp.add_argument("--input", help="report.json written by evaluate")
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        key = exc.key or "config"
        msg = " ".join(str(exc).split())
        print(f"imbsurv: config error [{key}]: {msg}", file=sys.stderr)
        return 2
    except (ImbsurvError, OSError, ValueError, ArithmeticError) as exc:
        msg = " ".join(str(exc).split())
        print(f"imbsurv: error: {msg}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())
