"""Experiment runner: synth | resample | train | eval | report.

Configuration is a flat key=value text file with section prefixes (dataset.,
train., eval.); every key has a default, so an empty config is a valid run.
A single root seed drives every random stream through documented purpose
strings. Each run directory receives the emitted CSVs, a checkpoint when
training, and a manifest recording the config echo, seed, timestamps, and
sha256 checksums; the manifest is written exactly once and evaluation
verifies dataset and split hashes against the training manifest before it
will score a test split.

Exit codes: 0 ok, 1 usage, 2 data error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .checkpoint import (CheckpointBundle, CheckpointError, load_checkpoint,
                         save_checkpoint)
from .dataio import (DataError, LabeledDataset, Standardizer,
                     default_fault_specs, load_csv, stratified_split,
                     synthesize_dataset, write_csv)
from .metrics import (MetricsError, confusion, evaluate, macro_rates,
                      one_vs_rest, binary_rates, imbalance_metrics,
                      mcc as mcc_of)
from .model import (ModelError, TrainConfig, TrainingDiverged,
                    calibrate_threshold, classify_batch, fault_scores, train,
                    train_classifier)
from .resample import ResampleError, apply_plan, balance_plan
from .seeding import derive_seed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

METHODS = ("none", "random", "smote", "b-smote", "adasyn", "mogan")
_RESAMPLE_NAME = {"random": "random", "smote": "smote",
                  "b-smote": "borderline", "adasyn": "adasyn"}

CONFIG_DEFAULTS = {
    "dataset.csv": "",
    "dataset.counts": "2000,100,100,100",
    "dataset.window": "256",
    "dataset.random_phase": "false",
    "dataset.train_fraction": "0.7",
    "method": "mogan",
    "resample.k": "5",
    "train.epochs": "60",
    "train.batch_size": "64",
    "train.latent_dim": "128",
    "train.pi": "0.5",
    "train.refresh_interval": "5",
    "train.warmup_epochs": "5",
    "train.lr": "2e-4",
    "train.beta1": "0.5",
    "train.beta2": "0.999",
    "train.fake_fraction": "0.125",
    "train.mixture_share": "0.5",
    "train.input_jitter": "0.4",
    "train.penalty_weight": "0",
    "train.delta_quantile": "0.05",
    "eval.target_fpr": "0.05",
    "eval.alpha": "1.0",
    "eval.checkpoint": "",
    "seed": "0",
    "out": "run",
}


class UsageError(ValueError):
    pass


class LineageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config


def parse_config(path) -> dict:
    """Flat key=value file; '#' starts a comment; unknown keys are rejected."""
    cfg = dict(CONFIG_DEFAULTS)
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = value
    return cfg


def _as_int(cfg, key) -> int:
    try:
        return int(cfg[key])
    except ValueError:
        raise UsageError(f"config {key}: expected integer, got {cfg[key]!r}") from None


def _as_float(cfg, key) -> float:
    try:
        return float(cfg[key])
    except ValueError:
        raise UsageError(f"config {key}: expected number, got {cfg[key]!r}") from None


def _as_bool(cfg, key) -> bool:
    v = cfg[key].strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise UsageError(f"config {key}: expected true/false, got {cfg[key]!r}")


def train_config_from(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=_as_int(cfg, "train.epochs"),
        batch_size=_as_int(cfg, "train.batch_size"),
        latent_dim=_as_int(cfg, "train.latent_dim"),
        pi=_as_float(cfg, "train.pi"),
        refresh_interval=_as_int(cfg, "train.refresh_interval"),
        warmup_epochs=_as_int(cfg, "train.warmup_epochs"),
        lr=_as_float(cfg, "train.lr"),
        beta1=_as_float(cfg, "train.beta1"),
        beta2=_as_float(cfg, "train.beta2"),
        fake_fraction=_as_float(cfg, "train.fake_fraction"),
        mixture_share=_as_float(cfg, "train.mixture_share"),
        input_jitter=_as_float(cfg, "train.input_jitter"),
        penalty_weight=_as_float(cfg, "train.penalty_weight"),
        delta_quantile=_as_float(cfg, "train.delta_quantile"),
        seed=_as_int(cfg, "seed"),
    )


# ---------------------------------------------------------------------------
# dataset plumbing


def load_or_synthesize(cfg: dict) -> LabeledDataset:
    if cfg["dataset.csv"]:
        return load_csv(cfg["dataset.csv"])
    counts = []
    for part in cfg["dataset.counts"].split(","):
        part = part.strip()
        if part:
            try:
                counts.append(int(part))
            except ValueError:
                raise UsageError(f"config dataset.counts: bad count {part!r}") from None
    specs = default_fault_specs()
    if len(counts) != len(specs):
        raise UsageError(f"config dataset.counts: expected {len(specs)} counts")
    return synthesize_dataset(specs, counts, _as_int(cfg, "dataset.window"),
                              seed=derive_seed(_as_int(cfg, "seed"), "synth"))


def dataset_sha256(ds: LabeledDataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.features).tobytes())
    h.update(np.ascontiguousarray(ds.labels).tobytes())
    return h.hexdigest()


def indices_sha256(indices) -> str:
    return hashlib.sha256(np.asarray(indices, dtype=np.int64).tobytes()).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def split_pipeline(cfg: dict):
    """Dataset -> stratified split -> train-split standardization.

    Returns (ds, train_std, test_std, lineage dict); the standardizer is
    fitted on the train split only and applied to both sides.
    """
    ds = load_or_synthesize(cfg)
    seed = _as_int(cfg, "seed")
    ds_train, ds_test, idx_train, idx_test = stratified_split(
        ds, _as_float(cfg, "dataset.train_fraction"), seed)
    std = Standardizer.fit(ds_train.features)
    train_std = LabeledDataset(std.apply(ds_train.features), ds_train.labels,
                               ds.class_names)
    test_std = LabeledDataset(std.apply(ds_test.features), ds_test.labels,
                              ds.class_names)
    lineage = {
        "dataset_sha256": dataset_sha256(ds),
        "train_indices_sha256": indices_sha256(idx_train),
        "test_indices_sha256": indices_sha256(idx_test),
    }
    return ds, train_std, test_std, std, lineage


# ---------------------------------------------------------------------------
# manifest


def write_manifest(out_dir, command: str, cfg: dict, lineage: dict | None,
                   files: list, started: float, extra: dict | None = None) -> str:
    path = os.path.join(out_dir, "manifest.json")
    if os.path.exists(path):
        raise DataError(f"{path}: manifest already written; refusing to overwrite")
    doc = {
        "command": command,
        "code_version": __version__,
        "config": dict(cfg),
        "seed": _as_int(cfg, "seed"),
        "started": _iso(started),
        "finished": _iso(time.time()),
        "files": {os.path.basename(f): file_sha256(f) for f in files},
    }
    if lineage:
        doc["lineage"] = dict(lineage)
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _iso(t: float) -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(t)) + "Z"


def read_manifest(run_dir) -> dict:
    path = os.path.join(run_dir, "manifest.json")
    with open(path, "r") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# metrics CSV


METRIC_COLUMNS = ["run", "method", "split", "scope", "sensitivity", "specificity",
                  "precision", "recall", "balanced_accuracy", "g_mean",
                  "f_measure", "mcc", "auc", "fam", "degenerate"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if np.isnan(v):
            return ""
        return "%.17g" % v
    return str(v)


def metrics_rows(run: str, method: str, split: str, y_true, y_pred,
                 n_classes: int, class_names, scores, alpha: float) -> list:
    """Deterministic report rows: overall fault-vs-normal, macro, per class."""
    report = evaluate(y_true, y_pred, n_classes, scores=scores, alpha=alpha,
                      fake_column=True)
    rows = [
        [run, method, split, "overall", report.sensitivity, report.specificity,
         report.precision, report.recall, report.balanced_accuracy,
         report.g_mean, report.f_measure, report.mcc, report.auc, report.fam,
         report.degenerate],
    ]
    cm = confusion(y_true, y_pred, n_classes, fake_column=True)
    ms, msp, mp, mr = macro_rates(cm[:, :n_classes])
    mbac, mgm, mf, _ = imbalance_metrics(ms, msp, alpha)
    rows.append([run, method, split, "macro", ms, msp, mp, mr, mbac, mgm, mf,
                 None, None, None, False])
    for c in range(n_classes):
        two = one_vs_rest(cm[:, :n_classes], c)
        r = binary_rates(two)
        bac, gm, f, f_flag = imbalance_metrics(r.sensitivity, r.specificity, alpha)
        m_val, m_flag = mcc_of(two)
        rows.append([run, method, split, f"class:{class_names[c]}",
                     r.sensitivity, r.specificity, r.precision, r.recall,
                     bac, gm, f, m_val, None, None,
                     bool(r.flagged or f_flag or m_flag)])
    return rows


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_confusion_csv(path, cm: np.ndarray, class_names) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = list(class_names) + (["generated"] if cm.shape[1] > cm.shape[0] else [])
        w.writerow(["true\\pred"] + cols)
        for c, name in enumerate(class_names):
            w.writerow([name] + [int(v) for v in cm[c]])


def write_scores_csv(path, labels, scores, preds) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label", "fault_score", "predicted"])
        for i, (t, s, p) in enumerate(zip(labels, scores, preds)):
            w.writerow([i, int(t), "%.17g" % s, int(p)])


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(cfg: dict) -> int:
    started = time.time()
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    ds = load_or_synthesize(cfg)
    path = os.path.join(out, "dataset.csv")
    write_csv(ds, path)
    write_manifest(out, "synth", cfg, {"dataset_sha256": dataset_sha256(ds)},
                   [path], started)
    print(f"wrote {path} ({ds.n} rows, {ds.n_classes} classes)")
    return EXIT_OK


def cmd_resample(cfg: dict) -> int:
    started = time.time()
    method = cfg["method"]
    if method in ("none", "mogan"):
        raise UsageError("resample needs method in random|smote|b-smote|adasyn")
    if method not in _RESAMPLE_NAME:
        raise UsageError(f"unknown method {method!r}")
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    ds = load_or_synthesize(cfg)
    balanced = apply_plan(ds, balance_plan(ds), _RESAMPLE_NAME[method],
                          _as_int(cfg, "resample.k"), _as_int(cfg, "seed"))
    path = os.path.join(out, "resampled.csv")
    write_csv(balanced, path)
    write_manifest(out, "resample", cfg,
                   {"dataset_sha256": dataset_sha256(ds)}, [path], started,
                   extra={"method": method})
    print(f"wrote {path} ({ds.n} -> {balanced.n} rows)")
    return EXIT_OK


def cmd_train(cfg: dict) -> int:
    started = time.time()
    if cfg["method"] != "mogan":
        raise UsageError("train handles method=mogan only; baselines are "
                         "trained inside eval")
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    _, train_std, _, std, lineage = split_pipeline(cfg)
    tcfg = train_config_from(cfg)
    history_path = os.path.join(out, "history.csv")
    try:
        det, gen, history = train(train_std, tcfg)
    except TrainingDiverged as e:
        with open(history_path, "w") as fh:
            fh.write(e.history.to_csv_text())
        write_manifest(out, "train", cfg, lineage, [history_path], started,
                       extra={"method": "mogan", "diverged_at_epoch": e.epoch})
        print(f"training diverged at epoch {e.epoch}; partial history kept",
              file=sys.stderr)
        return EXIT_DIVERGED
    normal_rows = train_std.features[train_std.labels == 0]
    scores, _ = fault_scores(det, normal_rows)
    calibrate_threshold(det, scores, _as_float(cfg, "eval.target_fpr"))
    ckpt_path = os.path.join(out, "checkpoint.json")
    save_checkpoint(ckpt_path, det, gen, tcfg, train_std.class_names,
                    delta=[tcfg.delta_quantile] * train_std.n_classes,
                    standardizer=std)
    with open(history_path, "w") as fh:
        fh.write(history.to_csv_text())
    write_manifest(out, "train", cfg, lineage, [ckpt_path, history_path],
                   started, extra={"method": "mogan"})
    print(f"wrote {ckpt_path} and {history_path} "
          f"(final validation G-mean {history.val_g_mean[-1]:.4f})")
    return EXIT_OK


def _verify_lineage(cfg: dict, lineage: dict, checkpoint_path: str) -> None:
    run_dir = os.path.dirname(os.path.abspath(checkpoint_path))
    try:
        manifest = read_manifest(run_dir)
    except FileNotFoundError:
        raise LineageError(f"{run_dir}: no manifest next to the checkpoint") from None
    trained = manifest.get("lineage", {})
    for key in ("dataset_sha256", "train_indices_sha256", "test_indices_sha256"):
        if trained.get(key) != lineage[key]:
            raise LineageError(
                f"lineage mismatch on {key}: the checkpoint was trained on a "
                "different dataset or split than this config produces")


def cmd_eval(cfg: dict) -> int:
    started = time.time()
    method = cfg["method"]
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}; choose from {METHODS}")
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    _, train_std, test_std, std, lineage = split_pipeline(cfg)
    alpha = _as_float(cfg, "eval.alpha")
    run_name = os.path.basename(os.path.normpath(out)) or "run"
    k = test_std.n_classes

    if method == "mogan":
        ckpt = cfg["eval.checkpoint"]
        if not ckpt:
            raise UsageError("method=mogan needs eval.checkpoint=PATH "
                             "(or --checkpoint)")
        _verify_lineage(cfg, lineage, ckpt)
        bundle: CheckpointBundle = load_checkpoint(ckpt)
        det = bundle.detector
        preds = classify_batch(det, test_std.features)
        scores, _ = fault_scores(det, test_std.features)
    else:
        tcfg = train_config_from(cfg)
        fit_ds = train_std
        if method != "none":
            fit_ds = apply_plan(train_std, balance_plan(train_std),
                                _RESAMPLE_NAME[method],
                                _as_int(cfg, "resample.k"), tcfg.seed)
        clf = train_classifier(fit_ds, tcfg.epochs, tcfg.batch_size,
                               seed=tcfg.seed, lr=tcfg.lr)
        preds = clf.predict(test_std.features)
        scores = clf.scores(test_std.features)

    rows = metrics_rows(run_name, method, "test", test_std.labels, preds, k,
                        test_std.class_names, scores, alpha)
    metrics_path = os.path.join(out, "metrics.csv")
    write_metrics_csv(metrics_path, rows)
    cm = confusion(test_std.labels, preds, k, fake_column=True)
    confusion_path = os.path.join(out, "confusion.csv")
    write_confusion_csv(confusion_path, cm, test_std.class_names)
    scores_path = os.path.join(out, "scores.csv")
    write_scores_csv(scores_path, test_std.labels, scores, preds)
    write_manifest(out, "eval", cfg, lineage,
                   [metrics_path, confusion_path, scores_path], started,
                   extra={"method": method})
    overall = rows[0]
    print(f"method={method} G-mean={overall[9]:.4f} BAC={overall[8]:.4f} "
          f"AUC={overall[12]:.4f}")
    return EXIT_OK


def cmd_report(run_dirs, out_dir) -> int:
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for run_dir in run_dirs:
        try:
            manifest = read_manifest(run_dir)
        except (FileNotFoundError, json.JSONDecodeError) as e:
            print(f"skipping {run_dir}: {e}", file=sys.stderr)
            continue
        metrics_path = os.path.join(run_dir, "metrics.csv")
        if not os.path.exists(metrics_path):
            print(f"skipping {run_dir}: no metrics.csv", file=sys.stderr)
            continue
        with open(metrics_path, "r", newline="") as fh:
            reader = csv.DictReader(fh)
            overall = next((r for r in reader if r.get("scope") == "overall"), None)
        if overall is None:
            print(f"skipping {run_dir}: no overall metrics row", file=sys.stderr)
            continue
        entries.append({
            "run": os.path.basename(os.path.normpath(run_dir)),
            "method": manifest.get("method", overall.get("method", "")),
            "seed": manifest.get("seed", ""),
            "recall": overall["recall"],
            "precision": overall["precision"],
            "fam": overall["fam"],
            "balanced_accuracy": overall["balanced_accuracy"],
            "g_mean": overall["g_mean"],
            "auc": overall["auc"],
        })
    entries.sort(key=lambda e: (str(e["method"]), str(e["seed"]), e["run"]))
    path = os.path.join(out_dir, "report.csv")
    cols = ["run", "method", "seed", "recall", "precision", "fam",
            "balanced_accuracy", "g_mean", "auc"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for e in entries:
            w.writerow([e[c] for c in cols])
    print(f"wrote {path} ({len(entries)} runs)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        err = UsageError(message)
        err.printed = True
        raise err


def build_parser() -> _Parser:
    parser = _Parser(prog="mogan", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("synth", "resample", "train", "eval"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (default from config)")
        p.add_argument("--method", choices=METHODS, help="override the config method")
        if name == "eval":
            p.add_argument("--checkpoint", help="trained checkpoint for method=mogan")
    p = sub.add_parser("report")
    p.add_argument("run_dirs", nargs="+", help="completed run directories")
    p.add_argument("--out", default=".", help="where to write report.csv")
    return parser


def _merged_config(args) -> dict:
    cfg = parse_config(args.config) if args.config else dict(CONFIG_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    if args.out is not None:
        cfg["out"] = args.out
    if getattr(args, "method", None):
        cfg["method"] = args.method
    if getattr(args, "checkpoint", None):
        cfg["eval.checkpoint"] = args.checkpoint
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "report":
            return cmd_report(args.run_dirs, args.out)
        cfg = _merged_config(args)
        handler = {"synth": cmd_synth, "resample": cmd_resample,
                   "train": cmd_train, "eval": cmd_eval}[args.command]
        return handler(cfg)
    except UsageError as e:
        if not getattr(e, "printed", False):
            print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, ResampleError, MetricsError, ModelError,
            CheckpointError, LineageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
