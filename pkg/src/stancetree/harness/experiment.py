"""End-to-end runs: cross-validate one classifier, write every artifact, and
compare finished runs side by side.

Run directory layout::

    manifest.json            written last; config, seeds, versions, file hashes
    report.json, report.txt  aggregate and per-fold scores
    class_counts.tsv         per-event class counts
    confusion.tsv, per_class.tsv, per_depth.tsv, events.tsv, predictions.tsv
    figures/per_depth.png, figures/confusion.png
    folds/<event>/           model.json, standardizer.json, per-fold tables
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .. import __version__
from ..conversation import LABELS, RumourDataset
from ..errors import StanceError
from ..evaluation import CrossValidationResult, EvalReport, leave_one_event_out
from ..pipeline import derive_seed
from .config import ExperimentConfig, load_config
from .dataset_io import class_count_table, dataset_fingerprint, format_class_counts, load_dataset
from .plotting import plot_confusion, plot_per_depth
from .synthetic import generate_synthetic

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "stancetree-manifest"
REPORT_FORMAT = "stancetree-report"
FORMAT_VERSION = 1


class ExperimentError(StanceError):
    pass


class DatasetMismatch(ExperimentError):
    pass


class IncompleteRun(ExperimentError):
    pass


@dataclass
class RunResult:
    directory: Path
    dataset: RumourDataset
    cv: CrossValidationResult
    manifest: dict


def resolve_dataset(config: ExperimentConfig) -> tuple[RumourDataset, dict]:
    if config.dataset is not None:
        return load_dataset(config.dataset, drop_orphans=config.drop_orphans), {}
    seed = derive_seed(config.seed, "synthetic")
    return generate_synthetic(replace(config.synthetic, seed=seed)), {"synthetic": seed}


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _tsv(rows) -> str:
    return "".join("\t".join(str(v) for v in r) + "\n" for r in rows)


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def confusion_rows(report: EvalReport) -> list:
    tags = [l.tag for l in LABELS]
    rows = [["gold\\pred", *tags, "total"]]
    for lab, row in zip(LABELS, report.confusion.counts):
        rows.append([lab.tag, *[int(v) for v in row], int(row.sum())])
    return rows


def per_class_rows(report: EvalReport) -> list:
    rows = [["label", "precision", "recall", "f1", "support"]]
    support = report.confusion.counts.sum(axis=1)
    for lab, (p, r, f), n in zip(LABELS, report.per_class, support):
        rows.append([lab.tag, _fmt(p), _fmt(r), _fmt(f), int(n)])
    return rows


def per_depth_rows(report: EvalReport) -> list:
    rows = [["depth", "micro_f1", "macro_f1", "n"]]
    for k, (mi, ma, n) in report.per_depth.items():
        rows.append([k, _fmt(mi), _fmt(ma), n])
    return rows


def event_rows(folds: dict) -> list:
    rows = [["event", "n", "micro_f1", "macro_f1", *[f"f1_{l.tag}" for l in LABELS]]]
    for name, rep in folds.items():
        rows.append([name, rep.confusion.total, _fmt(rep.micro_f1), _fmt(rep.macro_f1),
                     *[_fmt(f) for f in rep.per_class[:, 2]]])
    return rows


def text_report(classifier: str, dataset: RumourDataset, cv: CrossValidationResult) -> str:
    agg = cv.aggregate
    out = [f"classifier: {classifier}", f"tweets: {len(dataset)}  events: {len(dataset.events)}", "",
           "class counts", format_class_counts(dataset), "",
           f"aggregate micro-F1 {agg.micro_f1:.3f}  macro-F1 {agg.macro_f1:.3f}", ""]
    out.append(f"{'label':8} {'P':>6} {'R':>6} {'F1':>6}")
    for lab, (p, r, f) in zip(LABELS, agg.per_class):
        out.append(f"{lab.tag:8} {p:6.3f} {r:6.3f} {f:6.3f}")
    out += ["", "confusion (rows gold, row percentages)",
            " " * 8 + "".join(f"{l.short:>16}" for l in LABELS)]
    pct = agg.confusion.row_percentages()
    for lab, row, prow in zip(LABELS, agg.confusion.counts, pct):
        out.append(f"{lab.short:8}" + "".join(f"{int(c):>8} {p:5.1f}% " for c, p in zip(row, prow)))
    out += ["", "per event", f"{'event':24} {'n':>6} {'micro':>7} {'macro':>7}"]
    for name, rep in cv.fold_reports.items():
        out.append(f"{name:24} {rep.confusion.total:6d} {rep.micro_f1:7.3f} {rep.macro_f1:7.3f}")
    out += ["", "per depth", f"{'depth':6} {'n':>6} {'micro':>7} {'macro':>7}"]
    for k, (mi, ma, n) in agg.per_depth.items():
        out.append(f"{str(k):6} {n:6d} {mi:7.3f} {ma:7.3f}")
    if "10+" in agg.per_depth:
        out.append("note: depths of 10 and beyond are pooled into one bucket")
    return "\n".join(out) + "\n"


def _fold_stats(fp) -> dict:
    return {k: v for k, v in sorted(fp.stats.items())}


def _write_fold(fold_dir: Path, dataset: RumourDataset, event: str, fp, report: EvalReport) -> None:
    fp.save(fold_dir)
    _write(fold_dir / "confusion.tsv", _tsv(confusion_rows(report)))
    _write(fold_dir / "per_class.tsv", _tsv(per_class_rows(report)))
    _write(fold_dir / "per_depth.tsv", _tsv(per_depth_rows(report)))
    _write(fold_dir / "report.json", _json({**report.to_dict(), "stats": _fold_stats(fp)}))


def _hash_tree(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            out[p.relative_to(root).as_posix()] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunResult:
    config.validate()
    out = Path(out_dir if out_dir is not None else (config.output_dir or ""))
    if not str(out):
        raise ExperimentError("no output directory given")
    out.mkdir(parents=True, exist_ok=True)
    stale = out / "manifest.json"
    if stale.exists():
        # an interrupted rerun must not look complete
        stale.unlink()

    dataset, seeds = resolve_dataset(config)
    fold_seeds = {e: derive_seed(config.seed, "fold", e) for e in dataset.event_names}
    safe = {e: e.replace("/", "_") for e in dataset.event_names}

    def on_fold(event, fp, report):
        _write_fold(out / "folds" / safe[event], dataset, event, fp, report)

    try:
        cv = leave_one_event_out(dataset, config.pipeline_config(), config.seed, on_fold=on_fold)
    except StanceError as exc:
        raise ExperimentError(f"run failed: {exc}") from exc

    agg = cv.aggregate
    _write(out / "class_counts.tsv", _tsv([["event", *[l.tag for l in LABELS], "total"],
                                            *class_count_table(dataset)]))
    _write(out / "confusion.tsv", _tsv(confusion_rows(agg)))
    _write(out / "per_class.tsv", _tsv(per_class_rows(agg)))
    _write(out / "per_depth.tsv", _tsv(per_depth_rows(agg)))
    _write(out / "events.tsv", _tsv(event_rows(cv.fold_reports)))
    pred_rows = [["tweet_id", "event", "depth", "gold", "predicted"]]
    for tree in dataset.trees():
        for t in tree.tweets():
            if t.id in cv.predictions:
                pred_rows.append([t.id, t.event, tree.depth_of(t.id), t.gold_label.tag,
                                  cv.predictions[t.id].tag])
    _write(out / "predictions.tsv", _tsv(pred_rows))
    fingerprint = dataset_fingerprint(dataset)
    report = {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "classifier": config.classifier,
        "dataset_fingerprint": fingerprint,
        "aggregate": agg.to_dict(),
        "folds": [{**rep.to_dict(), "stats": _fold_stats(cv.fitted[e])}
                  for e, rep in cv.fold_reports.items()],
    }
    _write(out / "report.json", _json(report))
    _write(out / "report.txt", text_report(config.classifier, dataset, cv))
    plot_per_depth({config.classifier: agg.per_depth}, out / "figures" / "per_depth.png",
                   title=f"{config.classifier}: F1 by depth")
    plot_confusion(agg.confusion.counts, out / "figures" / "confusion.png", title=config.classifier)

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": FORMAT_VERSION,
        "code_version": __version__,
        "config": config.to_dict(),
        "seed": config.seed,
        "sub_seeds": {**seeds, "folds": fold_seeds},
        "dataset_fingerprint": fingerprint,
        "files": _hash_tree(out),
    }
    tmp = out / "manifest.json.tmp"
    tmp.write_text(_json(manifest), encoding="utf-8")
    os.replace(tmp, out / "manifest.json")
    log.info("run complete: %s (micro %.3f, macro %.3f)", out, agg.micro_f1, agg.macro_f1)
    return RunResult(out, dataset, cv, manifest)


def rerun_from_manifest(manifest_path, out_dir) -> RunResult:
    return run_experiment(load_config(manifest_path), out_dir)


def _load_run(path: Path) -> tuple[dict, dict]:
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise IncompleteRun(f"{path} has no manifest; the run did not finish")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    report = json.loads((path / "report.json").read_text(encoding="utf-8"))
    return manifest, report


def compare_runs(paths: Sequence, out_dir: Optional[str] = None) -> list[dict]:
    """Side-by-side micro/macro and per-class F1 of finished runs on one dataset."""
    if len(paths) < 2:
        raise ExperimentError("compare needs at least two runs")
    runs = [(Path(p), *_load_run(Path(p))) for p in paths]
    fingerprints = {m["dataset_fingerprint"] for _, m, _ in runs}
    if len(fingerprints) != 1:
        raise DatasetMismatch("runs were made on different datasets: "
                              + ", ".join(f"{p}={m['dataset_fingerprint'][:12]}" for p, m, _ in runs))
    names = [r["classifier"] for _, _, r in runs]
    rows = []
    for (path, _, rep), name in zip(runs, names):
        if names.count(name) > 1:
            name = f"{name} ({path.name})"
        agg = rep["aggregate"]
        rows.append({
            "run": name,
            "micro_f1": agg["micro_f1"],
            "macro_f1": agg["macro_f1"],
            **{f"f1_{l.tag}": agg["per_class"][l.tag]["f1"] for l in LABELS},
            "per_depth": {d["depth"]: (d["micro_f1"], d["macro_f1"], d["n"]) for d in agg["per_depth"]},
        })
    if out_dir is not None:
        out = Path(out_dir)
        cols = ["micro_f1", "macro_f1", *[f"f1_{l.tag}" for l in LABELS]]
        _write(out / "comparison.tsv", _tsv([["run", *cols]] + [[r["run"], *[_fmt(r[c]) for c in cols]]
                                                                 for r in rows]))
        _write(out / "comparison.txt", format_comparison(rows))
        series = {r["run"]: {int(k) if k.isdigit() else k: v for k, v in r["per_depth"].items()}
                  for r in rows}
        plot_per_depth(series, out / "per_depth_comparison.png", title="F1 by depth")
    return rows


def format_comparison(rows: list[dict]) -> str:
    width = max(len(r["run"]) for r in rows + [{"run": "run"}])
    head = f"{'run':{width}} {'micro':>7} {'macro':>7}" + "".join(f" {l.short:>6}" for l in LABELS)
    lines = [head]
    for r in rows:
        lines.append(f"{r['run']:{width}} {r['micro_f1']:7.3f} {r['macro_f1']:7.3f}"
                     + "".join(f" {r['f1_' + l.tag]:6.3f}" for l in LABELS))
    return "\n".join(lines) + "\n"
