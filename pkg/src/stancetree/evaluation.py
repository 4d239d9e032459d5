"""Scoring and the leave-one-event-out protocol."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .conversation import LABELS, N_LABELS, RumourDataset, StanceLabel
from .errors import StanceError

log = logging.getLogger(__name__)

MAX_DEPTH_BUCKET = 10  # depths >= 10 share one "10+" bucket


class EvaluationError(StanceError):
    pass


class LengthMismatch(EvaluationError, ValueError):
    pass


class MissingPrediction(EvaluationError, KeyError):
    pass


class EmptyMatrix(EvaluationError, ValueError):
    pass


class FoldError(EvaluationError):
    pass


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # rows gold, columns predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def row_percentages(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = np.where(rows > 0, 100.0 * self.counts / np.maximum(rows, 1), 0.0)
        return pct


Labels = Union[Sequence[StanceLabel], Mapping[str, StanceLabel]]


def _align(gold: Labels, pred: Labels):
    if isinstance(gold, Mapping):
        if not isinstance(pred, Mapping):
            raise TypeError("gold is keyed by tweet id, so predictions must be too")
        missing = [k for k in gold if k not in pred]
        if missing:
            raise MissingPrediction(f"no prediction for {len(missing)} tweets, e.g. {missing[:3]}")
        keys = list(gold)
        return [gold[k] for k in keys], [pred[k] for k in keys]
    gold, pred = list(gold), list(pred)
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold labels vs {len(pred)} predictions")
    return gold, pred


def confusion(gold: Labels, pred: Labels) -> ConfusionMatrix:
    g, p = _align(gold, pred)
    counts = np.zeros((N_LABELS, N_LABELS), dtype=np.int64)
    if g:
        np.add.at(counts, (np.asarray(g, dtype=np.int64), np.asarray(p, dtype=np.int64)), 1)
    return ConfusionMatrix(counts)


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    """(L, 3) array of precision, recall, F1; every 0/0 is taken as 0."""
    c = cm.counts.astype(np.float64)
    tp = np.diag(c)
    pred_tot, gold_tot = c.sum(axis=0), c.sum(axis=1)
    prec = np.divide(tp, pred_tot, out=np.zeros_like(tp), where=pred_tot > 0)
    rec = np.divide(tp, gold_tot, out=np.zeros_like(tp), where=gold_tot > 0)
    denom = prec + rec
    f1 = np.divide(2 * prec * rec, denom, out=np.zeros_like(tp), where=denom > 0)
    return np.column_stack([prec, rec, f1])


def micro_macro(cm: ConfusionMatrix) -> tuple[float, float]:
    if cm.total == 0:
        raise EmptyMatrix("no scored tweets")
    micro = float(np.trace(cm.counts)) / cm.total
    macro = float(per_class_f1(cm)[:, 2].mean())
    return micro, macro


def depth_bucket(depth: int):
    return depth if depth < MAX_DEPTH_BUCKET else f"{MAX_DEPTH_BUCKET}+"


def _bucket_order(key):
    return key if isinstance(key, int) else MAX_DEPTH_BUCKET


def per_depth_breakdown(gold: Labels, pred: Labels, depths) -> dict:
    """{depth bucket: (micro, macro, n)} for non-empty buckets, shallowest first."""
    g, p = _align(gold, pred)
    if isinstance(gold, Mapping):
        d = [depths[k] for k in gold]
    else:
        d = list(depths)
        if len(d) != len(g):
            raise LengthMismatch("depths are not aligned with labels")
    groups: dict = {}
    for gi, pi, di in zip(g, p, d):
        groups.setdefault(depth_bucket(di), ([], []))
        groups[depth_bucket(di)][0].append(gi)
        groups[depth_bucket(di)][1].append(pi)
    out = {}
    for key in sorted(groups, key=_bucket_order):
        cm = confusion(*groups[key])
        out[key] = (*micro_macro(cm), cm.total)
    return out


@dataclass(frozen=True, eq=False)
class EvalReport:
    confusion: ConfusionMatrix
    per_class: np.ndarray
    micro_f1: float
    macro_f1: float
    per_depth: dict
    fold_id: Optional[str] = None

    @classmethod
    def from_predictions(cls, gold: Labels, pred: Labels, depths=None, fold_id=None) -> "EvalReport":
        cm = confusion(gold, pred)
        micro, macro = micro_macro(cm)
        per_depth = per_depth_breakdown(gold, pred, depths) if depths is not None else {}
        return cls(cm, per_class_f1(cm), micro, macro, per_depth, fold_id)

    def to_dict(self) -> dict:
        return {
            "fold": self.fold_id,
            "n": self.confusion.total,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "label_order": [l.tag for l in LABELS],
            "confusion": self.confusion.counts.tolist(),
            "per_class": {
                l.tag: {"precision": float(p), "recall": float(r), "f1": float(f)}
                for l, (p, r, f) in zip(LABELS, self.per_class)
            },
            "per_depth": [
                {"depth": str(k), "micro_f1": mi, "macro_f1": ma, "n": n}
                for k, (mi, ma, n) in self.per_depth.items()
            ],
        }


@dataclass
class CrossValidationResult:
    fold_reports: dict  # event -> EvalReport
    aggregate: EvalReport
    predictions: dict  # tweet id -> StanceLabel
    fitted: dict = field(default_factory=dict)  # event -> FittedPipeline

    def __iter__(self):
        # allows ``folds, aggregate = leave_one_event_out(...)``
        return iter((self.fold_reports, self.aggregate))


def leave_one_event_out(
    dataset: RumourDataset,
    pipeline_config,
    seed: int = 0,
    on_fold: Optional[Callable] = None,
) -> CrossValidationResult:
    """Hold out each event in turn, train on the rest, pool all predictions.

    The aggregate report is computed from one confusion matrix over every
    held-out tweet of every fold.  ``on_fold(event, fitted, report)`` is called
    after each fold, in event-name order.
    """
    from .pipeline import derive_seed, fit_pipeline

    names = dataset.event_names
    if len(names) < 2:
        raise EvaluationError("leave-one-event-out needs at least two events")
    gold, pred, depths = {}, {}, {}
    reports, fitted = {}, {}
    for held in names:
        train_events = {n: dataset.events[n] for n in names if n != held}
        test_trees = list(dataset.events[held])
        try:
            fp = fit_pipeline(train_events, pipeline_config, derive_seed(seed, "fold", held))
            fold_pred = fp.predict(test_trees)
        except StanceError as exc:
            raise FoldError(f"fold {held!r}: {exc}") from exc
        fg, fd = {}, {}
        for tree in test_trees:
            for t in tree.tweets():
                if t.gold_label is None:
                    continue
                fg[t.id] = t.gold_label
                fd[t.id] = tree.depth_of(t.id)
        report = EvalReport.from_predictions(fg, fold_pred, fd, fold_id=held)
        log.info("fold %s: n=%d micro=%.3f macro=%.3f", held, report.confusion.total,
                 report.micro_f1, report.macro_f1)
        gold.update(fg)
        depths.update(fd)
        pred.update({k: fold_pred[k] for k in fg})
        reports[held] = report
        fitted[held] = fp
        if on_fold is not None:
            on_fold(held, fp, report)
    aggregate = EvalReport.from_predictions(gold, pred, depths, fold_id=None)
    return CrossValidationResult(reports, aggregate, pred, fitted)
