"""Non-sequential baselines: majority class, Gaussian naive Bayes, and a
reader for predictions produced by external systems."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .conversation import LABELS, N_LABELS, StanceLabel
from .errors import StanceError


class EmptyTrainingSet(StanceError, ValueError):
    pass


class UnknownLabel(StanceError, ValueError):
    pass


class MissingTweetId(StanceError, KeyError):
    pass


@dataclass(frozen=True)
class MajorityModel:
    label: StanceLabel

    def to_dict(self) -> dict:
        return {"format": "stancetree-majority", "version": 1, "label": self.label.tag}


def train_majority(labels: Iterable[StanceLabel]) -> MajorityModel:
    counts = np.bincount([int(l) for l in labels], minlength=N_LABELS)
    if counts.sum() == 0:
        raise EmptyTrainingSet("majority baseline needs at least one label")
    return MajorityModel(LABELS[int(counts.argmax())])


def predict_majority(model: MajorityModel, n_or_items) -> list[StanceLabel]:
    n = n_or_items if isinstance(n_or_items, int) else len(n_or_items)
    return [model.label] * n


@dataclass(frozen=True, eq=False)
class GaussianNbModel:
    class_priors: np.ndarray  # (L,)
    means: np.ndarray  # (L, F)
    variances: np.ndarray  # (L, F)
    variance_floor: float = 1e-9

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        with np.errstate(divide="ignore"):
            log_prior = np.log(self.class_priors)
        out = np.empty((len(X), len(self.class_priors)))
        for k in range(len(self.class_priors)):
            var = self.variances[k]
            ll = -0.5 * (np.log(2 * np.pi * var) + (X - self.means[k]) ** 2 / var).sum(axis=1)
            out[:, k] = log_prior[k] + ll
        return out

    def to_dict(self) -> dict:
        return {
            "format": "stancetree-gaussian-nb",
            "version": 1,
            "class_priors": self.class_priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "variance_floor": self.variance_floor,
        }


def train_nb(X: np.ndarray, labels: Sequence[StanceLabel], variance_floor: float = 1e-9) -> GaussianNbModel:
    """Per-class Gaussian fit of every feature column.

    Priors are maximum likelihood when all four classes occur; otherwise add-one
    smoothing is applied to the class counts, and an absent class gets a
    standard-normal likelihood per column.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray([int(l) for l in labels], dtype=np.int64)
    if len(y) == 0:
        raise EmptyTrainingSet("naive Bayes needs at least one example")
    if len(X) != len(y):
        raise ValueError("features and labels differ in length")
    counts = np.bincount(y, minlength=N_LABELS).astype(np.float64)
    smooth = 1.0 if np.any(counts == 0) else 0.0
    priors = (counts + smooth) / (counts.sum() + smooth * N_LABELS)
    F = X.shape[1]
    means = np.zeros((N_LABELS, F))
    variances = np.ones((N_LABELS, F))
    for k in range(N_LABELS):
        rows = X[y == k]
        if len(rows):
            means[k] = rows.mean(axis=0)
            variances[k] = rows.var(axis=0)
    variances = np.maximum(variances, variance_floor)
    return GaussianNbModel(priors, means, variances, variance_floor)


def predict_nb(model: GaussianNbModel, X: np.ndarray) -> list[StanceLabel]:
    if len(X) == 0:
        return []
    return [LABELS[i] for i in model.joint_log_likelihood(X).argmax(axis=1)]


_TAGS = {l.tag: l for l in LABELS}


def import_external_predictions(path, expected_ids: Optional[Iterable[str]] = None) -> dict[str, StanceLabel]:
    """Read ``tweet_id<TAB>label`` lines (labels: support/deny/query/comment)."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\r").split("\t")
        if len(parts) != 2 or not parts[0]:
            raise UnknownLabel(f"{path}:{lineno}: expected 'tweet_id<TAB>label'")
        tid, label = parts
        if label not in _TAGS:
            raise UnknownLabel(f"{path}:{lineno}: unknown label {label!r}")
        out[tid] = _TAGS[label]
    if expected_ids is not None:
        missing = [i for i in expected_ids if i not in out]
        if missing:
            raise MissingTweetId(f"{len(missing)} tweets lack predictions, e.g. {missing[:3]}")
    return out


def save_model_json(model, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")
