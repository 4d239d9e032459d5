"""Fold-level training: embeddings, feature scaling and one classifier.

Everything fitted here sees only the training events handed to
:func:`fit_pipeline`; the held-out event is touched only by ``predict``.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .baselines import (
    GaussianNbModel,
    MajorityModel,
    import_external_predictions,
    predict_majority,
    predict_nb,
    save_model_json,
    train_majority,
    train_nb,
)
from .conversation import LABELS, ConversationTree, StanceLabel, extract_branches
from .crf import CrfModel, Instance, Mode, TrainConfig, aggregate_branch_predictions, predict_many, train
from .errors import StanceError
from .features import (
    EmbeddingConfig,
    FeatureExtractor,
    RuleTagger,
    SidecarTagger,
    Standardizer,
    load_embeddings,
    load_lexicon,
    tokenize,
    train_embeddings,
)
from .features.extract import FEATURE_GROUPS, binary_mask
from .features.text import default_swear_lexicon

log = logging.getLogger(__name__)

CLASSIFIERS = ("tree_crf", "linear_crf", "maxent", "majority", "naive_bayes", "external")
CRF_MODES = {"tree_crf": Mode.TREE_CRF, "linear_crf": Mode.LINEAR_CRF, "maxent": Mode.MAXENT}


class PipelineError(StanceError):
    pass


def derive_seed(seed: int, *names: str) -> int:
    """Stable named sub-seed; the same (seed, names) always gives the same value."""
    keys = [seed] + [zlib.crc32(n.encode("utf-8")) for n in names]
    return int(np.random.SeedSequence(keys).generate_state(1)[0])


@dataclass(frozen=True)
class PipelineConfig:
    classifier: str = "tree_crf"
    feature_groups: tuple = FEATURE_GROUPS
    embedding_dim: int = 300
    embedding: EmbeddingConfig = EmbeddingConfig()
    embeddings_path: Optional[str] = None
    swear_lexicon_path: Optional[str] = None
    pos_sidecar_path: Optional[str] = None
    external_predictions_path: Optional[str] = None
    train: TrainConfig = TrainConfig()
    lambda_grid: tuple = ()
    nb_variance_floor: float = 1e-9
    standardize: bool = True

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise PipelineError(f"unknown classifier {self.classifier!r}; choose from {CLASSIFIERS}")
        if self.classifier == "external" and not self.external_predictions_path:
            raise PipelineError("the external classifier needs external_predictions_path")


@dataclass
class FittedPipeline:
    config: PipelineConfig
    extractor: Optional[FeatureExtractor]
    standardizer: Optional[Standardizer]
    model: object
    stats: dict = field(default_factory=dict)

    def features(self, trees: Sequence[ConversationTree]) -> dict[str, np.ndarray]:
        tweets = [t for tree in trees for t in tree.tweets()]
        X = self.extractor.matrix(tweets)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return {t.id: row for t, row in zip(tweets, X)}

    def predict(self, trees: Sequence[ConversationTree], feats=None) -> dict[str, StanceLabel]:
        kind = self.config.classifier
        tweets = [t for tree in trees for t in tree.tweets()]
        if kind == "majority":
            return dict(zip((t.id for t in tweets), predict_majority(self.model, tweets)))
        if kind == "external":
            missing = [t.id for t in tweets if t.id not in self.model]
            if missing:
                raise PipelineError(f"external predictions missing for {len(missing)} tweets")
            return {t.id: self.model[t.id] for t in tweets}
        if feats is None:
            feats = self.features(trees)
        if kind == "naive_bayes":
            X = np.vstack([feats[t.id] for t in tweets]) if tweets else np.zeros((0, 1))
            return dict(zip((t.id for t in tweets), predict_nb(self.model, X)))
        mode = CRF_MODES[kind]
        if mode is Mode.LINEAR_CRF:
            out = {}
            disagreements = 0
            for tree in trees:
                branches = extract_branches(tree)
                insts = [Instance.from_branch(tree, b, feats, labelled=False) for b in branches]
                preds = predict_many(self.model, insts, mode)
                votes, n = aggregate_branch_predictions(
                    [(b, [LABELS[i] for i in y]) for b, y in zip(branches, preds)]
                )
                disagreements += n
                out.update(votes)
            self.stats["branch_disagreements"] = self.stats.get("branch_disagreements", 0) + disagreements
            return out
        insts = [Instance.from_tree(tree, feats, labelled=False) for tree in trees]
        out = {}
        for inst, y in zip(insts, predict_many(self.model, insts, mode)):
            out.update({tid: LABELS[i] for tid, i in zip(inst.ids, y)})
        return out

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if isinstance(self.model, CrfModel):
            self.model.save(directory / "model.json")
        elif isinstance(self.model, (MajorityModel, GaussianNbModel)):
            save_model_json(self.model, directory / "model.json")
        if self.standardizer is not None:
            save_model_json(self.standardizer, directory / "standardizer.json")


def _crf_instances(trees, feats, mode: Mode) -> list[Instance]:
    if mode is Mode.LINEAR_CRF:
        return [Instance.from_branch(tree, b, feats) for tree in trees for b in extract_branches(tree)]
    return [Instance.from_tree(tree, feats) for tree in trees]


def _check_labels(trees):
    for tree in trees:
        for t in tree.tweets():
            if t.gold_label is None:
                raise PipelineError(f"training tweet {t.id!r} has no gold label")


def build_extractor(config: PipelineConfig, train_trees, seed: int) -> FeatureExtractor:
    embeddings = None
    if "embedding" in config.feature_groups:
        if config.embeddings_path:
            embeddings = load_embeddings(config.embeddings_path)
        else:
            corpus = [tokenize(t.text) for tree in train_trees for t in tree.tweets()]
            emb_cfg = replace(config.embedding, seed=derive_seed(seed, "embedding"))
            embeddings = train_embeddings(corpus, config.embedding_dim, emb_cfg)
    tagger = SidecarTagger.from_file(config.pos_sidecar_path) if config.pos_sidecar_path else RuleTagger()
    lexicon = load_lexicon(config.swear_lexicon_path) if config.swear_lexicon_path \
        else default_swear_lexicon()
    return FeatureExtractor(embeddings, tagger, lexicon, tuple(config.feature_groups))


def _fit_classifier(config: PipelineConfig, trees, feats, train_cfg: TrainConfig, layout):
    kind = config.classifier
    tweets = [t for tree in trees for t in tree.tweets()]
    if kind == "naive_bayes":
        X = np.vstack([feats[t.id] for t in tweets])
        return train_nb(X, [t.gold_label for t in tweets], config.nb_variance_floor)
    mode = CRF_MODES[kind]
    return train(_crf_instances(trees, feats, mode), train_cfg, mode, feature_layout=layout)


def _select_lambda(config, train_events, feats, train_cfg, layout) -> float:
    """Inner leave-one-event-out over the training events; best pooled macro-F1 wins."""
    from .evaluation import confusion, micro_macro

    names = sorted(train_events)
    best = None
    for lam in config.lambda_grid:
        cfg = replace(train_cfg, lam=float(lam))
        gold, pred = [], []
        for held in names:
            inner = [tree for n in names if n != held for tree in train_events[n]]
            model = _fit_classifier(config, inner, feats, cfg, layout)
            fp = FittedPipeline(config, None, None, model)
            held_trees = list(train_events[held])
            p = fp.predict(held_trees, feats)
            for tree in held_trees:
                for t in tree.tweets():
                    gold.append(t.gold_label)
                    pred.append(p[t.id])
        macro = micro_macro(confusion(gold, pred))[1]
        log.info("inner CV: lambda=%g macro-F1=%.4f", lam, macro)
        if best is None or macro > best[1]:
            best = (float(lam), macro)
    return best[0]


def fit_pipeline(
    train_events: Mapping[str, Sequence[ConversationTree]], config: PipelineConfig, seed: int
) -> FittedPipeline:
    trees = [tree for name in sorted(train_events) for tree in train_events[name]]
    if not trees:
        raise PipelineError("no training conversations")
    if config.classifier == "external":
        return FittedPipeline(config, None, None,
                              import_external_predictions(config.external_predictions_path))
    _check_labels(trees)
    if config.classifier == "majority":
        return FittedPipeline(config, None, None,
                              train_majority(t.gold_label for tree in trees for t in tree.tweets()))

    extractor = build_extractor(config, trees, seed)
    tweets = [t for tree in trees for t in tree.tweets()]
    X = extractor.matrix(tweets)
    standardizer = Standardizer.fit(X, binary_mask(extractor.layout)) if config.standardize else None
    if standardizer is not None:
        X = standardizer.transform(X)
    feats = {t.id: row for t, row in zip(tweets, X)}

    train_cfg = replace(config.train, seed=derive_seed(seed, "train"))
    stats = {}
    if config.lambda_grid and config.classifier in CRF_MODES and len(train_events) >= 2:
        lam = _select_lambda(config, train_events, feats, train_cfg, extractor.layout)
        train_cfg = replace(train_cfg, lam=lam)
        stats["selected_lambda"] = lam
    model = _fit_classifier(config, trees, feats, train_cfg, extractor.layout)
    return FittedPipeline(config, extractor, standardizer, model, stats)
