"""Experiment configuration, stored as JSON.

Relative paths are resolved against the directory of the config file, so a
config (or a run manifest, which embeds one) can be moved with its inputs.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from ..crf import TrainConfig
from ..errors import StanceError
from ..features import EmbeddingConfig
from ..features.extract import FEATURE_GROUPS
from ..pipeline import CLASSIFIERS, PipelineConfig
from .synthetic import SyntheticSpec

CONFIG_FORMAT = "stancetree-experiment"
CONFIG_VERSION = 1
PATH_KEYS = ("dataset", "embeddings", "swear_lexicon", "pos_sidecar", "external_predictions")


class ConfigError(StanceError, ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    classifier: str = "tree_crf"
    dataset: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None
    features: dict = field(default_factory=lambda: {g: True for g in FEATURE_GROUPS})
    embedding_dim: int = 300
    embedding: EmbeddingConfig = EmbeddingConfig()
    trainer: TrainConfig = TrainConfig()
    lambda_grid: tuple = ()
    nb_variance_floor: float = 1e-9
    standardize: bool = True
    drop_orphans: bool = False
    embeddings: Optional[str] = None
    swear_lexicon: Optional[str] = None
    pos_sidecar: Optional[str] = None
    external_predictions: Optional[str] = None
    output_dir: Optional[str] = None

    def validate(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"unknown classifier {self.classifier!r}; choose from {CLASSIFIERS}")
        if (self.dataset is None) == (self.synthetic is None):
            raise ConfigError("give exactly one of 'dataset' and 'synthetic'")
        unknown = set(self.features) - set(FEATURE_GROUPS)
        if unknown:
            raise ConfigError(f"unknown feature groups {sorted(unknown)}")
        if self.classifier == "external" and not self.external_predictions:
            raise ConfigError("classifier 'external' needs 'external_predictions'")
        for key in PATH_KEYS:
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{key}: {p} does not exist")

    def feature_groups(self) -> tuple:
        return tuple(g for g in FEATURE_GROUPS if self.features.get(g, True))

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            classifier=self.classifier,
            feature_groups=self.feature_groups(),
            embedding_dim=self.embedding_dim,
            embedding=self.embedding,
            embeddings_path=self.embeddings,
            swear_lexicon_path=self.swear_lexicon,
            pos_sidecar_path=self.pos_sidecar,
            external_predictions_path=self.external_predictions,
            train=self.trainer,
            lambda_grid=tuple(self.lambda_grid),
            nb_variance_floor=self.nb_variance_floor,
            standardize=self.standardize,
        )

    def to_dict(self) -> dict:
        d = {"format": CONFIG_FORMAT, "version": CONFIG_VERSION}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("embedding", "trainer"):
                v = asdict(v)
            elif f.name == "synthetic":
                v = None if v is None else v.to_dict()
            elif f.name == "lambda_grid":
                v = list(v)
            elif f.name == "features":
                v = dict(v)
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        d = dict(d)
        fmt = d.pop("format", CONFIG_FORMAT)
        ver = d.pop("version", CONFIG_VERSION)
        if fmt != CONFIG_FORMAT or ver != CONFIG_VERSION:
            raise ConfigError(f"unsupported config format {fmt!r} v{ver}")
        if "seed" not in d:
            raise ConfigError("seed is mandatory")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            if "embedding" in d:
                d["embedding"] = EmbeddingConfig(**d["embedding"])
            if "trainer" in d:
                d["trainer"] = TrainConfig(**d["trainer"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if d.get("synthetic") is not None:
            d["synthetic"] = SyntheticSpec.from_dict(d["synthetic"])
        if "lambda_grid" in d:
            d["lambda_grid"] = tuple(float(x) for x in d["lambda_grid"])
        if base_dir is not None:
            for key in PATH_KEYS + ("output_dir",):
                if d.get(key) is not None:
                    d[key] = str((Path(base_dir) / d[key]).resolve())
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg


def load_config(path) -> ExperimentConfig:
    """Read an experiment config; a run manifest is accepted too."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if doc.get("format") == "stancetree-manifest":
        doc = doc["config"]
    return ExperimentConfig.from_dict(doc, base_dir=path.parent)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")
