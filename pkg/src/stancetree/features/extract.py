"""Assemble per-tweet feature vectors in a fixed column layout."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..conversation import Tweet
from .embeddings import EmbeddingProvider, average_embedding
from .pos import PosTagger, RuleTagger, pos_counts
from .text import (
    TokenList,
    content_format_features,
    negation_flag,
    punctuation_features,
    swear_flag,
    tokenize,
    tweet_format_features,
)

FEATURE_GROUPS = (
    "embedding", "pos", "negation", "swear", "content", "punctuation", "tweet_format",
)
BINARY_COLUMNS = frozenset(
    {"negation", "swear", "question", "exclamation", "period", "url", "picture", "is_source"}
)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if self.values.shape != (layout_width(self.layout),):
            raise ValueError("feature values do not match layout width")

    def block(self, name: str) -> np.ndarray:
        start = 0
        for n, w in self.layout:
            if n == name:
                return self.values[start:start + w]
            start += w
        raise KeyError(name)


def layout_width(layout: Iterable[tuple[str, int]]) -> int:
    return sum(w for _, w in layout)


def binary_mask(layout: Sequence[tuple[str, int]]) -> np.ndarray:
    return np.concatenate(
        [np.full(w, name in BINARY_COLUMNS) for name, w in layout]
    ) if layout else np.zeros(0, dtype=bool)


@dataclass
class FeatureExtractor:
    """Holds the fold-level providers; extraction itself is pure."""

    embeddings: Optional[EmbeddingProvider] = None
    tagger: PosTagger = field(default_factory=RuleTagger)
    swear_lexicon: frozenset = frozenset()
    groups: tuple[str, ...] = FEATURE_GROUPS

    def __post_init__(self):
        unknown = set(self.groups) - set(FEATURE_GROUPS)
        if unknown:
            raise ValueError(f"unknown feature groups {sorted(unknown)}")
        if "embedding" in self.groups and self.embeddings is None:
            raise ValueError("embedding group enabled but no embedding provider given")
        self.layout = self._layout()

    def _layout(self) -> tuple[tuple[str, int], ...]:
        out = []
        on = set(self.groups)
        if "embedding" in on:
            out.append(("embedding", self.embeddings.dimension))
        if "pos" in on:
            out.append(("pos", len(self.tagger.tagset)))
        if "negation" in on:
            out.append(("negation", 1))
        if "swear" in on:
            out.append(("swear", 1))
        if "content" in on:
            out += [("length", 1), ("capital_ratio", 1), ("word_count", 1)]
        if "punctuation" in on:
            out += [("question", 1), ("exclamation", 1), ("period", 1)]
        if "tweet_format" in on:
            out += [("url", 1), ("picture", 1), ("is_source", 1)]
        return tuple(out)

    @property
    def width(self) -> int:
        return layout_width(self.layout)

    def extract(self, tweet: Tweet, tokens: Optional[TokenList] = None) -> FeatureVector:
        tokens = tokens if tokens is not None else tokenize(tweet.text)
        on = set(self.groups)
        parts = []
        if "embedding" in on:
            parts.append(average_embedding(tokens, self.embeddings))
        if "pos" in on:
            parts.append(pos_counts(tokens, self.tagger, tweet.id).astype(np.float64))
        if "negation" in on:
            parts.append([negation_flag(tokens)])
        if "swear" in on:
            parts.append([swear_flag(tokens, self.swear_lexicon)])
        if "content" in on:
            parts.append(content_format_features(tweet.text))
        if "punctuation" in on:
            parts.append(punctuation_features(tweet.text))
        if "tweet_format" in on:
            parts.append(tweet_format_features(tweet, tokens))
        values = np.concatenate([np.asarray(p, dtype=np.float64) for p in parts]) if parts \
            else np.zeros(0)
        return FeatureVector(values, self.layout)

    def matrix(self, tweets: Sequence[Tweet]) -> np.ndarray:
        if not tweets:
            return np.zeros((0, self.width))
        return np.vstack([self.extract(t).values for t in tweets])


def extract_features(tweet: Tweet, extractor: FeatureExtractor) -> FeatureVector:
    return extractor.extract(tweet)


@dataclass(frozen=True)
class Standardizer:
    """Z-scores the non-binary columns; binary columns pass through untouched.

    Constant columns are centred but not rescaled.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, binary: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
        std = X.std(axis=0) if len(X) else np.ones(X.shape[1])
        scale = np.where(std > 0, std, 1.0)
        mean = np.where(binary, 0.0, mean)
        scale = np.where(binary, 1.0, scale)
        return cls(mean, scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": [float(x) for x in self.mean], "scale": [float(x) for x in self.scale]}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))
