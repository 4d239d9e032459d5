"""Skip-gram word embeddings trained with negative sampling, plus text-format I/O."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..errors import StanceError
from .text import TokenList

log = logging.getLogger(__name__)


class EmbeddingError(StanceError):
    pass


class EmptyCorpus(EmbeddingError):
    pass


class MalformedLine(EmbeddingError):
    pass


class InconsistentDimension(EmbeddingError):
    pass


@dataclass(frozen=True)
class EmbeddingConfig:
    window: int = 5
    negative: int = 5
    epochs: int = 5
    min_count: int = 2
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    batch_size: int = 32
    unigram_power: float = 0.75
    seed: int = 0


class EmbeddingProvider:
    """Read-only word -> vector lookup with a fixed dimension."""

    def __init__(self, words: Sequence[str], matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise InconsistentDimension(
                f"matrix shape {matrix.shape} does not match {len(words)} words"
            )
        if matrix.shape[1] < 1:
            raise InconsistentDimension("dimension must be positive")
        self.words = tuple(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise EmbeddingError("duplicate words in embedding vocabulary")
        self.matrix = matrix
        self.matrix.setflags(write=False)

    @classmethod
    def from_mapping(cls, vectors: Mapping[str, Sequence[float]], dimension: Optional[int] = None):
        words = list(vectors)
        if not words:
            if dimension is None:
                raise EmbeddingError("empty mapping needs an explicit dimension")
            return cls([], np.zeros((0, dimension)))
        rows = [np.asarray(vectors[w], dtype=np.float64) for w in words]
        dim = dimension if dimension is not None else len(rows[0])
        for w, r in zip(words, rows):
            if r.shape != (dim,):
                raise InconsistentDimension(f"vector for {w!r} has shape {r.shape}, expected ({dim},)")
        return cls(words, np.vstack(rows))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def get(self, word: str) -> Optional[np.ndarray]:
        i = self.index.get(word)
        return None if i is None else self.matrix[i]

    def cosine(self, a: str, b: str) -> float:
        va, vb = self.get(a), self.get(b)
        if va is None or vb is None:
            raise KeyError(a if va is None else b)
        return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb) + 1e-300))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for w, row in zip(self.words, self.matrix):
                fh.write(w + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_embeddings(path) -> EmbeddingProvider:
    words, rows = [], []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip("\r").split(" ")
            if not line.strip():
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue  # word2vec "count dim" header
            word, values = parts[0], parts[1:]
            if not word or not values:
                raise MalformedLine(f"{path}:{lineno}: expected 'word float ...'")
            try:
                row = [float(v) for v in values]
            except ValueError:
                raise MalformedLine(f"{path}:{lineno}: non-numeric vector entry") from None
            if dim is None:
                dim = len(row)
            elif len(row) != dim:
                raise InconsistentDimension(f"{path}:{lineno}: {len(row)} floats, expected {dim}")
            words.append(word)
            rows.append(row)
    if dim is None:
        raise MalformedLine(f"{path}: no vectors")
    return EmbeddingProvider(words, np.asarray(rows, dtype=np.float64))


def average_embedding(tokens: TokenList, provider: EmbeddingProvider) -> np.ndarray:
    hits = [provider.index[w] for w in tokens.words() if w in provider.index]
    if not hits:
        return np.zeros(provider.dimension)
    return provider.matrix[hits].mean(axis=0)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def train_embeddings(
    corpus: Iterable[TokenList], dimension: int = 300, config: EmbeddingConfig = EmbeddingConfig()
) -> EmbeddingProvider:
    """Skip-gram with negative sampling over normalized tokens.

    Minibatch SGD with a linearly decayed learning rate.  Results are
    bit-identical for a fixed ``config.seed``.
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    sentences = [tl.words() for tl in corpus]
    counts = Counter(w for s in sentences for w in s)
    if not counts:
        raise EmptyCorpus("no tokens to train on")
    vocab = sorted((w for w, c in counts.items() if c >= config.min_count),
                   key=lambda w: (-counts[w], w))
    rng = np.random.default_rng(config.seed)
    if not vocab:
        log.warning("no word reaches min_count=%d; embedding vocabulary is empty", config.min_count)
        return EmbeddingProvider([], np.zeros((0, dimension)))
    index = {w: i for i, w in enumerate(vocab)}

    centers, contexts = [], []
    for s in sentences:
        ids = [index[w] for w in s if w in index]
        for i, c in enumerate(ids):
            lo, hi = max(0, i - config.window), min(len(ids), i + config.window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(c)
                    contexts.append(ids[j])
    centers = np.asarray(centers, dtype=np.int64)
    contexts = np.asarray(contexts, dtype=np.int64)

    n_words = len(vocab)
    w_in = (rng.random((n_words, dimension)) - 0.5) / dimension
    w_out = np.zeros((n_words, dimension))
    freq = np.array([counts[w] for w in vocab], dtype=np.float64) ** config.unigram_power
    noise = np.cumsum(freq / freq.sum())
    noise[-1] = 1.0

    n_pairs = len(centers)
    total = max(1, n_pairs * config.epochs)
    done = 0
    bs = config.batch_size
    for _ in range(config.epochs):
        order = rng.permutation(n_pairs)
        for start in range(0, n_pairs, bs):
            batch = order[start:start + bs]
            lr = max(config.min_learning_rate, config.learning_rate * (1.0 - done / total))
            done += len(batch)
            c, o = centers[batch], contexts[batch]
            negs = np.searchsorted(noise, rng.random((len(batch), config.negative)), side="right")
            v = w_in[c]
            u_pos = w_out[o]
            u_neg = w_out[negs]
            g_pos = (1.0 - _sigmoid(np.einsum("bd,bd->b", v, u_pos))) * lr
            g_neg = -_sigmoid(np.einsum("bd,bkd->bk", v, u_neg)) * lr
            dv = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            np.add.at(w_out, o, g_pos[:, None] * v)
            np.add.at(w_out, negs, g_neg[:, :, None] * v[:, None, :])
            np.add.at(w_in, c, dv)
    return EmbeddingProvider(vocab, w_in)
