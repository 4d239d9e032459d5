"""Tokenisation and the hand-crafted local text features."""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from ..conversation import Tweet
from ..errors import StanceError


class LexiconMissing(StanceError, FileNotFoundError):
    pass


NEGATION_WORDS = frozenset(
    """not no nobody nothing none never neither nor nowhere hardly scarcely barely
    don't isn't wasn't shouldn't wouldn't couldn't doesn't""".split()
)

_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})
_URL = re.compile(r"^https?://", re.IGNORECASE)
_PICTURE_PATTERNS = (
    re.compile(r"pic\.twitter\.com/", re.IGNORECASE),
    re.compile(r"/photo/", re.IGNORECASE),
)


def is_url(token: str) -> bool:
    return bool(_URL.match(token))


def _is_edge_char(ch: str) -> bool:
    cat = unicodedata.category(ch)
    return cat[0] in "PS"


def normalize_token(token: str) -> str:
    """Lowercase and strip punctuation/symbols from both ends.

    URLs are only lowercased.  A leading ``@`` or ``#`` survives so mentions and
    hashtags stay distinguishable from plain words.
    """
    if is_url(token):
        return token.lower()
    token = token.translate(_APOSTROPHES).lower()
    start, end = 0, len(token)
    while start < end and _is_edge_char(token[start]) and token[start] not in "@#":
        start += 1
    while end > start and _is_edge_char(token[end - 1]):
        end -= 1
    body = token[start:end]
    if body in ("@", "#"):
        return ""
    return body


@dataclass(frozen=True)
class TokenList:
    tokens: tuple[str, ...]
    normalized: tuple[str, ...]

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def words(self) -> list[str]:
        """Non-empty normalized forms, used for lexicon and embedding lookup."""
        return [w for w in self.normalized if w]


def tokenize(text: str) -> TokenList:
    tokens = tuple(text.split())
    return TokenList(tokens, tuple(normalize_token(t) for t in tokens))


def load_lexicon(path) -> frozenset[str]:
    path = Path(path)
    if not path.is_file():
        raise LexiconMissing(str(path))
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    return frozenset(words)


def default_swear_lexicon() -> frozenset[str]:
    return load_lexicon(Path(__file__).resolve().parent.parent / "data" / "swear_words.txt")


def negation_flag(tokens: TokenList) -> int:
    return int(any(w in NEGATION_WORDS for w in tokens.normalized))


def swear_flag(tokens: TokenList, lexicon: Iterable[str]) -> int:
    lexicon = lexicon if isinstance(lexicon, (set, frozenset)) else set(lexicon)
    return int(any(w in lexicon for w in tokens.normalized if w))


def content_format_features(text: str) -> tuple[int, float, int]:
    """(character length, capital ratio among letters, whitespace token count)."""
    alpha = [c for c in text if c.isalpha()]
    upper = sum(1 for c in alpha if c.isupper())
    ratio = upper / len(alpha) if alpha else 0.0
    return len(text), ratio, len(text.split())


def punctuation_features(text: str) -> tuple[int, int, int]:
    return int("?" in text), int("!" in text), int("." in text)


def tweet_format_features(tweet: Tweet, tokens: Optional[TokenList] = None) -> tuple[int, int, int]:
    """(has URL, has picture, is source)."""
    tokens = tokens if tokens is not None else tokenize(tweet.text)
    urls = [t for t in tokens if is_url(t)]
    if tweet.has_picture_metadata is not None:
        picture = bool(tweet.has_picture_metadata)
    else:
        picture = any(p.search(t) for t in tokens for p in _PICTURE_PATTERNS)
    return int(bool(urls)), int(picture), int(tweet.is_source)
