"""Part-of-speech taggers producing per-tweet tag counts.

The default tagger is a small deterministic rule/lexicon tagger.  An external
tagger's output can be supplied through a sidecar file instead.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from ..errors import StanceError
from .text import TokenList, is_url


class TaggingError(StanceError):
    pass


class PosTagger(Protocol):
    tagset: tuple[str, ...]

    def tag(self, tokens: TokenList, tweet_id: Optional[str] = None) -> list[str]:
        ...


DEFAULT_TAGSET = (
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET",
    "PREP", "CONJ", "MENTION", "HASHTAG", "URL", "OTHER",
)

_PRON = set("""i me my mine myself you your yours yourself yourselves he him his himself
she her hers herself it its itself we us our ours ourselves they them their theirs
themselves who whom whose what which someone somebody anyone anybody everyone
everybody something anything everything nobody nothing none i'm i've i'll i'd you're
you've you'll he's she's it's we're we've they're they've that's there's""".split())
_DET = set("""a an the this that these those each every some any no another either neither
all both few many much several such""".split())
_PREP = set("""of in on at by for with about against between into through during before after
above below to from up down over under again further off out around near via than
without within along across behind beyond toward towards upon amid""".split())
_CONJ = set("and or but nor so yet because although though while if unless whereas whether".split())
_ADV = set("""not never very really just also too still already now then here there soon
always often sometimes apparently actually maybe perhaps hopefully probably definitely
only even again ever quite almost rather well ok okay yes yeah""".split())
_VERB = set("""is am are was were be been being do does did done doing have has had having
will would shall should can could may might must isn't wasn't aren't weren't don't
doesn't didn't won't wouldn't shouldn't couldn't can't cannot get got say said says
know think believe take taken took make made see saw seen go went gone come came
confirm confirmed report reported reports tell told want need look looks""".split())
_ADJ = set("""good bad new old true false real fake big small great sure sad sorry right wrong
possible likely unlikely official breaking live dead safe""".split())
_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "less", "ical", "ish")
_VERB_SUFFIXES = ("ing", "ed", "ize", "ise")


def _rule_tag(raw: str, word: str) -> str:
    if raw.startswith("@") and len(raw) > 1:
        return "MENTION"
    if raw.startswith("#") and len(raw) > 1:
        return "HASHTAG"
    if is_url(raw) or raw.lower().startswith("pic.twitter.com"):
        return "URL"
    if not word or not any(c.isalpha() for c in word):
        return "OTHER"
    for lex, tag in ((_PRON, "PRON"), (_DET, "DET"), (_PREP, "PREP"), (_CONJ, "CONJ"),
                     (_VERB, "VERB"), (_ADV, "ADV"), (_ADJ, "ADJ")):
        if word in lex:
            return tag
    if len(word) > 4 and word.endswith("ly"):
        return "ADV"
    if len(word) > 5 and word.endswith(_ADJ_SUFFIXES):
        return "ADJ"
    if len(word) > 4 and word.endswith(_VERB_SUFFIXES):
        return "VERB"
    return "NOUN"


class RuleTagger:
    tagset = DEFAULT_TAGSET

    def tag(self, tokens: TokenList, tweet_id: Optional[str] = None) -> list[str]:
        return [_rule_tag(raw, word) for raw, word in zip(tokens.tokens, tokens.normalized)]


class SidecarTagger:
    """Tags read from a file of ``id<TAB>tag tag ...`` lines, one per tweet."""

    def __init__(self, tags_by_id: dict[str, list[str]], tagset: Optional[Sequence[str]] = None):
        if tagset is None:
            tagset = sorted({t for tags in tags_by_id.values() for t in tags})
        self.tagset = tuple(tagset)
        known = set(self.tagset)
        for tid, tags in tags_by_id.items():
            bad = [t for t in tags if t not in known]
            if bad:
                raise TaggingError(f"tweet {tid}: tags {bad} not in tagset")
        self._tags = tags_by_id

    @classmethod
    def from_file(cls, path, tagset: Optional[Sequence[str]] = None) -> "SidecarTagger":
        tags_by_id = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            tid, _, rest = line.partition("\t")
            if not tid:
                raise TaggingError(f"{path}:{lineno}: missing tweet id")
            tags_by_id[tid] = rest.split()
        return cls(tags_by_id, tagset)

    def tag(self, tokens: TokenList, tweet_id: Optional[str] = None) -> list[str]:
        if tweet_id is None or tweet_id not in self._tags:
            raise TaggingError(f"no sidecar tags for tweet {tweet_id!r}")
        tags = self._tags[tweet_id]
        if len(tags) != len(tokens):
            raise TaggingError(
                f"tweet {tweet_id}: {len(tags)} tags for {len(tokens)} tokens"
            )
        return list(tags)


def pos_counts(tokens: TokenList, tagger: PosTagger, tweet_id: Optional[str] = None) -> np.ndarray:
    index = {t: i for i, t in enumerate(tagger.tagset)}
    counts = np.zeros(len(tagger.tagset), dtype=np.int64)
    for tag in tagger.tag(tokens, tweet_id):
        counts[index[tag]] += 1
    return counts
