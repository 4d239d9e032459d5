"""Conversation threads as rooted reply trees.

A thread is built from a flat list of tweets linked by ``parent_id``.  Siblings
are ordered by a numeric-aware sort of their ids so that traversal order (and
everything computed from it downstream) is deterministic.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .errors import StanceError


class ConversationError(StanceError):
    pass


class NoRoot(ConversationError):
    pass


class MultipleRoots(ConversationError):
    pass


class OrphanReply(ConversationError):
    pass


class CycleDetected(ConversationError):
    pass


class UnknownId(ConversationError, KeyError):
    pass


class DuplicateId(ConversationError):
    pass


class IllegalCombination(ConversationError):
    pass


class StanceLabel(enum.IntEnum):
    """The four stance classes.  The integer value is the fixed index used
    for weight matrices, confusion matrices and tie-breaking."""

    SUPPORTING = 0
    DENYING = 1
    QUERYING = 2
    COMMENTING = 3

    @property
    def tag(self) -> str:
        return _LABEL_TAGS[self]

    @property
    def short(self) -> str:
        return self.name[0]

    @classmethod
    def parse(cls, text: str) -> "StanceLabel":
        key = text.strip().lower()
        try:
            return _TAG_LOOKUP[key]
        except KeyError:
            raise ValueError(f"unknown stance label {text!r}") from None


_LABEL_TAGS = {
    StanceLabel.SUPPORTING: "support",
    StanceLabel.DENYING: "deny",
    StanceLabel.QUERYING: "query",
    StanceLabel.COMMENTING: "comment",
}
_TAG_LOOKUP = {}
for _lab, _tag in _LABEL_TAGS.items():
    _TAG_LOOKUP[_tag] = _lab
    _TAG_LOOKUP[_lab.name.lower()] = _lab
    _TAG_LOOKUP[_lab.short.lower()] = _lab

LABELS: tuple[StanceLabel, ...] = tuple(StanceLabel)
N_LABELS = len(LABELS)


class RawAnnotation(enum.Enum):
    """Pairwise annotation scheme of the original crowdsourced release."""

    SOURCE_SUPPORTING = "source-supporting"
    SOURCE_DENYING = "source-denying"
    AGREED = "agreed"
    DISAGREED = "disagreed"
    APPEAL_FOR_MORE_INFO = "appeal-for-more-information"
    COMMENT = "comment"

    @property
    def is_source_kind(self) -> bool:
        return self in (RawAnnotation.SOURCE_SUPPORTING, RawAnnotation.SOURCE_DENYING)


@dataclass(frozen=True)
class Tweet:
    id: str
    text: str = ""
    parent_id: Optional[str] = None
    event: str = ""
    raw_annotation: Optional[RawAnnotation] = None
    gold_label: Optional[StanceLabel] = None
    has_picture_metadata: Optional[bool] = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("tweet id must be non-empty")
        if self.parent_id is not None and self.parent_id == self.id:
            raise CycleDetected(f"tweet {self.id!r} replies to itself")

    @property
    def is_source(self) -> bool:
        return self.parent_id is None


_DIGITS = re.compile(r"(\d+)")


def id_sort_key(tweet_id: str):
    """Numeric-aware ordering: ``u2 < u10`` and ``99 < 100``."""
    parts = _DIGITS.split(tweet_id)
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in parts if p)


@dataclass(frozen=True)
class Branch:
    path: tuple[str, ...]

    def __len__(self):
        return len(self.path)

    def __iter__(self):
        return iter(self.path)


@dataclass(frozen=True, eq=False)
class ConversationTree:
    root: Tweet
    children: Mapping[str, tuple[Tweet, ...]]
    _nodes: Mapping[str, Tweet] = field(repr=False)
    _depth: Mapping[str, int] = field(repr=False)

    def __len__(self):
        return len(self._nodes)

    def __contains__(self, tweet_id):
        return tweet_id in self._nodes

    def __getitem__(self, tweet_id: str) -> Tweet:
        try:
            return self._nodes[tweet_id]
        except KeyError:
            raise UnknownId(tweet_id) from None

    def __eq__(self, other):
        if not isinstance(other, ConversationTree):
            return NotImplemented
        return self.tweets() == other.tweets()

    def __hash__(self):
        return hash(tuple(t.id for t in self.tweets()))

    @property
    def id(self) -> str:
        return self.root.id

    @property
    def event(self) -> str:
        return self.root.event

    def children_of(self, tweet_id: str) -> tuple[Tweet, ...]:
        return self.children.get(tweet_id, ())

    def tweets(self) -> list[Tweet]:
        """All tweets in depth-first preorder (parents precede children)."""
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(reversed(self.children_of(node.id)))
        return out

    def depth_of(self, tweet_id: str) -> int:
        try:
            return self._depth[tweet_id]
        except KeyError:
            raise UnknownId(tweet_id) from None

    def parent_indices(self) -> list[int]:
        """Parent position of each tweet in :meth:`tweets` order, -1 for the root."""
        order = self.tweets()
        pos = {t.id: i for i, t in enumerate(order)}
        return [-1 if t.parent_id is None else pos[t.parent_id] for t in order]

    def leaves(self) -> list[Tweet]:
        return [t for t in self.tweets() if not self.children_of(t.id)]

    def edges(self) -> Iterator[tuple[str, str]]:
        for t in self.tweets():
            if t.parent_id is not None:
                yield t.parent_id, t.id


def build_tree(tweets: Iterable[Tweet]) -> ConversationTree:
    tweets = list(tweets)
    if not tweets:
        raise NoRoot("cannot build a tree from zero tweets")
    nodes: dict[str, Tweet] = {}
    for t in tweets:
        if t.id in nodes:
            raise DuplicateId(t.id)
        nodes[t.id] = t
    roots = [t for t in tweets if t.parent_id is None]
    if not roots:
        raise NoRoot(f"no source tweet among {len(tweets)} tweets")
    if len(roots) > 1:
        raise MultipleRoots(", ".join(sorted(r.id for r in roots)))
    kids: dict[str, list[Tweet]] = {}
    for t in tweets:
        if t.parent_id is None:
            continue
        if t.parent_id not in nodes:
            raise OrphanReply(f"{t.id!r} replies to missing {t.parent_id!r}")
        kids.setdefault(t.parent_id, []).append(t)
    children = {
        pid: tuple(sorted(c, key=lambda t: id_sort_key(t.id)))
        for pid, c in kids.items()
    }
    root = roots[0]
    depth = {root.id: 0}
    stack = [root]
    while stack:
        node = stack.pop()
        for c in children.get(node.id, ()):
            depth[c.id] = depth[node.id] + 1
            stack.append(c)
    if len(depth) != len(nodes):
        unreached = sorted(set(nodes) - set(depth), key=id_sort_key)
        raise CycleDetected(f"tweets not reachable from root: {unreached[:5]}")
    return ConversationTree(
        root=root,
        children=MappingProxyType(children),
        _nodes=MappingProxyType(nodes),
        _depth=MappingProxyType(depth),
    )


def depth_of(tree: ConversationTree, tweet_id: str) -> int:
    return tree.depth_of(tweet_id)


def extract_branches(tree: ConversationTree) -> list[Branch]:
    """One root-to-leaf path per leaf, in depth-first order.

    Tweets near the root are repeated in every branch that passes through them.
    """
    branches = []
    stack = [(tree.root, (tree.root.id,))]
    while stack:
        node, path = stack.pop()
        kids = tree.children_of(node.id)
        if not kids:
            branches.append(Branch(path))
        for c in reversed(kids):
            stack.append((c, path + (c.id,)))
    return branches


def convert_annotation(
    source_annotation: RawAnnotation, reply_annotation: Optional[RawAnnotation] = None
) -> StanceLabel:
    """Map the pairwise scheme onto stance towards the rumour itself."""
    if not source_annotation.is_source_kind:
        raise IllegalCombination(f"{source_annotation.value} is not a source annotation")
    supporting_source = source_annotation is RawAnnotation.SOURCE_SUPPORTING
    if reply_annotation is None:
        return StanceLabel.SUPPORTING if supporting_source else StanceLabel.DENYING
    if reply_annotation.is_source_kind:
        raise IllegalCombination(f"{reply_annotation.value} on a reply")
    if reply_annotation is RawAnnotation.APPEAL_FOR_MORE_INFO:
        return StanceLabel.QUERYING
    if reply_annotation is RawAnnotation.COMMENT:
        return StanceLabel.COMMENTING
    agrees = reply_annotation is RawAnnotation.AGREED
    if agrees == supporting_source:
        return StanceLabel.SUPPORTING
    return StanceLabel.DENYING


@dataclass(frozen=True)
class RumourDataset:
    events: Mapping[str, tuple[ConversationTree, ...]]

    def __post_init__(self):
        seen = set()
        for name, trees in self.events.items():
            for tree in trees:
                for t in tree.tweets():
                    if t.event != name:
                        raise ValueError(
                            f"tweet {t.id!r} has event {t.event!r} but sits in {name!r}"
                        )
                    if t.id in seen:
                        raise DuplicateId(t.id)
                    seen.add(t.id)

    @classmethod
    def from_trees(cls, trees: Iterable[ConversationTree]) -> "RumourDataset":
        events: dict[str, list[ConversationTree]] = {}
        for tree in trees:
            events.setdefault(tree.event, []).append(tree)
        return cls({k: tuple(v) for k, v in sorted(events.items())})

    @property
    def event_names(self) -> list[str]:
        return sorted(self.events)

    def trees(self, events: Optional[Sequence[str]] = None) -> list[ConversationTree]:
        names = self.event_names if events is None else events
        return [tree for name in names for tree in self.events[name]]

    def tweets(self) -> Iterator[Tweet]:
        for tree in self.trees():
            yield from tree.tweets()

    def __len__(self):
        return sum(len(tree) for tree in self.trees())

    def class_counts(self) -> dict[str, list[int]]:
        """Per-event gold label counts in label order (unlabelled tweets skipped)."""
        out = {}
        for name in self.event_names:
            counts = [0] * N_LABELS
            for tree in self.events[name]:
                for t in tree.tweets():
                    if t.gold_label is not None:
                        counts[t.gold_label] += 1
            out[name] = counts
        return out
