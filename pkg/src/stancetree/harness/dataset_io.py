"""Single-file JSON dataset format.

Layout::

    {"format_version": 1,
     "events": [{"name": "...",
                 "conversations": [[{"id": ..., "parent_id": ..., "text": ...,
                                     "event": ..., "label": ..., "raw_annotation": ...,
                                     "has_picture": ...}, ...], ...]}]}

A tweet needs ``id``, ``text`` and ``event``.  Gold labels come from
``label`` (support/deny/query/comment) or are converted from the pairwise
``raw_annotation`` scheme; when both are present they must agree.
"""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Optional

import jsonschema

from ..conversation import (
    LABELS,
    RawAnnotation,
    RumourDataset,
    StanceLabel,
    Tweet,
    build_tree,
    convert_annotation,
)
from ..errors import StanceError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class DatasetError(StanceError):
    pass


class SchemaViolation(DatasetError, ValueError):
    pass


class LabelConflict(DatasetError, ValueError):
    pass


TWEET_SCHEMA = {
    "type": "object",
    "required": ["id", "text", "event"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "parent_id": {"type": ["string", "null"]},
        "text": {"type": "string"},
        "event": {"type": "string", "minLength": 1},
        "label": {"enum": [l.tag for l in LABELS]},
        "raw_annotation": {"enum": [r.value for r in RawAnnotation]},
        "has_picture": {"type": "boolean"},
    },
}

DATASET_SCHEMA = {
    "type": "object",
    "required": ["format_version", "events"],
    "additionalProperties": False,
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "events": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "conversations"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "conversations": {
                        "type": "array",
                        "items": {"type": "array", "minItems": 1, "items": TWEET_SCHEMA},
                    },
                },
            },
        },
    },
}


def validate_document(doc) -> None:
    try:
        jsonschema.validate(doc, DATASET_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaViolation(f"{where}: {exc.message}") from None
    names = [e["name"] for e in doc["events"]]
    if len(set(names)) != len(names):
        raise SchemaViolation("event names must be unique")


def _drop_orphans(records: list, event: str) -> list:
    ids = {r["id"] for r in records}
    kept = {r["id"] for r in records if r.get("parent_id") is None or r["parent_id"] in ids}
    # anything hanging below a dropped tweet goes too
    changed = True
    while changed:
        changed = False
        for r in records:
            if r["id"] in kept and r.get("parent_id") is not None and r["parent_id"] not in kept:
                kept.discard(r["id"])
                changed = True
    dropped = len(records) - len(kept)
    if dropped:
        log.warning("event %s: dropped %d orphaned tweets", event, dropped)
    return [r for r in records if r["id"] in kept]


def _gold_label(rec: dict, source_raw: Optional[RawAnnotation]) -> Optional[StanceLabel]:
    given = StanceLabel.parse(rec["label"]) if "label" in rec else None
    raw = RawAnnotation(rec["raw_annotation"]) if "raw_annotation" in rec else None
    if raw is None:
        return given
    if rec.get("parent_id") is None:
        derived = convert_annotation(raw)
    elif source_raw is None:
        raise SchemaViolation(f"tweet {rec['id']!r} has a raw annotation but its source has none")
    else:
        derived = convert_annotation(source_raw, raw)
    if given is not None and given != derived:
        raise LabelConflict(
            f"tweet {rec['id']!r}: label {given.tag!r} contradicts converted {derived.tag!r}"
        )
    return derived


def _conversation(records: list, event: str, drop_orphans: bool):
    for r in records:
        if r["event"] != event:
            raise SchemaViolation(f"tweet {r['id']!r} says event {r['event']!r} but is filed under {event!r}")
    if drop_orphans:
        records = _drop_orphans(records, event)
    roots = [r for r in records if r.get("parent_id") is None]
    source_raw = None
    if len(roots) == 1 and "raw_annotation" in roots[0]:
        source_raw = RawAnnotation(roots[0]["raw_annotation"])
    tweets = [
        Tweet(
            r["id"], r["text"], r.get("parent_id"), event,
            RawAnnotation(r["raw_annotation"]) if "raw_annotation" in r else None,
            _gold_label(r, source_raw),
            r.get("has_picture"),
        )
        for r in records
    ]
    return build_tree(tweets)


def dataset_from_document(doc, drop_orphans: bool = False) -> RumourDataset:
    validate_document(doc)
    trees = []
    for ev in doc["events"]:
        for conv in ev["conversations"]:
            trees.append(_conversation(conv, ev["name"], drop_orphans))
    if not trees:
        raise SchemaViolation("dataset contains no conversations")
    return RumourDataset.from_trees(trees)


def load_dataset(path, drop_orphans: bool = False) -> RumourDataset:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON ({exc})") from None
    ds = dataset_from_document(doc, drop_orphans)
    log.info("loaded %d tweets in %d events from %s", len(ds), len(ds.events), path)
    return ds


def dataset_to_document(dataset: RumourDataset) -> dict:
    events = []
    for name in dataset.event_names:
        convs = []
        for tree in dataset.events[name]:
            recs = []
            for t in tree.tweets():
                r = {"id": t.id, "parent_id": t.parent_id, "text": t.text, "event": t.event}
                if t.gold_label is not None:
                    r["label"] = t.gold_label.tag
                if t.raw_annotation is not None:
                    r["raw_annotation"] = t.raw_annotation.value
                if t.has_picture_metadata is not None:
                    r["has_picture"] = t.has_picture_metadata
                recs.append(r)
            convs.append(recs)
        events.append({"name": name, "conversations": convs})
    return {"format_version": FORMAT_VERSION, "events": events}


def dumps_dataset(dataset: RumourDataset) -> str:
    return json.dumps(dataset_to_document(dataset), indent=1, sort_keys=True, ensure_ascii=False) + "\n"


def dump_dataset(dataset: RumourDataset, path) -> None:
    Path(path).write_text(dumps_dataset(dataset), encoding="utf-8")


def dataset_fingerprint(dataset: RumourDataset) -> str:
    return hashlib.sha256(dumps_dataset(dataset).encode("utf-8")).hexdigest()


def class_count_table(dataset: RumourDataset) -> list[list]:
    """Rows of (event, S, D, Q, C, total) plus a final TOTAL row."""
    rows = []
    totals = [0] * len(LABELS)
    for name, counts in dataset.class_counts().items():
        rows.append([name, *counts, sum(counts)])
        totals = [a + b for a, b in zip(totals, counts)]
    rows.append(["TOTAL", *totals, sum(totals)])
    return rows


def format_class_counts(dataset: RumourDataset) -> str:
    header = ["event", *[l.tag for l in LABELS], "total"]
    rows = class_count_table(dataset)
    width = max(len(str(r[0])) for r in rows + [header])
    lines = ["  ".join([header[0].ljust(width)] + [h.rjust(8) for h in header[1:]])]
    for r in rows:
        lines.append("  ".join([str(r[0]).ljust(width)] + [str(v).rjust(8) for v in r[1:]]))
    return "\n".join(lines)
