"""Command-line entry point: ``stancetree {ingest,synth,run,compare,inspect-tree}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import StanceError
from .harness.config import ExperimentConfig, load_config
from .harness.dataset_io import dump_dataset, format_class_counts, load_dataset
from .harness.experiment import compare_runs, format_comparison, run_experiment
from .harness.synthetic import SyntheticSpec, edge_agreement, generate_synthetic

log = logging.getLogger("stancetree")


def format_tree(tree) -> str:
    """Indented thread view: one line per tweet with depth and label."""
    lines = []
    for t in tree.tweets():
        d = tree.depth_of(t.id)
        lab = t.gold_label.short if t.gold_label is not None else "?"
        text = " ".join(t.text.split())
        if len(text) > 100:
            text = text[:97] + "..."
        lines.append(f"{'    ' * d}[{lab}] {t.id} (depth {d}): {text}")
    return "\n".join(lines)


def cmd_ingest(args) -> int:
    ds = load_dataset(args.dataset, drop_orphans=args.drop_orphans)
    print(f"{len(ds)} tweets, {sum(len(v) for v in ds.events.values())} conversations, "
          f"{len(ds.events)} events")
    print(format_class_counts(ds))
    if args.out:
        dump_dataset(ds, args.out)
        print(f"normalised dataset written to {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec()
    if args.config:
        spec = SyntheticSpec.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    if args.seed is not None:
        spec = SyntheticSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    ds = generate_synthetic(spec)
    dump_dataset(ds, args.out)
    print(f"{len(ds)} tweets in {len(ds.events)} events written to {args.out}")
    print(f"parent/child label agreement: {edge_agreement(ds):.3f}")
    print(format_class_counts(ds))
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, classifier=args.classifier,
                             drop_orphans=True if args.drop_orphans else None)
    out = args.out or cfg.output_dir
    if not out:
        raise SystemExit("error: give --out or set output_dir in the config")
    res = run_experiment(cfg, out)
    agg = res.cv.aggregate
    print(f"{cfg.classifier}: micro-F1 {agg.micro_f1:.3f}  macro-F1 {agg.macro_f1:.3f}")
    print(f"artifacts in {res.directory}")
    return 0


def cmd_compare(args) -> int:
    rows = compare_runs(args.runs, args.out)
    sys.stdout.write(format_comparison(rows))
    return 0


def cmd_inspect(args) -> int:
    ds = load_dataset(args.dataset, drop_orphans=args.drop_orphans)
    trees = ds.trees()
    if args.tweet_id:
        trees = [t for t in trees if args.tweet_id in t]
        if not trees:
            print(f"no conversation contains tweet {args.tweet_id!r}", file=sys.stderr)
            return 1
    for i, tree in enumerate(trees):
        if i:
            print()
        print(f"# {tree.event} / {tree.id}")
        print(format_tree(tree))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stancetree", description="Rumour stance classification over reply trees.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="validate a dataset file and print class counts")
    s.add_argument("dataset")
    s.add_argument("--drop-orphans", action="store_true")
    s.add_argument("--out", help="write the normalised dataset here")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--config", help="JSON synthetic spec")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="leave-one-event-out experiment")
    s.add_argument("--config", required=True, help="experiment config or a run manifest")
    s.add_argument("--seed", type=int)
    s.add_argument("--classifier")
    s.add_argument("--drop-orphans", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("compare", help="tabulate finished runs")
    s.add_argument("runs", nargs="+")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("inspect-tree", help="print conversations with depths and labels")
    s.add_argument("dataset")
    s.add_argument("tweet_id", nargs="?")
    s.add_argument("--drop-orphans", action="store_true")
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
