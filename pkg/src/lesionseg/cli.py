"""Command-line front end.

    lesionseg segment  --data DIR --out DIR [--methods b_otsu,psm,mam] [--jobs N]
    lesionseg compare  SEGMENTS_CSV --methods m1,m2[,...] [--delta 0.1] [--out DIR]
    lesionseg classify --data DIR --labels CSV --out DIR [--methods mam] [--kfold K]
    lesionseg features --data DIR --out DIR [--methods mam]
    lesionseg phantom  --out DIR [--suite mixed|separable] [--n N] [--seed S]

Exit status: 0 on success, 1 when some images failed, 2 on a fatal
configuration or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

from . import __version__
from .classify import LabeledFeatures, kfold_predict, predict, train
from .dataset import (
    CorpusError,
    load_corpus,
    phantom_suite,
    separable_suite,
    write_image,
    write_mask,
    write_phantom_corpus,
)
from .evaluation import (
    compare,
    confusion,
    format_classification_table,
    format_comparison_table,
    format_jaccard_ranking,
    jaccard,
    render_overlay,
    verdict_counts,
)
from .pipeline import METHODS, ConfigError, PipelineConfig, features_for, load_config, process_entry

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2

SEGMENT_COLUMNS = ["id", "method", "area", "chosen_c", "mam_winner", "jaccard_vs_expert", "wall_time_ms", "error"]


class Fatal(Exception):
    pass


def _fmt(x, digits=6):
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else f"{x:.{digits}f}"
    return str(x)


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    changes = {}
    if getattr(args, "methods", None):
        changes["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if getattr(args, "delta", None) is not None:
        changes["delta"] = args.delta
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "no_timing", False):
        changes["record_timing"] = False
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _corpus(args, need_labels=False):
    labels = getattr(args, "labels", None)
    if labels is None and need_labels:
        default = Path(args.data) / "labels.csv"
        if not default.exists():
            raise Fatal("--labels is required")
        labels = default
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        corpus = load_corpus(args.data, labels)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return corpus


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise Fatal(f"cannot create output directory {out}: {exc}") from exc
    return out


def _run_corpus(corpus, cfg, methods, jobs):
    work = partial(process_entry, cfg=cfg, methods=methods)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            # map yields in submission order, so output order matches the corpus
            yield from pool.map(work, corpus.entries)
    else:
        yield from map(work, corpus.entries)


# --------------------------------------------------------------------------
# segment

def cmd_segment(args) -> int:
    cfg = _config(args)
    corpus = _corpus(args)
    out = _out_dir(args.out)
    (out / "masks").mkdir(exist_ok=True)
    (out / "overlays").mkdir(exist_ok=True)

    failures = 0
    rows = []
    for res in _run_corpus(corpus, cfg, cfg.methods, args.jobs):
        for m in cfg.methods:
            if m in res.errors:
                failures += 1
                rows.append({"id": res.id, "method": m, "error": res.errors[m]})
                continue
            seg = res.segmentations[m]
            write_mask(out / "masks" / f"{res.id}_{m}.png", seg.mask)
            jac = None
            if res.expert is not None:
                jac = jaccard(seg.mask, res.expert)
                write_image(out / "overlays" / f"{res.id}_{m}.png", render_overlay(seg.mask, res.expert))
            rows.append({
                "id": res.id, "method": m, "area": int(seg.mask.sum()),
                "chosen_c": _fmt(seg.chosen_c, 1) if seg.chosen_c is not None else "",
                "mam_winner": seg.mam_winner or "",
                "jaccard_vs_expert": _fmt(jac),
                "wall_time_ms": _fmt(seg.wall_time_ms, 1) if cfg.record_timing else "",
                "error": "",
            })
    with (out / "segments.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SEGMENT_COLUMNS, lineterminator="\n", restval="")
        writer.writeheader()
        writer.writerows(rows)
    print(f"{len(corpus)} images, {len(rows) - failures} segmentations, {failures} failures -> {out / 'segments.csv'}")
    return EXIT_PARTIAL if failures else EXIT_OK


# --------------------------------------------------------------------------
# compare

def read_segments(path):
    """``{method: {id: jaccard}}`` from a segments CSV, skipping rows without a Jaccard value."""
    table: dict = {}
    try:
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"id", "method", "jaccard_vs_expert"} <= set(reader.fieldnames):
                raise Fatal(f"{path}: not a segments CSV")
            for row in reader:
                if row["jaccard_vs_expert"]:
                    table.setdefault(row["method"], {})[row["id"]] = float(row["jaccard_vs_expert"])
    except OSError as exc:
        raise Fatal(f"cannot read {path}: {exc}") from exc
    return table


def cmd_compare(args) -> int:
    table = read_segments(args.segments)
    methods = [m.strip() for m in args.methods.split(",")] if args.methods else sorted(table)
    if len(methods) < 2:
        raise Fatal("need at least two methods to compare")
    missing = [m for m in methods if m not in table]
    if missing:
        raise Fatal(f"methods without Jaccard values in {args.segments}: {', '.join(missing)}")

    pair_rows, summary = [], []
    for m1, m2 in itertools.combinations(methods, 2):
        shared = sorted(set(table[m1]) & set(table[m2]))
        if not shared:
            raise Fatal(f"no shared ids between {m1} and {m2}")
        verdicts = []
        for sid in shared:
            v = compare(table[m1][sid], table[m2][sid], args.delta)
            verdicts.append(v)
            pair_rows.append([sid, m1, m2, _fmt(v.j12), v.verdict])
        summary.append((m1, m2, verdict_counts(verdicts)))

    out = _out_dir(args.out) if args.out else Path(args.segments).parent
    with (out / "pairwise.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "method1", "method2", "j12", "verdict"])
        writer.writerows(pair_rows)
    means = {m: (sum(table[m].values()) / len(table[m]), len(table[m])) for m in methods}
    text = format_comparison_table(summary) + "\n\n" + format_jaccard_ranking(means)
    (out / "comparison_table.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# features / classify

def _features(corpus, cfg, methods, jobs, mm_per_pixel=None):
    """``({method: [(id, FeatureVector)]}, failures)`` in corpus order."""
    feats = {m: [] for m in methods}
    failures = []
    for res in _run_corpus(corpus, cfg, methods, jobs):
        for m in methods:
            if m in res.errors:
                failures.append((res.id, m, res.errors[m]))
                continue
            try:
                feats[m].append((res.id, features_for(res.image, res.segmentations[m], mm_per_pixel)))
            except ValueError as exc:
                failures.append((res.id, m, f"{type(exc).__name__}: {exc}"))
    return feats, failures


def _report_failures(failures):
    for sid, m, msg in failures:
        print(f"error: {sid} [{m}]: {msg}", file=sys.stderr)


def cmd_features(args) -> int:
    cfg = _config(args)
    corpus = _corpus(args)
    out = _out_dir(args.out)
    feats, failures = _features(corpus, cfg, cfg.methods, args.jobs, args.mm_per_pixel)
    _report_failures(failures)
    header = ["id", "method", "a", "b", "c", "d_px"] + (["d_mm"] if args.mm_per_pixel else [])
    with (out / "features.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for m in cfg.methods:
            for sid, f in feats[m]:
                row = [sid, m, _fmt(f.a), _fmt(f.b), _fmt(f.c), _fmt(f.d)]
                if args.mm_per_pixel:
                    row.append(_fmt(f.d_mm))
                writer.writerow(row)
    print(f"features for {sum(len(v) for v in feats.values())} segmentations -> {out / 'features.csv'}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    corpus = _corpus(args, need_labels=True)
    unlabeled = [e.id for e in corpus if e.label is None]
    if unlabeled:
        raise Fatal(f"missing labels for: {', '.join(unlabeled)}")
    if len({e.label for e in corpus}) < 2:
        raise Fatal("classification needs both benign and malignant samples")
    labels = {e.id: e.label for e in corpus}
    out = _out_dir(args.out)

    feats, failures = _features(corpus, cfg, cfg.methods, args.jobs)
    _report_failures(failures)
    table = []
    for m in cfg.methods:
        data = [LabeledFeatures(f, labels[sid]) for sid, f in feats[m]]
        if len({d.label for d in data}) < 2:
            print(f"error: {m}: fewer than two classes left after failures", file=sys.stderr)
            failures.append(("*", m, "single class"))
            continue
        clf = train(data, cfg.grid_step)
        clf.save(out / f"model_{m}.txt")
        if args.kfold:
            preds = kfold_predict(data, args.kfold, cfg.seed, cfg.grid_step)
        else:
            preds = [predict(clf, d.features) for d in data]
        report = confusion(preds, [d.label for d in data])
        table.append((m, report))
        with (out / f"predictions_{m}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "label", "prediction"])
            for (sid, _), d, p in zip(feats[m], data, preds):
                writer.writerow([sid, d.label, p])
    text = format_classification_table(table)
    (out / "classification_table.txt").write_text(text + "\n")
    print(text)
    return EXIT_PARTIAL if failures else EXIT_OK


# --------------------------------------------------------------------------
# phantom

def cmd_phantom(args) -> int:
    out = _out_dir(args.out)
    if args.suite == "separable":
        phantoms = separable_suite(n_each=args.n // 2, seed=args.seed)
    else:
        phantoms = phantom_suite(n=args.n, seed=args.seed)
    ids = write_phantom_corpus(out, phantoms)
    print(f"wrote {len(ids)} phantoms to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lesionseg", description="Dermoscopic lesion segmentation and classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def corpus_args(p, labels=False):
        p.add_argument("--data", required=True, help="corpus root (images and *_Segmentation.png masks)")
        p.add_argument("--labels", help="id,label CSV" + (" (default: DATA/labels.csv)" if labels else ""))
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="key=value pipeline config file")
        p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("segment", help="segment every image with the selected methods")
    corpus_args(p)
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_ms empty (byte-stable output)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("compare", help="pairwise Jaccard comparison from a segments CSV")
    p.add_argument("segments", help="segments.csv written by 'segment'")
    p.add_argument("--methods", help="methods to compare pairwise, in order (default: all)")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--out", help="output directory (default: next to the CSV)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("classify", help="train and evaluate the weighted-ROC classifier")
    corpus_args(p, labels=True)
    p.add_argument("--kfold", type=int, default=0, help="k-fold cross-validation instead of resubstitution")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("features", help="write A, B, C, D per image and method")
    corpus_args(p)
    p.add_argument("--mm-per-pixel", type=float, help="scale for diameters in mm")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("phantom", help="write a synthetic phantom corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--suite", choices=("mixed", "separable"), default="mixed")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_phantom)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_FATAL
    try:
        return args.func(args)
    except (Fatal, ConfigError, CorpusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
