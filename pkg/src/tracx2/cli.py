"""Command-line front end.

    tracx2 encode MELODY
    tracx2 train --corpus set1 --model tracx2 --seed 1 --out runs/a
    tracx2 score --snapshot runs/a/snapshot.txt --words words.txt [--corpus set1]
    tracx2 experiment --study st3 --corpus set1 --seed 1 --out runs/st3

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
CSV files use a fixed column order, ``%.9g`` floats and LF line endings, and
are written to a temporary name then renamed into place.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__, corpus as cp, experiments as ex
from .encoding import ENCODINGS, EncodingError, parse_melody_text, word_from_labels, word_label
from .nets import MODELS, Hyperparams, NumericError, load_snapshot, save_snapshot, train_model

log = logging.getLogger("tracx2")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --- output helpers -------------------------------------------------------------

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "%.9g" % v
    return str(v)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: Path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> Path:
    atomic_write(path, csv_text(rows, columns))
    return path


CONTOUR_COLORS = {
    "RR": "#d62728", "R=": "#ff7f0e", "RF": "#bcbd22", "=R": "#e377c2", "==": "#000000",
    "=F": "#17becf", "FR": "#9467bd", "F=": "#1f77b4", "FF": "#2ca02c",
}


def scatter_svg(rows: Sequence[dict], x: str = "pc1", y: str = "pc2", label: str = "word",
                group: str = "contour", title: str = "") -> str:
    """Plain SVG scatter: axes, one labelled circle per row, legend by group."""
    W, H, M = 640, 520, 60
    xs = [r[x] for r in rows]
    ys = [r[y] for r in rows]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (W - 2 * M - 120) / ((x1 - x0) or 1.0)
    sy = (H - 2 * M) / ((y1 - y0) or 1.0)

    def px(v):
        return M + (v - x0) * sx

    def py(v):
        return H - M - (v - y0) * sy

    def esc(s):
        return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<title>{esc(title)}</title>',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{M}" y1="{H - M}" x2="{W - M - 120}" y2="{H - M}" stroke="black"/>',
           f'<line x1="{M}" y1="{M}" x2="{M}" y2="{H - M}" stroke="black"/>',
           f'<text x="{(W - 120) / 2:.1f}" y="{H - 20}" text-anchor="middle" font-size="13">{esc(x)}</text>',
           f'<text x="18" y="{H / 2:.1f}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 18 {H / 2:.1f})">{esc(y)}</text>',
           f'<text x="{M}" y="{H - M + 16}" font-size="10">{x0:.3g}</text>',
           f'<text x="{W - M - 120}" y="{H - M + 16}" font-size="10" text-anchor="end">{x1:.3g}</text>',
           f'<text x="{M - 4}" y="{H - M}" font-size="10" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{M - 4}" y="{M + 8}" font-size="10" text-anchor="end">{y1:.3g}</text>',
           '<g class="markers">']
    for r in rows:
        c = CONTOUR_COLORS.get(r[group], "#7f7f7f")
        out.append(f'<circle cx="{px(r[x]):.2f}" cy="{py(r[y]):.2f}" r="4" fill="{c}">'
                   f'<title>{esc(r[label])} ({esc(r[group])})</title></circle>')
        out.append(f'<text x="{px(r[x]) + 5:.2f}" y="{py(r[y]) - 4:.2f}" font-size="8">{esc(r[label])}</text>')
    out.append('</g><g class="legend">')
    present = [g for g in CONTOUR_COLORS if any(r[group] == g for r in rows)]
    present += sorted({r[group] for r in rows} - set(present))
    for i, g in enumerate(present):
        ly = M + 18 * i
        out.append(f'<rect x="{W - M - 100}" y="{ly - 8}" width="10" height="10" '
                   f'fill="{CONTOUR_COLORS.get(g, "#7f7f7f")}"/>')
        out.append(f'<text x="{W - M - 84}" y="{ly + 1}" font-size="12">{esc(g)}</text>')
    out.append("</g></svg>")
    return "\n".join(out) + "\n"


def write_manifest(out: Path, command: str, config: dict, files: Sequence[Path]) -> None:
    manifest = {
        "command": command, "config": config, "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "files": sorted(p.name for p in files),
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


# --- commands ------------------------------------------------------------------------

def cmd_encode(args) -> int:
    path = Path(args.melody)
    text = path.read_text(encoding="utf-8")
    mel = parse_melody_text(text, str(path))
    sys.stdout.write(" ".join(f"{d:+d}" if d else "0" for d in mel.intervals) + "\n")
    sys.stdout.write(" ".join(word_label([d]) for d in mel.intervals) + "\n")
    return EXIT_OK


def _load_corpus(source: str) -> cp.Corpus:
    try:
        return cp.load_corpus(source)
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"corpus not found: {source} ({exc})") from None


def _validate(args, need_out: bool = True) -> None:
    problems = []
    if getattr(args, "epochs", None) is not None and args.epochs < 0:
        problems.append(f"--epochs must be >= 0, got {args.epochs}")
    if getattr(args, "seeds", None) is not None and args.seeds < 2:
        problems.append(f"--seeds must be >= 2, got {args.seeds}")
    if need_out and args.out is None:
        problems.append("--out is required")
    if problems:
        raise UsageError("; ".join(problems))


def cmd_train(args) -> int:
    _validate(args)
    corpus = _load_corpus(args.corpus)
    out = Path(args.out)
    trace: list | None = [] if args.trace else None
    net = train_model(args.model, corpus, args.seed, epochs=args.epochs, encoding=args.encoding, trace=trace)
    out.mkdir(parents=True, exist_ok=True)
    snap = out / "snapshot.txt"
    save_snapshot(net, snap)
    files = [snap]
    if trace is not None:
        rows = [{"step": i, "E": e, "delta": d} for i, (e, d) in enumerate(trace)]
        files.append(write_csv(out / "trace.csv", rows, ["step", "E", "delta"]))
    config = {"corpus": args.corpus, "model": args.model, "encoding": args.encoding,
              "epochs": args.epochs if args.epochs is not None else Hyperparams().epochs, "seed": args.seed}
    write_manifest(out, "train", config, files)
    log.info("wrote %s", ", ".join(str(f) for f in files))
    return EXIT_OK


def cmd_score(args) -> int:
    net = load_snapshot(args.snapshot)
    freq = None
    if args.corpus:
        c = _load_corpus(args.corpus)
        freq = {}
        for n in range(2, 9):
            freq.update(cp.word_inventory(c, n))
    rows = []
    lines = Path(args.words).read_text(encoding="utf-8").splitlines()
    for lineno, raw in enumerate(lines, start=1):
        label = raw.strip()
        if not label or label.startswith("#"):
            continue
        row = {"word": label, "length": len(label), "error": None, "frequency": None, "status": "ok"}
        try:
            w = word_from_labels(label)
            if len(w) < 2:
                row["status"] = "too-short"
            else:
                row["error"] = float(net.word_errors([w])[0])
                if freq is not None:
                    row["frequency"] = freq.get(w, 0)
        except EncodingError as exc:
            row["status"] = "unknown-letter"
            print(f"{args.words}:{lineno}: {exc}", file=sys.stderr)
        rows.append(row)
    cols = ["word", "length", "error", "frequency", "status"]
    if args.out:
        write_csv(Path(args.out), rows, cols)
    else:
        sys.stdout.write(csv_text(rows, cols))
    return EXIT_OK


def report_files(report: ex.ExperimentReport, out: Path) -> list[Path]:
    files = []
    for name, rows in report.tables.items():
        if rows:
            files.append(write_csv(out / f"{name}.csv", rows))
    for name, rows in report.summary.items():
        if rows and name not in report.tables:
            files.append(write_csv(out / f"{name}.csv", rows))
    if report.tests:
        rows = [{"name": k, **v.row()} for k, v in report.tests.items()]
        files.append(write_csv(out / "tests.csv", rows))
    if report.study == "st1.1":
        svg = scatter_svg(report.tables["pca_clusters"],
                          title=f"{report.config['model']} 2-word representations, "
                                f"{report.config['encoding']} coding")
        p = out / "pca_clusters.svg"
        atomic_write(p, svg)
        files.append(p)
    return files


def cmd_experiment(args) -> int:
    _validate(args)
    corpus = _load_corpus(args.corpus)
    runs = args.seeds if args.seeds is not None else 20
    report = ex.run_study(args.study, corpus, args.seed, runs=runs, epochs=args.epochs,
                          encoding=args.encoding, model=args.model)
    out = Path(args.out)
    files = report_files(report, out)
    write_manifest(out, "experiment", {"study": args.study, "seed": args.seed, "seeds": runs,
                                       **report.config}, files)
    for name, rows in report.summary.items():
        sys.stdout.write(f"# {name}\n" + csv_text(rows))
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracx2", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="melody file to semitone intervals and letters")
    e.add_argument("melody")
    e.set_defaults(func=cmd_encode)

    def common(q, models=MODELS):
        q.add_argument("--corpus", default="set1",
                       help="bundled corpus name (set1, set2), a directory of songs, or a manifest file")
        q.add_argument("--model", choices=models, default=None if "untrained" in models else "tracx2")
        q.add_argument("--encoding", choices=ENCODINGS, default="ordinal")
        q.add_argument("--epochs", type=int, default=None, help="default 30 (100 for Saffran streams)")
        q.add_argument("--seed", type=int, required=True, help="base seed; all randomness derives from it")
        q.add_argument("--out", default=None, help="output directory")

    t = sub.add_parser("train", help="train one net and write a snapshot")
    common(t)
    t.add_argument("--trace", action="store_true", help="also write per-step E and delta")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="score words (one letter string per line) with a snapshot")
    s.add_argument("--snapshot", required=True)
    s.add_argument("--words", required=True)
    s.add_argument("--corpus", default=None, help="adds a training-frequency column")
    s.add_argument("--out", default=None, help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_score)

    x = sub.add_parser("experiment", help="run one study and write its CSV report")
    common(x, MODELS + ("untrained",))
    x.add_argument("--study", required=True, choices=ex.STUDIES)
    x.add_argument("--seeds", type=int, default=None, help="independent runs for replicated studies (default 20)")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, LookupError, cp.SamplingExhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
