"""End-to-end studies: representations, word errors, prior learning, contour
sensitivity and the end-of-word advantage.

Every study takes a base seed.  Each independent run derives its own
``SeedSequence`` from (base seed, study key, model, run index), so runs are
isolated and any single one can be replayed.  Reports keep the per-word or
per-run tables that every summary number is computed from.
"""
from __future__ import annotations

import datetime as _dt
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import __version__, analysis, corpus as cp
from .encoding import ENCODINGS, word_from_labels, word_label
from .nets import MODELS, Hyperparams, make_model, train_model

STUDIES = ("st1.1", "st1.2", "st1.3", "st2.prior", "st2.unheard", "st3",
           "st4.original", "st4.repaired", "st4.reps")
REGIMES = ("songs", "within-song", "global", "full-random", "none")

SAFFRAN_WORDS = {
    "original": ("fv", "un", "hs", "nl", "nn", "pl"),
    "repaired": ("fv", "un", "hs", "dy", "mt", "pl"),
}
# analysis name -> (Xb part-words, aX part-words)
SAFFRAN_PARTWORDS = {
    "original": {
        "pn_xb": (("gv", "pn", "ls"), ("nq", "nw")),
        "pn_ax": (("gv", "ls"), ("pn", "nq", "nw")),
    },
    "repaired": {
        "main": (("gv", "wn", "rs"), ("db", "mo", "pq")),
    },
}


class StudyError(ValueError):
    """A study cannot run on the given inputs (e.g. no usable test words)."""


@dataclass
class ExperimentReport:
    study: str
    config: dict
    tables: dict[str, list[dict]] = field(default_factory=dict)
    summary: dict[str, list[dict]] = field(default_factory=dict)
    tests: dict[str, analysis.TestResult] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def metric(self, table: str, value: str, **where):
        """Single value from a summary table, selected by column equality."""
        rows = [r for r in self.summary[table] if all(r.get(k) == v for k, v in where.items())]
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows in {table!r} match {where}")
        return rows[0][value]


def _key(x) -> int:
    return x if isinstance(x, int) else zlib.crc32(str(x).encode())


def run_seed(base: int, *keys) -> np.random.SeedSequence:
    """Child seed for one run; string keys are folded in through CRC-32."""
    return np.random.SeedSequence([int(base)] + [_key(k) for k in keys])


def _provenance() -> dict:
    return {"version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def _group_summary(rows: list[dict], by: Sequence[str], value: str) -> list[dict]:
    """mean / sd / sem of ``value`` per distinct combination of ``by`` columns, in first-seen order."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in by), []).append(r[value])
    out = []
    for key, vals in groups.items():
        s = analysis.summary(vals)
        out.append({**dict(zip(by, key)), **s})
    return out


def _words(labels: Iterable[str]) -> list[tuple[int, ...]]:
    return [word_from_labels(w) for w in labels]


def _train(model: str, data, seed, epochs: int | None = None, encoding: str = "ordinal",
           hp: Hyperparams | None = None):
    if model == "untrained":
        return make_model("tracx2", seed=seed, encoding=encoding, hp=hp)
    return train_model(model, data, seed, epochs=epochs, encoding=encoding, hp=hp)


def kendall_tau(x, y) -> float:
    """Tau-a; fine for the handful of words in a contour class."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    n = len(x)
    if n < 2:
        return float("nan")
    s = 0.0
    for i in range(n):
        s += float(np.sum(np.sign(x[i] - x[i + 1:]) * np.sign(y[i] - y[i + 1:])))
    return s / (n * (n - 1) / 2)


# --- Study 1 -------------------------------------------------------------------

FLAT_CLASSES = ("R=", "F=", "=R", "=F")


def study1_clusters(corpus: cp.Corpus, encoding: str = "ordinal", seed: int = 0,
                    model: str = "tracx2", epochs: int | None = None) -> ExperimentReport:
    """PCA of the 2-word hidden representations, labelled by 9-way contour class."""
    words = sorted(cp.word_inventory(corpus, 2))
    net = _train(model, corpus, run_seed(seed, "st1.1", model, encoding), epochs, encoding)
    reps = net.hidden_reps(words)
    p = analysis.pca_first2(reps)
    classes = [cp.contour(w) for w in words]
    rows = [{"word": word_label(w), "contour": c, "pc1": float(a), "pc2": float(b)}
            for w, c, (a, b) in zip(words, classes, p.scores)]
    dist = analysis.class_distance_summary(p.scores, classes)

    order_rows = []
    flat = (0, 0)
    if flat in words:
        origin = p.scores[words.index(flat)]
        for cls in FLAT_CLASSES:
            members = [i for i, c in enumerate(classes) if c == cls]
            if len(members) < 2:
                continue
            size = [max(abs(d) for d in words[i]) for i in members]
            dist_mm = [float(np.linalg.norm(p.scores[i] - origin)) for i in members]
            order_rows.append({"contour": cls, "n": len(members), "tau": kendall_tau(size, dist_mm),
                               "words": " ".join(word_label(words[i]) for i in
                                                 sorted(members, key=lambda i: dist_mm[members.index(i)]))})
    summary = [{"encoding": encoding, "model": model, "n_words": len(words), **dist,
                "var_ratio_pc1": float(p.explained_variance_ratio[0]),
                "var_ratio_pc2": float(p.explained_variance_ratio[1])}]
    return ExperimentReport(
        "st1.1", {"corpus": corpus.name, "encoding": encoding, "model": model, "seed": seed,
                  "epochs": epochs},
        tables={"pca_clusters": rows, "flat_class_order": order_rows},
        summary={"clusters": summary}, provenance=_provenance())


def study1_trace(corpora: Sequence[cp.Corpus], encodings: Sequence[str] = ENCODINGS, seed: int = 0,
                 lengths: Sequence[int] = (3, 4), epochs: int | None = None) -> ExperimentReport:
    """Squared multiple correlation between each interval position and the word's hidden rep."""
    rows = []
    for c in corpora:
        for enc in encodings:
            net = _train("tracx2", c, run_seed(seed, "st1.2", c.name, enc), epochs, enc)
            for n in lengths:
                words = sorted(cp.word_inventory(c, n))
                reps = net.hidden_reps(words)
                arr = np.array(words)
                for k in range(n):
                    rows.append({"corpus": c.name, "encoding": enc, "length": n, "position": k + 1,
                                 "n_words": len(words), "r2": analysis.multiple_r_squared(reps, arr[:, k])})
    return ExperimentReport(
        "st1.2", {"corpora": [c.name for c in corpora], "encodings": list(encodings), "seed": seed,
                  "epochs": epochs},
        tables={"trace_r2": rows}, summary={"table1": _table1_layout(rows)}, provenance=_provenance())


def _table1_layout(rows: list[dict]) -> list[dict]:
    """One row per (corpus, length, encoding) with R2 columns for I1..I4."""
    out: dict[tuple, dict] = {}
    width = max(r["position"] for r in rows)
    for r in rows:
        key = (r["corpus"], r["length"], r["encoding"])
        row = out.setdefault(key, {"corpus": key[0], "length": key[1], "encoding": key[2],
                                   "n_words": r["n_words"], **{f"r2_i{k}": None for k in range(1, width + 1)}})
        row[f"r2_i{r['position']}"] = r["r2"]
    return list(out.values())


def study1_word_errors(corpus: cp.Corpus, seed: int = 0, runs: int = 20,
                       models: Sequence[str] = ("tracx2", "rae", "srn"),
                       lengths: Sequence[int] = (2, 3, 4), epochs: int | None = None):
    """Per-word errors averaged over ``runs`` fresh nets, with frequency and TP columns."""
    tp = cp.transitional_probabilities(corpus)
    inv = {n: cp.word_inventory(corpus, n) for n in lengths}
    words = {n: sorted(inv[n]) for n in lengths}
    errs = {(m, n): np.zeros(len(words[n])) for m in models for n in lengths}
    for m in models:
        for r in range(runs):
            net = _train(m, corpus, run_seed(seed, "st1.3", m, r), epochs)
            for n in lengths:
                errs[m, n] += net.word_errors(words[n]) / runs
    rows = []
    for n in lengths:
        for i, w in enumerate(words[n]):
            row = {"word": word_label(w), "length": n, "frequency": inv[n][w],
                   "tp": cp.avg_tp(w, tp)}
            row.update({m: float(errs[m, n][i]) for m in models})
            rows.append(row)
    return rows


def _correlations(rows: list[dict], models: Sequence[str]) -> list[dict]:
    out = []
    for n in sorted({r["length"] for r in rows}):
        sub = [r for r in rows if r["length"] == n]
        col = {k: np.array([r[k] for r in sub], float) for k in ("frequency", "tp", *models)}
        s = {"length": n, "n_words": len(sub)}
        for m in models:
            s[f"mean_{m}"] = float(col[m].mean())
            s[f"r_freq_{m}"] = analysis.pearson(col["frequency"], col[m])
            s[f"r_tp_{m}"] = analysis.pearson(col["tp"], col[m])
        if "tracx2" in models:
            for m in models:
                if m == "tracx2":
                    continue
                s[f"r_tracx2_{m}"] = analysis.pearson(col["tracx2"], col[m])
                s[f"r_tracx2_{m}_minus_tracx2"] = analysis.pearson(col["tracx2"], col[m] - col["tracx2"])
        out.append(s)
    return out


def study1_primacy(corpus: cp.Corpus, seed: int = 0, runs: int = 20, word: str = "mo",
                   models: Sequence[str] = ("tracx2", "rae", "srn"),
                   epochs: int | None = None) -> ExperimentReport:
    """Word errors versus frequency, TP and the other models, plus the
    relocation experiment on the concatenated corpus."""
    w = word_from_labels(word)
    word_rows = study1_word_errors(corpus, seed, runs, models, epochs=epochs)

    seq = cp.concatenate(corpus)
    moved, n_moved = cp.move_word_to_front(seq, w)
    if n_moved == 0:
        raise StudyError(f"word {word!r} does not occur in {corpus.name}")
    again, _ = cp.move_word_to_front(moved, w)
    prim_rows = []
    for r in range(runs):
        s = run_seed(seed, "st1.3-primacy", r)
        row = {"run": r}
        for name, song in (("baseline", seq), ("moved", moved), ("moved_twice", again)):
            net = _train("tracx2", [song], s, epochs)
            row[name] = float(net.word_errors([w])[0])
        prim_rows.append(row)
    base = [r["baseline"] for r in prim_rows]
    mv = [r["moved"] for r in prim_rows]
    tw = [r["moved_twice"] for r in prim_rows]
    prim_summary = [{"word": word, "occurrences": n_moved, "sequence_length": len(seq),
                     "baseline_mean": float(np.mean(base)), "moved_mean": float(np.mean(mv)),
                     "drop": float(np.mean(base) - np.mean(mv)),
                     "moved_twice_mean": float(np.mean(tw)),
                     "max_abs_twice_minus_moved": float(np.max(np.abs(np.subtract(tw, mv))))}]
    return ExperimentReport(
        "st1.3", {"corpus": corpus.name, "seed": seed, "runs": runs, "word": word,
                  "models": list(models), "epochs": epochs},
        tables={"word_errors": word_rows, "primacy_runs": prim_rows},
        summary={"correlations": _correlations(word_rows, models), "primacy": prim_summary},
        tests={"primacy": analysis.paired_t(mv, base)}, provenance=_provenance())


# --- Study 2 -------------------------------------------------------------------

def prior_learning_variants(corpus: cp.Corpus, seed: int) -> dict[str, cp.Corpus | None]:
    return {
        "songs": corpus,
        "within-song": cp.permute_within_song(corpus, run_seed(seed, "st2.variant", "within")),
        "global": cp.permute_global(corpus, run_seed(seed, "st2.variant", "global")),
        "full-random": cp.full_random(corpus, run_seed(seed, "st2.variant", "full")),
        "none": None,
    }


def unseen_test_words(test_song: cp.Song, variants: Iterable[cp.Corpus | None], n: int = 3):
    seen: set = set()
    for v in variants:
        if v is not None:
            seen |= set(cp.word_inventory(v, n))
    words = sorted(set(cp.windows(test_song.intervals, n)) - seen)
    if not words:
        raise StudyError(f"every {n}-word of {test_song.name} occurs in a training variant")
    return words


def study2_prior_learning(corpus: cp.Corpus, test_song: cp.Song | None = None, seed: int = 0,
                          runs: int = 20, models: Sequence[str] = ("tracx2", "rae", "srn"),
                          epochs: int | None = None) -> ExperimentReport:
    """Test-word error after training on the songs, three scrambled versions, or nothing."""
    test_song = test_song or cp.load_test_melody()
    variants = prior_learning_variants(corpus, seed)
    words = unseen_test_words(test_song, variants.values())
    rows = []
    for m in models:
        for regime, data in variants.items():
            for r in range(runs):
                s = run_seed(seed, "st2.prior", m, r)
                if data is None:
                    net = _train(m, [], s, 0)
                else:
                    net = _train(m, data, s, epochs)
                rows.append({"model": m, "regime": regime, "run": r,
                             "error": float(net.word_errors(words).mean())})
    return ExperimentReport(
        "st2.prior", {"corpus": corpus.name, "test": test_song.name, "seed": seed, "runs": runs,
                      "models": list(models), "epochs": epochs, "n_test_words": len(words)},
        tables={"prior_runs": rows,
                "test_words": [{"word": word_label(w)} for w in words]},
        summary={"prior": _group_summary(rows, ("model", "regime"), "error")},
        provenance=_provenance())


def study2_unheard_categories(corpus: cp.Corpus, seed: int = 0,
                              models: Sequence[str] = ("tracx2", "rae", "srn"),
                              size: int = 50, epochs: int | None = None) -> ExperimentReport:
    """Errors on far / near-unfamiliar / near-familiar unheard 3-words, per model."""
    inv = cp.word_inventory(corpus, 3)
    known = sorted(inv)
    rows, tests, post_rows = [], {}, []
    for m in models:
        net = _train(m, corpus, run_seed(seed, "st2.unheard", m), epochs)
        known_err = dict(zip(known, net.word_errors(known).tolist()))
        sets = cp.unheard_word_sets(inv, known_err, seed=run_seed(seed, "st2.unheard-words", m), size=size)
        groups = {}
        for cat in cp.UNHEARD_CATEGORIES:
            e = net.word_errors(sets[cat])
            groups[cat] = e
            rows.extend({"model": m, "category": cat, "word": word_label(w), "error": float(x)}
                        for w, x in zip(sets[cat], e))
        tests[f"anova_{m}"] = analysis.oneway_anova(list(groups.values()))
        for a, b, res, p_adj in analysis.pairwise_posthoc(groups):
            post_rows.append({"model": m, "a": a, "b": b, "t": res.statistic, "df": res.df[0],
                              "p": res.p, "p_bonferroni": p_adj})
    return ExperimentReport(
        "st2.unheard", {"corpus": corpus.name, "seed": seed, "models": list(models), "size": size,
                        "epochs": epochs},
        tables={"unheard_words": rows, "posthoc": post_rows},
        summary={"categories": _group_summary(rows, ("model", "category"), "error")},
        tests=tests, provenance=_provenance())


# --- Study 3 -------------------------------------------------------------------

def study3_contour(corpus: cp.Corpus, seed: int = 0,
                   models: Sequence[str] = ("tracx2", "rae", "srn", "untrained"),
                   n_words: int = 1000, ceiling: int = 6, epochs: int | None = None) -> ExperimentReport:
    """Same- versus different-contour representation distances at fixed mdist."""
    words = cp.random_3words(n_words, run_seed(seed, "st3.words"))
    rows, summary = [], []
    for m in models:
        net = _train(m, corpus, run_seed(seed, "st3", m), epochs)
        res = analysis.contour_study(words, net.hidden_reps(words), ceiling=ceiling)
        rows.extend({"model": m, **t.row()} for t in res.scored)
        summary.append({"model": m, "n_triplets": len(res.scored), "n_skipped": len(res.skipped),
                        "frac_expected": res.frac_expected, "frac_significant": res.frac_significant,
                        "frac_significant_expected": res.frac_significant_expected})
    return ExperimentReport(
        "st3", {"corpus": corpus.name, "seed": seed, "models": list(models), "n_words": n_words,
                "ceiling": ceiling, "epochs": epochs},
        tables={"contour_triplets": rows}, summary={"contour": summary}, provenance=_provenance())


# --- Study 4 -------------------------------------------------------------------

def _partword_analysis(rows: list[dict], model: str, name: str, xb, ax, runs: int):
    err = {(r["run"], r["word"]): r["error"] for r in rows if r["model"] == model}
    run_xb = [float(np.mean([err[r, w] for w in xb])) for r in range(runs)]
    run_ax = [float(np.mean([err[r, w] for w in ax])) for r in range(runs)]
    wins = [err[r, a] < err[r, b] for r in range(runs) for a in xb for b in ax]
    res = analysis.paired_t(run_xb, run_ax)
    s = {"model": model, "analysis": name, "xb": " ".join(xb), "ax": " ".join(ax),
         "mean_xb": float(np.mean(run_xb)), "mean_ax": float(np.mean(run_ax)),
         "t": res.statistic, "df": res.df[0], "p": res.p, "cohen_d": res.effect,
         "pct_runs_xb_better": 100.0 * float(np.mean(np.less(run_xb, run_ax))),
         "pct_comparisons_xb_better": 100.0 * float(np.mean(wins))}
    return s, res


def study4_saffran(variant: str = "repaired", seed: int = 0, runs: int = 20, epochs: int = 100,
                   models: Sequence[str] = ("tracx2", "rae", "srn")) -> ExperimentReport:
    """Xb versus aX part-word errors after training on a fresh word stream per run."""
    if variant not in SAFFRAN_WORDS:
        raise ValueError(f"variant must be one of {tuple(SAFFRAN_WORDS)}")
    train_words = _words(SAFFRAN_WORDS[variant])
    analyses = SAFFRAN_PARTWORDS[variant]
    test_labels = sorted({w for xb, ax in analyses.values() for w in xb + ax})
    test_words = _words(test_labels)
    rows = []
    for m in models:
        for r in range(runs):
            stream_seed, net_seed = run_seed(seed, f"st4.{variant}", m, r).spawn(2)
            stream = cp.saffran_stream(train_words, seed=stream_seed)
            net = _train(m, [stream], net_seed, epochs)
            rows.extend({"model": m, "run": r, "word": lab, "error": float(e)}
                        for lab, e in zip(test_labels, net.word_errors(test_words)))
    summary, tests = [], {}
    for m in models:
        for name, (xb, ax) in analyses.items():
            s, res = _partword_analysis(rows, m, name, xb, ax, runs)
            summary.append(s)
            tests[f"{m}_{name}"] = res
    return ExperimentReport(
        f"st4.{variant}", {"variant": variant, "seed": seed, "runs": runs, "epochs": epochs,
                           "models": list(models), "words": list(SAFFRAN_WORDS[variant])},
        tables={"partword_errors": rows}, summary={"partwords": summary}, tests=tests,
        provenance=_provenance())


def study4_internal_reps(corpus: cp.Corpus, seed: int = 0,
                         models: Sequence[str] = ("tracx2", "rae", "srn"),
                         epochs: int | None = None) -> ExperimentReport:
    """Cityblock distance from each 3-word's rep to the reps of its first and last 2-words.

    Distances are reported both as raw L1 sums and per hidden unit (L1 / 39).
    """
    words = sorted(cp.word_inventory(corpus, 3))
    rows, summary = [], []
    for m in models:
        net = _train(m, corpus, run_seed(seed, "st4.reps", m), epochs)
        h = net.hidden_reps(words)
        hb = net.hidden_reps([w[:2] for w in words])
        he = net.hidden_reps([w[1:] for w in words])
        d_begin = np.abs(h - hb).sum(axis=1)
        d_end = np.abs(h - he).sum(axis=1)
        units = h.shape[1]
        for w, b, e in zip(words, d_begin, d_end):
            rows.append({"model": m, "word": word_label(w), "d_begin": float(b), "d_end": float(e),
                         "d_begin_per_unit": float(b / units), "d_end_per_unit": float(e / units),
                         "end_closer": int(e < b)})
        summary.append({"model": m, "n_words": len(words),
                        "mean_d_begin": float(d_begin.mean()), "mean_d_end": float(d_end.mean()),
                        "mean_d_begin_per_unit": float(d_begin.mean() / units),
                        "mean_d_end_per_unit": float(d_end.mean() / units),
                        "frac_end_closer": float(np.mean(d_end < d_begin))})
    return ExperimentReport(
        "st4.reps", {"corpus": corpus.name, "seed": seed, "models": list(models), "epochs": epochs},
        tables={"subword_distances": rows}, summary={"subword_distances": summary},
        provenance=_provenance())


# --- dispatch ----------------------------------------------------------------------

def run_study(study: str, corpus: cp.Corpus, seed: int, *, runs: int = 20, epochs: int | None = None,
              encoding: str = "ordinal", model: str | None = None) -> ExperimentReport:
    """Run one study id with command-line style options.  ``model`` restricts
    multi-model studies to that model; st1.2 always adds the other bundled corpora."""
    if model and model not in MODELS and model != "untrained":
        raise ValueError(f"unknown model {model!r}")

    def pick(ms: Sequence[str]) -> list[str]:
        return [model] if model else list(ms)

    three = ("tracx2", "rae", "srn")
    if study == "st1.1":
        return study1_clusters(corpus, encoding, seed, model or "tracx2", epochs)
    if study == "st1.2":
        others = [cp.load_bundled(n) for n in cp.BUNDLED_CORPORA if n != corpus.name]
        return study1_trace([corpus, *others], ENCODINGS, seed, epochs=epochs)
    if study == "st1.3":
        return study1_primacy(corpus, seed, runs, models=pick(three), epochs=epochs)
    if study == "st2.prior":
        return study2_prior_learning(corpus, None, seed, runs, pick(three), epochs)
    if study == "st2.unheard":
        return study2_unheard_categories(corpus, seed, pick(three), epochs=epochs)
    if study == "st3":
        return study3_contour(corpus, seed, pick(three + ("untrained",)), epochs=epochs)
    if study in ("st4.original", "st4.repaired"):
        return study4_saffran(study.split(".")[1], seed, runs, 100 if epochs is None else epochs, pick(three))
    if study == "st4.reps":
        return study4_internal_reps(corpus, seed, pick(three), epochs)
    raise ValueError(f"unknown study {study!r}; expected one of {STUDIES}")
