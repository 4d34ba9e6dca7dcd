"""Song corpora, word inventories, transitional probabilities and word generators.

A *word* is a tuple of semitone values.  Songs keep their own interval lists;
nothing here ever builds a window across two songs.
"""
from __future__ import annotations

import itertools
import warnings
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .encoding import (
    MAX_INTERVAL,
    MIN_INTERVAL,
    EncodingError,
    parse_melody_text,
    word_from_labels,
    word_label,
)

Word = tuple[int, ...]

BUNDLED_CORPORA = ("set1", "set2")


@dataclass(frozen=True)
class Song:
    name: str
    intervals: tuple[int, ...]

    def __post_init__(self):
        if not self.intervals:
            raise ValueError(f"song {self.name!r} has no intervals")
        bad = [d for d in self.intervals if not MIN_INTERVAL <= d <= MAX_INTERVAL]
        if bad:
            raise EncodingError(f"song {self.name!r}: intervals out of range: {bad}")

    def __len__(self) -> int:
        return len(self.intervals)


@dataclass
class Corpus:
    songs: list[Song]
    name: str = ""

    def __iter__(self) -> Iterator[Song]:
        return iter(self.songs)

    def __len__(self) -> int:
        return len(self.songs)

    @property
    def n_intervals(self) -> int:
        return sum(len(s) for s in self.songs)

    def all_intervals(self) -> np.ndarray:
        return np.concatenate([np.asarray(s.intervals) for s in self.songs])

    def with_songs(self, songs: Iterable[Sequence[int]], suffix: str) -> "Corpus":
        new = [Song(s.name, tuple(int(d) for d in iv)) for s, iv in zip(self.songs, songs)]
        return Corpus(new, name=f"{self.name}:{suffix}" if self.name else suffix)


# --- loading -----------------------------------------------------------------

def load_song(path: str | Path) -> Song:
    path = Path(path)
    melody = parse_melody_text(path.read_text(encoding="utf-8"), source=str(path))
    return Song(melody.name or path.stem, tuple(melody.intervals))


def load_manifest(path: str | Path) -> Corpus:
    """Manifest: one melody file path per line, relative paths resolved against the manifest."""
    path = Path(path)
    songs = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        if not p.is_absolute():
            p = path.parent / p
        songs.append(load_song(p))
    if not songs:
        raise ValueError(f"manifest {path} lists no songs")
    return Corpus(songs, name=path.stem)


def _data_dir():
    return resources.files("tracx2") / "data"


def load_bundled(name: str) -> Corpus:
    """One of the shipped corpora, ``set1`` or ``set2``."""
    if name not in BUNDLED_CORPORA:
        raise ValueError(f"unknown bundled corpus {name!r}; expected one of {BUNDLED_CORPORA}")
    folder = _data_dir() / name
    files = sorted(f for f in folder.iterdir() if f.name.endswith(".txt"))
    songs = []
    for f in files:
        melody = parse_melody_text(f.read_text(encoding="utf-8"), source=f.name)
        songs.append(Song(melody.name or f.name, tuple(melody.intervals)))
    return Corpus(songs, name=name)


def load_corpus(source: str | Path) -> Corpus:
    """Bundled corpus name, a manifest file, or a directory of melody files."""
    if str(source) in BUNDLED_CORPORA:
        return load_bundled(str(source))
    p = Path(source)
    if p.is_dir():
        songs = [load_song(f) for f in sorted(p.glob("*.txt"))]
        if not songs:
            raise ValueError(f"no melody files in {p}")
        return Corpus(songs, name=p.name)
    if p.is_file():
        return load_manifest(p)
    raise FileNotFoundError(f"no corpus at {source}")


def load_test_melody() -> Song:
    """The held-out test melody used by the prior-learning study."""
    f = _data_dir() / "test_melody.txt"
    melody = parse_melody_text(f.read_text(encoding="utf-8"), source=f.name)
    return Song(melody.name, tuple(melody.intervals))


# --- inventories and transitional probabilities ---------------------------------

def windows(intervals: Sequence[int], n: int) -> Iterator[Word]:
    for i in range(len(intervals) - n + 1):
        yield tuple(intervals[i:i + n])


def word_inventory(corpus: Corpus | Iterable[Song], n: int) -> Counter:
    """Occurrence counts of every overlapping n-interval window, song by song."""
    if n < 1:
        raise ValueError("word length must be >= 1")
    counts: Counter = Counter()
    for song in corpus:
        counts.update(windows(song.intervals, n))
    return counts


def parse_word_list(text: str) -> list[Word]:
    return [word_from_labels(tok) for tok in text.split()]


@dataclass
class TpTable:
    unigrams: Counter = field(default_factory=Counter)
    # counts of a as a non-final interval, i.e. with a successor inside its song
    antecedents: Counter = field(default_factory=Counter)
    bigrams: Counter = field(default_factory=Counter)

    def tp(self, a: int, b: int) -> float:
        n = self.antecedents.get(a, 0)
        return self.bigrams.get((a, b), 0) / n if n else 0.0

    def successors(self, a: int) -> dict[int, float]:
        return {b: self.tp(a, b) for (x, b) in self.bigrams if x == a}


def transitional_probabilities(corpus: Corpus | Iterable[Song]) -> TpTable:
    table = TpTable()
    for song in corpus:
        iv = song.intervals
        table.unigrams.update(iv)
        table.antecedents.update(iv[:-1])
        table.bigrams.update(zip(iv[:-1], iv[1:]))
    if not table.unigrams:
        raise ValueError("empty corpus")
    return table


def avg_tp(word: Sequence[int], table: TpTable) -> float:
    """Mean of the word's consecutive TPs.

    Unseen bigrams contribute 0.  A word whose first interval never has a
    successor in the corpus scores 0; check ``word[0] in table.antecedents``
    to tell that case apart.
    """
    if len(word) < 2:
        raise ValueError("a TP needs at least two intervals")
    return float(np.mean([table.tp(a, b) for a, b in zip(word[:-1], word[1:])]))


# --- corpus scrambling ---------------------------------------------------------

def permute_within_song(corpus: Corpus, seed=None) -> Corpus:
    rng = np.random.default_rng(seed)
    return corpus.with_songs((rng.permutation(s.intervals) for s in corpus), "within-song")


def permute_global(corpus: Corpus, seed=None) -> Corpus:
    rng = np.random.default_rng(seed)
    pooled = rng.permutation(corpus.all_intervals())
    cuts = np.cumsum([len(s) for s in corpus])[:-1]
    return corpus.with_songs(np.split(pooled, cuts), "global")


def full_random(corpus: Corpus, seed=None) -> Corpus:
    """Every position replaced by an interval drawn uniformly from all 39."""
    rng = np.random.default_rng(seed)
    return corpus.with_songs(
        (rng.integers(MIN_INTERVAL, MAX_INTERVAL + 1, size=len(s)) for s in corpus),
        "full-random",
    )


def concatenate(corpus: Corpus) -> Song:
    return Song(f"{corpus.name}:concatenated", tuple(itertools.chain.from_iterable(s.intervals for s in corpus)))


def move_word_to_front(seq: Song, word: Sequence[int]) -> tuple[Song, int]:
    """Pull every non-overlapping occurrence of ``word`` (scanned left to right)
    out of ``seq`` and prepend them back to back.

    Returns the new song and the number of occurrences moved; 0 means the
    sequence came back unchanged.
    """
    word = tuple(word)
    n = len(word)
    iv = seq.intervals
    rest: list[int] = []
    moved = 0
    i = 0
    while i < len(iv):
        if tuple(iv[i:i + n]) == word:
            moved += 1
            i += n
        else:
            rest.append(iv[i])
            i += 1
    if moved == 0:
        warnings.warn(f"word {word_label(word)!r} does not occur; sequence unchanged", stacklevel=2)
        return seq, 0
    return Song(f"{seq.name}:{word_label(word)}-first", word * moved + tuple(rest)), moved


# --- synthetic streams and words ----------------------------------------------

def saffran_tokens(n_words: int, blocks: int, words_per_block: int, seed=None) -> list[int]:
    """Indices of word tokens: uniform over orders with no immediate repeat.

    Drawing each token uniformly among the words other than the previous one
    gives every admissible sequence the same probability.
    """
    if n_words < 2:
        raise ValueError("need at least two distinct words")
    rng = np.random.default_rng(seed)
    total = blocks * words_per_block
    tokens = [int(rng.integers(n_words))]
    for _ in range(total - 1):
        k = int(rng.integers(n_words - 1))
        tokens.append(k + (k >= tokens[-1]))
    return tokens


def saffran_stream(words: Sequence[Sequence[int]], blocks: int = 6, words_per_block: int = 18,
                   seed=None) -> Song:
    words = [tuple(w) for w in words]
    if len(set(words)) < 2:
        raise ValueError("need at least two distinct words")
    tokens = saffran_tokens(len(words), blocks, words_per_block, seed)
    stream = tuple(itertools.chain.from_iterable(words[t] for t in tokens))
    return Song("saffran-stream", stream)


SINGABLE_MAX = 12


def is_singable(word: Sequence[int]) -> bool:
    """Intervals within an octave, and no two adjacent same-sign intervals
    adding up to more than an octave either way."""
    if any(abs(d) > SINGABLE_MAX for d in word):
        return False
    for a, b in zip(word[:-1], word[1:]):
        if (a > 0 and b > 0 and a + b > SINGABLE_MAX) or (a < 0 and b < 0 and a + b < -SINGABLE_MAX):
            return False
    return True


def random_3words(count: int, seed=None) -> list[Word]:
    """Rejection-sample ``count`` singable 3-interval words (duplicates allowed)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out: list[Word] = []
    while len(out) < count:
        w = tuple(int(x) for x in rng.integers(-SINGABLE_MAX, SINGABLE_MAX + 1, size=3))
        if is_singable(w):
            out.append(w)
    return out


def all_singable_words(n: int = 3) -> list[Word]:
    rng_ = range(-SINGABLE_MAX, SINGABLE_MAX + 1)
    return [w for w in itertools.product(rng_, repeat=n) if is_singable(w)]


# --- distances over words ------------------------------------------------------

def _check_same_length(w1, w2):
    if len(w1) != len(w2):
        raise ValueError(f"word lengths differ: {len(w1)} vs {len(w2)}")


def mdist(w1: Sequence[int], w2: Sequence[int]) -> tuple[int, ...]:
    _check_same_length(w1, w2)
    return tuple(abs(a - b) for a, b in zip(w1, w2))


def chebyshev(w1: Sequence[int], w2: Sequence[int]) -> int:
    return max(mdist(w1, w2))


def contour(word: Sequence[int]) -> str:
    """Per-interval direction: R rising, F falling, = flat."""
    return "".join("R" if d > 0 else "F" if d < 0 else "=" for d in word)


# --- unheard test words --------------------------------------------------------

UNHEARD_CATEGORIES = ("far", "near_unfamiliar", "near_familiar")


class SamplingExhausted(RuntimeError):
    pass


def unheard_word_sets(inventory: Counter | Iterable[Word], word_errors: dict[Word, float],
                      seed=None, size: int = 50, far_threshold: int = 5,
                      sd_fraction: float = 0.5) -> dict[str, list[Word]]:
    """Three sets of unheard singable 3-words.

    far              Chebyshev distance > ``far_threshold`` from every known word
    near_unfamiliar  distance 1 from a poorly learned word (error > mean + 0.5 sd)
                     and not within distance 1 of any well learned word
    near_familiar    distance 1 from a well learned word (error < mean - 0.5 sd)

    Candidates are the full singable set minus the inventory, so sampling
    without replacement from each category is the same as rejection sampling.
    """
    known = list(inventory)
    missing = [w for w in known if w not in word_errors]
    if missing:
        raise ValueError(f"no error for {len(missing)} inventory words, e.g. {word_label(missing[0])}")
    errs = np.array([word_errors[w] for w in known])
    mu, sd = errs.mean(), errs.std(ddof=1)
    known_arr = np.array(known)
    familiar = errs < mu - sd_fraction * sd
    unfamiliar = errs > mu + sd_fraction * sd

    known_set = set(known)
    cands = np.array([w for w in all_singable_words(known_arr.shape[1]) if w not in known_set])
    cheb = np.abs(cands[:, None, :] - known_arr[None, :, :]).max(axis=2)

    masks = {
        "far": (cheb > far_threshold).all(axis=1),
        "near_unfamiliar": ((cheb[:, unfamiliar] == 1).any(axis=1)
                            & ~(cheb[:, familiar] <= 1).any(axis=1)),
        "near_familiar": (cheb[:, familiar] == 1).any(axis=1),
    }
    rng = np.random.default_rng(seed)
    out = {}
    for cat in UNHEARD_CATEGORIES:
        pool = cands[masks[cat]]
        if len(pool) < size:
            raise SamplingExhausted(f"only {len(pool)} candidates for category {cat!r}, need {size}")
        pick = rng.choice(len(pool), size=size, replace=False)
        out[cat] = [tuple(int(x) for x in pool[i]) for i in sorted(pick)]
    return out
