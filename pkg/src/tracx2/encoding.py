"""Interval primitives: letter labels, bipolar input codes and melody parsing.

Intervals are signed semitone steps in [-19, 19].  Each one has a single
letter label; the 25 lowercase letters a..y cover -12..+12 (``m`` is the
repeated note) and capitals cover the wider leaps, A..G for -19..-13 and
T..Z for +13..+19.

Two bipolar codes of length 39 are provided.  The ordinal (thermometer) code
of an interval ``d`` has ``d + 20`` leading +1s followed by -1s, so the
Hamming distance between two codes equals the semitone distance between the
intervals.  The one-hot code sets a single unit to +1.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MIN_INTERVAL = -19
MAX_INTERVAL = 19
N_INTERVALS = MAX_INTERVAL - MIN_INTERVAL + 1  # 39
CODE_SIZE = N_INTERVALS

ALPHABET = "ABCDEFG" + "abcdefghijklmnopqrstuvwxy" + "TUVWXYZ"
assert len(ALPHABET) == N_INTERVALS

_LETTER_TO_SEMITONES = {ch: i + MIN_INTERVAL for i, ch in enumerate(ALPHABET)}


class EncodingError(ValueError):
    """Raised for out-of-range intervals, unknown letters and bad melody text."""


def label_of(semitones: int) -> str:
    if not isinstance(semitones, (int, np.integer)) or not MIN_INTERVAL <= semitones <= MAX_INTERVAL:
        raise EncodingError(f"interval out of range [-19, 19]: {semitones!r}")
    return ALPHABET[int(semitones) - MIN_INTERVAL]


def semitones_of(letter: str) -> int:
    try:
        return _LETTER_TO_SEMITONES[letter]
    except KeyError:
        raise EncodingError(f"unknown interval letter: {letter!r}") from None


@dataclass(frozen=True)
class Interval:
    semitones: int

    def __post_init__(self):
        label_of(self.semitones)  # validates

    @property
    def label(self) -> str:
        return label_of(self.semitones)

    @classmethod
    def from_label(cls, letter: str) -> "Interval":
        return cls(semitones_of(letter))


def word_from_labels(labels: str) -> tuple[int, ...]:
    """``"caf"`` -> ``(-10, -12, -7)``.

    Words are plain tuples of semitone values everywhere in the package.
    """
    if not labels:
        raise EncodingError("empty word")
    return tuple(semitones_of(ch) for ch in labels)


def word_label(word: Iterable[int]) -> str:
    return "".join(label_of(int(d)) for d in word)


# Lookup tables built once; rows are indexed by semitones + 19.
_ORDINAL = np.where(np.arange(N_INTERVALS)[None, :] <= np.arange(N_INTERVALS)[:, None], 1.0, -1.0)
_ONEHOT = np.where(np.eye(N_INTERVALS, dtype=bool), 1.0, -1.0)
_ORDINAL.setflags(write=False)
_ONEHOT.setflags(write=False)

ENCODINGS = ("ordinal", "onehot")


def _index(semitones: int) -> int:
    label_of(semitones)
    return int(semitones) - MIN_INTERVAL


def encode_ordinal(semitones: int) -> np.ndarray:
    return _ORDINAL[_index(semitones)].copy()


def encode_onehot(semitones: int) -> np.ndarray:
    return _ONEHOT[_index(semitones)].copy()


def code_table(encoding: str) -> np.ndarray:
    """Read-only (39, 39) table whose row ``d + 19`` is the code of interval ``d``."""
    if encoding == "ordinal":
        return _ORDINAL
    if encoding == "onehot":
        return _ONEHOT
    raise EncodingError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))


# --- melody text -----------------------------------------------------------

_NOTE_RE = re.compile(r"^([A-Ga-g])([#b]*)(-?\d+)$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_PITCH_CLASS = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}


def note_to_pitch(token: str) -> int:
    """Scientific pitch name or bare integer to a pitch number (C4 = 60)."""
    if _INT_RE.match(token):
        return int(token)
    m = _NOTE_RE.match(token)
    if not m:
        raise EncodingError(f"malformed note token {token!r}")
    letter, accidentals, octave = m.groups()
    alter = accidentals.count("#") - accidentals.count("b")
    return 12 * (int(octave) + 1) + _PITCH_CLASS[letter.upper()] + alter


@dataclass
class Melody:
    name: str
    pitches: list[int]
    intervals: list[int]


def parse_melody_text(text: str, source: str = "<text>") -> Melody:
    """Parse one song.

    Tokens are whitespace separated note names (``C4``, ``F#3``, ``Bb4``) or
    pitch numbers.  Lines starting with ``#`` are comments; ``# song: <name>``
    names the song.  Errors carry ``source:line:column``.
    """
    name = ""
    pitches: list[int] = []
    positions: list[tuple[int, int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            m = re.match(r"#\s*song:\s*(.+)$", stripped)
            if m and not name:
                name = m.group(1).strip()
            continue
        for m in re.finditer(r"\S+", line):
            tok = m.group(0)
            try:
                pitches.append(note_to_pitch(tok))
            except EncodingError as exc:
                raise EncodingError(f"{source}:{lineno}:{m.start() + 1}: {exc}") from None
            positions.append((lineno, m.start() + 1, tok))
    if len(pitches) < 2:
        raise EncodingError(f"{source}: a melody needs at least two notes, got {len(pitches)}")
    intervals = []
    for i in range(1, len(pitches)):
        d = pitches[i] - pitches[i - 1]
        if not MIN_INTERVAL <= d <= MAX_INTERVAL:
            (l0, c0, t0), (l1, c1, t1) = positions[i - 1], positions[i]
            raise EncodingError(
                f"{source}:{l1}:{c1}: interval {d:+d} between {t0!r} ({l0}:{c0}) and {t1!r} "
                f"is outside [-19, 19]"
            )
        intervals.append(d)
    return Melody(name=name, pitches=pitches, intervals=intervals)


def parse_melody(text: str) -> list[int]:
    return parse_melody_text(text).intervals


def render_labels(intervals: Sequence[int]) -> str:
    return " ".join(label_of(d) for d in intervals)
