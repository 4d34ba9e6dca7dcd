import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tracx2.encoding import (
    ALPHABET, EncodingError, Interval, code_table, encode_onehot, encode_ordinal, hamming, label_of,
    note_to_pitch, parse_melody, parse_melody_text, render_labels, semitones_of, word_from_labels,
    word_label,
)

RANGE = range(-19, 20)


def test_hamming_equals_semitone_distance_for_all_pairs():
    for a, b in itertools.product(RANGE, RANGE):
        assert hamming(encode_ordinal(a), encode_ordinal(b)) == abs(a - b)


def test_reference_letter_distances():
    assert hamming(encode_ordinal(semitones_of("m")), encode_ordinal(semitones_of("o"))) == 2
    assert hamming(encode_ordinal(semitones_of("m")), encode_ordinal(semitones_of("t"))) == 7


def test_letters_anchor_points():
    assert (semitones_of("m"), semitones_of("a"), semitones_of("y"), semitones_of("t")) == (0, -12, 12, 7)
    assert semitones_of("A") == -19 and semitones_of("Z") == 19


def test_label_bijection():
    assert len(set(ALPHABET)) == 39
    for d in RANGE:
        assert semitones_of(label_of(d)) == d
        assert Interval.from_label(label_of(d)).semitones == d


def test_codes_are_bipolar_and_distinct():
    for enc in ("ordinal", "onehot"):
        tab = code_table(enc)
        assert tab.shape == (39, 39)
        assert set(np.unique(tab)) == {-1.0, 1.0}
        assert len({row.tobytes() for row in tab}) == 39
    for d in RANGE:
        assert (encode_onehot(d) == 1).sum() == 1
        assert (encode_ordinal(d) == 1).sum() == d + 20


def test_code_table_is_read_only():
    with pytest.raises(ValueError):
        code_table("ordinal")[0, 0] = 0.0


@pytest.mark.parametrize("bad", [20, -20, 100, 1.5])
def test_out_of_range_rejected(bad):
    with pytest.raises(EncodingError):
        label_of(bad)
    with pytest.raises(EncodingError):
        encode_ordinal(bad)


def test_unknown_letter_and_encoding():
    with pytest.raises(EncodingError):
        semitones_of("z")
    with pytest.raises(EncodingError):
        code_table("gray")


def test_word_examples():
    assert word_from_labels("caf") == (-10, -12, -7)
    assert word_from_labels("mnoh") == (0, 1, 2, -5)
    assert word_label((0, 1, 2, -5)) == "mnoh"


@given(st.lists(st.integers(-19, 19), min_size=1, max_size=8))
def test_word_label_round_trip(word):
    assert word_from_labels(word_label(word)) == tuple(word)


def test_note_names():
    assert note_to_pitch("C4") == 60
    assert note_to_pitch("A4") == 69
    assert note_to_pitch("F#3") == 54
    assert note_to_pitch("Bb4") == 70
    assert note_to_pitch("64") == 64
    with pytest.raises(EncodingError):
        note_to_pitch("H2")


def test_melody_example_intervals():
    assert parse_melody("A4 E4 B4") == [-5, 7]
    assert render_labels([-5, 7]) == "h t"


def test_range_edges_in_melody():
    assert parse_melody("C4 G5") == [19]
    with pytest.raises(EncodingError, match=r"<text>:1:4:.*'C4'"):
        parse_melody("C4 G#5")


def test_melody_errors_and_comments():
    mel = parse_melody_text("# song: tune\n# comment\nC4 D4\n\nE4\n", "f.txt")
    assert mel.name == "tune" and mel.intervals == [2, 2]
    with pytest.raises(EncodingError, match="at least two notes"):
        parse_melody_text("", "f.txt")
    with pytest.raises(EncodingError, match="at least two notes"):
        parse_melody_text("C4", "f.txt")
    with pytest.raises(EncodingError, match=r"f.txt:2:4"):
        parse_melody_text("C4\nD4 X9", "f.txt")
    assert len(parse_melody("C4 D4")) == 1
