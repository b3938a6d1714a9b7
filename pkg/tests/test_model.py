import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.errors import (
    InvalidTimeMap,
    InvalidVelocity,
    NonPositiveDuration,
    PitchOutOfRange,
    TooFewAnchors,
    ValidationError,
)
from artifact.model import (
    Note,
    NoteMatching,
    NoteSequence,
    TimeMap,
    WarpingPath,
    canonical_order,
    time_map_lookup,
    validate_notes,
)

from conftest import note_lists


def test_note_fields_and_duration():
    n = Note(60, 0.5, 1.25, 90)
    assert n.duration == 0.75
    assert n.with_times(1.0, 2.0) == Note(60, 1.0, 2.0, 90)


@pytest.mark.parametrize("args, exc", [
    ((128, 0.0, 1.0), PitchOutOfRange),
    ((-1, 0.0, 1.0), PitchOutOfRange),
    ((True, 0.0, 1.0), PitchOutOfRange),
    ((60, 1.0, 1.0), NonPositiveDuration),
    ((60, 1.0, 0.5), NonPositiveDuration),
    ((60, -0.1, 0.5), NonPositiveDuration),
    ((60, 0.0, float("nan")), NonPositiveDuration),
    ((60, 0.0, 1.0, 128), InvalidVelocity),
])
def test_note_rejects_invalid(args, exc):
    with pytest.raises(exc):
        Note(*args)


def test_errors_are_value_errors():
    with pytest.raises(ValueError):
        Note(60, 1.0, 1.0)


def test_sequence_sorted():
    seq = NoteSequence([(60, 0.5, 1.0), (60, 0.0, 0.4)])
    assert [n.onset for n in seq] == [0.0, 0.5]


def test_empty_sequence():
    seq = NoteSequence([])
    assert len(seq) == 0 and seq.duration() == 0.0


def test_zero_duration_reports_index():
    with pytest.raises(NonPositiveDuration) as info:
        NoteSequence([(60, 1.0, 1.0)])
    assert info.value.index == 0


def test_error_index_is_position_in_input():
    with pytest.raises(PitchOutOfRange) as info:
        validate_notes([(60, 0, 1), (61, 0, 1), (300, 0, 1)])
    assert info.value.index == 2


def test_tuple_with_float_pitch_accepted():
    assert validate_notes([(60.0, 0, 1)])[0].pitch == 60


def test_chord_order_is_by_pitch_then_offset():
    seq = NoteSequence([(64, 0, 2), (60, 0, 1), (60, 0, 0.5)])
    assert [(n.pitch, n.offset) for n in seq] == [(60, 0.5), (60, 1.0), (64, 2.0)]


@given(note_lists())
def test_canonical_order_permutation(notes):
    seq, perm = canonical_order(notes)
    assert sorted(perm.tolist()) == list(range(len(notes)))
    for k, note in enumerate(seq):
        assert note is notes[perm[k]]
    keys = [n.sort_key() for n in seq]
    assert keys == sorted(keys)
    assert seq == NoteSequence(notes)


@pytest.mark.parametrize("anchors, t, expected", [
    ([(0, 0), (10, 20)], 5, 10.0),
    ([(0, 0), (10, 20)], 0, 0.0),
    ([(0, 0), (2, 2), (4, 8)], 3, 5.0),
    ([(0, 0), (2, 2), (4, 8)], 6, 14.0),
    ([(1, 1), (2, 3)], 0, -1.0),
])
def test_time_map_lookup(anchors, t, expected):
    assert time_map_lookup(TimeMap(anchors), t) == expected


def test_time_map_array_input():
    tm = TimeMap([(0, 0), (10, 20)])
    np.testing.assert_array_equal(tm(np.array([0.0, 5.0, 10.0])), [0.0, 10.0, 20.0])


def test_time_map_errors():
    with pytest.raises(TooFewAnchors):
        TimeMap([(0, 0)])(1.0)
    with pytest.raises(InvalidTimeMap):
        TimeMap([(0, 0), (0, 1)])
    with pytest.raises(InvalidTimeMap):
        TimeMap([(0, 1), (1, 0)])
    with pytest.raises(InvalidTimeMap):
        TimeMap([(0, 0), (float("inf"), 1)])


@given(st.lists(st.tuples(st.floats(0.001, 5), st.floats(0, 5)), min_size=2, max_size=20),
       st.lists(st.floats(-10, 60), min_size=1, max_size=20))
def test_time_map_monotone_and_exact_at_anchors(steps, queries):
    a = np.cumsum([s for s, _ in steps])
    b = np.cumsum([s for _, s in steps])
    tm = TimeMap(np.column_stack([a, b]))
    np.testing.assert_array_equal(tm(a), b)
    q = np.sort(np.asarray(queries))
    assert np.all(np.diff(tm(q)) >= 0)


def test_warping_path_validation():
    p = WarpingPath([(0, 0), (1, 1), (1, 2)])
    assert p.end == (1, 2) and len(p) == 3
    assert p.transposed() == WarpingPath([(0, 0), (1, 1), (2, 1)])
    for bad in ([(1, 0)], [(0, 0), (2, 1)], [(0, 0), (0, 0)], [(0, 0), (1, 0), (0, 1)], []):
        with pytest.raises(ValidationError):
            WarpingPath(bad)


def test_matching_partition_check():
    m = NoteMatching(((0, 1),), (1,), (0,))
    m.check(2, 2)
    with pytest.raises(ValidationError):
        m.check(3, 2)
    t = m.transposed()
    assert t.matched == ((1, 0),) and t.missing == (0,) and t.extra == (1,)
