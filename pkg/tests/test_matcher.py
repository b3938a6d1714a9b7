import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.budget import Budget
from artifact.errors import ResourceBudgetExceeded, TooFewMatches, ValidationError
from artifact.matcher import (
    MatchConfig,
    chord_order,
    match_notes,
    match_notes_with_cost,
    matching_cost,
    matching_to_time_map,
)
from artifact.model import Note, NoteMatching, NoteSequence

from oracles import brute_match_cost


def _grid_notes(g, n, pitches=(60, 61, 67, 72)):
    # onsets on a 1/8 s grid keep every cost exactly representable
    return NoteSequence(
        Note(int(g.choice(pitches)), k / 8, k / 8 + 0.25) for k in g.integers(0, 24, size=n)
    )


def _oracle(score, perf, cfg=MatchConfig()):
    return brute_match_cost(score.onsets(), score.pitches(), perf.onsets(), perf.pitches(),
                            cfg.onset_weight, cfg.pitch_mismatch_cost, cfg.skip_cost, cfg.octave_fifth_discount)


def test_identical_all_matched():
    seq = NoteSequence(Note(60 + k % 5, 0.3 * k, 0.3 * k + 0.2) for k in range(20))
    m = match_notes(seq, seq)
    assert m.matched == tuple((i, i) for i in range(20)) and not m.missing and not m.extra


def test_empty_score():
    perf = NoteSequence(Note(60, k, k + 0.5) for k in range(5))
    m = match_notes([], perf)
    assert m.matched == () and m.extra == (0, 1, 2, 3, 4)
    assert match_notes([], []) == NoteMatching((), (), ())


def test_ten_note_instance_against_oracle():
    score = NoteSequence(Note(60 + 2 * k, k / 2, k / 2 + 0.4) for k in range(10))
    perf_notes = [n for k, n in enumerate(score) if k != 4]
    perf_notes.append(Note(score[6].pitch + 1, score[6].onset, score[6].offset))
    perf_notes.remove(score[6])
    perf = NoteSequence(perf_notes)
    m, cost = match_notes_with_cost(score, perf)
    assert cost == _oracle(score, perf)
    assert 4 in m.missing
    # a one-semitone error costs 4, the same as skipping both; ties prefer the match
    assert (6, 5) in m.matched
    m.check(10, 9)


def test_octave_discount_used():
    score = NoteSequence([Note(60, 0, 1), Note(62, 1, 2)])
    perf = NoteSequence([Note(72, 0, 1), Note(62, 1, 2)])
    m, cost = match_notes_with_cost(score, perf)
    assert m.matched == ((0, 0), (1, 1)) and cost == 2.0


def test_oracle_equivalence_random():
    g = np.random.default_rng(7)
    for _ in range(60):
        score = _grid_notes(g, int(g.integers(0, 8)))
        perf = _grid_notes(g, int(g.integers(0, 8)))
        m, cost = match_notes_with_cost(score, perf)
        assert cost == _oracle(score, perf)
        assert matching_cost(m, score, perf) == cost
        m.check(len(score), len(perf))


@given(st.integers(0, 2**31), st.integers(0, 12), st.integers(0, 12))
def test_symmetry(seed, n, m):
    g = np.random.default_rng(seed)
    a, b = _grid_notes(g, n), _grid_notes(g, m)
    ab, cost_ab = match_notes_with_cost(a, b)
    ba, cost_ba = match_notes_with_cost(b, a)
    assert cost_ab == cost_ba
    assert ba == ab.transposed()


@given(st.integers(0, 2**31))
def test_monotone_without_chord_grouping(seed):
    g = np.random.default_rng(seed)
    s = NoteSequence(Note(int(p), float(t), float(t) + 0.3) for p, t in zip(g.integers(55, 70, 15), g.uniform(0, 5, 15)))
    p = NoteSequence(n.with_times(n.onset + g.normal(0, 0.05), n.onset + 1.0) for n in s if n.onset > 0.2)
    m = match_notes(s, p, MatchConfig(chord_band=None))
    perf_on = [p[j].onset for _, j in sorted(m.matched)]
    assert all(b >= a - 1e-9 for a, b in zip(perf_on, perf_on[1:]))


def test_asynchronous_chords_fully_matched():
    # score chords are simultaneous, performance chords spread by up to 40 ms in reverse pitch order
    score, perf = [], []
    for k in range(20):
        for r, pitch in enumerate((48, 55, 64)):
            score.append(Note(pitch, k * 0.5, k * 0.5 + 0.4))
            perf.append(Note(pitch, k * 0.5 + 0.02 * (2 - r), k * 0.5 + 0.4))
    m = match_notes(score, perf)
    assert len(m.matched) == 60
    assert len(match_notes(score, perf, MatchConfig(chord_band=None)).matched) < 60


def test_chord_order_groups_by_gap():
    order, key = chord_order(np.array([0.0, 0.01, 0.03, 0.2]), np.array([70, 60, 50, 40]), 0.05)
    assert order.tolist() == [2, 1, 0, 3] and key.tolist() == [0.0, 0.0, 0.0, 0.2]


def test_window_matches_full_when_wide_and_respects_limit():
    g = np.random.default_rng(3)
    for _ in range(20):
        s, p = _grid_notes(g, 12), _grid_notes(g, 12)
        _, full = match_notes_with_cost(s, p)
        _, wide = match_notes_with_cost(s, p, MatchConfig(window=100.0))
        assert wide == full
        m, narrow = match_notes_with_cost(s, p, MatchConfig(window=0.25))
        assert narrow >= full
        assert all(abs(s[i].onset - p[j].onset) <= 0.25 for i, j in m.matched)


def test_config_validation():
    with pytest.raises(ValidationError):
        MatchConfig(skip_cost=-1)
    with pytest.raises(ValidationError):
        MatchConfig(octave_fifth_discount=2)
    with pytest.raises(ValidationError):
        MatchConfig(window=0)


def test_budget_abort():
    seq = NoteSequence(Note(60, k * 0.01, k * 0.01 + 0.5) for k in range(3000))
    with pytest.raises(ResourceBudgetExceeded):
        match_notes(seq, seq, budget=Budget(1e-9, None))


def test_time_map_examples():
    score = NoteSequence([Note(60, 0, 1), Note(62, 1, 2), Note(64, 2, 3)])
    perf = NoteSequence([Note(60, 0.5, 1), Note(62, 1.5, 2), Note(64, 2.5, 3)])
    m = NoteMatching(((0, 0), (1, 1), (2, 2)), (), ())
    assert matching_to_time_map(m, score, perf).anchors == [(0, 0.5), (1, 1.5), (2, 2.5)]
    with pytest.raises(TooFewMatches):
        matching_to_time_map(NoteMatching(((0, 0),), (1, 2), (1, 2)), score, perf)


def test_time_map_chord_mean():
    score = NoteSequence([Note(60, 0, 1), Note(60, 1.0, 2), Note(64, 1.0, 2)])
    perf = NoteSequence([Note(60, 0, 1), Note(60, 1.0, 2), Note(64, 1.04, 2)])
    tm = matching_to_time_map(NoteMatching(((0, 0), (1, 1), (2, 2)), (), ()), score, perf)
    assert tm.anchors[1][0] == 1.0 and tm.anchors[1][1] == pytest.approx(1.02)
