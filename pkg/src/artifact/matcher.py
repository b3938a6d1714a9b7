"""Note-level matching with missing/extra detection and pitch-error tolerance.

A monotone alignment of the two onset-sorted note lists is found by
dynamic programming over three moves: match a score note with a
performance note, skip a score note (missing), skip a performance note
(extra). Matching costs ``onset_weight * |onset difference|`` plus a pitch
penalty that is zero for equal pitches, discounted for octave and fifth
errors and full otherwise; every skipped note costs ``skip_cost``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np

from .budget import Budget, ensure
from .errors import TooFewMatches, ValidationError
from .model import NoteLike, NoteMatching, NoteSequence, TimeMap, validate_sequence

_CHUNK_CELLS = 1 << 21


@dataclass(frozen=True)
class MatchConfig:
    onset_weight: float = 1.0
    pitch_mismatch_cost: float = 4.0
    skip_cost: float = 2.0
    octave_fifth_discount: float = 0.5
    window: float | None = None  # max |onset difference| for a match; also bounds the DP band
    chord_band: float | None = 0.05  # onsets closer than this form one chord, ordered by pitch

    def __post_init__(self):
        for name in ("onset_weight", "pitch_mismatch_cost", "skip_cost"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and non-negative, got {v}")
        if not 0.0 <= self.octave_fifth_discount <= 1.0:
            raise ValidationError("octave_fifth_discount must lie in [0, 1]")
        if self.window is not None and not self.window > 0:
            raise ValidationError("window must be positive")
        if self.chord_band is not None and not self.chord_band > 0:
            raise ValidationError("chord_band must be positive")


@numba.njit(cache=True)
def _pair_cost(s_on, s_pitch, p_on, p_pitch, onset_weight, pitch_cost, discount):
    c = onset_weight * abs(s_on - p_on)
    d = abs(s_pitch - p_pitch)
    if d == 0:
        return c
    if d == 12 or d == 7:
        return c + pitch_cost * discount
    return c + pitch_cost


@numba.njit(cache=True)
def _later(s_on, s_pitch, p_on, p_pitch):
    # True when the score note sorts after the performance note
    if s_on != p_on:
        return s_on > p_on
    return s_pitch >= p_pitch


@numba.njit(cache=True)
def _dp(s_on, s_pitch, p_on, p_pitch, onset_weight, pitch_cost, discount, skip, window,
        lo, hi, offs, r0, r1, acc, step):
    inf = np.inf
    for i in range(r0, r1):
        base = offs[i] - lo[i]
        for j in range(lo[i], hi[i] + 1):
            k = base + j
            if i == 0 and j == 0:
                acc[k] = 0.0
                step[k] = -1
                continue
            diag = inf
            up = inf
            left = inf
            if i > 0:
                plo = lo[i - 1]
                phi = hi[i - 1]
                pbase = offs[i - 1] - plo
                if j >= 1 and plo <= j - 1 <= phi:
                    if window < 0 or abs(s_on[i - 1] - p_on[j - 1]) <= window:
                        diag = acc[pbase + j - 1] + _pair_cost(
                            s_on[i - 1], s_pitch[i - 1], p_on[j - 1], p_pitch[j - 1],
                            onset_weight, pitch_cost, discount)
                if plo <= j <= phi:
                    up = acc[pbase + j] + skip
            if j - 1 >= lo[i]:
                left = acc[k - 1] + skip
            if diag <= up and diag <= left:
                acc[k] = diag
                step[k] = 0
            elif up < left:
                acc[k] = up
                step[k] = 1
            elif left < up:
                acc[k] = left
                step[k] = 2
            else:
                # equal skips: the note that sorts later is skipped last
                acc[k] = up
                if up == inf:
                    step[k] = 1
                elif _later(s_on[i - 1], s_pitch[i - 1], p_on[j - 1], p_pitch[j - 1]):
                    step[k] = 1
                else:
                    step[k] = 2


def chord_order(onsets: np.ndarray, pitches: np.ndarray, band: float | None):
    """Matching order: by onset cluster (single linkage at ``band``), then pitch.

    Returns the permutation and the cluster start time of every reordered note.
    """
    n = len(onsets)
    if band is None or n == 0:
        return np.arange(n), onsets.copy()
    gaps = np.diff(onsets) >= band
    labels = np.concatenate([[0], np.cumsum(gaps)])
    first = np.concatenate([[0], np.flatnonzero(gaps) + 1])
    starts = onsets[first][labels]
    order = np.lexsort((np.arange(n), pitches, starts))
    return order, starts[order]


def _band(s_on: np.ndarray, p_on: np.ndarray, window: float | None):
    n, m = len(s_on), len(p_on)
    if window is None:
        return np.zeros(n + 1, dtype=np.int64), np.full(n + 1, m, dtype=np.int64)
    lo = np.zeros(n + 1, dtype=np.int64)
    hi = np.full(n + 1, m, dtype=np.int64)
    lo[1:] = np.searchsorted(p_on, s_on - window, side="left")
    hi[:n] = np.searchsorted(p_on, s_on + window, side="right")
    return lo, hi


def _traceback(lo, offs, step, n, m):
    matched, missing, extra = [], [], []
    i, j = n, m
    while i > 0 or j > 0:
        s = step[offs[i] + j - lo[i]]
        if s == 0:
            matched.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif s == 1:
            missing.append(i - 1)
            i -= 1
        elif s == 2:
            extra.append(j - 1)
            j -= 1
        else:
            raise AssertionError("broken traceback")
    return NoteMatching(tuple(matched[::-1]), tuple(missing[::-1]), tuple(extra[::-1]))


def match_notes_with_cost(
    score: Iterable[NoteLike], perf: Iterable[NoteLike], cfg: MatchConfig = MatchConfig(),
    budget: Budget | None = None,
) -> tuple[NoteMatching, float]:
    """Like :func:`match_notes` but also returns the minimal total cost."""
    budget = ensure(budget)
    score = validate_sequence(score)
    perf = validate_sequence(perf)
    n, m = len(score), len(perf)
    s_order, s_key = chord_order(score.onsets(), score.pitches(), cfg.chord_band)
    p_order, p_key = chord_order(perf.onsets(), perf.pitches(), cfg.chord_band)
    s_on, p_on = score.onsets()[s_order], perf.onsets()[p_order]
    s_pitch, p_pitch = score.pitches()[s_order], perf.pitches()[p_order]
    band_width = None
    if cfg.window is not None:
        band_width = cfg.window + (cfg.chord_band or 0.0)
    lo, hi = _band(s_key, p_key, band_width)
    offs = np.zeros(n + 2, dtype=np.int64)
    np.cumsum(hi - lo + 1, out=offs[1:])
    total = int(offs[-1])
    budget.reserve(total * 9, "note matching")
    acc = np.empty(total, dtype=np.float64)
    step = np.empty(total, dtype=np.int8)
    window = -1.0 if cfg.window is None else float(cfg.window)
    r0 = 0
    while r0 <= n:
        budget.check("note matching")
        r1 = int(np.searchsorted(offs, offs[r0] + _CHUNK_CELLS, side="right")) - 1
        r1 = min(max(r1, r0 + 1), n + 1)
        _dp(s_on, s_pitch, p_on, p_pitch, float(cfg.onset_weight), float(cfg.pitch_mismatch_cost),
            float(cfg.octave_fifth_discount), float(cfg.skip_cost), window, lo, hi, offs, r0, r1, acc, step)
        r0 = r1
    cost = float(acc[offs[n] + m - lo[n]])
    raw = _traceback(lo, offs, step, n, m)
    matching = NoteMatching(
        tuple((int(s_order[i]), int(p_order[j])) for i, j in raw.matched),
        tuple(sorted(int(s_order[i]) for i in raw.missing)),
        tuple(sorted(int(p_order[j]) for j in raw.extra)),
    )
    return matching, cost


def match_notes(
    score: Iterable[NoteLike], perf: Iterable[NoteLike], cfg: MatchConfig = MatchConfig(),
    budget: Budget | None = None,
) -> NoteMatching:
    """Minimum-cost monotone matching between two note lists.

    Both inputs are put in canonical ``(onset, pitch, offset)`` order and the
    returned indices refer to that order. For the monotonicity constraint,
    notes whose onsets chain together with gaps below ``cfg.chord_band`` are
    treated as one chord and ordered by pitch, so chord asynchronies in a
    performance do not block matches. Either list may be empty.
    """
    return match_notes_with_cost(score, perf, cfg, budget)[0]


def matching_cost(matching: NoteMatching, score: NoteSequence, perf: NoteSequence,
                  cfg: MatchConfig = MatchConfig()) -> float:
    total = cfg.skip_cost * (len(matching.missing) + len(matching.extra))
    for i, j in matching.matched:
        total += _pair_cost(score[i].onset, score[i].pitch, perf[j].onset, perf[j].pitch,
                            cfg.onset_weight, cfg.pitch_mismatch_cost, cfg.octave_fifth_discount)
    return float(total)


def matching_to_time_map(matching: NoteMatching, score: Iterable[NoteLike],
                         perf: Iterable[NoteLike]) -> TimeMap:
    """Anchor (score onset, performance onset) per matched pair.

    Pairs sharing a score onset collapse into one anchor at the mean
    performance onset.
    """
    score = validate_sequence(score)
    perf = validate_sequence(perf)
    if len(matching.matched) < 2:
        raise TooFewMatches(f"{len(matching.matched)} matched pairs, need at least 2")
    s = np.array([score[i].onset for i, _ in matching.matched])
    p = np.array([perf[j].onset for _, j in matching.matched])
    keys, inverse = np.unique(s, return_inverse=True)
    if len(keys) < 2:
        raise TooFewMatches("matched notes share a single score onset")
    sums = np.bincount(inverse, weights=p)
    counts = np.bincount(inverse)
    means = sums / counts
    # chord-asynchrony averaging can leave tiny inversions; keep the map monotone
    means = np.maximum.accumulate(means)
    return TimeMap(np.column_stack([keys, means]))
