"""Seeded synthetic pieces and score/performance pairs for closed-loop experiments."""

from __future__ import annotations

import numpy as np

from .misalign import make_rng
from .model import Note, NoteSequence


def synthetic_piece(n_notes: int = 300, seed: int = 0, beat: float = 0.3,
                    chord_asynchrony: float = 0.02, tempo_drift: float = 0.15) -> NoteSequence:
    """Piano-style piece: a melody over sparse chords with drifting tempo.

    Onsets start at 0. Chord members get small random asynchronies,
    like a human performance.
    """
    rng = make_rng(seed)
    notes: list[Note] = []
    t = 0.0
    local_beat = beat
    while len(notes) < n_notes:
        local_beat = float(np.clip(local_beat * (1 + rng.normal(0, 0.03)), beat * (1 - tempo_drift), beat * (1 + tempo_drift)))
        size = int(rng.choice([1, 1, 1, 2, 3]))
        size = min(size, n_notes - len(notes))
        root = int(rng.integers(55, 79))
        pitches = sorted({root - int(d) for d in rng.choice([0, 4, 7, 12, 16], size=size, replace=False)})
        beats = float(rng.choice([1, 1, 2, 2, 3, 4]))
        for p in pitches:
            on = t + (abs(rng.normal(0, chord_asynchrony)) if len(pitches) > 1 else 0.0)
            dur = beats * local_beat * float(rng.uniform(0.7, 1.0))
            notes.append(Note(p, on, on + dur, int(rng.integers(40, 100))))
        t += local_beat * float(rng.choice([1, 1, 1, 2]))
    first = min(n.onset for n in notes)
    return NoteSequence(n.with_times(n.onset - first, n.offset - first) for n in notes)


def gaussian_pairs(n_pieces: int = 50, seed: int = 0, shift_mean: float = 0.05, shift_std: float = 0.02,
                   ratio_mean: float = 1.0, ratio_std: float = 0.1, n_notes: int = 60):
    """``(score, perf)`` pairs where every performance onset is the score onset
    plus a N(shift_mean, shift_std) draw and every duration is scaled by a
    N(ratio_mean, ratio_std) draw (floored at 0.2)."""
    rng = make_rng(seed)
    pairs = []
    for k in range(n_pieces):
        score = synthetic_piece(n_notes, seed=int(rng.integers(2**31)), chord_asynchrony=0.0)
        shifts = rng.normal(shift_mean, shift_std, len(score))
        ratios = np.maximum(rng.normal(ratio_mean, ratio_std, len(score)), 0.2)
        perf = []
        for n, d, r in zip(score, shifts, ratios):
            on = max(n.onset + d, 0.0)
            perf.append(n.with_times(on, on + n.duration * r))
        pairs.append((score, NoteSequence(perf)))
    return pairs
