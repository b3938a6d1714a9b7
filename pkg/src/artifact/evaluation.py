"""Matched-ratio threshold curves, L1 macro errors and a noisy oracle transcriber."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyList, GridMismatch, IoFailure, LengthMismatch, ValidationError
from .misalign import make_rng
from .model import Note, NoteLike, NoteSequence, validate_notes

DEFAULT_THRESHOLDS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
# absorbs representation error in |a - b| <= t, e.g. |0.07 - 0.02| = 0.05000000000000001
_TOLERANCE = 1e-9
FIELDS = ("onsets", "offsets")


@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    thresholds: np.ndarray
    ratios: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        r = np.asarray(self.ratios, dtype=float)
        if t.shape != r.shape or t.ndim != 1:
            raise ValidationError("thresholds and ratios must be 1-D and of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "ratios", r)

    def __eq__(self, other):
        if not isinstance(other, ThresholdCurve):
            return NotImplemented
        return np.array_equal(self.thresholds, other.thresholds) and np.array_equal(self.ratios, other.ratios)

    def at(self, threshold: float) -> float:
        idx = np.flatnonzero(np.isclose(self.thresholds, threshold, rtol=0, atol=1e-12))
        if not len(idx):
            raise KeyError(threshold)
        return float(self.ratios[idx[0]])


@dataclass(frozen=True)
class NoiseSpec:
    onset_jitter_std: float = 0.0
    pitch_error_rate: float = 0.0
    deletion_rate: float = 0.0
    insertion_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.onset_jitter_std < 0:
            raise ValidationError("onset_jitter_std must be >= 0")
        for name in ("pitch_error_rate", "deletion_rate", "insertion_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")


def _times(notes: Sequence[Note], which: str) -> np.ndarray:
    if which == "onsets":
        return np.array([n.onset for n in notes], dtype=float)
    if which == "offsets":
        return np.array([n.offset for n in notes], dtype=float)
    raise ValidationError(f"which must be 'onsets' or 'offsets', got {which!r}")


def abs_errors(predicted: Sequence[Note], truth: Sequence[Note], which: str = "onsets") -> np.ndarray:
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predicted vs {len(truth)} ground-truth notes")
    return np.abs(_times(predicted, which) - _times(truth, which))


def threshold_curve(predicted: Sequence[Note], truth: Sequence[Note], which: str = "onsets",
                    thresholds: Iterable[float] = DEFAULT_THRESHOLDS) -> ThresholdCurve:
    """Fraction of index-aligned notes whose time error is within each threshold."""
    t = np.asarray(list(thresholds), dtype=float)
    err = abs_errors(predicted, truth, which)
    if len(err) == 0:
        return ThresholdCurve(t, np.ones_like(t))
    ratios = (err[None, :] <= t[:, None] + _TOLERANCE).mean(axis=1)
    return ThresholdCurve(t, ratios)


def macro_average(curves: Sequence[ThresholdCurve]) -> ThresholdCurve:
    curves = list(curves)
    if not curves:
        raise EmptyList("no curves to average")
    grid = curves[0].thresholds
    for c in curves[1:]:
        if not np.array_equal(c.thresholds, grid):
            raise GridMismatch("curves use different threshold grids")
    return ThresholdCurve(grid, np.mean([c.ratios for c in curves], axis=0))


def l1_macro_error(pairs: Iterable[tuple], which: str = "onsets") -> tuple[float, float]:
    """Mean and population std, across pieces, of each piece's mean absolute error."""
    per_piece = [float(np.mean(abs_errors(p, t, which))) for p, t in pairs]
    if not per_piece:
        raise EmptyList("no pieces to evaluate")
    return float(np.mean(per_piece)), float(np.std(per_piece))


def _pitch_error(pitch: int, rng: np.random.Generator) -> int:
    options = [pitch + d for d in (-12, -7, 7, 12) if 0 <= pitch + d <= 127]
    return int(options[rng.integers(len(options))]) if options else pitch


def oracle_transcribe(truth: Iterable[NoteLike], noise: NoiseSpec = NoiseSpec()) -> NoteSequence:
    """Simulated transcription with deletions, jitter, octave/fifth errors and insertions."""
    notes = validate_notes(truth)
    rng = make_rng(noise.seed)
    n = len(notes)
    delete = rng.random(n) < noise.deletion_rate
    jitter_on = rng.normal(0.0, noise.onset_jitter_std, n)
    jitter_off = rng.normal(0.0, 2.0 * noise.onset_jitter_std, n)
    wrong_pitch = rng.random(n) < noise.pitch_error_rate
    out = []
    for i, note in enumerate(notes):
        if delete[i]:
            continue
        onset = max(note.onset + jitter_on[i], 0.0)
        offset = note.offset + jitter_off[i]
        if not offset > onset:
            offset = onset + min(note.duration, 0.01)
        pitch = _pitch_error(note.pitch, rng) if wrong_pitch[i] else note.pitch
        out.append(Note(pitch, onset, offset, note.velocity))
    n_insert = int(round(noise.insertion_rate * n))
    if n_insert and notes:
        start = min(x.onset for x in notes)
        end = max(x.offset for x in notes)
        lo_p = min(x.pitch for x in notes)
        hi_p = max(x.pitch for x in notes)
        durations = np.array([x.duration for x in notes])
        for _ in range(n_insert):
            onset = float(rng.uniform(start, end))
            dur = float(durations[rng.integers(n)])
            out.append(Note(int(rng.integers(lo_p, hi_p + 1)), onset, onset + dur))
    return NoteSequence(out)


def write_curve_csv(curve: ThresholdCurve, path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold_sec", "ratio"])
            for t, r in zip(curve.thresholds, curve.ratios):
                w.writerow([repr(float(t)), repr(float(r))])
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_curve_csv(path) -> ThresholdCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["threshold_sec", "ratio"]:
        raise ValidationError(f"{path}: bad curve header")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
    return ThresholdCurve(data[:, 0], data[:, 1])


def write_summary_json(summary: dict, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
