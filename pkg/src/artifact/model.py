"""Core value types: notes, note sequences, warping paths, matchings, time maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Tuple, Union, overload

import numpy as np

from .errors import (
    InvalidTimeMap,
    InvalidVelocity,
    NonPositiveDuration,
    PitchOutOfRange,
    TooFewAnchors,
    ValidationError,
)

NoteLike = Union["Note", Tuple]


@dataclass(frozen=True, slots=True)
class Note:
    """A pitched event. Times are in seconds."""

    pitch: int
    onset: float
    offset: float
    velocity: int | None = None

    def __post_init__(self):
        _check_note(self.pitch, self.onset, self.offset, self.velocity, None)

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    def sort_key(self) -> tuple[float, int, float]:
        return (self.onset, self.pitch, self.offset)

    def with_times(self, onset: float, offset: float) -> "Note":
        return Note(self.pitch, float(onset), float(offset), self.velocity)


def _check_note(pitch, onset, offset, velocity, index):
    if not isinstance(pitch, (int, np.integer)) or isinstance(pitch, bool) or not 0 <= pitch <= 127:
        raise PitchOutOfRange(index, pitch)
    if not (np.isfinite(onset) and np.isfinite(offset)) or onset < 0:
        raise NonPositiveDuration(index, onset, offset)
    if not offset > onset:
        raise NonPositiveDuration(index, onset, offset)
    if velocity is not None and (
        not isinstance(velocity, (int, np.integer)) or not 0 <= velocity <= 127
    ):
        raise InvalidVelocity(index, velocity)


def _to_note(item: NoteLike, index: int) -> Note:
    if isinstance(item, Note):
        return item
    if len(item) == 3:
        pitch, onset, offset = item
        velocity = None
    elif len(item) == 4:
        pitch, onset, offset, velocity = item
    else:
        raise ValidationError(f"note {index}: expected (pitch, onset, offset[, velocity])")
    if isinstance(pitch, (float, np.floating)) and float(pitch).is_integer():
        pitch = int(pitch)
    if isinstance(pitch, np.integer):
        pitch = int(pitch)
    if isinstance(velocity, np.integer):
        velocity = int(velocity)
    _check_note(pitch, onset, offset, velocity, index)
    return Note(pitch, float(onset), float(offset), velocity)


def validate_notes(notes: Iterable[NoteLike]) -> tuple[Note, ...]:
    """Validate notes while keeping their given (identity) order.

    Errors carry the offending note's position in ``notes``.
    """
    out = []
    for i, item in enumerate(notes):
        out.append(_to_note(item, i))
    return tuple(out)


class NoteSequence(Sequence[Note]):
    """Immutable note list kept sorted by ``(onset, pitch, offset)``.

    Construction validates every note and sorts stably; chords (equal
    onsets) are allowed.
    """

    __slots__ = ("_notes",)

    def __init__(self, notes: Iterable[NoteLike] = ()):
        checked = validate_notes(notes)
        self._notes: tuple[Note, ...] = tuple(sorted(checked, key=Note.sort_key))

    @classmethod
    def _trusted(cls, notes: tuple[Note, ...]) -> "NoteSequence":
        seq = cls.__new__(cls)
        seq._notes = notes
        return seq

    def __len__(self) -> int:
        return len(self._notes)

    @overload
    def __getitem__(self, i: int) -> Note: ...

    @overload
    def __getitem__(self, i: slice) -> "NoteSequence": ...

    def __getitem__(self, i):
        if isinstance(i, slice):
            return NoteSequence._trusted(self._notes[i])
        return self._notes[i]

    def __iter__(self) -> Iterator[Note]:
        return iter(self._notes)

    def __eq__(self, other) -> bool:
        if isinstance(other, NoteSequence):
            return self._notes == other._notes
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._notes)

    def __repr__(self) -> str:
        return f"NoteSequence({len(self._notes)} notes)"

    @property
    def notes(self) -> tuple[Note, ...]:
        return self._notes

    def onsets(self) -> np.ndarray:
        return onsets(self._notes)

    def offsets(self) -> np.ndarray:
        return offsets(self._notes)

    def pitches(self) -> np.ndarray:
        return pitches(self._notes)

    def duration(self) -> float:
        """Latest offset, or 0 for an empty sequence."""
        return float(self.offsets().max()) if self._notes else 0.0


def onsets(notes: Sequence[Note]) -> np.ndarray:
    return np.fromiter((n.onset for n in notes), dtype=float, count=len(notes))


def offsets(notes: Sequence[Note]) -> np.ndarray:
    return np.fromiter((n.offset for n in notes), dtype=float, count=len(notes))


def pitches(notes: Sequence[Note]) -> np.ndarray:
    return np.fromiter((n.pitch for n in notes), dtype=np.int64, count=len(notes))


def validate_sequence(notes: Iterable[NoteLike]) -> NoteSequence:
    """Return the canonically sorted, validated sequence.

    >>> validate_sequence([(60, 0.5, 1.0), (60, 0.0, 0.4)])[0].onset
    0.0
    """
    if isinstance(notes, NoteSequence):
        return notes
    return NoteSequence(notes)


def canonical_order(notes: Iterable[NoteLike]) -> tuple[NoteSequence, np.ndarray]:
    """Sort notes canonically and return the permutation used.

    ``seq[k] is notes[perm[k]]`` for every k, so results computed on
    ``seq`` can be scattered back to identity order with ``out[perm] = res``.
    """
    checked = validate_notes(notes)
    perm = sorted(range(len(checked)), key=lambda i: checked[i].sort_key())
    seq = NoteSequence._trusted(tuple(checked[i] for i in perm))
    return seq, np.asarray(perm, dtype=np.int64)


class WarpingPath:
    """Monotone list of ``(index_a, index_b)`` pairs with unit steps."""

    __slots__ = ("pairs",)

    def __init__(self, pairs):
        arr = np.asarray(pairs, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
            raise ValidationError("warping path must be a non-empty list of index pairs")
        if arr[0, 0] != 0 or arr[0, 1] != 0:
            raise ValidationError("warping path must start at (0, 0)")
        steps = np.diff(arr, axis=0)
        ok = ((steps == 0) | (steps == 1)).all(axis=1) & (steps.sum(axis=1) > 0)
        if not ok.all():
            bad = int(np.argmin(ok))
            raise ValidationError(f"invalid warping step at position {bad + 1}")
        arr.setflags(write=False)
        self.pairs = arr

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return (tuple(map(int, p)) for p in self.pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, WarpingPath) and np.array_equal(self.pairs, other.pairs)

    def __repr__(self) -> str:
        return f"WarpingPath(len={len(self.pairs)}, end={self.end})"

    @property
    def end(self) -> tuple[int, int]:
        return int(self.pairs[-1, 0]), int(self.pairs[-1, 1])

    def transposed(self) -> "WarpingPath":
        return WarpingPath(self.pairs[:, ::-1])


@dataclass(frozen=True)
class NoteMatching:
    """Partition of two note sequences into matched pairs, missing and extra notes.

    Indices refer to positions in the canonically sorted sequences.
    """

    matched: tuple[tuple[int, int], ...]
    missing: tuple[int, ...]
    extra: tuple[int, ...]

    def check(self, n_score: int, n_perf: int) -> None:
        s = sorted([m[0] for m in self.matched] + list(self.missing))
        p = sorted([m[1] for m in self.matched] + list(self.extra))
        if s != list(range(n_score)) or p != list(range(n_perf)):
            raise ValidationError("matching is not a partition of both sequences")

    def transposed(self) -> "NoteMatching":
        return NoteMatching(
            tuple(sorted((p, s) for s, p in self.matched)), self.extra, self.missing
        )


class TimeMap:
    """Piecewise-linear map from time domain A to time domain B."""

    __slots__ = ("time_a", "time_b")

    def __init__(self, anchors):
        arr = np.asarray(anchors, dtype=float).reshape(-1, 2) if len(anchors) else np.zeros((0, 2))
        a = np.ascontiguousarray(arr[:, 0])
        b = np.ascontiguousarray(arr[:, 1])
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise InvalidTimeMap("anchors must be finite")
        if np.any(np.diff(a) <= 0):
            raise InvalidTimeMap("anchor times in domain A must be strictly increasing")
        if np.any(np.diff(b) < 0):
            raise InvalidTimeMap("anchor times in domain B must be non-decreasing")
        a.setflags(write=False)
        b.setflags(write=False)
        self.time_a = a
        self.time_b = b

    @property
    def anchors(self) -> list[tuple[float, float]]:
        return list(zip(self.time_a.tolist(), self.time_b.tolist()))

    def __len__(self) -> int:
        return len(self.time_a)

    def __repr__(self) -> str:
        return f"TimeMap({len(self)} anchors)"

    def __call__(self, t):
        return time_map_lookup(self, t)


def time_map_lookup(time_map: TimeMap, t):
    """Interpolate ``t`` through the map; extrapolate with the edge slopes.

    Accepts a scalar or an array and returns the same shape.
    """
    a, b = time_map.time_a, time_map.time_b
    if len(a) < 2:
        raise TooFewAnchors(f"need at least 2 anchors, have {len(a)}")
    scalar = np.ndim(t) == 0
    x = np.atleast_1d(np.asarray(t, dtype=float))
    n = len(a)
    j = np.clip(np.searchsorted(a, x, side="right") - 1, 0, n - 2)
    a0, a1, b0, b1 = a[j], a[j + 1], b[j], b[j + 1]
    frac = (x - a0) / (a1 - a0)
    inner = np.where(frac >= 1.0, b1, np.clip(b0 + frac * (b1 - b0), b0, b1))
    first_slope = (b[1] - b[0]) / (a[1] - a[0])
    last_slope = (b[-1] - b[-2]) / (a[-1] - a[-2])
    out = np.where(
        x < a[0],
        b[0] + (x - a[0]) * first_slope,
        np.where(x > a[-1], b[-1] + (x - a[-1]) * last_slope, inner),
    )
    return float(out[0]) if scalar else out
