"""Three-valued piano rolls: 0 = off, 1 = sustain, 2 = onset."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidFramePeriod, ValidationError
from .model import NoteLike, validate_notes

OFF, SUSTAIN, ONSET = 0, 1, 2
N_PITCHES = 128
DEFAULT_FRAME_PERIOD = 0.02
# guards floor/ceil against representation error, e.g. 0.3 / 0.1 = 2.9999999999999996
_FRAME_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class PianoRoll:
    values: np.ndarray  # (K, N) uint8
    frame_period: float

    @property
    def n_pitches(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def time_to_frame(t, frame_period: float):
    return np.floor(np.asarray(t) / frame_period + _FRAME_EPS).astype(np.int64)


def n_frames_for(duration: float, frame_period: float) -> int:
    return max(0, math.ceil(duration / frame_period - _FRAME_EPS))


def notes_to_roll(
    notes: Iterable[NoteLike],
    frame_period: float = DEFAULT_FRAME_PERIOD,
    total_duration: float | None = None,
    n_pitches: int = N_PITCHES,
) -> PianoRoll:
    """Render notes into a (pitch x frame) roll.

    Each note marks its onset frame with 2 and the following frames up to
    (excluding) ``ceil(offset / frame_period)`` with 1; an onset marker is
    never overwritten by a sustain. Notes starting at or after
    ``total_duration`` are left out, longer ones are cut at the last frame.
    """
    if not frame_period > 0:
        raise InvalidFramePeriod(f"frame period must be positive, got {frame_period}")
    notes = validate_notes(notes)
    if total_duration is None:
        total_duration = max((n.offset for n in notes), default=0.0)
    if total_duration < 0:
        raise ValidationError(f"total duration must be non-negative, got {total_duration}")
    n_frames = n_frames_for(total_duration, frame_period)
    roll = np.zeros((n_pitches, n_frames), dtype=np.uint8)
    onset_cells = []
    for note in notes:
        if note.pitch >= n_pitches:
            continue
        start = int(time_to_frame(note.onset, frame_period))
        if start >= n_frames:
            continue
        stop = min(math.ceil(note.offset / frame_period - _FRAME_EPS), n_frames)
        if stop > start + 1:
            roll[note.pitch, start + 1:stop] = SUSTAIN
        onset_cells.append((note.pitch, start))
    for pitch, frame in onset_cells:
        roll[pitch, frame] = ONSET
    return PianoRoll(roll, float(frame_period))


def roll_columns(roll: PianoRoll) -> np.ndarray:
    """Frames as real vectors, shape (N, K)."""
    return np.ascontiguousarray(roll.values.T, dtype=float)
