"""Statistical misalignment generator.

Fits six histograms (standardized per-note onset shifts and duration
ratios, plus the per-piece means and standard deviations of both) from
matched score/performance pairs, then samples artificial "scores" from a
reference note list. Also provides single-linkage chord clustering and
random missing/extra region labelling.

All sampling uses ``numpy.random.Generator(PCG64(seed))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidHistogram, TooFewMatches, TooFewNotes, ValidationError
from .model import Note, NoteLike, NoteMatching, NoteSequence, validate_notes

log = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"
DEFAULT_BINS = 100
DURATION_RATIO_FLOOR = 0.05
CLUSTER_THRESHOLD_RANGE = (0.03, 0.07)
MIN_CLUSTER_DURATION = 0.01
HISTOGRAM_KEYS = ("x_ons", "x_dur", "y_ons_m", "y_ons_std", "y_dur_m", "y_dur_std")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class Histogram:
    """Bin edges and (non-negative) counts.

    A single bin with two equal edges is a point mass: it always samples
    that exact value. Every other histogram needs strictly increasing edges.
    """

    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        if edges.ndim != 1 or counts.ndim != 1 or len(edges) != len(counts) + 1 or len(counts) == 0:
            raise InvalidHistogram("need len(edges) == len(counts) + 1 >= 2")
        if not (np.isfinite(edges).all() and np.isfinite(counts).all()):
            raise InvalidHistogram("edges and counts must be finite")
        point_mass = len(counts) == 1 and edges[0] == edges[1]
        if not point_mass and np.any(np.diff(edges) <= 0):
            raise InvalidHistogram("edges must be strictly increasing")
        if np.any(counts < 0):
            raise InvalidHistogram("counts must be non-negative")
        edges.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return np.array_equal(self.edges, other.edges) and np.array_equal(self.counts, other.counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @classmethod
    def point(cls, value: float, count: float = 1.0) -> "Histogram":
        return cls(np.array([value, value]), np.array([count]))

    @classmethod
    def from_values(cls, values, bins: int = DEFAULT_BINS) -> "Histogram":
        """Histogram spanning the observed min..max; constant data gives a point mass."""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise InvalidHistogram("cannot build a histogram from no values")
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            return cls.point(lo, float(values.size))
        counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
        return cls(edges, counts.astype(float))

    def mean(self) -> float:
        centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        return float(np.dot(centers, self.counts) / self.total)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Pick bins proportionally to counts, then a uniform value inside the bin."""
        if self.total <= 0:
            raise InvalidHistogram("histogram has no mass to sample from")
        n = 1 if size is None else size
        p = self.counts / self.total
        idx = rng.choice(len(self.counts), size=n, p=p)
        u = rng.random(n)
        lo = self.edges[idx]
        hi = self.edges[idx + 1]
        values = np.where(hi > lo, np.minimum(lo + u * (hi - lo), np.nextafter(hi, lo)), lo)
        return float(values[0]) if size is None else values


@dataclass(frozen=True)
class MisalignmentModel:
    x_ons: Histogram
    x_dur: Histogram
    y_ons_m: Histogram
    y_ons_std: Histogram
    y_dur_m: Histogram
    y_dur_std: Histogram

    def __post_init__(self):
        for key in HISTOGRAM_KEYS:
            if getattr(self, key).total <= 0:
                raise InvalidHistogram(f"histogram {key} is not sampleable")

    def histograms(self) -> dict[str, Histogram]:
        return {key: getattr(self, key) for key in HISTOGRAM_KEYS}

    @classmethod
    def identity(cls) -> "MisalignmentModel":
        """Model whose samples reproduce their input exactly."""
        zero = Histogram.point(0.0)
        return cls(zero, zero, zero, zero, Histogram.point(1.0), zero)


def _standardize(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(values))
    std = float(np.std(values))
    if std == 0.0:
        return np.zeros_like(values), mean, 0.0
    return (values - mean) / std, mean, std


def piece_statistics(score: Sequence[Note], perf: Sequence[Note], matching: NoteMatching):
    """Per matched note onset shift (perf - score) and duration ratio (perf / score)."""
    if len(matching.matched) < 2:
        raise TooFewMatches(f"piece has {len(matching.matched)} matched notes, need >= 2")
    s_idx = np.array([m[0] for m in matching.matched])
    p_idx = np.array([m[1] for m in matching.matched])
    s_on = np.array([score[i].onset for i in s_idx])
    s_dur = np.array([score[i].duration for i in s_idx])
    p_on = np.array([perf[i].onset for i in p_idx])
    p_dur = np.array([perf[i].duration for i in p_idx])
    return p_on - s_on, p_dur / s_dur


def fit_model(pairs: Iterable[tuple], bins: int = DEFAULT_BINS) -> MisalignmentModel:
    """Fit the six-histogram model.

    ``pairs`` holds ``(score, perf, matching)`` triples where the matching
    indexes the canonically sorted score and performance, and the score
    was already stretched to the performance duration.
    """
    x_ons, x_dur = [], []
    y = {key: [] for key in HISTOGRAM_KEYS[2:]}
    for k, (score, perf, matching) in enumerate(pairs):
        score = NoteSequence(score) if not isinstance(score, NoteSequence) else score
        perf = NoteSequence(perf) if not isinstance(perf, NoteSequence) else perf
        shifts, ratios = piece_statistics(score, perf, matching)
        z_on, m_on, s_on = _standardize(shifts)
        z_dur, m_dur, s_dur = _standardize(ratios)
        if s_on == 0.0 or s_dur == 0.0:
            log.debug("piece %d has zero variance; standardized values set to 0", k)
        x_ons.append(z_on)
        x_dur.append(z_dur)
        y["y_ons_m"].append(m_on)
        y["y_ons_std"].append(s_on)
        y["y_dur_m"].append(m_dur)
        y["y_dur_std"].append(s_dur)
    if not x_ons:
        raise ValidationError("fit_model needs at least one piece")
    return MisalignmentModel(
        x_ons=Histogram.from_values(np.concatenate(x_ons), bins),
        x_dur=Histogram.from_values(np.concatenate(x_dur), bins),
        **{key: Histogram.from_values(vals, bins) for key, vals in y.items()},
    )


def sample_misaligned(notes: Iterable[NoteLike], model: MisalignmentModel, seed: int) -> tuple[Note, ...]:
    """Draw a misaligned copy of ``notes``, keeping their order.

    Piece-level mean/std pairs are drawn once; each note then gets a
    standardized onset shift and duration ratio. The duration ratio is
    floored at 0.05 so every output note keeps a positive duration.
    """
    notes = validate_notes(notes)
    rng = make_rng(seed)
    m_ons = model.y_ons_m.sample(rng)
    s_ons = model.y_ons_std.sample(rng)
    m_dur = model.y_dur_m.sample(rng)
    s_dur = model.y_dur_std.sample(rng)
    n = len(notes)
    if n == 0:
        return ()
    z_ons = model.x_ons.sample(rng, n)
    z_dur = model.x_dur.sample(rng, n)
    shift = z_ons * s_ons + m_ons
    ratio = np.maximum(z_dur * s_dur + m_dur, DURATION_RATIO_FLOOR)
    out = []
    for i, note in enumerate(notes):
        onset = note.onset + shift[i]
        # offset + shift + dur*(ratio-1) == onset' + dur*ratio, exact for the identity model
        offset = note.offset + shift[i] + note.duration * (ratio[i] - 1.0)
        if onset < 0.0:
            offset -= onset
            onset = 0.0
        if not offset > onset:
            offset = onset + note.duration * DURATION_RATIO_FLOOR
        out.append(note.with_times(onset, offset))
    return tuple(out)


def single_linkage_clusters(values: np.ndarray, threshold: float) -> np.ndarray:
    """Cluster labels for 1-D single linkage stopped at ``threshold``.

    Two clusters merge while their closest members are less than
    ``threshold`` apart, which in one dimension means splitting the sorted
    values at every gap >= threshold. Labels follow ascending value order.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(values, kind="stable")
    gaps = np.diff(values[order])
    sorted_labels = np.concatenate([[0], np.cumsum(gaps >= threshold)])
    labels = np.empty(values.size, dtype=np.int64)
    labels[order] = sorted_labels
    return labels


def _cluster_mean(vals: np.ndarray) -> float:
    lo, hi = vals.min(), vals.max()
    if lo == hi:
        return float(lo)
    return float(min(max(math.fsum(vals) / len(vals), lo), hi))


def cluster_chord_onsets(
    notes: Iterable[NoteLike], threshold: float | None = None, seed: int | None = None
) -> tuple[Note, ...]:
    """Snap near-simultaneous onsets to their cluster mean, keeping note order.

    When ``threshold`` is omitted it is drawn uniformly from [0.03, 0.07] s
    with ``seed``. Offsets stay put unless they would precede the new onset.
    """
    notes = validate_notes(notes)
    if threshold is None:
        threshold = draw_cluster_threshold(seed if seed is not None else 0)
    if not threshold > 0:
        raise ValidationError("threshold must be positive")
    ons = np.array([n.onset for n in notes], dtype=float)
    labels = single_linkage_clusters(ons, threshold)
    means = {}
    for lab in np.unique(labels):
        means[int(lab)] = _cluster_mean(ons[labels == lab])
    out = []
    for note, lab in zip(notes, labels):
        onset = means[int(lab)]
        offset = note.offset if note.offset > onset else onset + MIN_CLUSTER_DURATION
        out.append(note.with_times(onset, offset))
    return tuple(out)


def draw_cluster_threshold(seed: int) -> float:
    lo, hi = CLUSTER_THRESHOLD_RANGE
    return float(make_rng(seed).uniform(lo, hi))


class MissingExtra(NamedTuple):
    score: tuple[Note, ...]
    missing: frozenset[int]
    extra: frozenset[int]


@dataclass(frozen=True)
class Region:
    start: int
    stop: int
    label: str

    def indices(self) -> range:
        return range(self.start, self.stop)


def draw_regions(n_notes: int, seed: int, max_run_divisor: int = 5) -> list[Region]:
    """Random contiguous runs labelled "missing" or "extra".

    The total count is drawn from U(0.1 L, 0.5 L); each run length from
    U(1, max(2, n / max_run_divisor)), capped by what is left and by the
    free space around the chosen start.
    """
    if n_notes < 10:
        raise TooFewNotes(f"need at least 10 notes, got {n_notes}")
    rng = make_rng(seed)
    lo_n, hi_n = math.ceil(0.1 * n_notes), math.floor(0.5 * n_notes)
    n = int(min(max(round(rng.uniform(0.1 * n_notes, 0.5 * n_notes)), lo_n), hi_n))
    p_missing = rng.uniform(0.25, 0.75)
    max_run = max(2, int(round(n / max_run_divisor)))
    labelled = np.zeros(n_notes, dtype=bool)
    regions = []
    remaining = n
    while remaining > 0:
        length = int(min(rng.integers(1, max_run + 1), remaining))
        free = np.flatnonzero(~labelled)
        start = int(free[rng.integers(len(free))])
        stop = start
        while stop < n_notes and not labelled[stop] and stop - start < length:
            stop += 1
        label = "missing" if rng.random() < p_missing else "extra"
        labelled[start:stop] = True
        regions.append(Region(start, stop, label))
        remaining -= stop - start
    return regions


def inject_missing_extra(notes: Iterable[NoteLike], seed: int) -> MissingExtra:
    """Label random regions as missing or extra.

    Returns the note list with "extra" notes removed (order kept) and the
    label sets over the original indices.
    """
    notes = validate_notes(notes)
    regions = draw_regions(len(notes), seed)
    missing = frozenset(i for r in regions if r.label == "missing" for i in r.indices())
    extra = frozenset(i for r in regions if r.label == "extra" for i in r.indices())
    kept = tuple(n for i, n in enumerate(notes) if i not in extra)
    return MissingExtra(kept, missing, extra)
