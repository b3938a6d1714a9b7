"""End-to-end alignment pipelines.

* SEBA: synthesize the score, compare chroma + onset features with the
  performance audio, warp the score through the DTW path.
* TAFE: align three-valued piano rolls of the score and of a transcription
  with FastDTW; only the warping path is used, never the transcribed times.
* EIFE: match score notes to transcribed notes, copy the transcribed onsets
  of matched notes, interpolate the rest through the matched-onset map and
  refine them with SEBA.

Every pipeline accepts the score notes in any order and returns the
realigned notes in that same order; only times change.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .audiofeat import (
    N_CHROMA,
    AudioBuffer,
    FeatureConfig,
    SynthConfig,
    seba_features,
    synthesize,
)
from .budget import Budget, ensure
from .dtw import DistanceFunction, dtw_on_matrix, fastdtw, fastdtw_split, path_to_time_map, split_distance_matrix
from .errors import EmptyScore, EmptySequence, TooFewMatches, ValidationError
from .matcher import MatchConfig, match_notes, matching_to_time_map
from .model import Note, NoteLike, TimeMap, canonical_order, offsets, onsets, validate_notes, validate_sequence
from .pianoroll import notes_to_roll, roll_columns

log = logging.getLogger(__name__)

SEBA, TAFE, EIFE = "SEBA", "TAFE", "EIFE"
DEFAULT_FRAME_PERIOD = 0.02
DEFAULT_RADIUS = 178
MIN_DURATION = 1e-3
# SEBA uses the exact matrix DTW below this many cells, FastDTW above
EXACT_DTW_CELLS = 4_000_000


@dataclass(frozen=True)
class AlignmentResult:
    realigned_score: tuple[Note, ...]
    method: str
    diagnostics: dict = field(default_factory=dict)


def stretch_to_duration(notes: Iterable[NoteLike], target_duration: float, start: float = 0.0) -> tuple[Note, ...]:
    """Translate the earliest onset to ``start`` and scale the span to ``target_duration``."""
    notes = validate_notes(notes)
    if not notes:
        raise EmptyScore("cannot stretch an empty score")
    if not target_duration > 0:
        raise ValidationError(f"target duration must be positive, got {target_duration}")
    on, off = onsets(notes), offsets(notes)
    first = on.min()
    scale = target_duration / (off.max() - first)
    new_on = (on - first) * scale + start
    new_off = (off - first) * scale + start
    return tuple(n.with_times(a, b) for n, a, b in zip(notes, new_on, new_off))


def remap_notes(notes: tuple[Note, ...], time_map: TimeMap) -> tuple[Note, ...]:
    """Send onsets and offsets through ``time_map`` keeping durations positive."""
    new_on = np.maximum(time_map(onsets(notes)), 0.0)
    new_off = np.maximum(time_map(offsets(notes)), new_on + MIN_DURATION)
    return tuple(n.with_times(a, b) for n, a, b in zip(notes, new_on, new_off))


def _diagnostics(budget: Budget, **extra) -> dict:
    out = {"elapsed_sec": round(budget.elapsed, 6), "peak_bytes_estimate": int(budget.peak_bytes)}
    out.update(extra)
    return out


def seba_time_map(
    notes: tuple[Note, ...], perf_audio: AudioBuffer, frame_period: float = DEFAULT_FRAME_PERIOD,
    radius: int = DEFAULT_RADIUS, synth_cfg: SynthConfig = SynthConfig(),
    feature_cfg: FeatureConfig = FeatureConfig(), budget: Budget | None = None,
) -> TimeMap:
    """Score-time to audio-time map from DTW over the summed SEBA cost."""
    budget = ensure(budget)
    if len(perf_audio) == 0:
        raise EmptySequence("performance audio is empty")
    score_audio = synthesize(notes, perf_audio.sample_rate, synth_cfg, budget)
    fa, period_a = seba_features(score_audio, frame_period, feature_cfg, budget)
    fb, period_b = seba_features(perf_audio, frame_period, feature_cfg, budget)
    budget.check("features")
    if len(fa) * len(fb) <= EXACT_DTW_CELLS:
        budget.reserve(len(fa) * len(fb) * 8, "seba cost matrix")
        result = dtw_on_matrix(split_distance_matrix(fa, fb, N_CHROMA), budget)
    else:
        result = fastdtw_split(fa, fb, N_CHROMA, radius, budget)
    return path_to_time_map(result.path, period_a, period_b)


def align_seba(
    score: Iterable[NoteLike], perf_audio: AudioBuffer, frame_period: float = DEFAULT_FRAME_PERIOD,
    radius: int = DEFAULT_RADIUS, synth_cfg: SynthConfig = SynthConfig(),
    feature_cfg: FeatureConfig = FeatureConfig(), budget: Budget | None = None,
) -> AlignmentResult:
    budget = ensure(budget)
    notes = validate_notes(score)
    if not notes:
        raise EmptyScore("score has no notes")
    stretched = stretch_to_duration(notes, perf_audio.duration)
    tm = seba_time_map(stretched, perf_audio, frame_period, radius, synth_cfg, feature_cfg, budget)
    realigned = remap_notes(stretched, tm)
    return AlignmentResult(realigned, SEBA, _diagnostics(budget, notes=len(notes)))


def align_tafe(
    score: Iterable[NoteLike], transcription: Iterable[NoteLike], audio_duration: float,
    frame_period: float = DEFAULT_FRAME_PERIOD, dist=DistanceFunction.COSINE,
    radius: int = DEFAULT_RADIUS, budget: Budget | None = None,
) -> AlignmentResult:
    budget = ensure(budget)
    notes = validate_notes(score)
    if not notes:
        raise EmptyScore("score has no notes")
    trans = validate_sequence(transcription)
    if not trans:
        raise EmptySequence("transcription has no notes; its piano roll carries no information")
    stretched = stretch_to_duration(notes, audio_duration)
    roll_a = notes_to_roll(stretched, frame_period, max(audio_duration, max(n.offset for n in stretched)))
    roll_b = notes_to_roll(trans, frame_period, max(audio_duration, trans.duration()))
    budget.check("piano rolls")
    result = fastdtw(roll_columns(roll_a), roll_columns(roll_b), dist, radius, budget)
    tm = path_to_time_map(result.path, frame_period, frame_period)
    realigned = remap_notes(stretched, tm)
    return AlignmentResult(realigned, TAFE, _diagnostics(budget, notes=len(notes), dtw_cost=result.total_cost))


def align_eife(
    score: Iterable[NoteLike], transcription: Iterable[NoteLike], perf_audio: AudioBuffer,
    cfg: MatchConfig = MatchConfig(), frame_period: float = DEFAULT_FRAME_PERIOD,
    radius: int = DEFAULT_RADIUS, offsets_from: str = "interp", refine: bool = True,
    synth_cfg: SynthConfig = SynthConfig(), feature_cfg: FeatureConfig = FeatureConfig(),
    budget: Budget | None = None,
) -> AlignmentResult:
    """Note-level alignment driven by a transcription.

    ``offsets_from="interp"`` maps matched-note offsets through the
    matched-onset map; ``"amt"`` copies the transcribed offsets instead.
    Falls back to plain SEBA when fewer than two notes match.
    """
    if offsets_from not in ("interp", "amt"):
        raise ValidationError(f"offsets_from must be 'interp' or 'amt', got {offsets_from!r}")
    budget = ensure(budget)
    notes = validate_notes(score)
    if not notes:
        raise EmptyScore("score has no notes")
    trans = validate_sequence(transcription)
    if not trans:
        raise EmptySequence("transcription has no notes")
    stretched = stretch_to_duration(notes, perf_audio.duration)
    seq, perm = canonical_order(stretched)
    matching = match_notes(seq, trans, cfg, budget)
    budget.check("note matching")
    counts = {
        "matched": len(matching.matched),
        "missing": len(matching.missing),
        "extra": len(matching.extra),
        "missing_indices": sorted(int(perm[i]) for i in matching.missing),
        "extra_indices": list(matching.extra),
    }
    try:
        onset_map = matching_to_time_map(matching, seq, trans)
    except TooFewMatches as exc:
        log.info("EIFE falling back to SEBA: %s", exc)
        res = align_seba(notes, perf_audio, frame_period, radius, synth_cfg, feature_cfg, budget)
        return AlignmentResult(res.realigned_score, EIFE,
                               _diagnostics(budget, notes=len(notes), fallback=SEBA, **counts))

    s_on, s_off = seq.onsets(), seq.offsets()
    new_on = onset_map(s_on)
    new_off = onset_map(s_off)
    matched_s = np.array([i for i, _ in matching.matched], dtype=np.int64)
    matched_t = np.array([j for _, j in matching.matched], dtype=np.int64)
    new_on[matched_s] = trans.onsets()[matched_t]
    if offsets_from == "amt":
        new_off[matched_s] = trans.offsets()[matched_t]
    new_on = np.maximum(new_on, 0.0)
    new_off = np.maximum(new_off, new_on + MIN_DURATION)

    unmatched = np.array(matching.missing, dtype=np.int64)
    if refine and len(unmatched):
        interpolated = tuple(n.with_times(a, b) for n, a, b in zip(seq, new_on, new_off))
        seba_map = seba_time_map(interpolated, perf_audio, frame_period, radius, synth_cfg, feature_cfg, budget)
        new_on[unmatched] = np.maximum(seba_map(new_on[unmatched]), 0.0)
        new_off[unmatched] = np.maximum(seba_map(new_off[unmatched]), new_on[unmatched] + MIN_DURATION)

    realigned: list[Note | None] = [None] * len(notes)
    for k, note in enumerate(seq):
        realigned[perm[k]] = note.with_times(new_on[k], new_off[k])
    return AlignmentResult(tuple(realigned), EIFE, _diagnostics(budget, notes=len(notes), fallback=None, **counts))
