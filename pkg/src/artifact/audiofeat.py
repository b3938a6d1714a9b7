"""Score synthesis and the two audio feature families used by SEBA.

The harmonic family is an STFT chroma; the percussive family is a
half-wave-rectified chroma-energy difference smeared forward with a
linearly decaying kernel and locally normalized. Their distance matrices
(cosine for chroma, euclidean for onsets) are summed with equal weight.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.io import wavfile
from scipy.ndimage import maximum_filter1d

from .budget import Budget, ensure
from .dtw import split_distance_matrix
from .errors import FramePeriodTooSmall, IoFailure, MalformedWav, UnsupportedEncoding, ValidationError
from .model import NoteLike, validate_notes

DEFAULT_SAMPLE_RATE = 22050
N_CHROMA = 12


@dataclass(frozen=True)
class SynthConfig:
    n_harmonics: int = 8
    decay: float = 0.5  # exponential time constant, s
    attack: float = 0.01
    release: float = 0.01
    peak: float = 0.9


@dataclass(frozen=True)
class FeatureConfig:
    window: int = 4096
    fmin: float = 55.0
    fmax: float = 5000.0
    smear: int = 10  # frames
    norm_window: float = 1.0  # s
    norm_floor: float = 1e-4
    silence_floor: float = 1e-8


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError("audio samples must be one-dimensional")
        if not self.sample_rate > 0:
            raise ValidationError("sample rate must be positive")
        if not np.isfinite(samples).all():
            raise ValidationError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True, eq=False)
class ChromaSequence:
    frames: np.ndarray  # (T, 12), each row unit L2 norm or zero
    energy: np.ndarray  # (T, 12) magnitudes before normalization
    frame_period: float


@dataclass(frozen=True, eq=False)
class OnsetFeatureSequence:
    frames: np.ndarray  # (T, 12)
    frame_period: float


def midi_to_hz(pitch) -> np.ndarray:
    return 440.0 * 2.0 ** ((np.asarray(pitch, dtype=float) - 69.0) / 12.0)


def synthesize(
    notes: Iterable[NoteLike], sample_rate: int = DEFAULT_SAMPLE_RATE, cfg: SynthConfig = SynthConfig(),
    budget: Budget | None = None,
) -> AudioBuffer:
    """Additive synthesis: 1/h-weighted harmonics, exponential decay, linear attack and release."""
    notes = validate_notes(notes)
    if not notes:
        return AudioBuffer(np.zeros(0), sample_rate)
    end = max(n.offset for n in notes) + cfg.release
    out = np.zeros(int(math.ceil(end * sample_rate)) + 1)
    nyquist = sample_rate / 2.0
    budget = ensure(budget)
    for k, note in enumerate(notes):
        if k % 64 == 0:
            budget.check("synthesis")
        start = int(round(note.onset * sample_rate))
        length = int(round((note.offset - note.onset + cfg.release) * sample_rate))
        if length <= 0:
            continue
        t = np.arange(length) / sample_rate
        env = np.exp(-t / cfg.decay)
        if cfg.attack > 0:
            env *= np.minimum(t / cfg.attack, 1.0)
        held = note.offset - note.onset
        if cfg.release > 0:
            env *= np.clip(1.0 - (t - held) / cfg.release, 0.0, 1.0)
        else:
            env *= t < held
        f0 = float(midi_to_hz(note.pitch))
        tone = np.zeros(length)
        for h in range(1, cfg.n_harmonics + 1):
            if h * f0 >= nyquist:
                break
            tone += np.sin(2.0 * np.pi * h * f0 * t) / h
        stop = min(start + length, len(out))
        out[start:stop] += (tone * env)[: stop - start]
    peak = np.abs(out).max()
    if peak > 0:
        out *= cfg.peak / peak
    return AudioBuffer(out, sample_rate)


def hop_length(frame_period: float, sample_rate: int) -> int:
    hop = int(round(frame_period * sample_rate))
    if hop < 1:
        raise FramePeriodTooSmall(f"frame period {frame_period} s is below one sample at {sample_rate} Hz")
    return hop


def _chroma_map(n_fft: int, sample_rate: int, fmin: float, fmax: float):
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    band = (freqs >= fmin) & (freqs <= fmax)
    bins = np.flatnonzero(band)
    classes = np.mod(np.round(69 + 12 * np.log2(freqs[bins] / 440.0)).astype(np.int64), N_CHROMA)
    return bins, classes


def stft_magnitude(samples: np.ndarray, window: int, hop: int, budget: Budget | None = None) -> np.ndarray:
    """Centered Hann-window STFT magnitudes, shape (frames, window // 2 + 1)."""
    budget = ensure(budget)
    pad = window // 2
    padded = np.pad(samples, (pad, pad))
    n_frames = 1 + len(samples) // hop
    need = (n_frames - 1) * hop + window
    if len(padded) < need:
        padded = np.pad(padded, (0, need - len(padded)))
    win = np.hanning(window + 1)[:-1]
    frames = np.lib.stride_tricks.sliding_window_view(padded, window)[::hop][:n_frames]
    out = np.empty((n_frames, window // 2 + 1))
    budget.reserve(out.nbytes, "stft")
    chunk = 512
    for s in range(0, n_frames, chunk):
        budget.check("stft")
        out[s:s + chunk] = np.abs(np.fft.rfft(frames[s:s + chunk] * win, axis=1))
    return out


def chroma_features(
    audio: AudioBuffer, frame_period: float = 0.02, cfg: FeatureConfig = FeatureConfig(),
    budget: Budget | None = None,
) -> ChromaSequence:
    """12-bin chroma; frame ``n`` is centred at ``n * hop / sample_rate``."""
    if len(audio) == 0:
        raise ValidationError("cannot extract features from an empty buffer")
    hop = hop_length(frame_period, audio.sample_rate)
    mag = stft_magnitude(audio.samples, cfg.window, hop, budget)
    bins, classes = _chroma_map(cfg.window, audio.sample_rate, cfg.fmin, cfg.fmax)
    energy = np.zeros((mag.shape[0], N_CHROMA))
    for c in range(N_CHROMA):
        energy[:, c] = mag[:, bins[classes == c]].sum(axis=1)
    norms = np.linalg.norm(energy, axis=1, keepdims=True)
    silent = norms[:, 0] <= cfg.silence_floor
    energy[silent] = 0.0
    frames = np.divide(energy, norms, out=np.zeros_like(energy), where=~silent[:, None])
    return ChromaSequence(frames, energy, hop / audio.sample_rate)


def onset_features(chroma: ChromaSequence, cfg: FeatureConfig = FeatureConfig()) -> OnsetFeatureSequence:
    """Rectified energy increase per chroma class, smeared over ``cfg.smear`` frames."""
    energy = chroma.energy
    if energy.shape[0] == 0:
        raise ValidationError("onset features need at least one frame")
    diff = np.diff(energy, axis=0, prepend=energy[:1])
    rect = np.maximum(diff, 0.0)
    kernel = (cfg.smear - np.arange(cfg.smear)) / cfg.smear
    smeared = np.zeros_like(rect)
    n = rect.shape[0]
    for k, w in enumerate(kernel):
        smeared[k:] += w * rect[: n - k]
    half = int(round(0.5 * cfg.norm_window / chroma.frame_period))
    local = maximum_filter1d(np.linalg.norm(smeared, axis=1), size=2 * half + 1, mode="constant")
    frames = smeared / np.maximum(local, cfg.norm_floor)[:, None]
    return OnsetFeatureSequence(frames, chroma.frame_period)


def seba_features(audio: AudioBuffer, frame_period: float, cfg: FeatureConfig = FeatureConfig(),
                  budget: Budget | None = None) -> tuple[np.ndarray, float]:
    """Concatenated ``[chroma | onset]`` frames (T, 24) and the effective frame period."""
    chroma = chroma_features(audio, frame_period, cfg, budget)
    onsets = onset_features(chroma, cfg)
    return np.hstack([chroma.frames, onsets.frames]), chroma.frame_period


def seba_cost_matrix(
    score_audio: AudioBuffer, perf_audio: AudioBuffer, frame_period: float = 0.02,
    cfg: FeatureConfig = FeatureConfig(), budget: Budget | None = None,
) -> np.ndarray:
    """Cosine chroma distances plus euclidean onset-feature distances."""
    budget = ensure(budget)
    fa, _ = seba_features(score_audio, frame_period, cfg, budget)
    fb, _ = seba_features(perf_audio, frame_period, cfg, budget)
    budget.reserve(len(fa) * len(fb) * 8, "seba cost matrix")
    return split_distance_matrix(fa, fb, N_CHROMA)


def read_wav(path, target_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    """Read 16-bit or float32 PCM WAV, mix to mono and resample linearly."""
    try:
        rate, data = wavfile.read(os.fspath(path))
    except FileNotFoundError as exc:
        raise IoFailure(str(exc)) from exc
    except ValueError as exc:
        msg = str(exc)
        if "format" in msg.lower() or "bit depth" in msg.lower():
            raise UnsupportedEncoding(f"{path}: {msg}") from exc
        raise MalformedWav(f"{path}: {msg}") from exc
    except Exception as exc:
        raise MalformedWav(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncoding(f"{path}: sample type {data.dtype} is not 16-bit PCM or float32")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    samples = np.clip(np.nan_to_num(samples), -1.0, 1.0)
    return AudioBuffer(resample_linear(samples, rate, target_rate), target_rate)


def resample_linear(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    if rate == target_rate or len(samples) == 0:
        return np.asarray(samples, dtype=np.float64)
    n_out = int(round(len(samples) * target_rate / rate))
    t_out = np.arange(n_out) / target_rate
    t_in = np.arange(len(samples)) / rate
    return np.interp(t_out, t_in, samples)


def write_wav(audio: AudioBuffer, path) -> None:
    """16-bit PCM output."""
    pcm = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype(np.int16)
    try:
        wavfile.write(os.fspath(path), int(audio.sample_rate), pcm)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
