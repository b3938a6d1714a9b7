"""Readers and writers for MIDI, note CSV and misalignment-model JSON."""

from __future__ import annotations

import csv
import json
import logging
import os
from pathlib import Path
from typing import Iterable

import mido
import numpy as np

from .errors import (
    IoFailure,
    InvalidHistogram,
    MalformedCsv,
    MalformedJson,
    MalformedMidi,
    SchemaVersionMismatch,
    ValidationError,
)
from .misalign import HISTOGRAM_KEYS, Histogram, MisalignmentModel
from .model import Note, NoteLike, NoteSequence, validate_notes

log = logging.getLogger(__name__)

PathLike = str | os.PathLike

CSV_HEADER = ["onset_sec", "offset_sec", "pitch", "velocity"]
MODEL_SCHEMA_VERSION = 1

WRITE_PPQ = 960
WRITE_TEMPO = 500_000  # microseconds per quarter note, i.e. 120 BPM
PERCUSSION_CHANNEL = 9
DEFAULT_VELOCITY = 64


def _ticks_per_second() -> float:
    return WRITE_PPQ * 1_000_000 / WRITE_TEMPO


# -- MIDI ------------------------------------------------------------------

def read_midi(path: PathLike, keep_order: bool = False):
    """Read a type 0/1 Standard MIDI File into notes.

    All tracks are merged through the file's tempo map; channel 10 is
    skipped. A note-on with velocity 0 counts as a note-off, a repeated
    note-on on a sounding pitch closes the earlier note, and notes still
    open at the end are closed at the final event time. Zero-length notes
    are dropped.
    """
    try:
        midi = mido.MidiFile(os.fspath(path))
    except FileNotFoundError as exc:
        raise IoFailure(str(exc)) from exc
    except Exception as exc:  # mido raises a mix of OSError/EOFError/ValueError/KeyError
        raise MalformedMidi(f"{path}: {exc}") from exc
    if midi.type not in (0, 1):
        raise MalformedMidi(f"{path}: unsupported MIDI file type {midi.type}")

    notes: list[Note] = []
    sounding: dict[int, tuple[float, int]] = {}
    now = 0.0

    def close(pitch: int, at: float):
        onset, velocity = sounding.pop(pitch)
        if at > onset:
            notes.append(Note(pitch, onset, at, velocity))
        else:
            log.debug("dropping zero-length note %d at %.6f", pitch, onset)

    try:
        for msg in midi:
            now += msg.time
            if msg.type not in ("note_on", "note_off") or msg.channel == PERCUSSION_CHANNEL:
                continue
            if msg.type == "note_on" and msg.velocity > 0:
                if msg.note in sounding:
                    close(msg.note, now)
                sounding[msg.note] = (now, msg.velocity)
            elif msg.note in sounding:
                close(msg.note, now)
    except Exception as exc:
        raise MalformedMidi(f"{path}: {exc}") from exc
    for pitch in sorted(sounding):
        close(pitch, now)
    return tuple(notes) if keep_order else NoteSequence(notes)


def write_midi(notes: Iterable[NoteLike], path: PathLike) -> None:
    """Write a type 0 file at 960 PPQ and a fixed 120 BPM."""
    notes = validate_notes(notes)
    tps = _ticks_per_second()
    events = []
    for n in notes:
        on = int(round(n.onset * tps))
        off = max(int(round(n.offset * tps)), on + 1)
        vel = DEFAULT_VELOCITY if n.velocity is None else max(n.velocity, 1)
        # (tick, 0=off first, pitch) ordering keeps back-to-back repeats intact
        events.append((on, 1, n.pitch, vel))
        events.append((off, 0, n.pitch, 0))
    events.sort()
    track = mido.MidiTrack()
    if events:
        track.append(mido.MetaMessage("set_tempo", tempo=WRITE_TEMPO, time=0))
    last = 0
    for tick, kind, pitch, vel in events:
        if kind:
            msg = mido.Message("note_on", note=pitch, velocity=vel, time=tick - last)
        else:
            msg = mido.Message("note_off", note=pitch, velocity=0, time=tick - last)
        track.append(msg)
        last = tick
    track.append(mido.MetaMessage("end_of_track", time=0))
    midi = mido.MidiFile(type=0, ticks_per_beat=WRITE_PPQ)
    midi.tracks.append(track)
    try:
        midi.save(os.fspath(path))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


# -- CSV -------------------------------------------------------------------

def _format_time(x: float) -> str:
    text = f"{x:.6f}"
    return text if float(text) == x else repr(float(x))


def write_notes_csv(notes: Iterable[NoteLike], path: PathLike) -> None:
    """Write notes in the given order with the fixed column layout."""
    notes = validate_notes(notes)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for n in notes:
                writer.writerow([
                    _format_time(n.onset),
                    _format_time(n.offset),
                    n.pitch,
                    "" if n.velocity is None else n.velocity,
                ])
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_notes_csv(path: PathLike, keep_order: bool = False):
    """Read a note CSV. ``keep_order`` returns a tuple in file order instead
    of a sorted NoteSequence (needed for index-aligned evaluation)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise IoFailure(str(exc)) from exc
    except UnicodeDecodeError as exc:
        raise MalformedCsv(1, f"not UTF-8: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != CSV_HEADER:
        raise MalformedCsv(1, f"header must be {','.join(CSV_HEADER)}")
    notes = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise MalformedCsv(lineno, f"expected 4 fields, got {len(row)}")
        try:
            onset = float(row[0])
            offset = float(row[1])
            pitch = int(row[2])
            velocity = int(row[3]) if row[3].strip() else None
        except ValueError as exc:
            raise MalformedCsv(lineno, str(exc)) from exc
        try:
            notes.append(validate_notes([(pitch, onset, offset, velocity)])[0])
        except ValidationError as exc:
            raise MalformedCsv(lineno, f"{type(exc).__name__}: {exc}") from exc
    return tuple(notes) if keep_order else NoteSequence(notes)


def read_notes(path: PathLike, keep_order: bool = False):
    """Dispatch on extension: ``.mid``/``.midi`` or ``.csv``."""
    suffix = Path(path).suffix.lower()
    if suffix in (".mid", ".midi"):
        return read_midi(path, keep_order=keep_order)
    if suffix == ".csv":
        return read_notes_csv(path, keep_order=keep_order)
    raise ValidationError(f"unsupported note file extension: {suffix!r}")


def write_notes(notes: Iterable[NoteLike], path: PathLike) -> None:
    suffix = Path(path).suffix.lower()
    if suffix in (".mid", ".midi"):
        write_midi(notes, path)
    elif suffix == ".csv":
        write_notes_csv(notes, path)
    else:
        raise ValidationError(f"unsupported note file extension: {suffix!r}")


# -- model JSON ------------------------------------------------------------

def model_to_dict(model: MisalignmentModel) -> dict:
    out = {"version": MODEL_SCHEMA_VERSION}
    for key, hist in model.histograms().items():
        out[key] = {"edges": hist.edges.tolist(), "counts": hist.counts.tolist()}
    return out


def model_from_dict(data: dict) -> MisalignmentModel:
    if not isinstance(data, dict) or data.get("version") != MODEL_SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"expected version {MODEL_SCHEMA_VERSION}")
    missing = [k for k in HISTOGRAM_KEYS if k not in data]
    if missing:
        raise SchemaVersionMismatch(f"missing histogram keys: {missing}")
    hists = {}
    for key in HISTOGRAM_KEYS:
        h = data[key]
        if not isinstance(h, dict) or "edges" not in h or "counts" not in h:
            raise SchemaVersionMismatch(f"histogram {key} needs 'edges' and 'counts'")
        try:
            hists[key] = Histogram(np.asarray(h["edges"], dtype=float), np.asarray(h["counts"], dtype=float))
        except (InvalidHistogram, TypeError, ValueError) as exc:
            raise MalformedJson(f"histogram {key}: {exc}") from exc
    try:
        return MisalignmentModel(**hists)
    except InvalidHistogram as exc:
        raise MalformedJson(str(exc)) from exc


def write_model_json(model: MisalignmentModel, path: PathLike) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(model_to_dict(model), fh)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_model_json(path: PathLike) -> MisalignmentModel:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise IoFailure(str(exc)) from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJson(f"{path}: {exc}") from exc
    return model_from_dict(data)
