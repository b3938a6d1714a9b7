import json

import mido
import numpy as np
import pytest
from hypothesis import given

from artifact.errors import IoFailure, MalformedCsv, MalformedJson, MalformedMidi, SchemaVersionMismatch, ValidationError
from artifact.io import (
    model_from_dict,
    model_to_dict,
    read_midi,
    read_model_json,
    read_notes,
    read_notes_csv,
    write_midi,
    write_model_json,
    write_notes,
    write_notes_csv,
)
from artifact.matcher import match_notes
from artifact.misalign import Histogram, MisalignmentModel, fit_model
from artifact.model import Note, NoteSequence
from artifact.synthetic import gaussian_pairs

from conftest import note_lists, random_notes

TICK = 0.5 / 960  # seconds per tick as written (120 BPM, 960 PPQ)


def _save(tmp_path, tracks, ppq=480, kind=1):
    f = mido.MidiFile(type=kind, ticks_per_beat=ppq)
    for msgs in tracks:
        t = mido.MidiTrack()
        t.extend(msgs)
        f.tracks.append(t)
    path = tmp_path / "x.mid"
    f.save(path)
    return path


def test_read_single_note_480ppq(tmp_path):
    path = _save(tmp_path, [[
        mido.MetaMessage("set_tempo", tempo=500000, time=0),
        mido.Message("note_on", note=60, velocity=64, time=0),
        mido.Message("note_off", note=60, velocity=0, time=480),
    ]])
    assert list(read_midi(path)) == [Note(60, 0.0, 0.5, 64)]


def test_tempo_change_and_multitrack(tmp_path):
    # tempo track doubles speed after one beat; notes live in a second track
    path = _save(tmp_path, [
        [mido.MetaMessage("set_tempo", tempo=500000, time=0),
         mido.MetaMessage("set_tempo", tempo=250000, time=480)],
        [mido.Message("note_on", note=62, velocity=10, time=480),
         mido.Message("note_on", note=62, velocity=0, time=480)],
    ])
    (n,) = read_midi(path)
    assert (n.pitch, n.onset, n.offset, n.velocity) == (62, 0.5, 0.75, 10)


def test_percussion_skipped_and_reonset_closes(tmp_path):
    path = _save(tmp_path, [[
        mido.Message("note_on", note=36, velocity=90, channel=9, time=0),
        mido.Message("note_on", note=60, velocity=50, time=0),
        mido.Message("note_on", note=60, velocity=70, time=240),
        mido.Message("note_off", note=60, time=240),
        mido.Message("note_off", note=36, channel=9, time=0),
    ]])
    notes = list(read_midi(path))
    assert notes == [Note(60, 0.0, 0.25, 50), Note(60, 0.25, 0.5, 70)]


def test_unterminated_note_closed_at_end(tmp_path):
    path = _save(tmp_path, [[
        mido.Message("note_on", note=60, velocity=50, time=0),
        mido.Message("note_on", note=64, velocity=50, time=480),
        mido.Message("note_off", note=64, time=480),
    ]])
    assert list(read_midi(path))[0] == Note(60, 0.0, 1.0, 50)


def test_empty_track(tmp_path):
    path = _save(tmp_path, [[]])
    assert len(read_midi(path)) == 0


def test_truncated_header(tmp_path):
    p = tmp_path / "bad.mid"
    p.write_bytes(b"MThd\x00\x00")
    with pytest.raises(MalformedMidi):
        read_midi(p)


def test_missing_file_is_io_failure(tmp_path):
    with pytest.raises(IoFailure):
        read_midi(tmp_path / "nope.mid")


def test_write_empty_has_only_end_of_track(tmp_path):
    p = tmp_path / "e.mid"
    write_midi([], p)
    f = mido.MidiFile(p)
    assert f.type == 0 and len(f.tracks) == 1
    assert [m.type for m in f.tracks[0]] == ["end_of_track"]


def test_one_note_round_trip(tmp_path):
    p = tmp_path / "one.mid"
    write_midi([Note(60, 0.0, 0.5)], p)
    (n,) = read_midi(p)
    assert n.pitch == 60 and abs(n.onset) <= TICK and abs(n.offset - 0.5) <= TICK and n.velocity == 64


def test_repeated_pitch_back_to_back(tmp_path):
    p = tmp_path / "rep.mid"
    notes = [Note(60, 0.0, 0.5, 80), Note(60, 0.5, 1.0, 81)]
    write_midi(notes, p)
    assert list(read_midi(p)) == notes


def test_midi_round_trip_random(tmp_path, rng):
    notes = []
    # overlapping same-pitch notes cannot survive MIDI; keep pitches unique per time span
    for i, note in enumerate(random_notes(rng, 300, span=60.0, chords=False)):
        notes.append(Note(i % 128, note.onset + 60.0 * (i // 128), note.onset + 60.0 * (i // 128) + note.duration,
                          note.velocity or 1))
    p = tmp_path / "r.mid"
    write_midi(notes, p)
    back = read_midi(p)
    want = NoteSequence(notes)
    assert len(back) == len(want)
    for a, b in zip(back, want):
        assert a.pitch == b.pitch and a.velocity == b.velocity
        assert abs(a.onset - b.onset) <= TICK and abs(a.offset - b.offset) <= TICK


def test_csv_header_only(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("onset_sec,offset_sec,pitch,velocity\n")
    assert len(read_notes_csv(p)) == 0


def test_csv_row(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("onset_sec,offset_sec,pitch,velocity\n0.0,0.5,60,64\n0.1,0.2,61,\n")
    assert list(read_notes_csv(p)) == [Note(60, 0.0, 0.5, 64), Note(61, 0.1, 0.2, None)]


@pytest.mark.parametrize("body, line", [
    ("0.0,0.5,200,64\n", 2),
    ("0.0,0.5,60,64\n0.0,0.5,60\n", 3),
    ("0.0,abc,60,64\n", 2),
    ("1.0,0.5,60,64\n", 2),
])
def test_csv_errors_carry_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text("onset_sec,offset_sec,pitch,velocity\n" + body)
    with pytest.raises(MalformedCsv) as info:
        read_notes_csv(p)
    assert info.value.line == line


def test_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c,d\n")
    with pytest.raises(MalformedCsv):
        read_notes_csv(p)


@given(note_lists(max_size=40))
def test_csv_round_trip_exact(tmp_path_factory, notes):
    p = tmp_path_factory.mktemp("csv") / "n.csv"
    write_notes_csv(notes, p)
    assert read_notes_csv(p, keep_order=True) == tuple(notes)


def test_csv_six_decimals_when_lossless(tmp_path):
    p = tmp_path / "d.csv"
    write_notes_csv([Note(60, 0.25, 1.5, 3), Note(61, 0.1 + 0.2, 1.0)], p)
    lines = p.read_text().splitlines()
    assert lines[1] == "0.250000,1.500000,60,3"
    assert lines[2].startswith("0.30000000000000004,")


def test_dispatch_by_extension(tmp_path):
    notes = [Note(60, 0.0, 0.5, 64)]
    write_notes(notes, tmp_path / "a.csv")
    write_notes(notes, tmp_path / "a.mid")
    assert list(read_notes(tmp_path / "a.csv")) == list(read_notes(tmp_path / "a.mid")) == notes
    with pytest.raises(ValidationError):
        write_notes(notes, tmp_path / "a.txt")


def test_model_round_trip_single_bin(tmp_path):
    h = Histogram(np.array([0.0, 1.0]), np.array([3.0]))
    model = MisalignmentModel(h, h, h, h, Histogram(np.array([0.5, 1.5]), np.array([1.0])), h)
    write_model_json(model, tmp_path / "m.json")
    assert read_model_json(tmp_path / "m.json") == model


def test_model_fit_round_trip_bit_exact(tmp_path):
    pairs = gaussian_pairs(2, seed=4, n_notes=30)
    model = fit_model([(s, p, match_notes(s, p)) for s, p in pairs])
    write_model_json(model, tmp_path / "m.json")
    back = read_model_json(tmp_path / "m.json")
    assert back == model
    assert model_to_dict(back) == model_to_dict(model)


def test_model_missing_key():
    d = model_to_dict(MisalignmentModel.identity())
    del d["x_dur"]
    with pytest.raises(SchemaVersionMismatch):
        model_from_dict(d)


def test_model_bad_version_and_histogram(tmp_path):
    d = model_to_dict(MisalignmentModel.identity())
    with pytest.raises(SchemaVersionMismatch):
        model_from_dict({**d, "version": 2})
    d["x_ons"] = {"edges": [1.0, 0.0], "counts": [1.0]}
    with pytest.raises(MalformedJson):
        model_from_dict(d)
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(MalformedJson):
        read_model_json(p)


def test_model_json_is_plain(tmp_path):
    write_model_json(MisalignmentModel.identity(), tmp_path / "m.json")
    data = json.loads((tmp_path / "m.json").read_text())
    assert data["version"] == 1 and data["y_dur_m"] == {"edges": [1.0, 1.0], "counts": [1.0]}
