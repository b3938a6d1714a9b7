import numpy as np
import pytest
from hypothesis import settings, strategies as st

from artifact.model import Note

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_notes(rng: np.random.Generator, n: int, span: float = 10.0, chords: bool = True) -> list[Note]:
    """Random valid notes, unsorted; with ``chords`` some onsets repeat."""
    onsets = rng.uniform(0, span, n)
    if chords and n > 2:
        k = n // 4
        onsets[rng.integers(0, n, k)] = onsets[rng.integers(0, n, k)]
    out = []
    for on in onsets:
        dur = float(rng.uniform(0.01, 2.0))
        vel = int(rng.integers(0, 128)) if rng.random() < 0.8 else None
        out.append(Note(int(rng.integers(0, 128)), float(on), float(on) + dur, vel))
    return out


@st.composite
def note_lists(draw, min_size=0, max_size=30):
    n = draw(st.integers(min_size, max_size))
    notes = []
    for _ in range(n):
        on = draw(st.floats(0, 100, allow_nan=False, allow_infinity=False))
        dur = draw(st.floats(1e-3, 10, allow_nan=False, allow_infinity=False))
        pitch = draw(st.integers(0, 127))
        vel = draw(st.one_of(st.none(), st.integers(0, 127)))
        notes.append(Note(pitch, on, on + dur, vel))
    return notes


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report -------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
