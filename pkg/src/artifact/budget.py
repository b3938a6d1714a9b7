"""Cooperative per-piece resource budget.

Long-running loops call :meth:`Budget.check` between chunks of work and
large allocations go through :meth:`Budget.reserve`; nothing is enforced
by signals.
"""

from __future__ import annotations

import time

from .errors import ResourceBudgetExceeded

DEFAULT_SECONDS = 600.0
DEFAULT_BYTES = 32 * 2**30


class Budget:
    def __init__(self, seconds: float | None = DEFAULT_SECONDS, max_bytes: int | None = DEFAULT_BYTES):
        self.seconds = seconds
        self.max_bytes = max_bytes
        self.started = time.perf_counter()
        self.peak_bytes = 0

    @classmethod
    def unlimited(cls) -> "Budget":
        return cls(None, None)

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.started

    def check(self, phase: str = "") -> None:
        if self.seconds is not None and self.elapsed > self.seconds:
            where = f" during {phase}" if phase else ""
            raise ResourceBudgetExceeded(
                f"time budget of {self.seconds:g} s exceeded{where} ({self.elapsed:.2f} s)"
            )

    def reserve(self, nbytes: int, phase: str = "") -> None:
        """Record an upcoming allocation; refuse it when over the memory cap."""
        nbytes = int(nbytes)
        if self.max_bytes is not None and nbytes > self.max_bytes:
            where = f" for {phase}" if phase else ""
            raise ResourceBudgetExceeded(
                f"allocation of {nbytes} bytes{where} exceeds the {self.max_bytes}-byte budget"
            )
        self.peak_bytes = max(self.peak_bytes, nbytes)


def ensure(budget: Budget | None) -> Budget:
    return budget if budget is not None else Budget.unlimited()
