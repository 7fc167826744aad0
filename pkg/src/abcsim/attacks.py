"""Aperiodic denial-of-service schedules: generation, checks, lookup.

An attack schedule is an ordered list of disjoint half-open windows
[start, start+duration) during which the network is down: transmitted
errors read zero and control inputs freeze.  Schedules are constrained
by window-wise frequency and duration budgets, both linear in the window
length (offset + rate * span).
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path


class InfeasibleError(Exception):
    """Rejection sampling could not produce a schedule within the budget."""


@dataclass(frozen=True)
class DosSchedule:
    """Ordered attack windows (start, duration) within [0, horizon)."""

    intervals: tuple[tuple[int, int], ...]
    horizon: int

    def __post_init__(self):
        prev_end = None
        for start, dur in self.intervals:
            if dur < 1:
                raise ValueError("attack duration must be a positive integer")
            if start < 0 or start + dur > self.horizon:
                raise ValueError(f"attack [{start}, {start + dur}) outside horizon")
            if prev_end is not None and start <= prev_end:
                raise ValueError("attack windows must be strictly separated")
            prev_end = start + dur

    @property
    def total_attacked(self) -> int:
        return sum(dur for _, dur in self.intervals)


@dataclass(frozen=True)
class AttackBudget:
    """Linear window budgets for attack count and attacked-step total.

    Over any window [k0, k]: number of onsets <= kappa_a + freq_rate*(k-k0)
    and attacked steps <= zeta_a + dur_rate*(k-k0).
    """

    kappa_a: float
    freq_rate: float
    zeta_a: float
    dur_rate: float

    def __post_init__(self):
        if min(self.kappa_a, self.freq_rate, self.zeta_a) < 0:
            raise ValueError("budget offsets and rates must be nonnegative")
        if not 0 <= self.dur_rate < 1:
            raise ValueError("dur_rate must lie in [0, 1)")


def verify_frequency(sched: DosSchedule, budget: AttackBudget) -> bool:
    """Check the onset-count budget over every window.

    Counts change only at onsets, so checking windows spanned by onset
    pairs is sufficient.
    """
    onsets = [start for start, _ in sched.intervals]
    for a in range(len(onsets)):
        for b in range(a, len(onsets)):
            count = b - a + 1
            if count > budget.kappa_a + budget.freq_rate * (onsets[b] - onsets[a]):
                return False
    return True


def verify_duration(sched: DosSchedule, budget: AttackBudget) -> bool:
    """Check the attacked-step budget over every window.

    With dur_rate < 1 the binding windows start at an onset and end at
    the last attacked step of a later window, so those pairs suffice.
    """
    iv = sched.intervals
    for a in range(len(iv)):
        total = 0
        for b in range(a, len(iv)):
            total += iv[b][1]
            span = (iv[b][0] + iv[b][1] - 1) - iv[a][0]
            if total > budget.zeta_a + budget.dur_rate * span:
                return False
    return True


def availability(sched: DosSchedule, k: int) -> int:
    """Network availability h(k): 0 inside an attack window, else 1."""
    if not 0 <= k <= sched.horizon:
        raise ValueError(f"step {k} outside schedule horizon")
    starts = [start for start, _ in sched.intervals]
    idx = bisect_right(starts, k) - 1
    if idx >= 0:
        start, dur = sched.intervals[idx]
        if k < start + dur:
            return 0
    return 1


def filter_error(e: float, h: int) -> float:
    """Attack-filtered transmitted error: h * e."""
    return h * e


def generate_schedule(budget: AttackBudget, horizon: int, max_duration: int,
                      seed: int) -> DosSchedule:
    """Draw a random schedule satisfying both budgets, deterministic per seed.

    Gaps and durations are sampled uniformly and candidate windows that
    would break a budget are rejected; 10,000 consecutive rejections
    abort with InfeasibleError.
    """
    if max_duration < 1:
        raise ValueError("max_duration must be a positive integer")
    # A zero-capacity budget admits only the empty schedule.
    if (budget.kappa_a < 1 and budget.freq_rate == 0) or \
            (budget.zeta_a < 1 and budget.dur_rate == 0):
        return DosSchedule(intervals=(), horizon=horizon)
    rng = random.Random(seed)
    # Typical spacing needed to respect both linear budgets.
    pace = 1.0
    if budget.freq_rate > 0:
        pace = max(pace, 1.0 / budget.freq_rate)
    if budget.dur_rate > 0:
        pace = max(pace, max_duration / budget.dur_rate)
    gap_hi = max(2, int(2 * pace))
    intervals: list[tuple[int, int]] = []
    cursor = 0
    failures = 0
    while True:
        start = cursor + rng.randint(1, gap_hi) - (1 if not intervals else 0)
        dur = rng.randint(1, max_duration)
        if start >= horizon:
            break
        dur = min(dur, horizon - start)
        candidate = DosSchedule(intervals=tuple(intervals + [(start, dur)]),
                                horizon=horizon)
        if verify_frequency(candidate, budget) and verify_duration(candidate, budget):
            intervals.append((start, dur))
            cursor = start + dur
            failures = 0
        else:
            failures += 1
            if failures >= 10_000:
                raise InfeasibleError(
                    f"no admissible attack window after step {cursor} "
                    f"({failures} consecutive rejections)")
    return DosSchedule(intervals=tuple(intervals), horizon=horizon)


def parse_schedule(text: str, horizon: int) -> DosSchedule:
    """Parse `attack <start> <duration>` lines (# comments allowed)."""
    intervals = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "attack" or len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'attack <start> <duration>'")
        try:
            intervals.append((int(parts[1]), int(parts[2])))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return DosSchedule(intervals=tuple(intervals), horizon=horizon)


def load_schedule(path: str | Path, horizon: int) -> DosSchedule:
    return parse_schedule(Path(path).read_text(), horizon)


def write_schedule(sched: DosSchedule, path: str | Path) -> None:
    lines = [f"attack {start} {dur}" for start, dur in sched.intervals]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
