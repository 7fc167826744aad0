"""Agent dynamics, leader references and incremental-gain diagnostics.

Every plant is a scalar first-order map y(k+1) = f(y(k), u(k)) with no
hidden state.  The catalog is closed: the two 8-agent experiment
families plus a linear test plant.  Fractional powers of a possibly
negative output are evaluated as sign(y)*|y|^p to keep the dynamics
real-valued (integer exponents use ordinary powers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

DIV_GUARD = 1e-12

# Per-agent parameters of the first 8-agent experiment: exponent w1 in the
# rational term and gain w2 on the input nonlinearity.
_EX1_W1 = (4, 3, 4, 3, 2, 4, 2, 3)
_EX1_W2 = (2.0, 3.0, 4.0, 5.0, 2.0, 0.4, 2.0, 0.5)

# Second experiment: output exponent p and linear input gain b.
_EX2_P = (2.0, 3.0, 2.0, 3.0, 1.0, 0.9, 1.2, 2.0)
_EX2_B = (2.0, 5.0, 3.0, 5.0, 0.8, 0.5, 0.4, 0.5)


class NonFiniteError(ArithmeticError):
    """Plant produced NaN/Inf or hit a vanishing denominator."""


def signed_power(y: float, p: float) -> float:
    """y**p, extended to negative bases via sign(y)*|y|**p for non-integer p."""
    if p == int(p):
        return y ** int(p)
    return math.copysign(abs(y) ** p, y) if y != 0.0 else 0.0


def _guarded_div(num: float, den: float) -> float:
    if abs(den) < DIV_GUARD:
        raise NonFiniteError(f"denominator collapsed to {den!r}")
    return num / den


def _check(value: float) -> float:
    if not math.isfinite(value):
        raise NonFiniteError(f"plant output is not finite: {value!r}")
    return value


@dataclass(frozen=True)
class Example1Plant:
    """Agent dynamics from the constant-leader 8-agent experiment.

    Agents 1-4 use a rational term y*u/(1 + y^w1); agents 5-8 add u to
    that denominator.  The input nonlinearity cycles tanh/sin/cos/log by
    agent pair, scaled by w2.
    """

    agent: int  # 1-based position in the catalog

    def step(self, y: float, u: float) -> float:
        i = self.agent - 1
        w1, w2 = _EX1_W1[i], _EX1_W2[i]
        if self.agent <= 4:
            rational = _guarded_div(y * u, 1.0 + signed_power(y, w1))
        else:
            rational = _guarded_div(y * u, 1.0 + signed_power(y, w1) + u)
        if self.agent <= 2:
            extra = w2 * u * math.tanh(u)
        elif self.agent <= 4:
            extra = w2 * u * math.sin(u)
        elif self.agent <= 6:
            extra = w2 * u * math.cos(u)
        else:
            extra = w2 * u * math.log(1.0 + abs(u))
        return _check(rational + extra)


@dataclass(frozen=True)
class Example2Plant:
    """Agent dynamics from the time-varying-leader experiment.

    y(k+1) = y*u/(1 + y^p) + b*u with per-agent (p, b); two agents carry
    fractional exponents, handled by the signed power.
    """

    agent: int

    def step(self, y: float, u: float) -> float:
        i = self.agent - 1
        p, b = _EX2_P[i], _EX2_B[i]
        return _check(_guarded_div(y * u, 1.0 + signed_power(y, p)) + b * u)


@dataclass(frozen=True)
class LinearPlant:
    """Constant-incremental-gain test plant.

    The output responds to input increments with a fixed gain b:
    Delta y(k+1) = b * Delta u(k).  Written without hidden state this is
    y(k+1) = offset + b*u(k), where the offset absorbs the initial
    condition (with u starting at zero, offset equals the initial
    output).
    """

    b: float = 1.0
    offset: float = 0.0

    def step(self, y: float, u: float) -> float:
        return _check(self.offset + self.b * u)


def make_plants(catalog: str, n_agents: int, b: float = 1.0,
                offset: float = 0.0) -> list:
    """Instantiate the named plant family for n_agents followers.

    The experiment catalogs are fixed at 8 agents; `linear` accepts any
    count and the (b, offset) parameters.
    """
    if catalog == "example1":
        if n_agents != len(_EX1_W1):
            raise ValueError(f"catalog 'example1' is fixed at {len(_EX1_W1)} agents")
        return [Example1Plant(i) for i in range(1, n_agents + 1)]
    if catalog == "example2":
        if n_agents != len(_EX2_P):
            raise ValueError(f"catalog 'example2' is fixed at {len(_EX2_P)} agents")
        return [Example2Plant(i) for i in range(1, n_agents + 1)]
    if catalog == "linear":
        return [LinearPlant(b=b, offset=offset) for _ in range(n_agents)]
    raise ValueError(f"unknown plant catalog {catalog!r} (catalog is closed)")


@dataclass(frozen=True)
class PiecewiseReference:
    """Piecewise-constant leader signal: (start_step, value) segments.

    A boundary step belongs to the later segment; the final value extends
    through the horizon.
    """

    segments: tuple[tuple[int, float], ...]
    horizon: int

    def __post_init__(self):
        starts = [s for s, _ in self.segments]
        if not self.segments or starts != sorted(starts) or len(set(starts)) != len(starts):
            raise ValueError("segments must be nonempty with strictly increasing starts")
        if starts[0] > 0:
            raise ValueError("first segment must start at step 0")

    def value(self, k: int) -> float:
        _check_step(k, self.horizon)
        out = self.segments[0][1]
        for start, val in self.segments:
            if k >= start:
                out = val
        return out


@dataclass(frozen=True)
class HarmonicReference:
    """Sum-of-harmonics leader signal with a single switch step.

    Each term is (kind, amplitude, divisor) evaluated as
    amplitude * kind(pi * k / divisor); `before` applies for k < switch,
    `after` from the switch step on.
    """

    before: tuple[tuple[str, float, float], ...]
    after: tuple[tuple[str, float, float], ...]
    switch: int
    horizon: int

    def __post_init__(self):
        for terms in (self.before, self.after):
            for kind, _, divisor in terms:
                if kind not in ("sin", "cos"):
                    raise ValueError(f"unknown harmonic kind {kind!r}")
                if divisor <= 0:
                    raise ValueError("harmonic divisor must be positive")

    def value(self, k: int) -> float:
        _check_step(k, self.horizon)
        terms = self.before if k < self.switch else self.after
        total = 0.0
        for kind, amp, divisor in terms:
            func = math.sin if kind == "sin" else math.cos
            total += amp * func(math.pi * k / divisor)
        return total


def _check_step(k: int, horizon: int) -> None:
    if not 0 <= k <= horizon:
        raise ValueError(f"step {k} outside reference horizon [0, {horizon}]")


def reference_value(sig, k: int) -> float:
    """Evaluate a reference signal at step k."""
    return sig.value(k)


@dataclass(frozen=True)
class CfdlTrace:
    """Empirical incremental-gain ratios along a trajectory."""

    ppd_values: tuple[float, ...]
    bound_estimate: float = field(default=0.0)


def cfdl_diagnostic(trajectory) -> CfdlTrace:
    """Compute Delta y(k+1) / Delta u(k) wherever the input moved.

    `trajectory` is a sequence of (y, u) samples.  Steps with a zero
    input increment are skipped; the largest ratio magnitude doubles as
    a Lipschitz-bound estimate.
    """
    samples = list(trajectory)
    if len(samples) < 2:
        raise ValueError("trajectory must contain at least two samples")
    ys = [y for y, _ in samples]
    us = [u for _, u in samples]
    ratios = []
    for k in range(1, len(samples) - 1):
        du = us[k] - us[k - 1]
        if du != 0.0:
            ratios.append((ys[k + 1] - ys[k]) / du)
    bound = max((abs(r) for r in ratios), default=0.0)
    return CfdlTrace(ppd_values=tuple(ratios), bound_estimate=bound)
