"""Closed-loop orchestration of graph, plants, attacks and controllers.

The engine advances one global step at a time.  Within a step, per-agent
work (trigger test, estimator refresh, control move, plant advance) runs
against a read-only snapshot of the previous step's shared data, so it
can be distributed over threads without changing a single bit of the
result.

Per-step schedule, for k = 1..horizon:

1. read network availability h(k) and the reference y_d(k);
2. compute every agent's neighborhood error from current outputs and
   filter it by h;
3. per agent: test the trigger on step-(k-1) data (k = 1 always fires);
   on an event, refresh the held output and run one estimator step with
   the input increment of the previous event;
4. recompute the held-output (triggered) errors after all refreshes;
5. per agent: move the control input.  In `continuous` mode the move
   uses the current filtered error every step; in `event` mode it uses
   the triggered error and only happens at events, holding in between;
6. log the step-k row, evaluate the trigger threshold theta(k) from the
   refreshed estimates, and advance all plants.

The estimator is fed the negated filtered-error difference so that the
sign-pinned estimate (kept positive by the reset rule) tracks the
magnitude of the local input-output sensitivity; the disagreement error
falls as the output rises, so the raw difference carries the opposite
sign.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import attacks as atk
from .controller import (
    AgentRuntime,
    ControllerGains,
    compute_theta,
    control_update,
    neighborhood_errors,
    reset_ppd,
    trigger_decision,
    update_ppd,
)
from .graphs import (
    BalanceGauge,
    GraphError,
    SignedDigraph,
    build_gauge,
    check_structural_balance,
    coupling_matrices,
    has_spanning_tree,
)

TRACE_COLUMNS = ("k", "agent", "y", "u", "e_abc", "e_y", "e_y_tilde",
                 "delta", "h", "triggered", "ppd_hat", "theta")

CONTROL_MODES = ("continuous", "event")


@dataclass
class SimConfig:
    """Everything needed for one deterministic closed-loop run."""

    graph: SignedDigraph
    gauge: BalanceGauge
    plants: list
    reference: object
    horizon: int
    gains: list[ControllerGains] = field(default_factory=list)
    y_init: float = 0.5
    u_init: float = 0.0
    ppd_init: float = 1.0
    schedule: atk.DosSchedule | None = None
    psi_pinning: str = "signed"
    skip_estimator_on_attack: bool = False
    control_mode: str = "continuous"
    threads: int = 1

    def __post_init__(self):
        n = self.graph.n_followers
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if len(self.plants) != n:
            raise ValueError("one plant per follower required")
        if not self.gains:
            self.gains = [ControllerGains() for _ in range(n)]
        if len(self.gains) != n:
            raise ValueError("one gains record per follower required")
        if self.control_mode not in CONTROL_MODES:
            raise ValueError(f"control_mode must be one of {CONTROL_MODES}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class SimResult:
    """Dense per-step trace plus the gauge needed to interpret it.

    All trace arrays are (horizon, N); row k-1 holds step-k data.
    """

    horizon: int
    n_agents: int
    gauge: BalanceGauge
    y: np.ndarray
    u: np.ndarray
    e_abc: np.ndarray
    e_y: np.ndarray
    e_y_tilde: np.ndarray
    delta: np.ndarray
    h: np.ndarray           # (horizon,)
    triggered: np.ndarray
    ppd_hat: np.ndarray
    theta: np.ndarray       # (horizon,)

    def trigger_counts(self) -> np.ndarray:
        return self.triggered.sum(axis=0)

    def to_csv(self, path: str | Path | None = None) -> str | None:
        """Write the trace in the fixed column order, 9 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for k in range(self.horizon):
            for i in range(self.n_agents):
                writer.writerow((
                    k + 1, i + 1,
                    _fmt(self.y[k, i]), _fmt(self.u[k, i]),
                    _fmt(self.e_abc[k, i]), _fmt(self.e_y[k, i]),
                    _fmt(self.e_y_tilde[k, i]), _fmt(self.delta[k, i]),
                    int(self.h[k]), int(self.triggered[k, i]),
                    _fmt(self.ppd_hat[k, i]), _fmt(self.theta[k]),
                ))
        if path is None:
            return buf.getvalue()
        Path(path).write_text(buf.getvalue())
        return None


def _fmt(x: float) -> str:
    return format(x, ".9g")


class EngineError(Exception):
    """Simulation failed mid-run; message carries step/agent context."""


def run(config: SimConfig) -> SimResult:
    """Execute the closed loop and return the dense trace."""
    graph, gauge = config.graph, config.gauge
    n = graph.n_followers
    partition = check_structural_balance(graph)
    if (gauge.v1, gauge.v2) != partition:
        raise GraphError(
            f"gauge partition {gauge.v1}/{gauge.v2} does not match the "
            f"graph's balance partition {partition[0]}/{partition[1]}")
    if not has_spanning_tree(graph):
        raise GraphError("graph has no spanning tree rooted at the leader")
    psi = coupling_matrices(graph, gauge, config.psi_pinning).psi

    adjacency = graph.adjacency
    delta_g, s_g, pinning = gauge.delta, gauge.s, graph.pinning
    sched = config.schedule
    continuous = config.control_mode == "continuous"

    agents = [AgentRuntime(ppd_hat=config.ppd_init, ppd_init=config.ppd_init,
                           u=config.u_init, y_held=config.y_init)
              for _ in range(n)]
    y = np.full(n, float(config.y_init))
    held = np.full(n, float(config.y_init))

    # Step-(k-1) snapshot driving the trigger; theta(0) = 0.
    et_prev = np.zeros(n)
    drift_prev = np.zeros(n)
    theta_prev = 0.0
    ebar_prev = np.zeros(n)

    horizon = config.horizon
    out = {name: np.zeros((horizon, n)) for name in
           ("y", "u", "e_abc", "e_y", "e_y_tilde", "delta", "ppd_hat")}
    fired_log = np.zeros((horizon, n), dtype=bool)
    h_log = np.zeros(horizon, dtype=int)
    theta_log = np.zeros(horizon)

    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    chunks = _chunk(n, config.threads)

    def foreach(fn):
        if pool is None:
            for lo, hi in chunks:
                fn(lo, hi)
        else:
            list(pool.map(lambda c: fn(*c), chunks))

    try:
        for k in range(1, horizon + 1):
            h = atk.availability(sched, k) if sched is not None else 1
            y_d = config.reference.value(k)
            e_y = neighborhood_errors(y, y_d, adjacency, delta_g, s_g, pinning)
            ebar = float(h) * e_y

            def phase_trigger(lo, hi):
                for i in range(lo, hi):
                    rt = agents[i]
                    fired = k == 1 or trigger_decision(
                        et_prev[i], drift_prev[i], theta_prev)
                    fired_log[k - 1, i] = fired
                    if fired:
                        rt.y_held = y[i]
                        held[i] = y[i]
                        rt.last_trigger = k
                        rt.trigger_count += 1
                        if h == 1 or not config.skip_estimator_on_attack:
                            gains = config.gains[i]
                            # Negated difference: the estimate tracks the
                            # sensitivity magnitude (see module docstring).
                            proposed = update_ppd(
                                rt.ppd_hat, rt.du_event,
                                -(ebar[i] - ebar_prev[i]), gains)
                            rt.ppd_hat = reset_ppd(
                                proposed, rt.ppd_init, rt.du_event, gains.gamma)

            foreach(phase_trigger)

            e_tilde = neighborhood_errors(held, y_d, adjacency, delta_g,
                                          s_g, pinning)

            def phase_control(lo, hi):
                for i in range(lo, hi):
                    rt = agents[i]
                    fired = fired_log[k - 1, i]
                    if continuous:
                        u_new = control_update(rt.u, rt.ppd_hat, e_y[i], h,
                                               config.gains[i])
                    elif fired:
                        u_new = control_update(rt.u, rt.ppd_hat, e_tilde[i], h,
                                               config.gains[i])
                    else:
                        u_new = rt.u
                    if fired:
                        rt.du_event = u_new - rt.u
                    rt.u = u_new

            foreach(phase_control)

            u_now = np.array([rt.u for rt in agents])
            drift = delta_g / s_g * (y - held)
            threshold = compute_theta(
                np.array([rt.ppd_hat for rt in agents]), config.gains, psi)

            out["y"][k - 1] = y
            out["u"][k - 1] = u_now
            out["e_abc"][k - 1] = y_d - delta_g / s_g * y
            out["e_y"][k - 1] = e_y
            out["e_y_tilde"][k - 1] = e_tilde
            out["delta"][k - 1] = drift
            out["ppd_hat"][k - 1] = [rt.ppd_hat for rt in agents]
            h_log[k - 1] = h
            theta_log[k - 1] = threshold.theta

            y_next = np.empty(n)

            def phase_plant(lo, hi):
                for i in range(lo, hi):
                    y_next[i] = config.plants[i].step(y[i], u_now[i])

            foreach(phase_plant)

            et_prev, drift_prev = e_tilde, drift
            theta_prev = threshold.theta
            ebar_prev = ebar
            y = y_next
    except (ArithmeticError, ValueError) as exc:
        raise EngineError(f"step {k}: {exc}") from exc
    finally:
        if pool is not None:
            pool.shutdown()

    return SimResult(
        horizon=horizon, n_agents=n, gauge=gauge,
        y=out["y"], u=out["u"], e_abc=out["e_abc"], e_y=out["e_y"],
        e_y_tilde=out["e_y_tilde"], delta=out["delta"], h=h_log,
        triggered=fired_log, ppd_hat=out["ppd_hat"], theta=theta_log)


def _chunk(n: int, parts: int) -> list[tuple[int, int]]:
    """Split range(n) into contiguous chunks, one per worker."""
    parts = min(max(parts, 1), n)
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(int(bounds[i]), int(bounds[i + 1]))
            for i in range(parts) if bounds[i] < bounds[i + 1]]


def lyapunov_trace(result: SimResult) -> tuple[np.ndarray, np.ndarray]:
    """V(k) = e_y(k)^T e_y(k) and its forward difference."""
    v = (result.e_y ** 2).sum(axis=1)
    return v, np.diff(v)


def summarize(result: SimResult, segments=None) -> dict:
    """Per-segment, per-agent error stats plus trigger/attack totals."""
    horizon, n = result.horizon, result.n_agents
    if segments is None:
        segments = [(1, horizon)]
    for start, end in segments:
        if not 1 <= start <= end <= horizon:
            raise ValueError(f"segment ({start}, {end}) outside horizon")
    abs_err = np.abs(result.e_abc)
    seg_stats = []
    for start, end in segments:
        window = abs_err[start - 1:end]
        seg_stats.append({
            "segment": (start, end),
            "mean_abs_e": window.mean(axis=0),
            "max_abs_e": window.max(axis=0),
        })
    counts = result.trigger_counts()
    return {
        "segments": seg_stats,
        "trigger_counts": counts,
        "trigger_rates": counts / horizon,
        "max_abs_e": abs_err.max(),
        "attacked_steps": int((result.h == 0).sum()),
    }
