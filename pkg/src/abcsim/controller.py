"""Per-agent event-triggered data-driven controller primitives.

Each agent measures a signed neighborhood disagreement, fires an event
when that error (as of the previous step) outweighs the scaled drift of
its own output since the last event, and at events refreshes both its
broadcast output and an online estimate of the plant's incremental gain
(the pseudo partial derivative, PPD).  The control input moves
proportionally to the transmitted error with a gain shaped by the PPD
estimate; the network-wide trigger threshold theta(k) is recomputed each
step from all current estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateGainError(ArithmeticError):
    """Control gain denominator collapsed (ppd^2 + varpi ~ 0)."""


@dataclass(frozen=True)
class ControllerGains:
    """Step sizes and regularizers of the estimator/control laws."""

    eta1: float = 0.1
    eta2: float = 0.1
    mu: float = 1.0
    varpi: float = -0.1
    gamma: float = 1e-5

    def __post_init__(self):
        if not 0 < self.eta1 <= 2 or not 0 < self.eta2 <= 2:
            raise ValueError("step sizes eta1, eta2 must lie in (0, 2]")
        if self.mu <= 0:
            raise ValueError("estimator regularizer mu must be positive")
        if self.gamma <= 0:
            raise ValueError("reset threshold gamma must be positive")


@dataclass
class AgentRuntime:
    """Mutable controller state of one agent."""

    ppd_hat: float = 1.0
    ppd_init: float = 1.0
    u: float = 0.0
    y_held: float = 0.0          # output broadcast at the last event
    last_trigger: int = 0
    du_event: float = 0.0        # input increment applied at the last event
    trigger_count: int = 0


@dataclass(frozen=True)
class ThresholdState:
    """Network trigger threshold and the gain diagonal it came from."""

    theta: float
    p_diag: np.ndarray = field(default_factory=lambda: np.zeros(0))


def neighborhood_errors(outputs: np.ndarray, y_d: float, adjacency: np.ndarray,
                        delta: np.ndarray, s: np.ndarray,
                        pinning: np.ndarray) -> np.ndarray:
    """Signed neighborhood disagreement of every agent, compact form.

    e_i = sum_j (a_ij y_j - (delta_i/s_i) a_ij s_j delta_j y_i)
          + g_i (y_d - (delta_i/s_i) y_i)
    """
    outputs = np.asarray(outputs, dtype=float)
    row_scale = adjacency @ (s * delta)
    return (adjacency @ outputs
            - delta / s * row_scale * outputs
            + pinning * (y_d - delta / s * outputs))


def neighborhood_error(i: int, outputs, y_d: float, adjacency, delta, s,
                       pinning) -> float:
    """Single-agent view of neighborhood_errors (i is 0-based)."""
    return float(neighborhood_errors(np.asarray(outputs, dtype=float), y_d,
                                     adjacency, delta, s, pinning)[i])


def triggered_error(i: int, held_outputs, y_d: float, adjacency, delta, s,
                    pinning) -> float:
    """Neighborhood error evaluated on last-triggered outputs.

    Identical formula with every output replaced by its held value; the
    reference stays current.
    """
    return neighborhood_error(i, held_outputs, y_d, adjacency, delta, s, pinning)


def local_abc_error(y: float, y_d: float, delta_i: float, s_i: float) -> float:
    """Tracking error toward the agent's scaled target: y_d - delta_i*y/s_i."""
    return y_d - delta_i / s_i * y


def trigger_decision(e_tilde_prev: float, delta_prev: float,
                     theta_prev: float) -> bool:
    """Fire iff |e_tilde(k-1)| - theta(k-1)*|Delta(k-1)| < 0 (strict)."""
    return abs(e_tilde_prev) - theta_prev * abs(delta_prev) < 0.0


def update_ppd(ppd_hat: float, du: float, ebar_diff: float,
               gains: ControllerGains) -> float:
    """One projection step of the incremental-gain estimator.

    du is the input increment applied at the previous event; ebar_diff is
    the filtered-error difference between the current step and the one
    before it.
    """
    den = du * du + gains.mu
    return (ppd_hat
            - gains.eta1 * ppd_hat * du * du / den
            + gains.eta1 * du * ebar_diff / den)


def reset_ppd(ppd_hat: float, ppd_init: float, du: float,
              gamma: float) -> float:
    """Reinitialize the estimate when it collapses, stalls or flips sign."""
    if abs(ppd_hat) < gamma or abs(du) < gamma or np.sign(ppd_hat) != np.sign(ppd_init):
        return ppd_init
    return ppd_hat


def control_gain(ppd_hat: float, gains: ControllerGains) -> float:
    """eta2 * ppd / (ppd^2 + varpi), guarded against a vanishing denominator."""
    den = ppd_hat * ppd_hat + gains.varpi
    if abs(den) <= 1e-9:
        raise DegenerateGainError(
            f"ppd^2 + varpi = {den!r}; adjust varpi or the initial estimate")
    return gains.eta2 * ppd_hat / den


def control_update(u_prev: float, ppd_hat: float, error: float, h: int,
                   gains: ControllerGains) -> float:
    """Incremental control move u + gain * h * error; frozen while h = 0."""
    return u_prev + control_gain(ppd_hat, gains) * h * error


def compute_theta(ppd_hats: np.ndarray, gains_list, psi: np.ndarray) -> ThresholdState:
    """Network trigger threshold from the current gain diagonal.

    P = -diag(eta2_i * ppd_i^2 / (ppd_i^2 + varpi_i)) (the unknown true
    incremental gain replaced by its estimate);
    theta = 2*sigma_max(Psi^T P) / (2*sigma_min(P) + sigma_max(P^2)),
    with the sigma extremes of the diagonal P taken over absolute
    diagonal entries.  A degenerate denominator yields theta = 0, under
    which the strict trigger test never fires.
    """
    ppd_hats = np.asarray(ppd_hats, dtype=float)
    eta2 = np.array([g.eta2 for g in gains_list])
    varpi = np.array([g.varpi for g in gains_list])
    p_diag = -eta2 * ppd_hats * ppd_hats / (ppd_hats * ppd_hats + varpi)
    mags = np.abs(p_diag)
    den = 2.0 * mags.min() + (mags ** 2).max()
    if den <= 1e-12:
        return ThresholdState(theta=0.0, p_diag=p_diag)
    num = 2.0 * np.linalg.svd(psi.T @ np.diag(p_diag), compute_uv=False).max()
    return ThresholdState(theta=num / den, p_diag=p_diag)
