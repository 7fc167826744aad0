"""Asymmetric bipartite consensus simulator.

Simulates leader-follower networks of discrete-time nonlinear agents over
signed communication digraphs.  Followers split into two camps that track
scaled copies of the leader reference with opposite signs (+m*y_d and
-n*y_d).  Each agent runs a data-driven event-triggered controller built
from measured input/output increments only, and the network tolerates
aperiodic denial-of-service windows during which transmitted errors are
zeroed and control inputs freeze.
"""

from .graphs import (
    SignedDigraph,
    BalanceGauge,
    CouplingMatrices,
    check_structural_balance,
    build_gauge,
    coupling_matrices,
    has_spanning_tree,
    is_strongly_connected,
    load_graph,
    UnbalancedError,
    GraphParseError,
)
from .plants import (
    make_plants,
    LinearPlant,
    PiecewiseReference,
    HarmonicReference,
    reference_value,
    cfdl_diagnostic,
    NonFiniteError,
)
from .attacks import (
    DosSchedule,
    AttackBudget,
    generate_schedule,
    verify_frequency,
    verify_duration,
    availability,
    filter_error,
    InfeasibleError,
)
from .controller import (
    ControllerGains,
    neighborhood_errors,
    triggered_error,
    local_abc_error,
    trigger_decision,
    update_ppd,
    reset_ppd,
    control_update,
    compute_theta,
    DegenerateGainError,
)
from .engine import SimConfig, SimResult, run, lyapunov_trace, summarize

__version__ = "0.1.0"
