"""Signed leader-follower digraphs and their coupling matrices.

A network is one leader (index 0, implicit) plus N followers (1..N).
Edges carry signed weights: positive for cooperative links, negative for
antagonistic ones.  A structurally balanced graph admits a two-coloring
of the followers such that same-colored pairs are joined by nonnegative
weights and cross-colored pairs by nonpositive ones.  From the coloring
and the influence coefficients (m, n) we build the diagonal gauges
W = diag(delta_i) and S = diag(s_i), the signed graph matrix

    L_|G| = diag(S^-1 W A W S 1) - A

and the network coupling matrix Psi = L_|G| W S + diag(g).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class GraphError(Exception):
    """Base class for graph construction/validation failures."""


class UnbalancedError(GraphError):
    """No two-coloring satisfies the sign condition."""


class GraphParseError(GraphError):
    """Malformed graph file."""


@dataclass(frozen=True)
class SignedDigraph:
    """Follower-to-follower adjacency plus leader pinning.

    adjacency[i][j] is the weight of edge j -> i (0-based internally;
    the file format and all user-facing indices are 1-based).  pinning[i]
    is -1, 0 or +1: the signed leader link of follower i.
    """

    adjacency: np.ndarray
    pinning: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        pin = np.asarray(self.pinning, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise GraphError("adjacency must be a square matrix")
        if pin.shape != (adj.shape[0],):
            raise GraphError("pinning length must match adjacency size")
        if np.any(np.diag(adj) != 0.0):
            raise GraphError("self-edges are not allowed")
        if not np.all(np.isin(pin, (-1.0, 0.0, 1.0))):
            raise GraphError("pinning gains must be -1, 0 or +1")
        if not np.any(pin != 0.0):
            raise GraphError("at least one follower must be pinned")
        adj.setflags(write=False)
        pin.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "pinning", pin)

    @property
    def n_followers(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True)
class BalanceGauge:
    """Partition coloring and influence scales for a balanced graph."""

    v1: tuple[int, ...]  # 1-based follower indices, first camp
    v2: tuple[int, ...]  # second camp
    m: float
    n: float
    delta: np.ndarray  # +1 for V1 members, -1 for V2
    s: np.ndarray      # m for V1 members, n for V2

    def __post_init__(self):
        self.delta.setflags(write=False)
        self.s.setflags(write=False)


@dataclass(frozen=True)
class CouplingMatrices:
    """Laplacian, signed graph matrix and the network coupling Psi."""

    laplacian: np.ndarray
    l_signed: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        for mat in (self.laplacian, self.l_signed, self.psi):
            mat.setflags(write=False)


def check_structural_balance(graph: SignedDigraph) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Two-color the followers by edge signs; leader belongs to the first camp.

    Returns (V1, V2) as sorted 1-based index tuples.  Edge direction is
    irrelevant to the coloring; a pin of +1 ties the follower to the
    leader's camp, -1 to the opposite one.  Sign-disconnected components
    are seeded in index order with their lowest-index member in V1.

    Raises UnbalancedError when the sign constraints are contradictory.
    """
    nf = graph.n_followers
    adj = graph.adjacency

    # Constraint list per follower: (neighbor index or -1 for leader, sign).
    neighbors: list[list[tuple[int, float]]] = [[] for _ in range(nf)]
    for i in range(nf):
        if graph.pinning[i] != 0.0:
            neighbors[i].append((-1, graph.pinning[i]))
        for j in range(nf):
            if i != j and (adj[i, j] != 0.0 or adj[j, i] != 0.0):
                sign = adj[i, j] if adj[i, j] != 0.0 else adj[j, i]
                if adj[i, j] != 0.0 and adj[j, i] != 0.0 and np.sign(adj[i, j]) != np.sign(adj[j, i]):
                    raise UnbalancedError(
                        f"edges between followers {i + 1} and {j + 1} disagree in sign"
                    )
                neighbors[i].append((j, sign))

    color = _anchor_to_leader(graph, neighbors, nf)
    v1 = tuple(i + 1 for i in range(nf) if color[i] > 0)
    v2 = tuple(i + 1 for i in range(nf) if color[i] < 0)
    return v1, v2


def _anchor_to_leader(graph, neighbors, nf):
    """Deterministic coloring with leader-aware component anchoring."""
    color = np.zeros(nf, dtype=int)
    for seed in range(nf):
        if color[seed] != 0:
            continue
        color[seed] = 1
        comp = [seed]
        stack = [seed]
        anchor = 0  # required color of `seed` implied by pins, if any
        if graph.pinning[seed] != 0.0:
            anchor = int(graph.pinning[seed])
        while stack:
            i = stack.pop()
            for j, sign in neighbors[i]:
                if j == -1:
                    want_i = 1 if sign > 0 else -1
                    implied_seed = color[seed] if want_i == color[i] else -color[seed]
                    if anchor == 0:
                        anchor = implied_seed
                    elif anchor != implied_seed:
                        raise UnbalancedError("pin signs contradict the edge coloring")
                    continue
                want = color[i] if sign > 0 else -color[i]
                if color[j] == 0:
                    color[j] = want
                    comp.append(j)
                    stack.append(j)
                elif color[j] != want:
                    raise UnbalancedError(
                        f"follower {j + 1} cannot be consistently colored"
                    )
        if anchor == -1:
            for i in comp:
                color[i] = -color[i]
        # anchor 0 (no pins in component) keeps lowest index in camp +1
    return color


def build_gauge(partition: tuple[tuple[int, ...], tuple[int, ...]],
                m: float, n: float) -> BalanceGauge:
    """Construct delta/s vectors from a partition and influence scales."""
    if m <= 0 or n <= 0:
        raise GraphError("influence coefficients m, n must be positive")
    v1, v2 = tuple(sorted(partition[0])), tuple(sorted(partition[1]))
    members = sorted(v1 + v2)
    nf = len(members)
    if members != list(range(1, nf + 1)):
        raise GraphError("partition must cover followers 1..N exactly once")
    delta = np.array([1.0 if i in v1 else -1.0 for i in range(1, nf + 1)])
    s = np.array([m if i in v1 else n for i in range(1, nf + 1)])
    return BalanceGauge(v1=v1, v2=v2, m=float(m), n=float(n), delta=delta, s=s)


def coupling_matrices(graph: SignedDigraph, gauge: BalanceGauge,
                      psi_pinning: str = "signed") -> CouplingMatrices:
    """Build L, L_|G| and Psi for a balanced graph with matching gauge.

    psi_pinning selects the diagonal pinning block of Psi: "signed" uses
    diag(g_i) as-is, "absolute" uses diag(|g_i|).
    """
    adj = graph.adjacency
    nf = graph.n_followers
    if gauge.delta.shape != (nf,):
        raise GraphError("gauge size does not match graph")
    if psi_pinning not in ("signed", "absolute"):
        raise GraphError(f"unknown psi_pinning mode {psi_pinning!r}")
    lap = np.diag(adj.sum(axis=1)) - adj
    delta, s = gauge.delta, gauge.s
    # Diagonal of S^-1 W A W S, written elementwise so that the unit-gauge
    # all-positive case collapses to the plain Laplacian bit-for-bit.
    scaled = delta[:, None] * adj * delta[None, :] * (s[None, :] / s[:, None])
    l_signed = np.diag(scaled.sum(axis=1)) - adj
    pin = graph.pinning if psi_pinning == "signed" else np.abs(graph.pinning)
    psi = l_signed @ np.diag(delta * s) + np.diag(pin)
    return CouplingMatrices(laplacian=lap, l_signed=l_signed, psi=psi)


def has_spanning_tree(graph: SignedDigraph) -> bool:
    """True iff every follower is reachable from the leader.

    Traversal follows pin links (leader to pinned followers) and directed
    edges j -> i; signs are ignored.
    """
    nf = graph.n_followers
    seen = np.zeros(nf, dtype=bool)
    stack = [i for i in range(nf) if graph.pinning[i] != 0.0]
    seen[stack] = True
    while stack:
        j = stack.pop()
        for i in np.nonzero(graph.adjacency[:, j])[0]:
            if not seen[i]:
                seen[i] = True
                stack.append(int(i))
    return bool(seen.all())


def is_strongly_connected(graph: SignedDigraph) -> bool:
    """True iff the follower digraph is strongly connected (signs ignored)."""
    nf = graph.n_followers
    if nf == 1:
        return True
    mask = graph.adjacency != 0.0

    def reach(start: int, forward: bool) -> int:
        seen = np.zeros(nf, dtype=bool)
        seen[start] = True
        stack = [start]
        while stack:
            j = stack.pop()
            row = mask[:, j] if forward else mask[j, :]
            for i in np.nonzero(row)[0]:
                if not seen[i]:
                    seen[i] = True
                    stack.append(int(i))
        return int(seen.sum())

    return reach(0, True) == nf and reach(0, False) == nf


def parse_graph(text: str) -> SignedDigraph:
    """Parse the line-oriented graph format.

    Directives: `agents N`, `edge <from> <to> <weight>`, `pin <i> <+1|-1>`;
    `#` starts a comment.  Duplicate edges/pins and out-of-range indices
    are rejected.
    """
    n = None
    adj = None
    pin = None
    seen_edges: set[tuple[int, int]] = set()
    seen_pins: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "agents":
                if n is not None:
                    raise GraphParseError(f"line {lineno}: duplicate 'agents' header")
                n = int(parts[1])
                if len(parts) != 2 or n < 1:
                    raise GraphParseError(f"line {lineno}: bad agent count")
                adj = np.zeros((n, n))
                pin = np.zeros(n)
            elif parts[0] == "edge":
                if adj is None:
                    raise GraphParseError(f"line {lineno}: 'edge' before 'agents'")
                if len(parts) != 4:
                    raise GraphParseError(f"line {lineno}: edge needs <from> <to> <weight>")
                src, dst, weight = int(parts[1]), int(parts[2]), float(parts[3])
                if not (1 <= src <= n and 1 <= dst <= n):
                    raise GraphParseError(f"line {lineno}: edge index out of range")
                if src == dst:
                    raise GraphParseError(f"line {lineno}: self-edge not allowed")
                if (src, dst) in seen_edges:
                    raise GraphParseError(f"line {lineno}: duplicate edge {src}->{dst}")
                seen_edges.add((src, dst))
                adj[dst - 1, src - 1] = weight
            elif parts[0] == "pin":
                if pin is None:
                    raise GraphParseError(f"line {lineno}: 'pin' before 'agents'")
                if len(parts) != 3:
                    raise GraphParseError(f"line {lineno}: pin needs <i> <+1|-1>")
                i, sign = int(parts[1]), int(parts[2])
                if not 1 <= i <= n:
                    raise GraphParseError(f"line {lineno}: pin index out of range")
                if sign not in (-1, 1):
                    raise GraphParseError(f"line {lineno}: pin sign must be +1 or -1")
                if i in seen_pins:
                    raise GraphParseError(f"line {lineno}: duplicate pin {i}")
                seen_pins.add(i)
                pin[i - 1] = sign
            else:
                raise GraphParseError(f"line {lineno}: unknown directive {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            raise GraphParseError(f"line {lineno}: {exc}") from exc
    if n is None:
        raise GraphParseError("missing 'agents' header")
    try:
        return SignedDigraph(adjacency=adj, pinning=pin)
    except GraphError as exc:
        raise GraphParseError(str(exc)) from exc


def load_graph(path: str | Path) -> SignedDigraph:
    """Read and parse a graph file."""
    return parse_graph(Path(path).read_text())
