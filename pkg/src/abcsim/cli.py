"""Command-line front end: run experiments, check graphs, build attacks.

Exit codes: 0 success, 1 negative verification verdict, 2 config/usage
errors, 3 graph errors, 4 runtime/simulation errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import attacks as atk
from .config import ConfigError, load_config
from .engine import EngineError, lyapunov_trace, run, summarize
from .graphs import (
    GraphError,
    GraphParseError,
    UnbalancedError,
    build_gauge,
    check_structural_balance,
    coupling_matrices,
    has_spanning_tree,
    load_graph,
)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_GRAPH = 3
EXIT_RUNTIME = 4


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="abcsim",
        description="Asymmetric bipartite consensus simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run an experiment config")
    p_sim.add_argument("config", type=Path)
    p_sim.add_argument("--out", type=Path, default=Path("out"),
                       help="output directory (default: ./out)")
    p_sim.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
    p_sim.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p_sim.add_argument("--no-plots", action="store_true",
                       help="skip SVG figure generation")
    p_sim.set_defaults(func=cmd_simulate)

    p_vg = sub.add_parser("verify-graph", help="check balance and reachability")
    p_vg.add_argument("graph", type=Path)
    p_vg.add_argument("-m", type=float, default=1.0)
    p_vg.add_argument("-n", type=float, default=1.0)
    p_vg.set_defaults(func=cmd_verify_graph)

    p_ga = sub.add_parser("gen-attack", help="generate a DoS schedule")
    p_ga.add_argument("--seed", type=int, required=True)
    p_ga.add_argument("--horizon", type=int, required=True)
    p_ga.add_argument("--kappa", type=float, required=True)
    p_ga.add_argument("--freq-rate", type=float, required=True)
    p_ga.add_argument("--zeta", type=float, required=True)
    p_ga.add_argument("--dur-rate", type=float, required=True)
    p_ga.add_argument("--max-duration", type=int, default=10)
    p_ga.add_argument("--out", type=Path, required=True)
    p_ga.set_defaults(func=cmd_gen_attack)

    p_sum = sub.add_parser("summarize", help="recompute metrics from a trace")
    p_sum.add_argument("trace", type=Path)
    p_sum.add_argument("--segments", default=None,
                       help="comma-separated start:end step ranges (1-based)")
    p_sum.set_defaults(func=cmd_summarize)

    args = parser.parse_args(argv)
    return args.func(args)


def cmd_simulate(args) -> int:
    try:
        config = load_config(args.config, overrides=args.overrides,
                             threads=max(args.threads, 1))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(config)
    except GraphError as exc:
        print(f"graph error: {exc}", file=sys.stderr)
        return EXIT_GRAPH
    except EngineError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    result.to_csv(out / "trace.csv")
    segments = _reference_segments(config)
    stats = summarize(result, segments)
    _write_metrics(stats, result, out / "metrics.csv")
    (out / "summary.txt").write_text(_format_summary(stats, result))
    if not args.no_plots:
        _write_plots(result, config, out)
    print(f"wrote {out}/trace.csv ({result.horizon * result.n_agents} rows)")
    return EXIT_OK


def cmd_verify_graph(args) -> int:
    try:
        graph = load_graph(args.graph)
    except (GraphParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        v1, v2 = check_structural_balance(graph)
    except UnbalancedError as exc:
        print("balance: UNBALANCED")
        print(f"reason: {exc}")
        return EXIT_VERDICT
    print(f"balance: ok  V1={{{', '.join(map(str, v1))}}}  "
          f"V2={{{', '.join(map(str, v2))}}}")
    tree = has_spanning_tree(graph)
    print(f"spanning tree from leader: {'yes' if tree else 'no'}")
    try:
        gauge = build_gauge((v1, v2), args.m, args.n)
        psi = coupling_matrices(graph, gauge).psi
        smallest = np.linalg.svd(psi, compute_uv=False).min()
        print(f"psi smallest singular value: {smallest:.6g}")
    except GraphError as exc:
        print(f"gauge error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if tree else EXIT_VERDICT


def cmd_gen_attack(args) -> int:
    try:
        budget = atk.AttackBudget(kappa_a=args.kappa, freq_rate=args.freq_rate,
                                  zeta_a=args.zeta, dur_rate=args.dur_rate)
    except ValueError as exc:
        print(f"invalid budget: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sched = atk.generate_schedule(budget, args.horizon, args.max_duration,
                                      args.seed)
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except atk.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    atk.write_schedule(sched, args.out)
    freq_ok = atk.verify_frequency(sched, budget)
    dur_ok = atk.verify_duration(sched, budget)
    print(f"windows: {len(sched.intervals)}  attacked steps: {sched.total_attacked}")
    print(f"frequency budget: {'pass' if freq_ok else 'FAIL'}")
    print(f"duration budget: {'pass' if dur_ok else 'FAIL'}")
    return EXIT_OK if freq_ok and dur_ok else EXIT_VERDICT


def cmd_summarize(args) -> int:
    try:
        rows = list(csv.DictReader(args.trace.open()))
    except OSError as exc:
        print(f"cannot read trace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not rows:
        print("empty trace", file=sys.stderr)
        return EXIT_CONFIG
    ks = np.array([int(r["k"]) for r in rows])
    agents = np.array([int(r["agent"]) for r in rows])
    horizon, n = ks.max(), agents.max()
    e_abc = np.zeros((horizon, n))
    trig = np.zeros((horizon, n), dtype=bool)
    h = np.ones(horizon, dtype=int)
    for r in rows:
        k, i = int(r["k"]) - 1, int(r["agent"]) - 1
        e_abc[k, i] = float(r["e_abc"])
        trig[k, i] = r["triggered"] == "1"
        h[k] = int(r["h"])
    segments = [(1, horizon)]
    if args.segments:
        try:
            segments = [tuple(int(x) for x in part.split(":"))
                        for part in args.segments.split(",")]
        except ValueError:
            print("bad --segments; expected start:end[,start:end...]",
                  file=sys.stderr)
            return EXIT_CONFIG
    print(f"steps: {horizon}  agents: {n}  attacked steps: {int((h == 0).sum())}")
    for start, end in segments:
        window = np.abs(e_abc[start - 1:end])
        means = " ".join(f"{v:.4g}" for v in window.mean(axis=0))
        print(f"segment [{start},{end}] mean|e|: {means}")
    rates = " ".join(f"{v:.3f}" for v in trig.sum(axis=0) / horizon)
    print(f"trigger rates: {rates}")
    return EXIT_OK


def _reference_segments(config):
    """Steady-state reporting windows: one segment per reference piece."""
    ref = config.reference
    horizon = config.horizon
    if hasattr(ref, "segments"):
        starts = [max(s, 1) for s, _ in ref.segments] + [horizon + 1]
        return [(starts[i], starts[i + 1] - 1) for i in range(len(starts) - 1)
                if starts[i] <= horizon]
    if hasattr(ref, "switch") and 1 < ref.switch <= horizon:
        return [(1, ref.switch - 1), (ref.switch, horizon)]
    return [(1, horizon)]


def _write_metrics(stats, result, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("segment_start", "segment_end", "agent",
                         "mean_abs_e", "max_abs_e", "trigger_rate"))
        for seg in stats["segments"]:
            start, end = seg["segment"]
            for i in range(result.n_agents):
                writer.writerow((
                    start, end, i + 1,
                    format(seg["mean_abs_e"][i], ".9g"),
                    format(seg["max_abs_e"][i], ".9g"),
                    format(stats["trigger_rates"][i], ".9g")))


def _format_summary(stats, result) -> str:
    lines = [
        f"agents: {result.n_agents}  steps: {result.horizon}",
        f"attacked steps: {stats['attacked_steps']}",
        f"max |e_abc|: {stats['max_abs_e']:.6g}",
        "trigger counts: " + " ".join(str(int(c)) for c in stats["trigger_counts"]),
    ]
    for seg in stats["segments"]:
        start, end = seg["segment"]
        means = " ".join(f"{v:.4g}" for v in seg["mean_abs_e"])
        lines.append(f"segment [{start},{end}] mean |e_abc| per agent: {means}")
    v, dv = lyapunov_trace(result)
    lines.append(f"Lyapunov V final: {v[-1]:.6g}  increase steps: {int((dv > 0).sum())}")
    return "\n".join(lines) + "\n"


def _write_plots(result, config, out: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ks = np.arange(1, result.horizon + 1)
    gauge = result.gauge
    y_d = np.array([config.reference.value(int(k)) for k in ks])

    fig, ax = plt.subplots(figsize=(9, 5))
    for lo, hi in _attack_spans(result.h):
        ax.axvspan(lo, hi, color="0.85", zorder=0)
    ax.plot(ks, gauge.m * y_d, color="tab:red", lw=2, ls="--",
            label=f"target +{gauge.m:g}·y_d")
    ax.plot(ks, -gauge.n * y_d, color="tab:orange", lw=2, ls="--",
            label=f"target -{gauge.n:g}·y_d")
    ax.plot(ks, y_d, color="0.4", lw=1.5, label="leader y_d")
    for i in range(result.n_agents):
        ax.plot(ks, result.y[:, i], lw=0.8, label=f"agent {i + 1}")
    ax.set_xlabel("step k")
    ax.set_ylabel("output")
    ax.legend(ncol=3, fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "trajectories.svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(9, 3))
    for i in range(result.n_agents):
        events = ks[result.triggered[:, i]]
        ax.plot(events, np.full(events.shape, i + 1), "|", markersize=4)
    ax.set_xlabel("step k")
    ax.set_ylabel("agent")
    ax.set_yticks(range(1, result.n_agents + 1))
    ax.set_title("event instants")
    fig.tight_layout()
    fig.savefig(out / "events.svg")
    plt.close(fig)


def _attack_spans(h):
    spans = []
    start = None
    for k, hk in enumerate(h, start=1):
        if hk == 0 and start is None:
            start = k
        elif hk == 1 and start is not None:
            spans.append((start, k))
            start = None
    if start is not None:
        spans.append((start, len(h)))
    return spans


if __name__ == "__main__":
    sys.exit(main())
