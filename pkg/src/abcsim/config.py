"""Experiment config files: INI sections mirroring SimConfig.

Sections: graph, gauge, plant, reference, gains, init, run, and an
optional attack section (absent = no attacks).  Unknown sections or keys
are rejected so silent typos cannot change an experiment.  Values can be
overridden from the command line with repeated `section.key=value`
assignments before validation.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from . import attacks as atk
from .controller import ControllerGains
from .engine import CONTROL_MODES, SimConfig
from .graphs import build_gauge, check_structural_balance, load_graph
from .plants import HarmonicReference, PiecewiseReference, make_plants


class ConfigError(Exception):
    """Config file is missing, malformed or inconsistent."""


_SCHEMA = {
    "graph": {"file"},
    "gauge": {"m", "n"},
    "plant": {"catalog", "b", "offset"},
    "reference": {"kind", "segments", "switch", "before", "after"},
    "gains": {"eta1", "eta2", "mu", "varpi", "gamma"},
    "init": {"y", "u", "ppd"},
    "attack": {"file", "seed", "kappa", "freq_rate", "zeta", "dur_rate",
               "max_duration"},
    "run": {"horizon", "control_mode", "psi_pinning",
            "skip_estimator_on_attack"},
}
_MANDATORY_SECTIONS = ("graph", "gauge", "plant", "reference", "gains",
                       "init", "run")


def load_config(path: str | Path, overrides=(), threads: int = 1) -> SimConfig:
    """Parse an experiment file into a validated SimConfig."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc

    data = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    for assignment in overrides:
        key, eq, value = assignment.partition("=")
        section, dot, name = key.strip().partition(".")
        if not eq or not dot or not section or not name:
            raise ConfigError(
                f"override must look like section.key=value: {assignment!r}")
        data.setdefault(section, {})[name.strip()] = value.strip()

    for section, keys in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in keys:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for section in _MANDATORY_SECTIONS:
        if section not in data:
            raise ConfigError(f"missing section [{section}]")

    base = path.parent

    def need(section, key):
        try:
            return data[section][key]
        except KeyError:
            raise ConfigError(f"missing key {key!r} in section [{section}]") from None

    def num(section, key, default=None, cast=float):
        if default is not None and key not in data.get(section, {}):
            return default
        raw = need(section, key)
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None

    graph = _load_graph(base / need("graph", "file"))
    m = num("gauge", "m")
    n_coef = num("gauge", "n")
    try:
        gauge = build_gauge(check_structural_balance(graph), m, n_coef)
    except Exception as exc:
        raise ConfigError(f"gauge: {exc}") from exc

    horizon = num("run", "horizon", cast=int)
    reference = _parse_reference(data["reference"], horizon)
    plants = _parse_plants(data["plant"], graph.n_followers)

    try:
        gains = ControllerGains(
            eta1=num("gains", "eta1"), eta2=num("gains", "eta2"),
            mu=num("gains", "mu"), varpi=num("gains", "varpi"),
            gamma=num("gains", "gamma", default=1e-5))
    except ValueError as exc:
        raise ConfigError(f"gains: {exc}") from exc

    schedule = _parse_attack(data.get("attack"), horizon, base)

    control_mode = data["run"].get("control_mode", "continuous")
    if control_mode not in CONTROL_MODES:
        raise ConfigError(f"[run] control_mode must be one of {CONTROL_MODES}")
    psi_pinning = data["run"].get("psi_pinning", "signed")
    if psi_pinning not in ("signed", "absolute"):
        raise ConfigError("[run] psi_pinning must be 'signed' or 'absolute'")
    skip_raw = data["run"].get("skip_estimator_on_attack", "false").lower()
    if skip_raw not in ("true", "false"):
        raise ConfigError("[run] skip_estimator_on_attack must be true/false")

    try:
        return SimConfig(
            graph=graph, gauge=gauge, plants=plants, reference=reference,
            horizon=horizon,
            gains=[gains] * graph.n_followers,
            y_init=num("init", "y"), u_init=num("init", "u"),
            ppd_init=num("init", "ppd"),
            schedule=schedule, psi_pinning=psi_pinning,
            skip_estimator_on_attack=skip_raw == "true",
            control_mode=control_mode, threads=threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_graph(path: Path):
    from .graphs import GraphParseError
    try:
        return load_graph(path)
    except FileNotFoundError:
        raise ConfigError(f"graph file not found: {path}") from None
    except GraphParseError as exc:
        raise ConfigError(f"graph file: {exc}") from exc


def _parse_plants(section: dict, n_agents: int):
    catalog = section.get("catalog")
    if catalog is None:
        raise ConfigError("missing key 'catalog' in section [plant]")
    kwargs = {}
    for key in ("b", "offset"):
        if key in section:
            if catalog != "linear":
                raise ConfigError(f"[plant] {key} only applies to the linear catalog")
            try:
                kwargs[key] = float(section[key])
            except ValueError:
                raise ConfigError(f"[plant] {key}: not a number") from None
    try:
        return make_plants(catalog, n_agents, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"plant: {exc}") from exc


def _parse_reference(section: dict, horizon: int):
    kind = section.get("kind")
    if kind == "piecewise":
        raw = section.get("segments")
        if raw is None:
            raise ConfigError("piecewise reference needs 'segments'")
        segments = []
        for part in raw.split(","):
            try:
                start, value = part.split(":")
                segments.append((int(start), float(value)))
            except ValueError:
                raise ConfigError(
                    f"bad segment {part.strip()!r}; expected start:value") from None
        try:
            return PiecewiseReference(segments=tuple(segments), horizon=horizon)
        except ValueError as exc:
            raise ConfigError(f"reference: {exc}") from exc
    if kind == "harmonic":
        try:
            switch = int(section["switch"])
            before = _parse_terms(section["before"])
            after = _parse_terms(section["after"])
        except KeyError as exc:
            raise ConfigError(f"harmonic reference needs {exc.args[0]!r}") from None
        try:
            return HarmonicReference(before=before, after=after,
                                     switch=switch, horizon=horizon)
        except ValueError as exc:
            raise ConfigError(f"reference: {exc}") from exc
    raise ConfigError("reference kind must be 'piecewise' or 'harmonic'")


def _parse_terms(raw: str):
    """Parse 'sin:5:2500, cos:3:2500' into harmonic term tuples."""
    terms = []
    for part in raw.split(","):
        pieces = part.strip().split(":")
        if len(pieces) != 3:
            raise ConfigError(
                f"bad harmonic term {part.strip()!r}; expected kind:amp:divisor")
        kind, amp, divisor = pieces
        try:
            terms.append((kind, float(amp), float(divisor)))
        except ValueError:
            raise ConfigError(f"bad harmonic term {part.strip()!r}") from None
    return tuple(terms)


def _parse_attack(section: dict | None, horizon: int, base: Path):
    if section is None:
        return None
    if "file" in section:
        extra = set(section) - {"file"}
        if extra:
            raise ConfigError(
                f"[attack] file excludes generator keys: {sorted(extra)}")
        try:
            return atk.load_schedule(base / section["file"], horizon)
        except FileNotFoundError:
            raise ConfigError(f"attack file not found: {section['file']}") from None
        except ValueError as exc:
            raise ConfigError(f"attack file: {exc}") from exc
    needed = {"seed", "kappa", "freq_rate", "zeta", "dur_rate", "max_duration"}
    missing = needed - set(section)
    if missing:
        raise ConfigError(f"[attack] generator needs keys {sorted(missing)}")
    try:
        budget = atk.AttackBudget(
            kappa_a=float(section["kappa"]),
            freq_rate=float(section["freq_rate"]),
            zeta_a=float(section["zeta"]),
            dur_rate=float(section["dur_rate"]))
        return atk.generate_schedule(budget, horizon,
                                     int(section["max_duration"]),
                                     int(section["seed"]))
    except ValueError as exc:
        raise ConfigError(f"attack: {exc}") from exc
