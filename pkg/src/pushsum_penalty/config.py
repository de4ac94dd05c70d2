"""
Load run configs (JSON) and turn them into engine inputs.

A config names a graph schedule, a parameter schedule, a problem and run
options; see the files under ``pushsum_penalty/configs`` for examples.
Unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .energy import EnergyInstance, InstanceError, build_distributed_problem, instance_from_dict
from .engine import RunConfig
from .netgraph import DiGraph, GraphSchedule, parse_selector
from .problems import averaging_problems, quadratic_problems, toy_problems
from .schedules import ParamSchedule, custom_schedule, power_law_schedule, power_term
from .schema import CONFIG_SCHEMA, validate

__all__ = ["ConfigError", "LoadedConfig", "load_config", "parse_config", "build_graph", "build_params"]


class ConfigError(ValueError):
    """The config file is missing, malformed or violates an invariant."""


@dataclass
class LoadedConfig:
    raw: dict
    seed: int
    graph: GraphSchedule
    params: ParamSchedule
    problems: list
    run: RunConfig
    energy: Optional[EnergyInstance] = None
    oracle: dict = field(default_factory=dict)
    allow_uncertified: bool = False
    cert_horizon: int = 10**6

    @property
    def kind(self) -> str:
        return self.raw["problem"]["kind"]

    def solution_coords(self) -> slice:
        """Coordinates compared in relative-error reports (the ``p`` block for energy)."""
        if self.energy is not None:
            return slice(0, self.energy.n_nodes)
        return slice(0, self.run.dim)


def build_graph(g: dict, seed: int = 0) -> GraphSchedule:
    n = g["n"]
    graphs = []
    for k, edges in enumerate(g["graphs"]):
        bad = [e for e in edges if max(e) > n]
        if bad:
            raise ConfigError(f"graph.graphs[{k}]: edge {bad[0]} names a node outside 1..{n}")
        graphs.append(DiGraph.from_edges(n, [tuple(e) for e in edges], one_based=True))
    try:
        selector, period = parse_selector(g.get("selector", "round-robin"), len(graphs), seed)
    except ValueError as exc:
        raise ConfigError(f"graph.selector: {exc}") from None
    return GraphSchedule(graphs, selector, claimed_B=g.get("claimed_B"), period=period)


def _term(spec: dict):
    if spec["kind"] == "power":
        return power_term(spec["scale"], spec["exponent"])
    value = float(spec["value"])

    def const(t):
        return np.full(np.shape(t), value) if np.ndim(t) else value

    const.spec = dict(spec)
    return const


def build_params(s: dict) -> ParamSchedule:
    """Raises :class:`~pushsum_penalty.schedules.ScheduleError` for power laws
    outside the admissible range."""
    if s["family"] == "power_law":
        return power_law_schedule(s["b"], s.get("a_scale", 1.0), s.get("r_scale", 1.0))
    return custom_schedule(_term(s["a"]), _term(s["r"]))


def _problems(p: dict, n: int):
    kind = p["kind"]
    if kind == "averaging":
        return averaging_problems(n, p.get("dim", 1)), None
    if kind == "quadratic":
        centers = np.asarray(p["centers"], dtype=float)
        if centers.ndim != 2 or len(centers) != n:
            raise ConfigError(f"problem.centers: need {n} rows of equal length")
        return quadratic_problems(centers), None
    if kind == "toy":
        return toy_problems(n, p.get("lower", 1.0)), None
    inst = instance_from_dict(p)
    if inst.n_nodes != n:
        raise ConfigError(f"problem: {inst.n_nodes} energy nodes but graph.n = {n}")
    return build_distributed_problem(inst), inst


def _x0(spec, n: int, d: int, seed: int):
    if spec is None:
        return None
    if isinstance(spec, dict):
        lo, hi = spec["uniform"]
        if not lo <= hi:
            raise ConfigError("run.x0.uniform: need lo <= hi")
        return np.random.default_rng(seed).uniform(lo, hi, size=(n, d))
    x0 = np.asarray(spec, dtype=float)
    if x0.shape != (n, d):
        raise ConfigError(f"run.x0: shape {x0.shape}, expected {(n, d)}")
    return x0


def parse_config(raw: dict, seed: Optional[int] = None) -> LoadedConfig:
    """Validate ``raw`` and build everything a run needs.  ``seed`` overrides
    the config's own seed."""
    try:
        validate(raw, CONFIG_SCHEMA, "config")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seed = raw.get("seed", 0) if seed is None else int(seed)
    graph = build_graph(raw["graph"], seed)
    params = build_params(raw["schedule"])
    try:
        problems, inst = _problems(raw["problem"], graph.n)
    except (InstanceError, TypeError) as exc:
        raise ConfigError(f"problem: {exc}") from None
    r = raw.get("run", {})
    d = problems[0].dim
    cfg = RunConfig(
        problems=problems,
        schedule=graph,
        params=params,
        x0=_x0(r.get("x0"), graph.n, d, seed),
        max_rounds=r.get("max_rounds", 30_000),
        record_every=r.get("record_every", 100),
        stop_tolerance=r.get("stop_tolerance"),
        literal_4d=r.get("literal_4d", False),
        trace=r.get("trace", False),
        timing=r.get("timing", False),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return LoadedConfig(
        raw=raw,
        seed=seed,
        graph=graph,
        params=params,
        problems=problems,
        run=cfg,
        energy=inst,
        oracle=raw.get("oracle", {}),
        allow_uncertified=raw["schedule"].get("allow_uncertified", False),
        cert_horizon=raw["schedule"].get("horizon", 10**6),
    )


def load_config(path, seed: Optional[int] = None) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw, seed)
