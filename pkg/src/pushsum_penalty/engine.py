"""
Lockstep penalty-based push-sum iterations.

Each round ``t`` every agent ``i`` performs::

    w_i(t+1) = sum_{j in N_in(i)} x_j(t) / d_j(t)
    y_i(t+1) = sum_{j in N_in(i)} y_j(t) / d_j(t)
    z_i(t+1) = w_i(t+1) / y_i(t+1)
    x_i(t+1) = w_i(t+1) - a_t [f_i(z_i(t+1)) + r_t psi_i(z_i(t+1))]

All mixing reads the pre-round snapshot of ``x`` and ``y``.  With
``literal_4d`` the gradient step starts from the previous round's ``w_i(t)``
instead of ``w_i(t+1)``; that variant does not preserve the average dynamics
and exists only for comparison.
"""

from __future__ import annotations

import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .netgraph import GraphSchedule, certify_B
from .penalty import PenalizedProblem, penalized_gradient, penalty_value
from .schedules import ParamSchedule

__all__ = [
    "EngineError",
    "RunConfig",
    "EngineState",
    "RunMetrics",
    "init_run",
    "step",
    "run",
    "mass_invariants",
    "disagreement",
    "average_step_residual",
]

log = logging.getLogger(__name__)


class EngineError(RuntimeError):
    def __init__(self, message: str, agent: Optional[int] = None, round: Optional[int] = None):
        super().__init__(message)
        self.agent = agent
        self.round = round


@dataclass
class RunConfig:
    problems: Sequence[PenalizedProblem]
    schedule: GraphSchedule
    params: ParamSchedule
    x0: Optional[np.ndarray] = None
    max_rounds: int = 30_000
    record_every: int = 100
    stop_tolerance: Optional[float] = None
    literal_4d: bool = False
    trace: bool = False
    timing: bool = False
    workers: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.problems)

    @property
    def dim(self) -> int:
        return self.problems[0].dim

    def validate(self) -> None:
        if not self.problems:
            raise ValueError("no agents configured")
        dims = {p.dim for p in self.problems}
        if len(dims) != 1:
            raise ValueError(f"agents disagree on dimension: {sorted(dims)}")
        if self.n != self.schedule.n:
            raise ValueError(f"{self.n} problems but the graph has {self.schedule.n} nodes")
        if self.x0 is not None and np.shape(self.x0) != (self.n, self.dim):
            raise ValueError(f"x0 has shape {np.shape(self.x0)}, expected {(self.n, self.dim)}")
        if self.max_rounds < 0 or self.record_every < 1:
            raise ValueError("max_rounds must be >= 0 and record_every >= 1")


@dataclass
class EngineState:
    """Per-agent quadruples stacked row-wise, plus the last gradients used."""

    t: int
    x: np.ndarray
    w: np.ndarray
    y: np.ndarray
    z: np.ndarray
    grads: Optional[np.ndarray] = None
    cfg: Optional[RunConfig] = field(default=None, repr=False)


@dataclass
class RunMetrics:
    rounds: list = field(default_factory=list)
    disagreement: list = field(default_factory=list)
    mean_deviation: list = field(default_factory=list)
    mean_penalty: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    x_bar: list = field(default_factory=list)
    walltime_ms: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    final: Optional[EngineState] = None
    stopped_early: bool = False

    def as_arrays(self) -> dict:
        return {
            "round": np.asarray(self.rounds, dtype=int),
            "disagreement": np.asarray(self.disagreement),
            "mean_penalty": np.asarray(self.mean_penalty),
            "objective": np.asarray(self.objective),
            "x_bar": np.asarray(self.x_bar),
        }


def init_run(cfg: RunConfig) -> EngineState:
    cfg.validate()
    n, d = cfg.n, cfg.dim
    x0 = np.zeros((n, d)) if cfg.x0 is None else np.array(cfg.x0, dtype=float)
    return EngineState(t=0, x=x0.copy(), w=x0.copy(), y=np.ones(n), z=x0.copy(), cfg=cfg)


def _gradients(cfg: RunConfig, z: np.ndarray, r: float, t: int, pool) -> np.ndarray:
    def one(i):
        return penalized_gradient(cfg.problems[i], z[i], r)

    idx = range(cfg.n)
    results = list(pool.map(one, idx)) if pool is not None else [one(i) for i in idx]
    g = np.array(results)
    if not np.isfinite(g.sum()):
        bad = int(np.nonzero(~np.all(np.isfinite(g), axis=1))[0][0])
        raise EngineError(f"non-finite gradient at agent {bad}, round {t}", agent=bad, round=t)
    return g


def step(engine: EngineState, t: Optional[int] = None, pool=None) -> EngineState:
    """Advance one synchronous round and return the new state."""
    cfg = engine.cfg
    t = engine.t if t is None else t
    P = cfg.schedule.matrix_at(t)
    w = P @ engine.x
    y = P @ engine.y
    if y.min() <= 0.0:
        raise EngineError(f"nonpositive push-sum weight at round {t}", round=t)
    z = w / y[:, None]
    a = cfg.params.a_at(t)
    r = cfg.params.r_at(t)
    g = _gradients(cfg, z, r, t, pool)
    base = engine.w if cfg.literal_4d else w
    x = base - a * g
    return EngineState(t=t + 1, x=x, w=w, y=y, z=z, grads=g, cfg=cfg)


def mass_invariants(engine: EngineState) -> tuple:
    """``(sum_i y_i, sum_i x_i)``."""
    return float(np.sum(engine.y)), np.sum(engine.x, axis=0)


def disagreement(z: np.ndarray) -> float:
    """``max_i ||z_i - mean_k z_k||``."""
    return float(np.max(np.linalg.norm(z - z.mean(axis=0), axis=1)))


def _record(m: RunMetrics, cfg: RunConfig, st: EngineState, xbar_prev: np.ndarray, t0: float):
    xbar = st.x.mean(axis=0)
    m.rounds.append(st.t)
    m.disagreement.append(disagreement(st.z))
    m.mean_deviation.append(float(np.mean(np.linalg.norm(st.z - xbar_prev, axis=1))))
    m.mean_penalty.append(sum(penalty_value(p, xbar) for p in cfg.problems) / cfg.n)
    m.objective.append(float(sum(p.base.objective_value(xbar) for p in cfg.problems)))
    m.x_bar.append(xbar)
    m.walltime_ms.append((time.perf_counter() - t0) * 1e3 if cfg.timing else None)
    if cfg.trace:
        for i in range(cfg.n):
            m.trace.append((st.t, i, float(st.y[i]), st.z[i].copy()))


def _workers(cfg: RunConfig) -> int:
    if cfg.workers is not None:
        return max(1, int(cfg.workers))
    env = os.environ.get("PUSHSUM_THREADS")
    return max(1, int(env)) if env else 1


def run(cfg: RunConfig) -> RunMetrics:
    """Run until ``max_rounds`` or until both the disagreement and the mean
    penalty fall below ``stop_tolerance`` at a recorded round."""
    cfg.validate()
    B = cfg.schedule.claimed_B
    if B is None:
        warnings.warn("graph schedule has no certified connectivity window B", stacklevel=2)
    elif not certify_B(cfg.schedule, B):
        warnings.warn(f"graph schedule is not {B}-strongly connected", stacklevel=2)

    st = init_run(cfg)
    m = RunMetrics()
    nw = _workers(cfg)
    pool = ThreadPoolExecutor(max_workers=nw) if nw > 1 else None
    t0 = time.perf_counter()
    try:
        for t in range(cfg.max_rounds):
            recording = (t + 1) % cfg.record_every == 0 or t + 1 == cfg.max_rounds
            xbar_prev = st.x.mean(axis=0) if recording else None
            st = step(st, t, pool)
            if recording:
                _record(m, cfg, st, xbar_prev, t0)
                tol = cfg.stop_tolerance
                if tol is not None and m.disagreement[-1] < tol and m.mean_penalty[-1] < tol:
                    m.stopped_early = True
                    log.info("stopping at round %d", st.t)
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    m.final = st
    return m


def average_step_residual(before: EngineState, after: EngineState, a: float) -> float:
    """Max deviation from ``xbar(t+1) = xbar(t) - (a_t/n) sum_i g_i`` for one round."""
    n = before.x.shape[0]
    lhs = after.x.mean(axis=0) - before.x.mean(axis=0)
    rhs = -(a / n) * after.grads.sum(axis=0)
    return float(np.max(np.abs(lhs - rhs)))

