"""
Centralized reference solvers for checking the distributed runs.

These share only the problem definitions with the engine: the iterations
below are written independently of :mod:`pushsum_penalty.engine`.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .penalty import (
    PenalizedProblem,
    objective_value_batch,
    penalized_gradient,
    penalty_value,
    penalty_value_batch,
)
from .schedules import ParamSchedule

__all__ = [
    "OracleError",
    "BruteForceResult",
    "PathPoint",
    "centralized_penalized_solve",
    "brute_force_solve",
    "penalty_path_probe",
]


class OracleError(RuntimeError):
    pass


def centralized_penalized_solve(
    problems: Sequence[PenalizedProblem],
    params: ParamSchedule,
    rounds: int,
    z0: Optional[np.ndarray] = None,
    step_scale: float = 1.0,
) -> np.ndarray:
    """Full-information penalized descent
    ``z <- z - s a_t sum_i [f_i(z) + r_t psi_i(z)]`` from ``z0`` (zero by default).

    With ``step_scale = 1/n`` this is the recursion the network average
    follows once the agents agree.
    """
    d = problems[0].dim
    z = np.zeros(d) if z0 is None else np.array(z0, dtype=float)
    for t in range(rounds):
        a = step_scale * params.a_at(t)
        r = params.r_at(t)
        total = 0.0
        for p in problems:
            total = total + penalized_gradient(p, z, r)
        if not np.all(np.isfinite(total)):
            raise OracleError(f"non-finite gradient at round {t}")
        z = z - a * total
    return z


@dataclass
class BruteForceResult:
    point: np.ndarray
    reduced: np.ndarray
    value: float
    penalty: float
    resolution: float
    levels: int


def _grid_eval(fn: Callable, axes: list, chunk: int, workers: int) -> tuple:
    """Evaluate ``fn`` over the tensor grid built from ``axes``; return
    ``(flat_argmin, min_value)``.  Chunks are reduced in a fixed order."""
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape))
    starts = list(range(0, total, chunk))

    def work(s):
        idx = np.unravel_index(np.arange(s, min(s + chunk, total)), shape)
        pts = np.stack([axes[k][idx[k]] for k in range(len(axes))], axis=-1)
        vals = fn(pts)
        j = int(np.argmin(vals))
        return s + j, float(vals[j])

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    best = min(range(len(parts)), key=lambda k: (parts[k][1], k))
    return parts[best]


def brute_force_solve(
    problems: Sequence[PenalizedProblem],
    box: tuple,
    grid: int = 101,
    refine: int = 6,
    lift: Optional[Callable] = None,
    r: float = 1e6,
    feas_tol: float = 1e-6,
    chunk: int = 2**18,
    workers: Optional[int] = None,
) -> BruteForceResult:
    """Multi-resolution grid search for ``min F + r Psi`` over ``box``.

    ``box = (lo, hi)`` bounds the searched coordinates.  When ``lift`` is
    given, the grid lives in those reduced coordinates and ``lift`` maps
    stacked points to full decision vectors (used to eliminate equality
    constraints).  Each refinement level zooms by 10x around the incumbent,
    clipped to the original box.
    """
    lo0 = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi0 = np.atleast_1d(np.asarray(box[1], dtype=float))
    if lo0.shape != hi0.shape or np.any(hi0 < lo0):
        raise ValueError("box bounds malformed")
    m = lo0.size
    if grid < 3 or float(grid) ** m > 1e8:
        raise ValueError(f"grid of {grid}^{m} points is out of range")
    lift = lift or (lambda q: q)
    if workers is None:
        workers = int(os.environ.get("PUSHSUM_THREADS", "1") or 1)

    def score(q):
        z = lift(q)
        return objective_value_batch(problems, z) + r * penalty_value_batch(problems, z)

    lo, hi = lo0.copy(), hi0.copy()
    best = None
    spacing = (hi - lo) / (grid - 1)
    for level in range(refine + 1):
        axes = [np.linspace(lo[k], hi[k], grid) for k in range(m)]
        flat, val = _grid_eval(score, axes, chunk, workers)
        idx = np.unravel_index(flat, tuple(grid for _ in range(m)))
        best = np.array([axes[k][idx[k]] for k in range(m)])
        spacing = (hi - lo) / (grid - 1)
        half = (hi - lo) / 20.0
        lo = np.maximum(lo0, best - half)
        hi = np.minimum(hi0, best + half)
    z = np.asarray(lift(best[None, :]))[0]
    pen = sum(penalty_value(p, z) for p in problems)
    if pen > feas_tol:
        raise OracleError(f"no feasible point found in the box (penalty {pen:.3e} at best grid point)")
    val = float(objective_value_batch(problems, z[None, :])[0])
    return BruteForceResult(
        point=z,
        reduced=best,
        value=val,
        penalty=float(pen),
        resolution=float(np.max(spacing)),
        levels=refine + 1,
    )


@dataclass
class PathPoint:
    r: float
    minimizer: np.ndarray
    value: float
    objective: float
    iterations: int


def _penalized_value(problems, z, r):
    return sum(float(p.base.objective_value(z)) + r * penalty_value(p, z) for p in problems)


def penalty_path_probe(
    problems: Sequence[PenalizedProblem],
    r_values: Sequence[float],
    z0: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: int = 200_000,
) -> list:
    """Minimize ``F + r Psi`` for each fixed ``r`` and return the path.

    Gradient descent with backtracking (Armijo) steps, warm-started from the
    previous minimizer; stops once the gradient norm is below ``tol`` or the
    penalized value stops decreasing in floating point.
    """
    rs = [float(r) for r in r_values]
    if any(r < 1 for r in rs) or any(b <= a for a, b in zip(rs, rs[1:])):
        raise ValueError("r_values must be increasing and at least 1")
    d = problems[0].dim
    z = np.zeros(d) if z0 is None else np.array(z0, dtype=float)
    out = []
    for r in rs:
        step = 1.0
        it = 0
        for it in range(1, max_iter + 1):
            g = sum(penalized_gradient(p, z, r) for p in problems)
            gn = float(np.linalg.norm(g))
            if not math.isfinite(gn):
                raise OracleError(f"descent diverged at r={r} (iteration {it})")
            if gn <= tol:
                break
            f0 = _penalized_value(problems, z, r)
            step = min(step * 2.0, 1e6)
            while True:
                cand = z - step * g
                f1 = _penalized_value(problems, cand, r)
                if f1 <= f0 - 0.5 * step * gn**2:
                    break
                step *= 0.5
                if step < 1e-18:
                    break
            # no representable decrease left: converged to working precision
            if step < 1e-18 or not f1 < f0:
                break
            z = cand
        obj = float(sum(p.base.objective_value(z) for p in problems))
        out.append(PathPoint(r, z.copy(), _penalized_value(problems, z, r), obj, it))
    return out
