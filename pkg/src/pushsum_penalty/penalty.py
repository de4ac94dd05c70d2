"""
Local problems, constraints and the smooth log-cosh penalty.

Every agent owns a :class:`LocalProblem` (objective plus a list of convex
inequality constraints ``c(z) <= 0``).  Constraints are folded into the
objective through

    g(u) = log(cosh(u))  for u > 0,   g(u) = 0  otherwise,

so that ``Psi(z) = sum_k g(c_k(z))`` vanishes exactly on the feasible set and
has gradient ``sum_k tanh(c_k(z)) * grad c_k(z)`` on the violated side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ConstraintFn",
    "LocalProblem",
    "PenalizedProblem",
    "penalty_g",
    "penalty_g_prime",
    "penalty_g_array",
    "penalty_value",
    "penalty_grad",
    "penalized_gradient",
    "penalty_value_batch",
    "objective_value_batch",
    "check_objective_gradient",
    "check_constraint_bounds",
]

LOG2 = math.log(2.0)

# above this, cosh(u) loses nothing by switching to the log1p form
_LARGE_U = 20.0


def penalty_g(u: float) -> float:
    """Scalar penalty ``g(u)``; overflow safe for large ``u``."""
    if not math.isfinite(u):
        raise ValueError(f"penalty_g: non-finite argument {u!r}")
    if u <= 0.0:
        return 0.0
    if u < _LARGE_U:
        return math.log(math.cosh(u))
    return u - LOG2 + math.log1p(math.exp(-2.0 * u))


def penalty_g_prime(u: float) -> float:
    """Derivative of :func:`penalty_g`: ``tanh(u)`` for ``u > 0`` else 0."""
    if not math.isfinite(u):
        raise ValueError(f"penalty_g_prime: non-finite argument {u!r}")
    if u <= 0.0:
        return 0.0
    return math.tanh(u)


def penalty_g_array(u: np.ndarray) -> np.ndarray:
    """Elementwise :func:`penalty_g` for arrays (used by grid oracles)."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("penalty_g_array: non-finite entries")
    pos = np.maximum(u, 0.0)
    # log(cosh(u)) = u - log 2 + log1p(exp(-2u)); exact and never overflows
    out = pos - LOG2 + np.log1p(np.exp(-2.0 * pos))
    small = pos < _LARGE_U
    out[small] = np.log(np.cosh(pos[small]))
    return out


@dataclass(frozen=True)
class ConstraintFn:
    """A differentiable convex constraint ``value(z) <= 0``.

    ``grad_bound`` and ``lipschitz_bound`` are declared by whoever builds the
    constraint; :func:`check_constraint_bounds` spot-checks them.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    grad_bound: float
    lipschitz_bound: float
    name: str = ""

    def __post_init__(self):
        if not self.grad_bound > 0:
            raise ValueError(f"constraint {self.name!r}: grad_bound must be positive")
        if not self.lipschitz_bound >= 0:
            raise ValueError(f"constraint {self.name!r}: lipschitz_bound must be nonnegative")


@dataclass(frozen=True)
class LocalProblem:
    """One agent's objective ``F_i`` with gradient ``f_i`` and its constraints.

    When ``vectorized`` is true, ``objective_value`` and every constraint
    ``value`` accept stacked points of shape ``(..., dim)`` and return arrays
    of shape ``(...)``; the grid oracle relies on this.
    """

    objective_value: Callable[[np.ndarray], float]
    objective_grad: Callable[[np.ndarray], np.ndarray]
    constraints: tuple = ()
    dim: int = 1
    name: str = ""
    vectorized: bool = False

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")
        object.__setattr__(self, "constraints", tuple(self.constraints))


@dataclass(frozen=True)
class PenalizedProblem:
    """A :class:`LocalProblem` seen through the penalty ``Psi_i``."""

    base: LocalProblem
    grad_bound: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "grad_bound", float(sum(c.grad_bound for c in self.base.constraints))
        )

    @property
    def dim(self) -> int:
        return self.base.dim


def _check_dim(p: PenalizedProblem, z: np.ndarray) -> None:
    if z.shape != (p.base.dim,):
        raise ValueError(
            f"dimension mismatch for {p.base.name or 'problem'}: "
            f"expected ({p.base.dim},), got {z.shape}"
        )


def penalty_value(p: PenalizedProblem, z: np.ndarray) -> float:
    """``Psi_i(z)``, the sum of ``g(c_k(z))`` over the agent's constraints."""
    z = np.asarray(z, dtype=float)
    _check_dim(p, z)
    total = 0.0
    for c in p.base.constraints:
        total += penalty_g(float(c.value(z)))
    return total


def penalty_grad(p: PenalizedProblem, z: np.ndarray) -> np.ndarray:
    """``psi_i(z)``, the gradient of :func:`penalty_value`."""
    if not isinstance(z, np.ndarray) or z.dtype != float:
        z = np.asarray(z, dtype=float)
    _check_dim(p, z)
    out = np.zeros(p.base.dim)
    for c in p.base.constraints:
        u = float(c.value(z))
        if not math.isfinite(u):
            raise ValueError(f"constraint {c.name!r} returned {u!r}")
        if u > 0.0:
            # grad c only needed on the violated side
            out += math.tanh(u) * np.asarray(c.grad(z), dtype=float)
    return out


def penalized_gradient(p: PenalizedProblem, z: np.ndarray, r: float) -> np.ndarray:
    """Search direction ``f_i(z) + r * psi_i(z)`` for penalty parameter ``r >= 1``."""
    if not r >= 1.0:
        raise ValueError(f"penalty parameter r={r!r} violates r >= 1")
    f = p.base.objective_grad(z)
    if not p.base.constraints:
        return np.asarray(f, dtype=float)
    return f + r * penalty_grad(p, z)


def _rows(base: LocalProblem, fn, pts: np.ndarray) -> np.ndarray:
    if base.vectorized:
        return np.asarray(fn(pts), dtype=float).reshape(pts.shape[:-1])
    flat = pts.reshape(-1, pts.shape[-1])
    vals = np.fromiter((fn(q) for q in flat), dtype=float, count=len(flat))
    return vals.reshape(pts.shape[:-1])


def penalty_value_batch(problems: Sequence[PenalizedProblem], pts: np.ndarray) -> np.ndarray:
    """Total penalty ``Psi(z)`` at every row of ``pts`` (shape ``(..., d)``)."""
    pts = np.asarray(pts, dtype=float)
    total = np.zeros(pts.shape[:-1])
    for p in problems:
        for c in p.base.constraints:
            total += penalty_g_array(_rows(p.base, c.value, pts))
    return total


def objective_value_batch(problems: Sequence[PenalizedProblem], pts: np.ndarray) -> np.ndarray:
    """Total objective ``F(z) = sum_i F_i(z)`` at every row of ``pts``."""
    pts = np.asarray(pts, dtype=float)
    total = np.zeros(pts.shape[:-1])
    for p in problems:
        total += _rows(p.base, p.base.objective_value, pts)
    return total


def check_objective_gradient(
    problem: LocalProblem,
    lo: np.ndarray,
    hi: np.ndarray,
    n_points: int = 100,
    h: float = 1e-6,
    rtol: float = 1e-5,
    seed: int = 0,
) -> float:
    """Worst relative mismatch between ``objective_grad`` and central differences.

    Raises ``AssertionError`` if any sampled point exceeds ``rtol``; returns
    the worst observed value otherwise.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    d = problem.dim
    for _ in range(n_points):
        z = rng.uniform(lo, hi, size=d)
        g = np.asarray(problem.objective_grad(z), dtype=float)
        fd = np.empty(d)
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            fd[k] = (problem.objective_value(z + e) - problem.objective_value(z - e)) / (2 * h)
        err = np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(fd))
        worst = max(worst, err)
        if err > rtol:
            raise AssertionError(f"gradient mismatch {err:.3e} at z={z}")
    return worst


def check_constraint_bounds(
    c: ConstraintFn,
    lo: np.ndarray,
    hi: np.ndarray,
    n_points: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Sample ``||grad c||`` and its difference quotients over the box ``[lo, hi]``.

    Returns ``(max_grad_norm, max_lipschitz_ratio)`` and raises
    ``AssertionError`` when either exceeds the declared bound.
    """
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    pts = rng.uniform(lo, hi, size=(n_points, lo.size))
    grads = np.array([np.asarray(c.grad(z), dtype=float) for z in pts])
    gmax = float(np.max(np.linalg.norm(grads, axis=1)))
    dz = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
    dg = np.linalg.norm(grads[1:] - grads[:-1], axis=1)
    lmax = float(np.max(dg / np.maximum(dz, 1e-300)))
    slack = 1e-9
    if gmax > c.grad_bound * (1 + slack):
        raise AssertionError(f"{c.name}: |grad| {gmax} exceeds declared {c.grad_bound}")
    if lmax > c.lipschitz_bound * (1 + slack) + slack:
        raise AssertionError(f"{c.name}: Lipschitz ratio {lmax} exceeds declared {c.lipschitz_bound}")
    return gmax, lmax
