"""Small reference problems used by the shipped configs and the tests."""

from __future__ import annotations

import numpy as np

from .penalty import ConstraintFn, LocalProblem, PenalizedProblem

__all__ = ["averaging_problems", "quadratic_problems", "toy_problems"]


def averaging_problems(n: int, dim: int = 1) -> list:
    """Zero objectives, no constraints: the engine reduces to push-sum averaging."""
    base = LocalProblem(
        objective_value=lambda z: np.zeros(np.shape(z)[:-1]),
        objective_grad=lambda z: np.zeros(dim),
        dim=dim,
        name="zero",
        vectorized=True,
    )
    return [PenalizedProblem(base) for _ in range(n)]


def quadratic_problems(centers) -> list:
    """``F_i(z) = ||z - c_i||^2``, unconstrained; the minimizer of the sum is
    the mean of the centers."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    d = centers.shape[1]
    out = []
    for i, c in enumerate(centers):
        c = c.copy()
        base = LocalProblem(
            objective_value=lambda z, c=c: np.sum((np.asarray(z) - c) ** 2, axis=-1),
            objective_grad=lambda z, c=c: 2.0 * (z - c),
            dim=d,
            name=f"quad{i}",
            vectorized=True,
        )
        out.append(PenalizedProblem(base))
    return out


def toy_problems(n: int, lower: float = 1.0) -> list:
    """``min z^2  s.t.  z >= lower`` in one dimension, split over ``n`` agents.

    Each agent holds ``F_i(z) = z^2 / n`` and the shared constraint
    ``lower - z <= 0``; the solution is ``z = lower`` (for ``lower >= 0``).
    """
    con = ConstraintFn(
        value=lambda z: lower - np.asarray(z)[..., 0],
        grad=lambda z: np.array([-1.0]),
        grad_bound=1.0,
        lipschitz_bound=0.0,
        name="z_ge_lower",
    )
    base = LocalProblem(
        objective_value=lambda z: np.asarray(z)[..., 0] ** 2 / n,
        objective_grad=lambda z: 2.0 * z / n,
        constraints=(con,),
        dim=1,
        name="toy",
        vectorized=True,
    )
    return [PenalizedProblem(base) for _ in range(n)]
