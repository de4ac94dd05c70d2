"""
Distributed economic dispatch with transmission losses.

Generators ``i`` produce ``p_i`` at cost ``C_i``, flexible demands ``j``
consume ``p_j`` with utility ``U_j``.  The lossy balance
``sum_i (p_i - l_i p_i^2) = sum_j p_j`` is convexified with auxiliary loss
variables ``v_i >= l_i p_i^2`` and a linear balance
``sum_i (p_i - v_i) = sum_j p_j``.  The joint decision vector is::

    z = (p_1, ..., p_Ng, p_{Ng+1}, ..., p_N, v_1, ..., v_Ng)

with generators first, then demands, then loss variables.  Agent ``k``
(same order as the ``p`` entries) owns ``p_k`` and, for a generator, ``v_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from .penalty import ConstraintFn, LocalProblem, PenalizedProblem

__all__ = [
    "InstanceError",
    "GeneratorParams",
    "DemandParams",
    "EnergyInstance",
    "SlaterResult",
    "Multipliers",
    "KKTResiduals",
    "cost_value_and_grad",
    "utility_value_and_grad",
    "build_distributed_problem",
    "check_assumption4",
    "find_slater_point",
    "kkt_residuals",
    "estimate_multipliers",
    "verify_prop2",
    "total_objective",
    "instance_from_dict",
    "instance_to_dict",
    "lift_reduced",
]


class InstanceError(ValueError):
    """An energy instance violates one of its invariants."""


@dataclass(frozen=True)
class GeneratorParams:
    a: float
    b: float
    c: float
    l: float
    p_min: float
    p_max: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise InstanceError(f"generator cost coefficients must be positive: a={self.a}, b={self.b}, c={self.c}")
        if not 0 <= self.l < self.a:
            raise InstanceError(f"loss coefficient must satisfy 0 <= l < a (l={self.l}, a={self.a})")
        if not self.p_min <= self.p_max:
            raise InstanceError(f"generator bounds reversed: p_min={self.p_min} > p_max={self.p_max}")


@dataclass(frozen=True)
class DemandParams:
    omega: float
    alpha: float
    K: float
    p_min: float
    p_max: float

    def __post_init__(self):
        if not (self.omega > 0 and self.alpha > 0):
            raise InstanceError(f"utility coefficients must be positive: omega={self.omega}, alpha={self.alpha}")
        if not self.K > 1:
            # saturated slope omega (1 - 1/K) must stay positive
            raise InstanceError(f"saturation constant must exceed 1 (K={self.K})")
        if not self.p_min <= self.p_max:
            raise InstanceError(f"demand bounds reversed: p_min={self.p_min} > p_max={self.p_max}")

    @property
    def seam(self) -> float:
        return self.omega / (2.0 * self.K * self.alpha)


@dataclass
class SlaterResult:
    found: bool
    p: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "p": None if self.p is None else self.p.tolist(),
            "v": None if self.v is None else self.v.tolist(),
            "message": self.message,
        }


@dataclass
class EnergyInstance:
    """Generator and demand records.

    Construction checks the supply/demand bound condition and searches for a
    strictly feasible point; pass ``check=False`` to skip both (useful for
    inspecting deliberately broken instances).
    """

    generators: Sequence[GeneratorParams]
    demands: Sequence[DemandParams]
    check: bool = field(default=True, repr=False, compare=False)
    slater: Optional[SlaterResult] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.generators = tuple(self.generators)
        self.demands = tuple(self.demands)
        if not self.generators or not self.demands:
            raise InstanceError("need at least one generator and one demand")
        if self.check:
            if not check_assumption4(self):
                raise InstanceError(
                    "bounds condition violated: sum of demand maxima "
                    f"{sum(d.p_max for d in self.demands):.6g} is below the net generation floor "
                    f"{_generation_floor(self):.6g}"
                )
            self.slater = find_slater_point(self)
            if not self.slater.found:
                raise InstanceError(f"no strictly feasible point: {self.slater.message}")

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def n_dem(self) -> int:
        return len(self.demands)

    @property
    def n_nodes(self) -> int:
        return self.n_gen + self.n_dem

    @property
    def dim(self) -> int:
        return self.n_nodes + self.n_gen

    def split(self, z: np.ndarray) -> tuple:
        """``(p_gen, p_dem, v)`` views of a joint vector."""
        z = np.asarray(z, dtype=float)
        ng, n = self.n_gen, self.n_nodes
        return z[..., :ng], z[..., ng:n], z[..., n:]


# -- cost and utility ---------------------------------------------------------


def cost_value_and_grad(g: GeneratorParams, p):
    """Generator cost and slope.

    Quadratic ``a p^2 + b p + c`` on ``[p_min, p_max]``; outside, linear with
    the boundary slope, offset so the value is continuous.  Works elementwise
    on arrays.
    """
    p = np.asarray(p, dtype=float)
    pc = np.clip(p, g.p_min, g.p_max)
    slope = 2.0 * g.a * pc + g.b
    value = g.a * pc**2 + g.b * pc + g.c + slope * (p - pc)
    if value.ndim == 0:
        return float(value), float(slope)
    return value, slope


def utility_value_and_grad(dm: DemandParams, p):
    """Saturating concave utility and its slope.

    ``omega p - alpha p^2`` up to the seam ``omega / (2 K alpha)``, then
    linear with slope ``omega (1 - 1/K)`` continuing from the seam value.
    """
    p = np.asarray(p, dtype=float)
    s = dm.seam
    ps = np.minimum(p, s)
    value = dm.omega * ps - dm.alpha * ps**2 + dm.omega * (1.0 - 1.0 / dm.K) * (p - ps)
    slope = np.where(p <= s, dm.omega - 2.0 * dm.alpha * p, dm.omega * (1.0 - 1.0 / dm.K))
    if value.ndim == 0:
        return float(value), float(slope)
    return value, slope


def total_objective(e: EnergyInstance, z) -> np.ndarray:
    """``sum_i C_i(p_i) - sum_j U_j(p_j)`` (vectorized over leading axes)."""
    pg, pd, _ = e.split(z)
    total = 0.0
    for i, g in enumerate(e.generators):
        total = total + cost_value_and_grad(g, pg[..., i])[0]
    for j, dm in enumerate(e.demands):
        total = total - utility_value_and_grad(dm, pd[..., j])[0]
    return total


# -- distributed problem ------------------------------------------------------


def _unit(d: int, k: int, s: float = 1.0) -> np.ndarray:
    e = np.zeros(d)
    e[k] = s
    return e


def _box_constraints(k: int, lo: float, hi: float, d: int, tag: str) -> list:
    up = _unit(d, k)
    down = _unit(d, k, -1.0)
    return [
        ConstraintFn(
            value=lambda z, k=k, hi=hi: np.asarray(z)[..., k] - hi,
            grad=lambda z, up=up: up,
            grad_bound=1.0,
            lipschitz_bound=0.0,
            name=f"{tag}_upper",
        ),
        ConstraintFn(
            value=lambda z, k=k, lo=lo: lo - np.asarray(z)[..., k],
            grad=lambda z, down=down: down,
            grad_bound=1.0,
            lipschitz_bound=0.0,
            name=f"{tag}_lower",
        ),
    ]


def _balance_constraints(e: EnergyInstance, tag: str) -> list:
    ng, n, d = e.n_gen, e.n_nodes, e.dim
    coef = np.concatenate([np.ones(ng), -np.ones(e.n_dem), -np.ones(ng)])
    neg = -coef
    norm = float(np.linalg.norm(coef))

    def excess(z):
        z = np.asarray(z)
        return z[..., :ng].sum(-1) - z[..., n:].sum(-1) - z[..., ng:n].sum(-1)

    return [
        ConstraintFn(lambda z: excess(z), lambda z: coef, norm, 0.0, f"{tag}_balance_le"),
        ConstraintFn(lambda z: -excess(z), lambda z: neg, norm, 0.0, f"{tag}_balance_ge"),
    ]


def _loss_constraint(e: EnergyInstance, i: int) -> ConstraintFn:
    g = e.generators[i]
    d, vi = e.dim, e.n_nodes + i

    # l p^2 - v on the box, tangent lines outside: convex, C^1, bounded slope
    def value(z):
        z = np.asarray(z)
        p = z[..., i]
        pc = np.clip(p, g.p_min, g.p_max)
        return g.l * (2.0 * pc * p - pc * pc) - z[..., vi]

    def grad(z):
        pc = min(max(float(z[i]), g.p_min), g.p_max)
        out = np.zeros(d)
        out[i] = 2.0 * g.l * pc
        out[vi] = -1.0
        return out

    pmax = max(abs(g.p_min), abs(g.p_max))
    return ConstraintFn(
        value=value,
        grad=grad,
        grad_bound=math.hypot(2.0 * g.l * pmax, 1.0),
        lipschitz_bound=2.0 * g.l,
        name=f"gen{i}_loss",
    )


def build_distributed_problem(e: EnergyInstance) -> list:
    """One :class:`PenalizedProblem` per node, generators first.

    Generator ``i``: objective ``C_i(p_i)``; constraints upper/lower box,
    balance as two opposing inequalities, and the loss inequality.
    Demand ``j``: objective ``-U_j(p_j)``; box constraints only.
    """
    d, ng = e.dim, e.n_gen
    out = []
    for i, g in enumerate(e.generators):

        def fval(z, i=i, g=g):
            return cost_value_and_grad(g, np.asarray(z)[..., i])[0]

        def fgrad(z, i=i, g=g):
            return _unit(d, i, cost_value_and_grad(g, float(z[i]))[1])

        cons = _box_constraints(i, g.p_min, g.p_max, d, f"gen{i}")
        cons += _balance_constraints(e, f"gen{i}")
        cons.append(_loss_constraint(e, i))
        base = LocalProblem(fval, fgrad, tuple(cons), d, name=f"gen{i}", vectorized=True)
        out.append(PenalizedProblem(base))
    for j, dm in enumerate(e.demands):
        k = ng + j

        def fval(z, k=k, dm=dm):
            return -utility_value_and_grad(dm, np.asarray(z)[..., k])[0]

        def fgrad(z, k=k, dm=dm):
            return _unit(d, k, -utility_value_and_grad(dm, float(z[k]))[1])

        cons = _box_constraints(k, dm.p_min, dm.p_max, d, f"dem{j}")
        base = LocalProblem(fval, fgrad, tuple(cons), d, name=f"dem{j}", vectorized=True)
        out.append(PenalizedProblem(base))
    return out


# -- structural checks --------------------------------------------------------


def _generation_floor(e: EnergyInstance) -> float:
    return sum(g.p_min - g.l * g.p_min**2 for g in e.generators)


def check_assumption4(e: EnergyInstance) -> bool:
    """Demand can absorb the minimum net generation:
    ``sum_j P_j^max >= sum_i (p_i^min - l_i (p_i^min)^2)``."""
    return sum(d.p_max for d in e.demands) >= _generation_floor(e)


def _strictly_feasible(e: EnergyInstance, p: np.ndarray, v: np.ndarray, tol: float) -> list:
    problems = []
    nodes = list(e.generators) + list(e.demands)
    for k, node in enumerate(nodes):
        if not node.p_min < p[k] < node.p_max:
            problems.append(f"node {k} not strictly inside [{node.p_min}, {node.p_max}]")
    for i, g in enumerate(e.generators):
        if not v[i] > g.l * p[i] ** 2:
            problems.append(f"generator {i} loss slack not positive")
    bal = np.sum(p[: e.n_gen] - v) - np.sum(p[e.n_gen :])
    if abs(bal) > tol:
        problems.append(f"balance residual {bal:.3e}")
    return problems


def find_slater_point(e: EnergyInstance, grid: int = 99, bisect_iter: int = 200) -> SlaterResult:
    """Search for a strictly feasible ``(p, v)``.

    Generators sit at a common interior fraction of their boxes, loss
    variables get a positive slack, and a common demand fraction is found by
    bisection so that the linear balance holds.
    """
    nodes = list(e.generators) + list(e.demands)
    degenerate = [k for k, nd in enumerate(nodes) if not nd.p_min < nd.p_max]
    if degenerate:
        return SlaterResult(False, message=f"nodes {degenerate} have p_min == p_max (no strict interior)")
    dem_lo = np.array([d.p_min for d in e.demands])
    dem_span = np.array([d.p_max - d.p_min for d in e.demands])
    lo_total, hi_total = dem_lo.sum(), dem_lo.sum() + dem_span.sum()

    def demand_total(s):
        return float(np.sum(dem_lo + s * dem_span))

    for frac in np.linspace(0.01, 0.99, grid):
        pg = np.array([g.p_min + frac * (g.p_max - g.p_min) for g in e.generators])
        losses = np.array([g.l for g in e.generators]) * pg**2
        net = float(np.sum(pg - losses))
        target = min(net, 0.5 * (lo_total + hi_total))
        # leave room for a positive loss slack
        target -= 1e-3 * (hi_total - lo_total)
        if not lo_total < target < hi_total or not target < net:
            continue
        lo, hi = 0.0, 1.0
        for _ in range(bisect_iter):
            mid = 0.5 * (lo + hi)
            if demand_total(mid) < target:
                lo = mid
            else:
                hi = mid
        s = 0.5 * (lo + hi)
        pd = dem_lo + s * dem_span
        slack = (net - float(pd.sum())) / e.n_gen
        v = losses + slack
        p = np.concatenate([pg, pd])
        issues = _strictly_feasible(e, p, v, tol=1e-9 * max(1.0, hi_total))
        if not issues:
            return SlaterResult(True, p, v, f"generator fraction {frac:.3f}, demand fraction {s:.6f}")
    return SlaterResult(False, message="no generator level leaves room for a strictly feasible demand")


# -- optimality checks --------------------------------------------------------


@dataclass
class Multipliers:
    lam: float
    mu: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mu": np.asarray(self.mu).tolist(),
            "gamma": np.asarray(self.gamma).tolist(),
            "theta": np.asarray(self.theta).tolist(),
        }


@dataclass
class KKTResiduals:
    stationarity_p: np.ndarray
    stationarity_v: np.ndarray
    primal_feas: float
    comp_slack: float
    dual_feas: float

    def max(self) -> float:
        return float(
            max(
                np.max(self.stationarity_p, initial=0.0),
                np.max(self.stationarity_v, initial=0.0),
                self.primal_feas,
                self.comp_slack,
                self.dual_feas,
            )
        )

    def to_dict(self) -> dict:
        return {
            "stationarity_p": np.asarray(self.stationarity_p).tolist(),
            "stationarity_v": np.asarray(self.stationarity_v).tolist(),
            "primal_feas": self.primal_feas,
            "comp_slack": self.comp_slack,
            "dual_feas": self.dual_feas,
        }


def _slopes(e: EnergyInstance, p: np.ndarray) -> tuple:
    ng = e.n_gen
    dc = np.array([cost_value_and_grad(g, p[i])[1] for i, g in enumerate(e.generators)])
    du = np.array([utility_value_and_grad(dm, p[ng + j])[1] for j, dm in enumerate(e.demands)])
    return dc, du


def kkt_residuals(e: EnergyInstance, p, v, multipliers: Multipliers) -> KKTResiduals:
    """Residuals of the optimality system of the convexified problem.

    Lagrangian::

        L = sum C_i - sum U_j + lam (sum_i (p_i - v_i) - sum_j p_j)
            + sum_i mu_i (l_i p_i^2 - v_i)
            + sum_k gamma_k (p_k^min - p_k) + sum_k theta_k (p_k - p_k^max)

    so ``dL/dv_i = -lam - mu_i``.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    ng = e.n_gen
    if p.shape != (e.n_nodes,) or v.shape != (ng,):
        raise ValueError("p must have one entry per node and v one per generator")
    lam = float(multipliers.lam)
    mu = np.asarray(multipliers.mu, dtype=float)
    gam = np.asarray(multipliers.gamma, dtype=float)
    th = np.asarray(multipliers.theta, dtype=float)
    ls = np.array([g.l for g in e.generators])
    dc, du = _slopes(e, p)

    st_g = dc + lam + 2.0 * mu * ls * p[:ng] - gam[:ng] + th[:ng]
    st_d = -du - lam - gam[ng:] + th[ng:]
    st_v = -lam - mu

    nodes = list(e.generators) + list(e.demands)
    pmin = np.array([nd.p_min for nd in nodes])
    pmax = np.array([nd.p_max for nd in nodes])
    loss_gap = ls * p[:ng] ** 2 - v
    balance = np.sum(p[:ng] - v) - np.sum(p[ng:])
    primal = max(
        abs(balance),
        float(np.max(np.maximum(pmin - p, 0.0))),
        float(np.max(np.maximum(p - pmax, 0.0))),
        float(np.max(np.maximum(loss_gap, 0.0))),
    )
    comp = max(
        float(np.max(np.abs(gam * (pmin - p)))),
        float(np.max(np.abs(th * (p - pmax)))),
        float(np.max(np.abs(mu * loss_gap))),
    )
    dual = max(0.0, -float(np.min(np.concatenate([gam, th, mu]))))
    return KKTResiduals(
        stationarity_p=np.abs(np.concatenate([st_g, st_d])),
        stationarity_v=np.abs(st_v),
        primal_feas=float(primal),
        comp_slack=float(comp),
        dual_feas=float(dual),
    )


def estimate_multipliers(e: EnergyInstance, p, v, active_tol: float = 1e-6) -> Multipliers:
    """Fit multipliers to the stationarity equations at ``(p, v)``.

    Constraints whose slack exceeds ``active_tol`` (relative to the box width)
    get a zero multiplier; the rest are found by nonnegative least squares,
    with the free balance multiplier split into two nonnegative parts.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    ng, nn = e.n_gen, e.n_nodes
    nodes = list(e.generators) + list(e.demands)
    dc, du = _slopes(e, p)
    ls = np.array([g.l for g in e.generators])

    # unknowns: lam+, lam-, mu (ng), gamma (nn), theta (nn)
    n_unk = 2 + ng + 2 * nn
    rows = nn + ng
    A = np.zeros((rows, n_unk))
    rhs = np.zeros(rows)
    for i in range(ng):
        A[i, 0], A[i, 1] = 1.0, -1.0
        A[i, 2 + i] = 2.0 * ls[i] * p[i]
        rhs[i] = -dc[i]
    for j in range(e.n_dem):
        k = ng + j
        A[k, 0], A[k, 1] = -1.0, 1.0
        rhs[k] = du[j]
    for k in range(nn):
        A[k, 2 + ng + k] = -1.0
        A[k, 2 + ng + nn + k] = 1.0
    for i in range(ng):
        r = nn + i
        A[r, 0], A[r, 1] = -1.0, 1.0
        A[r, 2 + i] = -1.0

    keep = np.ones(n_unk, dtype=bool)
    for i, g in enumerate(e.generators):
        scale = max(1.0, abs(v[i]))
        if v[i] - g.l * p[i] ** 2 > active_tol * scale:
            keep[2 + i] = False
    for k, nd in enumerate(nodes):
        width = max(nd.p_max - nd.p_min, 1e-12)
        if p[k] - nd.p_min > active_tol * width:
            keep[2 + ng + k] = False
        if nd.p_max - p[k] > active_tol * width:
            keep[2 + ng + nn + k] = False

    sol = np.zeros(n_unk)
    sol[keep], _ = nnls(A[:, keep], rhs)
    return Multipliers(
        lam=float(sol[0] - sol[1]),
        mu=sol[2 : 2 + ng].copy(),
        gamma=sol[2 + ng : 2 + ng + nn].copy(),
        theta=sol[2 + ng + nn :].copy(),
    )


def verify_prop2(e: EnergyInstance, p, v, tol: float = 1e-4) -> bool:
    """True iff ``(p, v)`` is feasible for the original lossy problem:
    every ``v_i = l_i p_i^2`` and the linear balance hold to ``tol``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    ng = e.n_gen
    ls = np.array([g.l for g in e.generators])
    if np.any(np.abs(v - ls * p[:ng] ** 2) > tol):
        return False
    return abs(float(np.sum(p[:ng] - v) - np.sum(p[ng:]))) <= tol


# -- reduced coordinates for grid search ----------------------------------------


def lift_reduced(e: EnergyInstance):
    """Map from ``N-1`` free coordinates to the full vector, with the losses
    tight and the last generator solving the lossy balance.

    Free coordinates are ``(p_1, ..., p_{Ng-1}, p_{Ng+1}, ..., p_N)``; the
    last generator takes the smaller root of ``p - l p^2 = rest``.  Returns
    ``(lift, lo, hi)`` where ``lo``/``hi`` bound the free coordinates.
    """
    ng, nn = e.n_gen, e.n_nodes
    last = e.generators[-1]

    def lift(q):
        q = np.asarray(q, dtype=float)
        pg_free = q[..., : ng - 1]
        pd = q[..., ng - 1 :]
        ls_free = np.array([g.l for g in e.generators[:-1]])
        rest = pd.sum(-1) - np.sum(pg_free - ls_free * pg_free**2, axis=-1)
        if last.l > 0:
            disc = np.maximum(1.0 - 4.0 * last.l * rest, 0.0)
            p_last = (1.0 - np.sqrt(disc)) / (2.0 * last.l)
        else:
            p_last = rest
        pg = np.concatenate([pg_free, p_last[..., None]], axis=-1)
        ls = np.array([g.l for g in e.generators])
        v = ls * pg**2
        return np.concatenate([pg, pd, v], axis=-1)

    free_nodes = list(e.generators[:-1]) + list(e.demands)
    lo = np.array([nd.p_min for nd in free_nodes])
    hi = np.array([nd.p_max for nd in free_nodes])
    assert lo.size == nn - 1
    return lift, lo, hi


# -- (de)serialization --------------------------------------------------------


def instance_from_dict(d: dict, check: bool = True) -> EnergyInstance:
    gens = [GeneratorParams(**g) for g in d["generators"]]
    dems = [DemandParams(**x) for x in d["demands"]]
    return EnergyInstance(gens, dems, check=check)


def instance_to_dict(e: EnergyInstance) -> dict:
    return {
        "generators": [vars(g).copy() for g in e.generators],
        "demands": [vars(x).copy() for x in e.demands],
    }
