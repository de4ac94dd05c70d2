"""
Step-size and penalty-parameter sequences ``(a_t, r_t)``.

A usable pair needs

    (i)   a_t nonincreasing,
    (ii)  sum a_t = infinity,
    (iii) sum a_t^2 r_t^3 < infinity,
    (iv)  r_{t+1} - r_t = o(a_t),

together with ``r_t >= 1`` and ``r_t -> infinity``.  Infinite-series
conditions can only be certified exactly for known families; for anything else
:func:`certify_schedule` falls back on finite-horizon heuristics.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ParamSchedule",
    "ScheduleError",
    "ClauseVerdict",
    "CertReport",
    "power_law_schedule",
    "custom_schedule",
    "power_term",
    "certify_schedule",
    "CLAUSES",
]

CLAUSES = {
    "i": "a_t nonincreasing",
    "ii": "sum of a_t diverges",
    "iii": "sum of a_t^2 r_t^3 converges",
    "iv": "r_{t+1} - r_t = o(a_t)",
    "r": "r_t >= 1 and r_t grows without bound",
}


class ScheduleError(ValueError):
    """Raised for parameter choices that break one of the schedule clauses."""

    def __init__(self, clause: str, message: str):
        super().__init__(f"schedule clause ({clause}) [{CLAUSES[clause]}] violated: {message}")
        self.clause = clause


def power_term(scale: float, exponent: float) -> Callable:
    """``t -> scale * (t + 1) ** exponent``; accepts ints or integer arrays."""

    def term(t):
        return scale * np.power(np.asarray(t, dtype=float) + 1.0, exponent)

    term.spec = {"kind": "power", "scale": scale, "exponent": exponent}
    return term


@dataclass(frozen=True)
class ParamSchedule:
    """Step sizes ``a(t)`` and penalty parameters ``r(t)`` indexed by round.

    ``a`` and ``r`` must accept either a scalar round index or an integer
    array.  ``family`` is ``"power_law"`` (with ``b`` and the two scales set)
    or ``"custom"``.
    """

    a: Callable
    r: Callable
    family: str = "custom"
    b: Optional[float] = None
    a_scale: float = 1.0
    r_scale: float = 1.0

    def a_at(self, t: int) -> float:
        return float(self.a(t))

    def r_at(self, t: int) -> float:
        return float(self.r(t))

    def a_values(self, t: np.ndarray) -> np.ndarray:
        return _eval(self.a, t)

    def r_values(self, t: np.ndarray) -> np.ndarray:
        return _eval(self.r, t)

    def describe(self) -> dict:
        if self.family == "power_law":
            return {"family": "power_law", "b": self.b, "a_scale": self.a_scale, "r_scale": self.r_scale}
        return {
            "family": "custom",
            "a": getattr(self.a, "spec", repr(self.a)),
            "r": getattr(self.r, "spec", repr(self.r)),
        }


def _eval(fn, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t)
    out = np.asarray(fn(t), dtype=float)
    if out.shape != t.shape:
        out = np.array([float(fn(int(s))) for s in t.ravel()]).reshape(t.shape)
    return out


def power_law_schedule(
    b: float, a_scale: float = 1.0, r_scale: float = 1.0, strict: bool = True
) -> ParamSchedule:
    """``a_t = a_scale (t+1)^-(0.5+b)``, ``r_t = max(1, r_scale (t+1)^(b/4))``.

    The shift ``t -> t+1`` makes ``t = 0`` well defined.  With ``strict`` the
    admissible range ``0 < b < 0.4`` is enforced; scaling either sequence by a
    positive constant does not change which clauses hold.
    """
    if not (a_scale > 0 and r_scale >= 1):
        raise ValueError("a_scale must be positive and r_scale at least 1")
    if strict:
        if not b > 0:
            raise ScheduleError("iii", f"b={b} must be positive (a_t^2 r_t^3 ~ t^(-1-1.25b))")
        if not b < 0.4:
            raise ScheduleError(
                "iv", f"b={b} must be below 0.4 ((r_(t+1)-r_t)/a_t ~ t^(1.25b-0.5))"
            )

    def a(t):
        if isinstance(t, (int, np.integer)):
            return a_scale * (t + 1.0) ** -(0.5 + b)
        return a_scale * np.power(np.asarray(t, dtype=float) + 1.0, -(0.5 + b))

    def r(t):
        if isinstance(t, (int, np.integer)):
            return max(1.0, r_scale * (t + 1.0) ** (0.25 * b))
        return np.maximum(1.0, r_scale * np.power(np.asarray(t, dtype=float) + 1.0, 0.25 * b))

    return ParamSchedule(a=a, r=r, family="power_law", b=float(b), a_scale=a_scale, r_scale=r_scale)


def custom_schedule(a: Callable, r: Callable) -> ParamSchedule:
    return ParamSchedule(a=a, r=r, family="custom")


@dataclass
class ClauseVerdict:
    clause: str
    description: str
    numeric: bool
    analytic: Optional[bool] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.analytic if self.analytic is not None else self.numeric


@dataclass
class CertReport:
    horizon: int
    family: str
    verdicts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def failed_clauses(self) -> list:
        return [v.clause for v in self.verdicts if not v.passed]

    def verdict(self, clause: str) -> ClauseVerdict:
        for v in self.verdicts:
            if v.clause == clause:
                return v
        raise KeyError(clause)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "family": self.family,
            "passed": self.passed,
            "verdicts": [dict(asdict(v), passed=v.passed) for v in self.verdicts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _decade_sums(x: np.ndarray, horizon: int) -> tuple[float, float]:
    lo, mid = horizon // 100, horizon // 10
    return float(np.sum(x[lo:mid])), float(np.sum(x[mid:horizon]))


def certify_schedule(
    s: ParamSchedule,
    horizon: int = 10**6,
    ratio_tol: float = 0.05,
    decade_floor: float = 0.99,
) -> CertReport:
    """Check the schedule clauses over ``t = 0 .. horizon``.

    Numeric heuristics compare the last decade ``[H/10, H)`` with the one
    before it ``[H/100, H/10)``:

    * (ii) passes when the last-decade sum of ``a_t`` is at least
      ``decade_floor`` times the previous one (a convergent power series
      shrinks by ``10^(1-p)`` per decade);
    * (iii) passes when the decade sums of ``a_t^2 r_t^3`` shrink by at least
      that factor, i.e. the terms decay faster than ``1/t``;
    * (iv) passes when ``max (r_{t+1}-r_t)/a_t`` over the last decade is
      below ``ratio_tol`` or shrinks by that factor between decades.

    The power-law family additionally carries exact verdicts, which take
    precedence.
    """
    if horizon < 1000:
        raise ValueError("horizon must be at least 1000")
    t = np.arange(horizon + 1)
    a = s.a_values(t)
    r = s.r_values(t)
    verdicts = []

    mono = bool(np.all(np.diff(a) <= 0.0)) and bool(np.all(a >= 0.0))
    verdicts.append(ClauseVerdict("i", CLAUSES["i"], mono, detail=f"min step {a.min():.3e}"))

    prev, last = _decade_sums(a, horizon)
    div = bool(last >= decade_floor * prev and last > 0)
    verdicts.append(
        ClauseVerdict("ii", CLAUSES["ii"], bool(div), detail=f"decade sums {prev:.4g} -> {last:.4g}")
    )

    with np.errstate(over="ignore"):
        q = a**2 * r**3
        prev, last = _decade_sums(q, horizon)
    summ = last == 0.0 or last <= decade_floor * prev
    verdicts.append(
        ClauseVerdict("iii", CLAUSES["iii"], bool(summ), detail=f"decade sums {prev:.4g} -> {last:.4g}")
    )

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a[:-1] > 0, np.abs(np.diff(r)) / a[:-1], np.where(np.diff(r) == 0, 0.0, np.inf))
    lo, mid = horizon // 100, horizon // 10
    m_prev, m_last = float(np.max(ratio[lo:mid])), float(np.max(ratio[mid:horizon]))
    small = m_last < ratio_tol or m_last <= decade_floor * m_prev
    verdicts.append(
        ClauseVerdict("iv", CLAUSES["iv"], bool(small), detail=f"max ratio {m_prev:.4g} -> {m_last:.4g}")
    )

    grows = bool(np.all(r >= 1.0) and r[-1] > r[0])
    verdicts.append(ClauseVerdict("r", CLAUSES["r"], grows, detail=f"r_0={r[0]:.4g}, r_H={r[-1]:.4g}"))

    if s.family == "power_law":
        b = s.b
        exact = {
            "i": 0.5 + b >= 0,
            "ii": 0.5 + b <= 1.0,
            "iii": -2 * (0.5 + b) + 0.75 * b < -1.0,
            "iv": 0.25 * b - 1.0 < -(0.5 + b),
            "r": b > 0,
        }
        for v in verdicts:
            v.analytic = bool(exact[v.clause])
    return CertReport(horizon=horizon, family=s.family, verdicts=verdicts)
