"""
CSV/JSON writers for run artifacts, plus optional PNG figures.

CSV files use ``.`` decimals, LF line endings and a header row; floats are
written with ``repr`` so reruns of a deterministic run are byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .engine import RunMetrics, disagreement
from .penalty import penalty_value
from .schema import FINAL_SCHEMA, SCHEMA_VERSION, validate

__all__ = [
    "fmt",
    "write_csv",
    "write_json",
    "metrics_rows",
    "trace_rows",
    "relative_errors",
    "final_summary",
    "constraint_slacks",
    "plot_metrics",
    "plot_relative_error",
]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path, doc: dict, schema: Optional[dict] = None, what: str = "output") -> None:
    """Write ``doc`` after checking it, then re-read and re-check the file."""
    if schema is not None:
        validate(doc, schema, what)
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    Path(path).write_text(text)
    if schema is not None:
        validate(json.loads(Path(path).read_text()), schema, what)


def metrics_rows(m: RunMetrics) -> tuple:
    d = len(m.x_bar[0]) if m.x_bar else 0
    header = ["round", "disagreement", "mean_penalty", "objective", "walltime_ms"]
    header += [f"x_bar_{k}" for k in range(d)]
    rows = [
        [t, dis, pen, obj, wt, *xb]
        for t, dis, pen, obj, wt, xb in zip(
            m.rounds, m.disagreement, m.mean_penalty, m.objective, m.walltime_ms, m.x_bar
        )
    ]
    return header, rows


def trace_rows(m: RunMetrics) -> tuple:
    d = len(m.trace[0][3]) if m.trace else 0
    header = ["round", "agent", "y"] + [f"z_{k}" for k in range(d)]
    return header, [[t, i, y, *z] for t, i, y, z in m.trace]


def relative_errors(x_bar: np.ndarray, solution: np.ndarray) -> np.ndarray:
    """``|x_k - x_k*| / |x_k*|`` per coordinate; coordinates with a zero
    reference fall back to the absolute error."""
    sol = np.asarray(solution, dtype=float)
    den = np.where(sol != 0.0, np.abs(sol), 1.0)
    return np.abs(np.asarray(x_bar, dtype=float) - sol) / den


def final_summary(m: RunMetrics, problems) -> dict:
    st = m.final
    zbar = st.z.mean(axis=0)
    xbar = st.x.mean(axis=0)
    n = len(problems)
    return {
        "version": SCHEMA_VERSION,
        "rounds": int(st.t),
        "stopped_early": bool(m.stopped_early),
        "z_bar": zbar.tolist(),
        "x_bar": xbar.tolist(),
        "z": st.z.tolist(),
        "y": st.y.tolist(),
        "disagreement": disagreement(st.z),
        "mean_penalty": sum(penalty_value(p, zbar) for p in problems) / n,
        "objective": float(sum(p.base.objective_value(zbar) for p in problems)),
    }


def constraint_slacks(problems, z) -> dict:
    """``-c(z)`` for every constraint, keyed ``agent<i>.<name>``."""
    z = np.asarray(z, dtype=float)
    return {
        f"agent{i}.{c.name or k}": -float(c.value(z))
        for i, p in enumerate(problems)
        for k, c in enumerate(p.base.constraints)
    }


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_metrics(m: RunMetrics, path) -> None:
    """Disagreement and mean penalty against rounds, log scale."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4), constrained_layout=True)
    rounds = np.asarray(m.rounds)
    for ax, key, label in (
        (axes[0], m.disagreement, "disagreement"),
        (axes[1], m.mean_penalty, "mean penalty"),
    ):
        vals = np.asarray(key, dtype=float)
        # zeros would vanish on a log axis
        ax.semilogy(rounds, np.maximum(vals, 1e-300), lw=1.2)
        ax.set_xlabel("round")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_relative_error(rounds, errors: np.ndarray, labels: Sequence[str], path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.6), constrained_layout=True)
    for k, lab in enumerate(labels):
        ax.semilogy(rounds, np.maximum(errors[:, k], 1e-300), lw=1.2, label=lab)
    ax.set_xlabel("round")
    ax.set_ylabel("relative error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(frameon=False)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def validate_final(doc: dict) -> None:
    validate(doc, FINAL_SCHEMA, "final.json")
