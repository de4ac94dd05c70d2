import json
from pathlib import Path

import numpy as np
import pytest

from pushsum_penalty.config import load_config
from pushsum_penalty.netgraph import GraphSchedule, alternate, demo_graphs

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "pushsum_penalty" / "configs"
SHIPPED = sorted(p.name for p in CONFIGS.glob("*.json"))


@pytest.fixture
def configs_dir():
    return CONFIGS


@pytest.fixture
def fig1():
    g1, g2 = demo_graphs()
    return GraphSchedule([g1, g2], alternate, claimed_B=2, period=2)


@pytest.fixture(scope="session")
def demo():
    return load_config(CONFIGS / "energy_demo.json")


@pytest.fixture(scope="session")
def demo_oracle(demo):
    """Brute-force solution of the shipped energy demo (a few seconds)."""
    from pushsum_penalty.energy import lift_reduced
    from pushsum_penalty.oracle import brute_force_solve

    lift, lo, hi = lift_reduced(demo.energy)
    return brute_force_solve(demo.problems, (lo, hi), lift=lift)


def write_config(tmp_path, raw, name="cfg.json"):
    p = Path(tmp_path) / name
    p.write_text(json.dumps(raw))
    return p


def raw_config(name):
    return json.loads((CONFIGS / name).read_text())


def rng(seed=0):
    return np.random.default_rng(seed)
