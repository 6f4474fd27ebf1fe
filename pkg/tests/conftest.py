import sys
from pathlib import Path

import numpy as np
import pytest

from tsce import HansGeneratorConfig, PanelDataset, generate_hans, hans_graph
from tsce.coinrunner import simulate
from tsce.graph import ContextSet

sys.path.insert(0, str(Path(__file__).parent))

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def hans_clean():
    """Noise-free panel, 1000 individuals over 50 steps."""
    return generate_hans(HansGeneratorConfig(n=1000, T=50, noise_scale=0.0, seed=0))


@pytest.fixture(scope="session")
def hans_noisy():
    return generate_hans(HansGeneratorConfig(n=1000, T=50, seed=0))


@pytest.fixture(scope="session")
def hans_cs():
    return ContextSet.single(hans_graph(), "hans")


def crafted_health_panel(t=10, individual=0):
    """Noise-free panel with one individual edited to be old, frail and well fed at ``t``."""
    base = generate_hans(HansGeneratorConfig(n=1000, T=50, noise_scale=0.0, seed=0))
    cube = np.array(base.cube())
    means = cube.mean(axis=0)  # (T, V)
    a, f, h = (base.var_index(v) for v in ("Age", "Nutrition", "Health"))
    cube[individual, t, a] = means[t, a] + 10.0
    cube[individual, t, f] = means[t, f] + 5.0
    cube[individual, t, h] = means[t, h] - 5.0
    cube[individual, t - 1, h] = means[t - 1, h] - 10.0
    return PanelDataset(base.variables, cube)


@pytest.fixture(scope="session")
def crafted_health():
    return crafted_health_panel()


@pytest.fixture(scope="session")
def killer_small():
    return simulate("killer", 20, epsilon=0.02, seed=0)
