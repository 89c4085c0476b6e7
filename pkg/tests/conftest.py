import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the reference module


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_sparse_unit(rng, d, s):
    support = rng.choice(d, size=s, replace=False)
    v = np.zeros(d)
    v[support] = rng.standard_normal(s)
    return v / np.linalg.norm(v)
