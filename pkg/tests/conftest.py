import json
import math

import numpy as np
import pytest

from src.exp_family import make_family
from src.kernel_graph import MarkovKernel, complete_graph


def k2_kernel(a: float, b: float) -> MarkovKernel:
    """K2 kernel with w(1|0) = a, w(0|1) = b; edge order (00, 01, 10, 11)."""
    return MarkovKernel(complete_graph(2), [1.0 - a, a, b, 1.0 - b])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def k2():
    return complete_graph(2)


@pytest.fixture
def uniform_k2():
    return k2_kernel(0.5, 0.5)


@pytest.fixture
def third_k2():
    return k2_kernel(1.0 / 3.0, 1.0 / 3.0)


@pytest.fixture
def k2_family():
    """Carrier 0, basis delta_(0,1); psi(theta) = log(1 + e^(theta/2))."""
    return make_family(complete_graph(2), [0.0] * 4, [[0.0, 1.0, 0.0, 0.0]])


@pytest.fixture
def write_json(tmp_path):
    def write(name: str, payload) -> str:
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)
    return write


def psi_k2(theta: float) -> float:
    return math.log(1.0 + math.exp(theta / 2.0))
