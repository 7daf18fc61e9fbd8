import math

import numpy as np
import pytest

from src.models.clf import compose_lyapunov, design_output_clf, design_zero_clf
from src.models.system import make_benchmark, make_stable_linear

SQRT3 = math.sqrt(3.0)
BENCHMARK_K = [[0.5, SQRT3 / 2.0]]


@pytest.fixture
def benchmark():
    return make_benchmark()


@pytest.fixture
def linear_system():
    return make_stable_linear()


@pytest.fixture
def design(benchmark):
    return design_output_clf(benchmark, BENCHMARK_K, np.eye(2), 0.5)


@pytest.fixture
def zero_clf(benchmark):
    return design_zero_clf(benchmark, [[1.0]], 0.5)


@pytest.fixture
def composite(design, zero_clf):
    return compose_lyapunov(design, zero_clf, L_q=4.0, h2_star=0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_ball(rng, n, radius, count):
    """Points drawn uniformly in direction and radius from the closed ball."""
    directions = rng.standard_normal((count, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * rng.uniform(0.0, radius, size=(count, 1))
