import os
import random

import pytest


def pytest_collection_modifyitems(config, items):
    if os.environ.get("LATCOV_EXTENDED"):
        return
    skip = pytest.mark.skip(reason="set LATCOV_EXTENDED=1 to run")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


def random_unimodular(rng: random.Random, d: int, steps: int = 8) -> tuple:
    """Integer matrix with determinant +-1, as a tuple of rows."""
    u = [[1 if i == j else 0 for j in range(d)] for i in range(d)]
    for _ in range(steps):
        a, b = rng.sample(range(d), 2)
        c = rng.randint(-2, 2)
        for k in range(d):
            u[a][k] += c * u[b][k]
    if rng.random() < 0.5:
        u[0] = [-e for e in u[0]]
    return tuple(tuple(row) for row in u)
