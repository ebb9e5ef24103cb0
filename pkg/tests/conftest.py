import numpy as np
import pytest

from mahashot import Task


def random_spd(rng, d, ridge=0.5):
    a = rng.standard_normal((d, d))
    return a @ a.T + ridge * np.eye(d)


def make_task(rng, way=3, shots=None, queries=8, d=4, spread=3.0, seed_means=None):
    """Random Gaussian task; shots may be an int or a per-class list."""
    if shots is None:
        shots = [int(rng.integers(1, 6)) for _ in range(way)]
    elif isinstance(shots, int):
        shots = [shots] * way
    means = seed_means if seed_means is not None else spread * rng.standard_normal((way, d))
    support = np.vstack(
        [means[k] + rng.standard_normal((shots[k], d)) for k in range(way)]
    )
    labels = np.concatenate([np.full(shots[k], k) for k in range(way)])
    truth = rng.integers(0, way, size=queries)
    query = means[truth] + rng.standard_normal((queries, d)) if queries else np.zeros((0, d))
    return Task(
        support_z=support,
        support_y=labels,
        query_z=query,
        truth=truth,
        way=way,
    )


def without_query(task):
    """The same support set with an empty query block."""
    return Task(
        support_z=task.support_z,
        support_y=task.support_y,
        query_z=np.zeros((0, task.dim)),
        truth=np.zeros(0, dtype=int),
        way=task.way,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
