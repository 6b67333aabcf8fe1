import math

import pytest
from hypothesis import HealthCheck, settings

from rpfkit import parse_config

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def affine_full_map(k, hole=(), name=None):
    """``k x mod 1`` as ``k`` increasing affine branches."""
    return {
        "name": name or f"times{k}",
        "hole": [list(h) for h in hole],
        "branches": [
            {"family": "affine", "params": {"a": k, "b": -j}, "domain": [j / k, (j + 1) / k]}
            for j in range(k)
        ],
    }


def mp_map(gamma=1.0, hole=()):
    return {
        "name": f"mp{gamma}",
        "hole": [list(h) for h in hole],
        "branches": [
            {"family": "mp", "params": {"gamma": gamma}, "domain": [0, 0.5]},
            {"family": "affine", "params": {"a": 2, "b": -1}, "domain": [0.5, 1]},
        ],
    }


def config(maps, potential=None, probabilities=None, seed=1, **extra):
    cfg = {
        "schema_version": 1,
        "ensemble": {"maps": maps},
        "potential": potential or {"type": "constant", "value": 0.0},
        "driver": {"type": "iid", "probabilities": probabilities or [1.0 / len(maps)] * len(maps), "seed": seed},
    }
    cfg.update(extra)
    return cfg


def ensemble(maps, potential=None, probabilities=None, seed=1, **kw):
    return parse_config(config(maps, potential, probabilities, seed), **kw)


def doubling(hole=(), potential=None, **kw):
    return ensemble([affine_full_map(2, hole)], potential, [1.0], **kw)


HALF = {"type": "geometric", "t": 1.0}


@pytest.fixture(scope="session")
def figure1():
    from rpfkit import builtin

    return builtin("figure1")


@pytest.fixture(scope="session")
def log_5_over_4():
    return math.log(4.0) - math.log(5.0)
