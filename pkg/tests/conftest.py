import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pmcverify.gallery import build_entry
from pmcverify.jets import JetScheme
from pmcverify.sampling import sample_grid

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ANALYTIC = JetScheme("analytic")
FD = JetScheme("finite-difference")


@functools.lru_cache(maxsize=None)
def entry(gid, **params):
    return build_entry(gid, dict(params))


def cached_entry(gid, params=None):
    return entry(gid, **(params or {}))


@functools.lru_cache(maxsize=None)
def _grid(gid, n, mode, items):
    e = entry(gid, **dict(items))
    return sample_grid(e.chart, e.sf, n, JetScheme(mode))


def cached_grid(gid, params=None, n=32, mode="analytic"):
    return _grid(gid, n, mode, tuple(sorted((params or {}).items())))


def interior_points(n=50, radius=0.8, seed=0):
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return r * np.exp(1j * t)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = sorted(config.__dict__.get("_acceptance_results", []))
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for _, line, detail in results:
        terminalreporter.write_line(line)
        terminalreporter.write_line("    " + detail)
