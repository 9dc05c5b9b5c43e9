import numpy as np
import pytest

from hspace6.config import load_fixture
from hspace6.metrics import SamplerConfig, sample_points

TAGS = ("T2211", "T321", "T33", "T411", "T51")


def generic_spec(tag):
    return load_fixture(f"{tag.lower()}_generic").spec


def constant_spec(tag):
    return load_fixture(f"{tag.lower()}_constant").spec


_POINT_CACHE = {}


def points_for(spec, count=10, seed=0):
    key = (repr(spec), count, seed)
    if key not in _POINT_CACHE:
        _POINT_CACHE[key] = sample_points(spec, SamplerConfig(count=count, seed=seed))
    return _POINT_CACHE[key]


@pytest.fixture(params=TAGS)
def tag(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for line in RESULTS:
            terminalreporter.write_line(line)
