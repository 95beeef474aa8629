import numpy as np
import pytest

from grushin_mvf import GrushinParams, make_surface


@pytest.fixture
def p21():
    return GrushinParams(2, 1.0)


@pytest.fixture
def flat(p21):
    return make_surface(p21, "flat")


@pytest.fixture
def paraboloid(p21):
    return make_surface(p21, {"kind": "radial-power", "c": 0.3, "m": 2})


@pytest.fixture
def saddle(p21):
    return make_surface(p21, {"kind": "monomial", "terms": {"x1*x2": 1.0}})


@pytest.fixture
def quartic(p21):
    return make_surface(p21, {"kind": "radial-power", "c": 1.0, "m": 4})


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def annulus_points(rng, count, r_min=0.1, r_max=0.9, n=2):
    r = rng.uniform(r_min, r_max, count)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return r[:, None] * d


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
