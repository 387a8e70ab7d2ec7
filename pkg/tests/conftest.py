import json
from importlib import resources

import numpy as np
import pytest

from spdkernels.kernels import parse_spec
from spdkernels.manifold import make_manifold

FIXTURES = resources.files("spdkernels") / "fixtures"


def fixture_path(name):
    return str(FIXTURES / f"{name}.json")


def load_fixture(name):
    return json.loads((FIXTURES / f"{name}.json").read_text())


def fixture_spec(name):
    return parse_spec(load_fixture(name))


@pytest.fixture
def s2():
    return make_manifold("sphere", 3)


@pytest.fixture
def circle():
    return make_manifold("circle", 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng, n=3):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
