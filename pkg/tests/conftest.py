import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robin_dd import mesh, pstructure  # noqa: E402
from robin_dd.subsolver import NewtonConfig  # noqa: E402


def linear_source(X):
    return 1.0 + 2.0 * X[..., 0]


@pytest.fixture
def cfg():
    return NewtonConfig(tol_residual=1e-10)


@pytest.fixture
def dec1d():
    return mesh.decompose(mesh.build_interval_mesh(0, 1, 32), "x", 0.5)


@pytest.fixture
def dec2d():
    return mesh.decompose(mesh.build_rect_mesh(1, 1, 8, 8), "x", 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


PRESETS = {
    "linear_1d": (lambda: pstructure.linear(1.0), lambda: mesh.build_interval_mesh(0, 1, 32)),
    "plap3_square": (lambda: pstructure.reaction(3.0, 1.0), lambda: mesh.build_rect_mesh(1, 1, 16, 16)),
    "plap4_1d": (lambda: pstructure.resolvent(4.0, 1.0), lambda: mesh.build_interval_mesh(0, 1, 32)),
}


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[k])
