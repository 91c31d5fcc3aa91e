import re

import numpy as np
import pytest

from viscofrac.geometry import CrackComponent, CrackSet
from viscofrac.model import DomainSpec, LoadTrajectory, MaterialModel


def tension(x):
    x = np.asarray(x, float)
    return np.stack([0.0 * x[:, 0], 2.0 * x[:, 1] - 1.0], axis=1)


def edge_crack(a=0.3, eta=0.05):
    return CrackSet((CrackComponent(np.array([[0.0, 0.5], [a, 0.5]]), a),), eta)


@pytest.fixture(scope="session")
def square():
    return DomainSpec.rectangle(dirichlet_edges=(0, 2))


@pytest.fixture(scope="session")
def material():
    return MaterialModel.constant(1.0, 1.0, 2.8)


@pytest.fixture(scope="session")
def loads():
    return LoadTrajectory.ramp(1.0, w_profile=tension)


# one summary line per acceptance criterion, shown after the run
_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m or not (report.when == "call" or report.failed):
        return
    detail = dict(report.user_properties).get("detail", "")
    _CRITERIA[int(m.group(1))] = (report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
