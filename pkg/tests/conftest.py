import re

import numpy as np
import pytest

from hadamard_eig.deform import AnalyticField, affine_family, identity_family
from hadamard_eig.hadamard import full_report
from hadamard_eig.mesh import BoundaryTag, generate_rect_mesh

PI2 = np.pi ** 2


@pytest.fixture(scope="session")
def square8():
    return generate_rect_mesh(8, 8)


@pytest.fixture(scope="session")
def square16():
    return generate_rect_mesh(16, 16)


@pytest.fixture(scope="session")
def neumann8():
    return generate_rect_mesh(8, 8, tagger=BoundaryTag.NEUMANN)


@pytest.fixture(scope="session")
def dilation():
    return affine_family(AnalyticField("dilation"))


@pytest.fixture(scope="session")
def stretch_x():
    return affine_family(AnalyticField("stretch_x"))


@pytest.fixture(scope="session")
def identity():
    return identity_family()


@pytest.fixture(scope="session")
def stretch_report16(square16, stretch_x):
    return full_report(square16, stretch_x, 0.0, 4)



ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """record(n, ok, detail): log one acceptance line and fail the test if not ok."""
    log = request.config.stash.setdefault(ACCEPTANCE, {})

    def _record(n, title, ok, detail):
        line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        log[n] = line
        print(line)
        assert ok, line

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_criterion_(\d+)_", item.name)
    if m and rep.when == "call" and rep.failed:
        log = item.config.stash.setdefault(ACCEPTANCE, {})
        n = int(m.group(1))
        log.setdefault(n, f"criterion {n} FAIL: {item.name} raised before recording a result")


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(ACCEPTANCE, {})
    if log:
        terminalreporter.section("acceptance criteria")
        for n in sorted(log):
            terminalreporter.write_line(log[n])
