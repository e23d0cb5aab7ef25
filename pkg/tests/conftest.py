import numpy as np
import pytest

from rfmcf import backgrounds as B


@pytest.fixture
def flat2():
    return B.get_background("flat-static", n=2)


@pytest.fixture
def flat3():
    return B.get_background("flat-static", n=3)


@pytest.fixture
def cigar():
    return B.get_background("cigar-steady")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
