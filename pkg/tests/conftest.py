import numpy as np
import pytest

from idsubdiff.exponents import LawSpec

LAWS = {
    "stable": LawSpec.stable(0.7),
    "tempered": LawSpec.tempered(0.5, 1.0),
    "distributed": LawSpec.distributed([(0.5, 0.3), (0.5, 0.8)]),
}


@pytest.fixture(params=sorted(LAWS))
def any_law(request):
    return LAWS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance summary ------------------------------------------------------
# test_acceptance.py records one verdict per criterion here; the lines are
# printed at the end of the run so they survive output capturing.

ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {detail}"
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {detail}")
