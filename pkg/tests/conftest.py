import math

import numpy as np
import pytest

from eqpower.acf import Exponential, Jakes
from eqpower.estimation import EstimationProblem

FOOTNOTE_RATE = math.tan(0.99 * math.pi / 2) / math.pi

# filled by test_acceptance, printed at the end of the session
ACCEPTANCE = {}


def footnote_exponential(n, **kw):
    return EstimationProblem.sampled(Exponential(1.0), n, rate=FOOTNOTE_RATE, **kw)


def footnote_jakes(n, doppler=100.0, **kw):
    return EstimationProblem.sampled(Jakes(doppler), n, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
