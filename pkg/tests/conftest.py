import numpy as np
import pytest

from powermodem import channel, modplan


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def keyed_plan():
    return modplan.plan_bfsk(0.005, 10_000.0, 18_000.0)


@pytest.fixture
def noiseless():
    return channel.preset("noiseless")


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL/SKIP line per acceptance criterion.

    Lines are printed immediately (visible with ``-s``) and repeated in the
    terminal summary so they always appear in the run log.
    """

    def record(number, name, ok, detail=""):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"ACCEPTANCE {number}: {status} - {name}" + (f" ({detail})" if detail else "")
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return status

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
