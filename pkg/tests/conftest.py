import warnings

import pytest

from wdm_revenue.instances import load_table
from wdm_revenue.model import Instance, StationParams


def make_instance(n, k, c, gamma, nu, mu, s):
    """Instance whose parameters are given as callables of the station number."""
    stations = [
        StationParams(i, gamma=gamma(i), retry_rate=nu(i), drop_decay=mu(i), switchover=s(i))
        for i in range(1, n + 1)
    ]
    return Instance(tuple(stations), k, c)


def const(x):
    return lambda i: x


@pytest.fixture(scope="session")
def tables():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {t: load_table(t) for t in ("I", "II", "III", "IV", "V", "VI", "VII", "IX")}


_CRITERIA: list[str] = []


@pytest.fixture
def criterion(capsys):
    """Report one acceptance verdict line and fail the test when it is not met.

    ``known_failure`` marks a criterion analysed as unattainable: the FAIL line
    is still printed, and the test is reported as an expected failure.
    """

    def report(number: int, text: str, ok: bool, known_failure: str | None = None):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"
        _CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        if not ok and known_failure:
            pytest.xfail(known_failure)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
