import pytest

from fockscatter import pulses as P
from fockscatter import scattering as S

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, title, passed, detail)``."""
    def record(n, title, passed, detail=""):
        prev = _CRITERIA.get(n)
        ok = bool(passed) and (prev is None or prev[1])
        det = detail if prev is None else f"{prev[2]}; {detail}"
        _CRITERIA[n] = (title, ok, det)
        print(f"[criterion {n}] {'PASS' if passed else 'FAIL'} {title}: {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")


@pytest.fixture(scope="session")
def scatter_tb8_two():
    return S.run_scattering(P.PulseParams(t_b=8.0), alpha=0.5, window=(0.0, 27.0))


@pytest.fixture(scope="session")
def scatter_tb8_one_one():
    return S.run_scattering(P.PulseParams(t_b=8.0), alpha=0.0, window=(0.0, 27.0))

