import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lyzflow.spectral import Grid

settings.register_profile("lyz", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lyz")


@pytest.fixture
def grid32():
    return Grid(1, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, title)`` returns a context manager."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    class _Criterion:
        def __init__(self, number, title):
            self.number, self.title, self.detail = number, title, ""

        def __enter__(self):
            return self

        def __exit__(self, kind, exc, tb):
            ok = kind is None
            detail = self.detail if ok else f"{type(exc).__name__}: {exc}".splitlines()[0]
            lines[self.number] = f"{'PASS' if ok else 'FAIL'}  criterion {self.number:>2}  {self.title}: {detail}"
            print(lines[self.number])
            return False

    return _Criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
