import numpy as np
import pytest

from maldomain.dataset import generate_synthetic, min_max_scale


@pytest.fixture(scope="session")
def small_data():
    """Scaled 200-record synthetic set used by most model tests."""
    return min_max_scale(generate_synthetic(100, 3.0, 11))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def record():
    """Store a one-line verdict for an acceptance criterion."""

    def _record(number: int, passed: bool, detail: str):
        _CRITERIA[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
