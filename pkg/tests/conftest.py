import numpy as np
import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def record(request):
    """record(n, ok, detail) prints one PASS/FAIL line for acceptance criterion n and returns ok."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def rec(n: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return ok

    return rec


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs longer than a few seconds")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
