import numpy as np
import pytest

from composite_tunneling.grids import Grid1D
from composite_tunneling.model import preset_params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_grid():
    """Symmetric 1D grid wide enough for the N=1 and N=2 bound states."""
    return Grid1D(-25.0, 25.0, 512)


@pytest.fixture(params=[1, 2, 4])
def n_channels(request):
    return request.param


@pytest.fixture
def params_n2():
    return preset_params(2, 3.0)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL line for the acceptance summary and assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(criterion: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
