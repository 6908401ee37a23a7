import pytest

from techmap import library
from techmap.cli import resolve_solver

from util import probe_solver


@pytest.fixture(scope="session")
def lib():
    return library.default_library()


@pytest.fixture(scope="session")
def solver_config():
    """The solver the acceptance suite talks to, skipping when unreachable."""
    config = resolve_solver()
    if not probe_solver(config):
        pytest.skip("solver unavailable")
    return config
