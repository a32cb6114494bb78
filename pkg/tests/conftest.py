import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from radhydro.fourier import SpectralGrid

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid16():
    return SpectralGrid(16, 1.0)


def random_real_spec(grid, rng, comps=None, mean_free=True, band=None):
    """Spectrum of a random real field (optionally band-limited, mean-free)."""
    shape = grid.shape if comps is None else (comps,) + grid.shape
    fh = grid.to_spectral(rng.standard_normal(shape))
    fh = fh * ~grid.nyquist
    if mean_free:
        fh = fh * (grid.k2 > 0)
    if band is not None:
        fh = fh * (grid.kmag <= band)
    return fh


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
