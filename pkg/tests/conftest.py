import numpy as np
import pytest

from mssense.config import Pattern, SystemConfig

CONFIGS = [(L, p) for L in (2, 3, 4) for p in Pattern]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def interior_angles(rng, L, n, margin=np.deg2rad(5)):
    from mssense.geometry import interior_mask

    out = np.empty(0)
    while out.size < n:
        th = rng.uniform(0, 2 * np.pi, 4 * n)
        out = np.concatenate([out, th[interior_mask(th, L, margin)]])
    return out[:n]


def sym(L, N, pattern=Pattern.ISOTROPIC, **kw):
    return SystemConfig.symmetric(L, N, pattern, **kw)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
