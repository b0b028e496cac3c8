import numpy as np
import pytest

from sandhomog import coeffs
from sandhomog.grid import Grid


@pytest.fixture
def law():
    return coeffs.default_flux_law()


@pytest.fixture
def short_forcing(law):
    return coeffs.default_forcing("short", law)


@pytest.fixture
def grid16():
    return Grid(16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def dead_forcing(regime="short", law=None, **kw):
    """A tide whose clamped speed sits below the g_a foot: A = C = 0 everywhere."""
    params = dict(mean_flow=(0.05, 0.0), u_peak=0.04, freeze_level=0.1, freeze_width=0.05, m_peak=0.0)
    params.update(kw)
    return coeffs.default_forcing(regime, law, **params)


def dead_window_long(law=None):
    """Long-regime tide that spends part of each period in the degenerate window."""
    return coeffs.default_forcing(
        "long", law, mean_flow=(0.6, 0.0), u_peak=0.9, freeze_level=0.1, freeze_width=0.05
    )
