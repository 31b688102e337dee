from __future__ import annotations

import numpy as np
import pytest

from kerrwell.dynamics import DissipationParams


@pytest.fixture
def bath():
    return DissipationParams(kappa=0.025, n_th=0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def sinc_dvr_levels(potential, x_max, n_grid, n_levels):
    """Colbert-Miller sinc-DVR eigenvalues of p^2/2 + V(x) on [-x_max, x_max]."""
    x = np.linspace(-x_max, x_max, n_grid)
    dx = x[1] - x[0]
    i = np.arange(n_grid)
    diff = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        t = np.where(diff == 0, np.pi**2 / 3.0, 2.0 * (-1.0) ** diff / np.where(diff == 0, 1, diff) ** 2)
    h = t / (2.0 * dx**2) + np.diag(potential(x))
    return np.linalg.eigvalsh(h)[:n_levels]
