"""Shared fixtures: presets and solved states reused across test modules."""

import numpy as np
import pytest

from mutsel.equilibrium import solve_coupled, solve_uncoupled
from mutsel.model import build_problem, preset
from mutsel.spectral import solve_host_spectrum


@pytest.fixture(scope="session")
def fig1():
    return preset("fig1")


@pytest.fixture(scope="session")
def fig2():
    return preset("fig2")


@pytest.fixture(scope="session")
def fig3():
    return preset("fig3")


@pytest.fixture(scope="session")
def fig1_problem(fig1):
    """fig1 at a moderate mutation width; cheap enough for many tests."""
    return build_problem(fig1, 0.01)


@pytest.fixture(scope="session")
def fig1_state(fig1_problem):
    return solve_coupled(fig1_problem, tol=1e-12)


@pytest.fixture(scope="session")
def fig1_spectra(fig1_problem):
    return (
        solve_host_spectrum(fig1_problem, 1, tol=1e-12),
        solve_host_spectrum(fig1_problem, 2, tol=1e-12),
    )


@pytest.fixture(scope="session")
def fig1_uncoupled(fig1_problem, fig1_spectra):
    return (
        solve_uncoupled(fig1_problem, 1, spectral=fig1_spectra[0]),
        solve_uncoupled(fig1_problem, 2, spectral=fig1_spectra[1]),
    )


@pytest.fixture(scope="session")
def fig2_problem(fig2):
    return build_problem(fig2, 0.01)


@pytest.fixture(scope="session")
def fig2_state(fig2_problem):
    return solve_coupled(fig2_problem, tol=1e-12)


@pytest.fixture(scope="session")
def coarse_problem(fig1):
    """Small grid for dense-matrix comparisons."""
    return build_problem(fig1, 0.05, n=512)


def random_density(grid, seed):
    rng = np.random.default_rng(seed)
    vals = rng.random(grid.n)
    from mutsel.grid import Field

    return Field(grid, vals, is_density=True)
