"""Shared fixtures: small grids, reference states, the 1d damped benchmark."""

import math

import numpy as np
import pytest

from dampednls import (
    ModelParams,
    StepperConfig,
    WaveFunction,
    make_grid,
)
from dampednls.oracle import hermite_ground_state


@pytest.fixture(scope="session")
def line_grid():
    """1d grid wide enough that Gaussians of width O(1) are fully interior."""
    return make_grid((256,), (8.0,))


@pytest.fixture(scope="session")
def plane_grid():
    return make_grid((64, 64), (6.0, 6.0))


@pytest.fixture(scope="session")
def ground_state_1d(line_grid):
    return hermite_ground_state(line_grid, (1.0,))


@pytest.fixture()
def smooth_state(line_grid):
    """Non-stationary smooth state with nontrivial phase and current."""
    x = line_grid.axes[0]
    vals = (np.pi * 0.49) ** -0.25 * np.exp(
        -((x - 0.3) ** 2) / (2 * 0.49) + 0.7j * x
    )
    return WaveFunction(line_grid, vals.astype(np.complex128))


def damped_benchmark_params() -> ModelParams:
    """The 1d damped Gaussian benchmark used by several balance checks."""
    return ModelParams(lam=-1.0, sigma=0.2, p=5.0, omega=(1.0,))


def damped_benchmark_initial(grid) -> WaveFunction:
    x = grid.axes[0]
    vals = 1.5 * (np.pi * 0.49) ** -0.25 * np.exp(-(x**2) / (2 * 0.49))
    return WaveFunction(grid, vals.astype(np.complex128))


@pytest.fixture(scope="session")
def benchmark_run(line_grid):
    """One shared trajectory of the 1d damped benchmark at dt = 1e-3."""
    from dampednls import evolve

    params = damped_benchmark_params()
    initial = damped_benchmark_initial(line_grid)
    config = StepperConfig(dt=1e-3, t_end=1.0, output_every=1)
    return evolve(initial, params, config), params


def assert_lp1_budget(records, params, slack: float = 1e-6) -> None:
    """Integrated mass identity: damping-norm budget never exceeds mass drop.

    Applied to every damped trajectory the suite produces.
    """
    assert params.sigma > 0.0
    drop = (records[0].mass - records[-1].mass) / (2.0 * params.sigma)
    assert records[-1].lp1_accum <= drop * (1.0 + slack) + 1e-300
