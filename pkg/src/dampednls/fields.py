"""Wavefunction container and the norms/observables built from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, integrate, radius_squared_mesh, spectral_gradient

__all__ = [
    "WaveFunction",
    "density",
    "current_density",
    "density_gradient",
    "mass",
    "lp_norm",
    "gradient_norm",
    "position_norm",
    "sigma_norm",
    "aliasing_defect",
]


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """A complex field sampled on a periodic grid.

    `values` is always complex128 with the grid's shape; construction rejects
    shape mismatches and non-finite entries so downstream observables can
    assume a sane state.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise ValueError(
                f"state shape {vals.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals.view(np.float64))):
            raise ValueError("wavefunction contains non-finite values")
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "WaveFunction":
        return WaveFunction(self.grid, values)

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.values.copy())


def density(state: WaveFunction) -> np.ndarray:
    """Pointwise |u|^2 as a real array."""
    return np.abs(state.values) ** 2


def current_density(state: WaveFunction) -> tuple[np.ndarray, ...]:
    """Probability current Im(conj(u) * grad u), one real array per axis."""
    grads = spectral_gradient(state.grid, state.values)
    conj = np.conj(state.values)
    return tuple(np.imag(conj * g) for g in grads)


def density_gradient(state: WaveFunction) -> tuple[np.ndarray, ...]:
    """grad(|u|^2) computed as 2 Re(conj(u) * grad u)."""
    grads = spectral_gradient(state.grid, state.values)
    conj = np.conj(state.values)
    return tuple(2.0 * np.real(conj * g) for g in grads)


def mass(state: WaveFunction) -> float:
    return float(integrate(state.grid, density(state)))


def lp_norm(state: WaveFunction | np.ndarray, order: float, grid: Grid | None = None) -> float:
    """L^order norm of a state or of a plain real/complex field.

    Plain arrays need the grid passed explicitly.
    """
    if isinstance(state, WaveFunction):
        grid, field = state.grid, state.values
    else:
        if grid is None:
            raise ValueError("lp_norm of a bare array requires the grid")
        field = state
    if not order >= 1.0:
        raise ValueError(f"norm order must be >= 1, got {order}")
    return float(integrate(grid, np.abs(field) ** order)) ** (1.0 / order)


def gradient_norm(state: WaveFunction) -> float:
    """L^2 norm of grad u."""
    grads = spectral_gradient(state.grid, state.values)
    total = sum(float(integrate(state.grid, np.abs(g) ** 2)) for g in grads)
    return float(np.sqrt(total))


def position_norm(state: WaveFunction) -> float:
    """L^2 norm of |x| u, finite on the truncated box by construction."""
    weighted = radius_squared_mesh(state.grid) * density(state)
    return float(np.sqrt(integrate(state.grid, weighted)))


def sigma_norm(state: WaveFunction) -> float:
    """Confinement-adapted norm: ||u||_2 + ||grad u||_2 + ||x u||_2."""
    return lp_norm(state, 2.0) + gradient_norm(state) + position_norm(state)


def aliasing_defect(state: WaveFunction, order: float, factor: int = 2) -> float:
    """Relative change of ||u||_order^order under spectral refinement.

    High powers of the density are not band-limited on the sampling grid;
    evaluating the same norm on a spectrally upsampled copy exposes the
    quadrature error committed by the coarse lattice.
    """
    from .grid import spectral_upsample

    coarse = float(integrate(state.grid, np.abs(state.values) ** order))
    fine_grid, fine_vals = spectral_upsample(state.grid, state.values, factor)
    fine = float(integrate(fine_grid, np.abs(fine_vals) ** order))
    scale = max(abs(coarse), abs(fine), 1e-300)
    return abs(fine - coarse) / scale
