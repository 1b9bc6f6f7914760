"""Periodic Fourier grids: quadrature, transforms, and spectral derivatives.

The computational box on each axis j is [-L_j, L_j) sampled at n_j uniform
points, so the spacing is h_j = 2 L_j / n_j and the wavenumbers are the
standard FFT frequencies scaled by 2*pi/(2 L_j).  Forward transforms are
normalized so that discrete Parseval holds against the trapezoidal
quadrature weights: sum |u|^2 * prod(h) == sum |u_hat|^2 * prod(dk).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import fft as _fft

__all__ = [
    "Grid",
    "make_grid",
    "integrate",
    "transform",
    "inverse_transform",
    "spectral_gradient",
    "laplacian_symbol",
    "coordinate_mesh",
    "radius_squared_mesh",
    "boundary_density_ratio",
    "spectral_upsample",
]

_FFT_WORKERS = -1  # all available cores; pocketfft results are deterministic


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid over a centered box in 1, 2 or 3 dimensions.

    Instances are immutable and safe to share between states; the cached
    wavenumber meshes are marked read-only.  Equality is identity, which
    lets grids act as cache keys for step multipliers.
    """

    dim: int
    points: tuple[int, ...]
    half_width: tuple[float, ...]
    spacing: tuple[float, ...]
    axes: tuple[np.ndarray, ...]
    wavenumbers: tuple[np.ndarray, ...]
    gradient_wavenumbers: tuple[np.ndarray, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def mode_volume(self) -> float:
        """Quadrature weight of one Fourier mode, prod over axes of pi/L_j."""
        return float(np.prod([math.pi / L for L in self.half_width]))


def _axis_mesh(per_axis: tuple[np.ndarray, ...], axis: int, dim: int) -> np.ndarray:
    shape = [1] * dim
    shape[axis] = per_axis[axis].size
    return per_axis[axis].reshape(shape)


def make_grid(points: int | tuple[int, ...], half_width: float | tuple[float, ...]) -> Grid:
    """Build a Grid from per-axis point counts and box half-widths.

    Scalars are accepted for one-dimensional grids.  Point counts must be
    powers of two with at least 8 points per axis; half-widths must be
    positive and finite.
    """
    pts = (points,) if isinstance(points, int) else tuple(int(n) for n in points)
    hw = (float(half_width),) if isinstance(half_width, (int, float)) else tuple(
        float(L) for L in half_width
    )
    problems = []
    if len(pts) != len(hw):
        problems.append(
            f"points has {len(pts)} axes but half_width has {len(hw)}"
        )
    dim = len(pts)
    if dim not in (1, 2, 3):
        problems.append(f"grid dimension must be 1, 2 or 3, got {dim}")
    for j, n in enumerate(pts):
        if n < 8 or (n & (n - 1)) != 0:
            problems.append(
                f"points[{j}] = {n}: per-axis count must be a power of two >= 8"
            )
    for j, L in enumerate(hw):
        if not math.isfinite(L) or L <= 0.0:
            problems.append(f"half_width[{j}] = {L}: must be positive and finite")
    if problems:
        raise ValueError("; ".join(problems))

    spacing = tuple(2.0 * L / n for L, n in zip(hw, pts))
    axes = []
    waves = []
    grad_waves = []
    for n, L, h in zip(pts, hw, spacing):
        x = -L + h * np.arange(n)
        k = 2.0 * math.pi * np.fft.fftfreq(n, d=h)
        kg = k.copy()
        kg[n // 2] = 0.0  # drop the unmatched Nyquist mode in odd-order symbols
        for arr in (x, k, kg):
            arr.setflags(write=False)
        axes.append(x)
        waves.append(k)
        grad_waves.append(kg)
    return Grid(
        dim=dim,
        points=pts,
        half_width=hw,
        spacing=spacing,
        axes=tuple(axes),
        wavenumbers=tuple(waves),
        gradient_wavenumbers=tuple(grad_waves),
    )


def coordinate_mesh(grid: Grid, axis: int) -> np.ndarray:
    """Coordinate values along one axis, broadcastable to the grid shape."""
    return _axis_mesh(grid.axes, axis, grid.dim)


def radius_squared_mesh(grid: Grid) -> np.ndarray:
    """|x|^2 on the grid (full shape, not broadcast)."""
    out = reduce(
        np.add, (coordinate_mesh(grid, j) ** 2 for j in range(grid.dim))
    )
    return np.broadcast_to(out, grid.shape).copy()


def integrate(grid: Grid, values: np.ndarray) -> float | complex:
    """Trapezoidal quadrature over the periodic box (uniform weights)."""
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot integrate a field with non-finite entries")
    total = values.sum() * grid.cell_volume
    if np.iscomplexobj(values):
        return complex(total)
    return float(total)


def transform(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Forward FFT with quadrature normalization (unitary against integrate)."""
    scale = grid.cell_volume / (2.0 * math.pi) ** (grid.dim / 2.0)
    return _fft.fftn(values, workers=_FFT_WORKERS) * scale


def inverse_transform(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    scale = (2.0 * math.pi) ** (grid.dim / 2.0) / grid.cell_volume
    return _fft.ifftn(coeffs, workers=_FFT_WORKERS) * scale


def laplacian_symbol(grid: Grid) -> np.ndarray:
    """|k|^2 mesh for the (negative) Laplacian, Nyquist modes included."""
    out = reduce(
        np.add,
        (_axis_mesh(grid.wavenumbers, j, grid.dim) ** 2 for j in range(grid.dim)),
    )
    return np.broadcast_to(out, grid.shape).copy()


def spectral_gradient(grid: Grid, values: np.ndarray) -> tuple[np.ndarray, ...]:
    """All first partials of a field by Fourier differentiation.

    The per-axis Nyquist coefficient is zeroed so that real input produces a
    gradient with vanishing imaginary part (up to round-off) and the discrete
    operator stays skew-adjoint.  Returns one complex array per axis.
    """
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    coeffs = _fft.fftn(values, workers=_FFT_WORKERS)
    parts = []
    for j in range(grid.dim):
        kj = _axis_mesh(grid.gradient_wavenumbers, j, grid.dim)
        parts.append(_fft.ifftn(1j * kj * coeffs, workers=_FFT_WORKERS))
    return tuple(parts)


def boundary_density_ratio(grid: Grid, density: np.ndarray) -> float:
    """max density on the outermost grid layer divided by the global max.

    Used to warn when an initial state carries visible mass at the box edge,
    which breaks the periodic-extension assumption behind Fourier stepping.
    """
    peak = float(np.max(density))
    if peak <= 0.0:
        return 0.0
    edge = 0.0
    for j in range(grid.dim):
        for idx in (0, grid.points[j] - 1):
            face = np.take(density, idx, axis=j)
            edge = max(edge, float(np.max(face)))
    return edge / peak


def spectral_upsample(grid: Grid, values: np.ndarray, factor: int = 2) -> tuple[Grid, np.ndarray]:
    """Zero-pad the spectrum onto a grid with `factor` times the points.

    Band-limited fields are reproduced exactly at the original sample
    locations; the even-n Nyquist coefficient is split symmetrically so the
    interpolant of real data stays real.  Used for aliasing self-checks on
    high powers of the density.
    """
    if factor < 2 or (factor & (factor - 1)) != 0:
        raise ValueError("upsampling factor must be a power of two >= 2")
    fine = make_grid(tuple(n * factor for n in grid.points), grid.half_width)
    coeffs = _fft.fftshift(_fft.fftn(values, workers=_FFT_WORKERS))
    for j, n in enumerate(grid.points):
        m = n * factor
        shape = list(coeffs.shape)
        shape[j] = m
        padded = np.zeros(shape, dtype=np.complex128)
        lo = m // 2 - n // 2  # shifted index of frequency -n/2 on the fine axis
        sel = [slice(None)] * coeffs.ndim
        dst = [slice(None)] * coeffs.ndim
        sel[j] = slice(1, n)
        dst[j] = slice(lo + 1, lo + n)
        padded[tuple(dst)] = coeffs[tuple(sel)]
        # fftshift leaves -n/2 unpaired at index 0; split it over +-n/2 so
        # the padded spectrum of real data keeps Hermitian symmetry.
        half_nyq = 0.5 * np.take(coeffs, 0, axis=j)
        dst[j] = lo
        padded[tuple(dst)] = half_nyq
        dst[j] = lo + n
        padded[tuple(dst)] = half_nyq
        coeffs = padded
    scale = factor**grid.dim
    out = _fft.ifftn(_fft.ifftshift(coeffs), workers=_FFT_WORKERS) * scale
    if not np.iscomplexobj(values):
        out = out.real
    return fine, out
