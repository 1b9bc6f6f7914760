"""Slow, independent reference computations used to validate the stepper.

Nothing here shares discretization machinery with the spectral propagator:
the time integrator is Crank-Nicolson on a finite-difference Laplacian, the
pointwise damping flow is integrated by brute-force RK4, and the stationary
profiles are closed-form Gaussians.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fields import WaveFunction
from .grid import Grid, coordinate_mesh
from .model import ModelParams, potential

__all__ = [
    "ode_substep_oracle",
    "hermite_ground_state",
    "crank_nicolson_evolve",
    "CrankNicolsonError",
]


def ode_substep_oracle(rho0: float, sigma: float, p: float, dt: float,
                       substeps: int = 10_000) -> tuple[float, float]:
    """Integrate the pointwise damping system by fixed-step RK4.

        d rho / dt = -2 sigma rho^((p+1)/2),   d phi / dt = rho,

    starting from (rho0, 0).  Returns (rho(dt), phi(dt)).  `phi` is the
    accumulated density that multiplies the cubic coupling in the phase.
    Deliberately has no shared code with the closed-form substep.
    """
    if rho0 < 0.0:
        raise ValueError("density must be nonnegative")
    q = (p + 1.0) / 2.0

    def rhs(rho: float) -> float:
        return -2.0 * sigma * max(rho, 0.0) ** q

    h = dt / substeps
    rho = float(rho0)
    phi = 0.0
    for _ in range(substeps):
        k1r = rhs(rho)
        k1p = rho
        k2r = rhs(rho + 0.5 * h * k1r)
        k2p = rho + 0.5 * h * k1r
        k3r = rhs(rho + 0.5 * h * k2r)
        k3p = rho + 0.5 * h * k2r
        k4r = rhs(rho + h * k3r)
        k4p = rho + h * k3r
        rho += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        phi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return rho, phi


def hermite_ground_state(grid: Grid, omega: tuple[float, ...]) -> WaveFunction:
    """Normalized Gaussian ground state of the anisotropic harmonic trap.

    Exact stationary profile of the linear problem with quadratic-part energy
    sum(omega_j) / 2; the constructor rejects non-confining axes.
    """
    if len(omega) != grid.dim:
        raise ValueError(f"omega has {len(omega)} entries for a {grid.dim}d grid")
    if any(w <= 0.0 for w in omega):
        raise ValueError("ground state requires every trap frequency > 0")
    vals = np.ones(grid.shape, dtype=np.complex128)
    for j, w in enumerate(omega):
        x = coordinate_mesh(grid, j)
        vals = vals * (w / np.pi) ** 0.25 * np.exp(-0.5 * w * x**2)
    return WaveFunction(grid, vals)


class CrankNicolsonError(RuntimeError):
    """Raised when the implicit solve stalls; carries the step context."""

    def __init__(self, step: int, iterations: int, update: float) -> None:
        super().__init__(
            f"fixed-point iteration failed to converge at step {step}: "
            f"update {update:.3e} after {iterations} iterations"
        )
        self.step = step
        self.iterations = iterations
        self.update = update


def _cn_factor(grid: Grid, pot: np.ndarray, dt: float):
    """LU factorization of (I - dt/2 L) with L = i/2 D2 - i V, periodic D2."""
    n = grid.points[0]
    h = grid.spacing[0]
    main = np.full(n, -2.0 / h**2)
    off = np.full(n - 1, 1.0 / h**2)
    d2 = sp.diags([off, main, off], offsets=(-1, 0, 1), format="lil")
    d2[0, n - 1] = 1.0 / h**2
    d2[n - 1, 0] = 1.0 / h**2
    lin = 0.5j * d2.tocsr() - 1j * sp.diags(pot)
    system = sp.identity(n, dtype=np.complex128, format="csr") - 0.5 * dt * lin
    return splu(system.tocsc()), lin


def crank_nicolson_evolve(initial: WaveFunction, params: ModelParams, dt: float,
                          t_end: float, fp_tol: float = 1e-12,
                          max_iterations: int = 50) -> WaveFunction:
    """Evolve a one-dimensional state with a fully independent discretization.

    Second-order finite differences in space, Crank-Nicolson in time, with
    the nonlinear terms resolved by fixed-point iteration to `fp_tol`
    (relative l2 update) each step.  Quadratic cost in the grid size, so the
    resolution is capped at 2048 points.
    """
    grid = initial.grid
    if grid.dim != 1:
        raise ValueError("the finite-difference reference is one-dimensional only")
    if grid.points[0] > 2048:
        raise ValueError("reference resolution capped at 2048 points")
    if dt <= 0.0 or t_end <= 0.0:
        raise ValueError("dt and t_end must be positive")

    pot = potential(params, grid)
    lam, sigma, p = params.lam, params.sigma, params.p
    sig_lin = params.sigma_linear

    def nonlin(w: np.ndarray) -> np.ndarray:
        amp2 = np.abs(w) ** 2
        return (-1j * lam * amp2 - sigma * amp2 ** ((p - 1.0) / 2.0) - sig_lin) * w

    n_full = int(np.floor(t_end / dt + 1e-12))
    remainder = t_end - n_full * dt
    plan = [(dt, n_full)]
    if remainder > 1e-12 * dt:
        plan.append((remainder, 1))

    u = initial.values.copy()
    step_index = 0
    for step_dt, count in plan:
        if count == 0:
            continue
        lu, lin = _cn_factor(grid, pot, step_dt)
        for _ in range(count):
            step_index += 1
            base = u + 0.5 * step_dt * (lin @ u + nonlin(u))
            w = u.copy()
            for iteration in range(1, max_iterations + 1):
                w_next = lu.solve(base + 0.5 * step_dt * nonlin(w))
                update = float(np.linalg.norm(w_next - w))
                scale = max(float(np.linalg.norm(w_next)), 1.0)
                w = w_next
                if update <= fp_tol * scale:
                    break
            else:
                raise CrankNicolsonError(step_index, max_iterations, update)
            u = w
    return WaveFunction(grid, u)
