"""Model parameters, energy functionals, and dissipation bookkeeping.

The governing equation is

    i du/dt + (1/2) Lap u = V(x) u + lam |u|^2 u - i sigma |u|^(p-1) u,

with anisotropic harmonic confinement V(x) = (1/2) sum_j omega_j^2 x_j^2.
An optional linear damping variant (-i sigma_linear u, with sigma = 0)
is supported for the gauge-equivalence check in the propagator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import WaveFunction, current_density, density, density_gradient, lp_norm
from .grid import Grid, coordinate_mesh, integrate, spectral_gradient

__all__ = [
    "ModelParams",
    "potential",
    "energy_e0",
    "energy_ekappa",
    "energy_ekappa_p",
    "energy_elin",
    "EnergyBalanceTerms",
    "ekappa_rhs_terms",
    "BudgetConstants",
    "dissipation_budget",
    "sigma_norm_ceiling",
    "space_time_bounds",
    "POTENTIAL_BALANCE_COEFF",
]

# Coefficient of the integral(V rho^3) drain in the quintic energy balance.
# Fixed by the same integration-by-parts computation that produces the other
# five terms and validated against finite differences of E_kappa along
# propagated trajectories (see tests).
POTENTIAL_BALANCE_COEFF = 2.0


@dataclass(frozen=True)
class ModelParams:
    """Physical and auxiliary constants for one simulation.

    lam        cubic self-interaction strength (any sign)
    sigma      nonlinear damping strength, >= 0
    p          damping exponent, >= 3 (and <= 5 in three dimensions)
    omega      trap frequency per axis, each >= 0; length fixes the dimension
    kappa      auxiliary energy weight, >= 0; defaults to sigma / 12, which
               keeps 6*kappa strictly below sigma whenever sigma > 0
    sigma_linear  linear damping strength for the gauge-equivalence variant;
               may only be positive when sigma == 0
    """

    lam: float
    sigma: float
    p: float
    omega: tuple[float, ...]
    kappa: float | None = None
    sigma_linear: float = 0.0

    def __post_init__(self) -> None:
        omega = tuple(float(w) for w in self.omega)
        object.__setattr__(self, "omega", omega)
        errors = []
        if not math.isfinite(self.lam):
            errors.append(f"lam = {self.lam} is not finite")
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            errors.append(f"sigma = {self.sigma}: damping strength must be >= 0")
        if not (self.p >= 3.0 and math.isfinite(self.p)):
            errors.append(f"p = {self.p}: damping exponent must be >= 3")
        if len(omega) not in (1, 2, 3):
            errors.append(f"omega has {len(omega)} entries, expected 1 to 3")
        elif len(omega) == 3 and self.p > 5.0:
            errors.append(
                f"p = {self.p}: exponent above 5 is not energy-subcritical in 3d"
            )
        if any(not (w >= 0.0 and math.isfinite(w)) for w in omega):
            errors.append(f"omega = {omega}: frequencies must be >= 0")
        if self.kappa is None:
            object.__setattr__(self, "kappa", self.sigma / 12.0)
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            errors.append(f"kappa = {self.kappa}: energy weight must be >= 0")
        if self.sigma_linear < 0.0 or not math.isfinite(self.sigma_linear):
            errors.append(f"sigma_linear = {self.sigma_linear}: must be >= 0")
        elif self.sigma_linear > 0.0 and self.sigma > 0.0:
            errors.append(
                "sigma_linear > 0 requires sigma == 0 "
                "(mixed damping has no closed-form density flow)"
            )
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def dim(self) -> int:
        return len(self.omega)


def potential(params: ModelParams, grid: Grid) -> np.ndarray:
    """Harmonic confinement (1/2) sum omega_j^2 x_j^2 on the grid."""
    if grid.dim != params.dim:
        raise ValueError(
            f"grid dimension {grid.dim} does not match omega length {params.dim}"
        )
    out = np.zeros(grid.shape)
    for j, w in enumerate(params.omega):
        out = out + 0.5 * w**2 * coordinate_mesh(grid, j) ** 2
    return out


def _kinetic_and_potential(params: ModelParams, state: WaveFunction,
                           pot: np.ndarray | None) -> tuple[float, float]:
    grads = spectral_gradient(state.grid, state.values)
    kin = 0.5 * sum(float(integrate(state.grid, np.abs(g) ** 2)) for g in grads)
    if pot is None:
        pot = potential(params, state.grid)
    vpart = float(integrate(state.grid, pot * density(state)))
    return kin, vpart


def energy_e0(params: ModelParams, state: WaveFunction,
              pot: np.ndarray | None = None) -> float:
    """Hamiltonian energy: kinetic + trap + (lam/2) integral rho^2."""
    kin, vpart = _kinetic_and_potential(params, state, pot)
    quartic = float(integrate(state.grid, density(state) ** 2))
    return kin + vpart + 0.5 * params.lam * quartic


def energy_ekappa(params: ModelParams, state: WaveFunction,
                  pot: np.ndarray | None = None) -> float:
    """E0 plus kappa ||u||_6^6, the functional driving the quintic budget."""
    sextic = float(integrate(state.grid, density(state) ** 3))
    return energy_e0(params, state, pot) + params.kappa * sextic


def energy_ekappa_p(params: ModelParams, state: WaveFunction,
                    pot: np.ndarray | None = None) -> float:
    """E0 plus kappa ||u||_{p+1}^{p+1}, matching the damping exponent."""
    damp = float(integrate(state.grid, density(state) ** ((params.p + 1.0) / 2.0)))
    return energy_e0(params, state, pot) + params.kappa * damp


def energy_elin(params: ModelParams, state: WaveFunction,
                pot: np.ndarray | None = None) -> float:
    """Quadratic part only: integral (1/2)|grad u|^2 + V |u|^2."""
    kin, vpart = _kinetic_and_potential(params, state, pot)
    return kin + vpart


@dataclass(frozen=True)
class EnergyBalanceTerms:
    """The six dissipation integrals on the right side of d/dt E_kappa.

    All terms are signed; with p = 5, lam <= 0, sigma > 6 kappa > 0 every
    field except `quartic` is guaranteed <= 0, and `quartic` >= 0.
    """

    density_gradient: float   # -sigma int rho |grad rho|^2
    weighted_gradient: float  # -(sigma - 6 kappa) int rho^2 |grad u|^2
    quartic: float            # -2 sigma lam int rho^4
    current_defect: float     # -6 kappa int rho |grad(rho)/2 - J|^2
    tenth_power: float        # -6 sigma kappa int rho^5
    confinement: float        # -2 sigma int V rho^3

    def total(self) -> float:
        return (self.density_gradient + self.weighted_gradient + self.quartic
                + self.current_defect + self.tenth_power + self.confinement)


def ekappa_rhs_terms(params: ModelParams, state: WaveFunction,
                     pot: np.ndarray | None = None,
                     refine: int = 1) -> EnergyBalanceTerms:
    """Evaluate the six-term right-hand side of the E_kappa balance at p = 5.

    The integrands go up to the fifth power of the density, which a lattice
    that resolves the state itself may still alias badly.  `refine` > 1
    evaluates the terms on a spectrally upsampled copy of the state, which
    removes most of that quadrature error at the cost of larger transforms;
    `pot` is ignored in that case and recomputed on the fine lattice.
    """
    if params.p != 5.0:
        raise ValueError("the quintic energy balance is only defined for p = 5")
    if refine > 1:
        from .grid import spectral_upsample

        fine_grid, fine_vals = spectral_upsample(state.grid, state.values, refine)
        state = WaveFunction(fine_grid, fine_vals)
        pot = None
    grid = state.grid
    sigma, kappa, lam = params.sigma, params.kappa, params.lam
    rho = density(state)
    grads = spectral_gradient(grid, state.values)
    grad_u_sq = sum(np.abs(g) ** 2 for g in grads)
    grad_rho = tuple(2.0 * np.real(np.conj(state.values) * g) for g in grads)
    current = tuple(np.imag(np.conj(state.values) * g) for g in grads)
    grad_rho_sq = sum(g * g for g in grad_rho)
    defect_sq = sum((0.5 * gr - jj) ** 2 for gr, jj in zip(grad_rho, current))
    if pot is None:
        pot = potential(params, grid)
    return EnergyBalanceTerms(
        density_gradient=-sigma * float(integrate(grid, rho * grad_rho_sq)),
        weighted_gradient=-(sigma - 6.0 * kappa)
        * float(integrate(grid, rho**2 * grad_u_sq)),
        quartic=-2.0 * sigma * lam * float(integrate(grid, rho**4)),
        current_defect=-6.0 * kappa * float(integrate(grid, rho * defect_sq)),
        tenth_power=-6.0 * sigma * kappa * float(integrate(grid, rho**5)),
        confinement=-POTENTIAL_BALANCE_COEFF
        * sigma * float(integrate(grid, pot * rho**3)),
    )


@dataclass(frozen=True)
class BudgetConstants:
    """Constants of the interpolation split used to close the quintic budget.

    Splitting the quartic production term at weight `epsilon` leaves a
    coercive coefficient c1 = 6 sigma kappa - |lam| sigma epsilon on the
    tenth-power drain and moves c2 = |lam| sigma / epsilon onto the sextic
    norm, whose time integral is controlled by the mass drop.
    """

    epsilon: float
    c1: float
    c2: float

    def budget(self, initial_mass: float, sigma: float) -> float:
        """Upper bound for c2 * integral_0^inf ||u||_6^6 dt."""
        if sigma <= 0.0:
            return 0.0
        return self.c2 * initial_mass / (2.0 * sigma)


def dissipation_budget(params: ModelParams, epsilon: float | None = None) -> BudgetConstants:
    if params.lam == 0.0:
        return BudgetConstants(epsilon=math.inf, c1=6.0 * params.sigma * params.kappa, c2=0.0)
    if epsilon is None:
        epsilon = 3.0 * params.kappa / abs(params.lam)  # half the coercivity margin
    if not 0.0 < epsilon < 6.0 * params.kappa / abs(params.lam):
        raise ValueError(
            f"epsilon = {epsilon} must lie in (0, 6 kappa / |lam|) to keep c1 > 0"
        )
    c1 = 6.0 * params.sigma * params.kappa - abs(params.lam) * params.sigma * epsilon
    c2 = abs(params.lam) * params.sigma / epsilon
    return BudgetConstants(epsilon=epsilon, c1=c1, c2=c2)


def sigma_norm_ceiling(params: ModelParams, initial_mass: float,
                       initial_ekappa: float) -> float:
    """A priori ceiling on ||u||_2 + ||grad u||_2 + ||x u||_2 for all time.

    Valid for p = 5 with sigma > 6 kappa > 0 and every trap frequency
    positive.  Combines the running E_kappa budget with a quadratic-form
    split of the focusing quartic term; infinite when some omega_j = 0
    because then nothing confines ||x u||.
    """
    if params.p != 5.0:
        raise ValueError("the a priori ceiling is derived for p = 5 only")
    if params.kappa <= 0.0 or params.sigma <= 6.0 * params.kappa:
        raise ValueError("need sigma > 6 kappa > 0 for a coercive budget")
    constants = dissipation_budget(params)
    ekappa_sup = initial_ekappa
    if params.lam < 0.0:
        ekappa_sup += constants.budget(initial_mass, params.sigma)
    quad_bound = 2.0 * ekappa_sup
    if params.lam < 0.0:
        quad_bound += params.lam**2 / (4.0 * params.kappa) * initial_mass
    quad_bound = max(quad_bound, 0.0)
    omega_min = min(params.omega)
    if omega_min <= 0.0:
        return math.inf
    grad_part = math.sqrt(quad_bound)
    position_part = math.sqrt(quad_bound) / omega_min
    return math.sqrt(initial_mass) + grad_part + position_part


def space_time_bounds(params: ModelParams, initial_mass: float,
                      initial_ekappa: float) -> dict[str, float]:
    """A priori ceilings for the three space-time dissipation integrals.

    Keys match the trace accumulator columns: `l10_accum` bounds
    integral ||u||_10^10 dt, `grad_weighted_accum` bounds
    integral rho^2 |grad u|^2 dx dt, `potential_weighted_accum` bounds
    integral V rho^3 dx dt.  Requires p = 5 and sigma > 6 kappa > 0.
    """
    if params.p != 5.0:
        raise ValueError("space-time ceilings are derived for p = 5 only")
    if params.kappa <= 0.0 or params.sigma <= 6.0 * params.kappa:
        raise ValueError("need sigma > 6 kappa > 0 for a coercive budget")
    constants = dissipation_budget(params)
    headroom = initial_ekappa + constants.budget(initial_mass, params.sigma)
    if params.lam < 0.0:
        # E_kappa >= -lam^2 M / (16 kappa), so the drop is bounded below.
        headroom += params.lam**2 * initial_mass / (16.0 * params.kappa)
    headroom = max(headroom, 0.0)
    return {
        "l10_accum": headroom / constants.c1 if constants.c1 > 0 else math.inf,
        "grad_weighted_accum": headroom / (params.sigma - 6.0 * params.kappa),
        "potential_weighted_accum": headroom / (2.0 * params.sigma),
    }
