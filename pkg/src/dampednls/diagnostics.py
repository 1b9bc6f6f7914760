"""Trajectory diagnostics: scalar records, running integrals, residual checks.

Every record carries the instantaneous observables plus four accumulated
space-time integrals.  The residual functions compare finite differences of
recorded quantities against the model's exact balance laws and are the
workhorse of the `verify` command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dataclass_fields
from typing import Sequence

import numpy as np

from .fields import WaveFunction, density
from .grid import (
    coordinate_mesh,
    integrate,
    inverse_transform,
    laplacian_symbol,
    radius_squared_mesh,
    spectral_gradient,
    transform,
)
from .model import ModelParams, ekappa_rhs_terms, potential

__all__ = [
    "DiagnosticsRecord",
    "TRACE_COLUMNS",
    "RunningDiagnostics",
    "record",
    "mass_balance_residual",
    "ekappa_balance_residual",
    "continuity_residual",
    "qhd_momentum_residual",
    "DecayReport",
    "decay_report",
]

_FLOOR = 1e-30


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the scalar trace.

    `lp1_norm_pow` is the instantaneous mass-dissipation integrand
    ||u||_{p+1}^{p+1}; the four `*_accum` fields are trapezoidal running
    integrals of, in order, that integrand, ||u||_10^10, the
    gradient-weighted density integral rho^2 |grad u|^2, and the
    confinement-weighted integral V rho^3.
    """

    time: float
    mass: float
    e0: float
    ekappa: float
    ekappa_p: float
    elin: float
    sigma_norm: float
    grad_norm: float
    lp1_norm_pow: float
    lp1_accum: float
    l10_accum: float
    grad_weighted_accum: float
    potential_weighted_accum: float


TRACE_COLUMNS: tuple[str, ...] = tuple(
    f.name for f in dataclass_fields(DiagnosticsRecord)
)


def _observables(params: ModelParams, state: WaveFunction,
                 pot: np.ndarray) -> dict[str, float]:
    """All instantaneous scalars from one gradient evaluation."""
    grid = state.grid
    rho = density(state)
    grads = spectral_gradient(grid, state.values)
    kinetic_density = sum(np.abs(g) ** 2 for g in grads)

    mass_val = float(integrate(grid, rho))
    grad_sq = float(integrate(grid, kinetic_density))
    vpart = float(integrate(grid, pot * rho))
    quartic = float(integrate(grid, rho**2))
    sextic = float(integrate(grid, rho**3))
    lp1pow = float(integrate(grid, rho ** ((params.p + 1.0) / 2.0)))
    l10pow = float(integrate(grid, rho**5))
    potw = float(integrate(grid, pot * rho**3))
    gradw = float(integrate(grid, rho**2 * kinetic_density))
    position_sq = float(integrate(grid, radius_squared_mesh(grid) * rho))

    e0 = 0.5 * grad_sq + vpart + 0.5 * params.lam * quartic
    return {
        "mass": mass_val,
        "e0": e0,
        "ekappa": e0 + params.kappa * sextic,
        "ekappa_p": e0 + params.kappa * lp1pow,
        "elin": 0.5 * grad_sq + vpart,
        "sigma_norm": math.sqrt(mass_val) + math.sqrt(grad_sq) + math.sqrt(position_sq),
        "grad_norm": math.sqrt(grad_sq),
        "lp1_norm_pow": lp1pow,
        "l10_pow": l10pow,
        "potential_weighted": potw,
        "grad_weighted": gradw,
    }


class RunningDiagnostics:
    """Advances the four space-time accumulators along a trajectory.

    The accumulators whose integrands are pointwise powers of the density
    (`lp1`, `l10`, `potential_weighted`) are advanced at every call to
    `advance`, which the propagator makes once per solver step.  The
    gradient-weighted accumulator needs a full spectral gradient, so it
    advances only between records; its composite trapezoidal error is
    second order in the record spacing.

    When the power damping is active the `lp1` accumulator does not use the
    trapezoidal rule.  The damping substep removes mass at exactly twice
    sigma times the running damping-norm integral while every other substep
    conserves mass, so the per-step mass drop divided by 2 sigma IS the
    exact increment of that integral along the computed trajectory.  Using
    it keeps the integrated mass identity tight to round-off even through
    transients that a trapezoid at the step size cannot resolve.
    """

    def __init__(self, params: ModelParams, grid, pot: np.ndarray | None = None):
        self.params = params
        self.pot = potential(params, grid) if pot is None else pot
        self.lp1_accum = 0.0
        self.l10_accum = 0.0
        self.grad_weighted_accum = 0.0
        self.potential_weighted_accum = 0.0
        self._cheap_prev: tuple[float, float, float, float, float] | None = None
        self._grad_prev: tuple[float, float] | None = None

    def _cheap_integrands(self, state: WaveFunction) -> tuple[float, float, float, float]:
        rho = density(state)
        grid = state.grid
        m = float(integrate(grid, rho))
        lp1 = float(integrate(grid, rho ** ((self.params.p + 1.0) / 2.0)))
        l10 = float(integrate(grid, rho**5))
        potw = float(integrate(grid, self.pot * rho**3))
        return m, lp1, l10, potw

    def advance(self, t: float, state: WaveFunction) -> None:
        m, lp1, l10, potw = self._cheap_integrands(state)
        if self._cheap_prev is not None:
            t0, m0, lp1_0, l10_0, potw_0 = self._cheap_prev
            if t < t0:
                raise ValueError(f"records must advance in time ({t} < {t0})")
            half = 0.5 * (t - t0)
            if self.params.sigma > 0.0:
                self.lp1_accum += max(0.0, m0 - m) / (2.0 * self.params.sigma)
            else:
                self.lp1_accum += half * (lp1_0 + lp1)
            self.l10_accum += half * (l10_0 + l10)
            self.potential_weighted_accum += half * (potw_0 + potw)
        self._cheap_prev = (t, m, lp1, l10, potw)

    def record(self, t: float, state: WaveFunction) -> DiagnosticsRecord:
        if self._cheap_prev is None or self._cheap_prev[0] < t:
            self.advance(t, state)
        obs = _observables(self.params, state, self.pot)
        if self._grad_prev is not None:
            t0, gradw_0 = self._grad_prev
            self.grad_weighted_accum += 0.5 * (t - t0) * (gradw_0 + obs["grad_weighted"])
        self._grad_prev = (t, obs["grad_weighted"])
        return DiagnosticsRecord(
            time=t,
            mass=obs["mass"],
            e0=obs["e0"],
            ekappa=obs["ekappa"],
            ekappa_p=obs["ekappa_p"],
            elin=obs["elin"],
            sigma_norm=obs["sigma_norm"],
            grad_norm=obs["grad_norm"],
            lp1_norm_pow=obs["lp1_norm_pow"],
            lp1_accum=self.lp1_accum,
            l10_accum=self.l10_accum,
            grad_weighted_accum=self.grad_weighted_accum,
            potential_weighted_accum=self.potential_weighted_accum,
        )


def record(state: WaveFunction, params: ModelParams, t: float,
           previous: DiagnosticsRecord | None = None,
           previous_state: WaveFunction | None = None,
           pot: np.ndarray | None = None) -> DiagnosticsRecord:
    """Standalone record with trapezoidal accumulation from one predecessor.

    With no predecessor the accumulators start at zero.  Advancing them
    requires the previous state as well, because three of the four integrands
    are not stored in the record itself.
    """
    if pot is None:
        pot = potential(params, state.grid)
    runner = RunningDiagnostics(params, state.grid, pot)
    if previous is not None:
        if previous_state is None:
            raise ValueError(
                "accumulating from a previous record requires previous_state"
            )
        runner.lp1_accum = previous.lp1_accum
        runner.l10_accum = previous.l10_accum
        runner.grad_weighted_accum = previous.grad_weighted_accum
        runner.potential_weighted_accum = previous.potential_weighted_accum
        runner.advance(previous.time, previous_state)
        prev_obs = _observables(params, previous_state, pot)
        runner._grad_prev = (previous.time, prev_obs["grad_weighted"])
    return runner.record(t, state)


def _uniform_spacing(times: Sequence[float]) -> float:
    steps = np.diff(np.asarray(times, dtype=float))
    if steps.size == 0 or np.any(steps <= 0.0):
        raise ValueError("need strictly increasing record times")
    dt = float(np.mean(steps))
    if np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise ValueError("records are not uniformly spaced in time")
    return dt


def mass_balance_residual(records: Sequence[DiagnosticsRecord],
                          params: ModelParams) -> float:
    """Worst normalized defect of dM/dt = -2 sigma ||u||_{p+1}^{p+1}.

    Central differences of the recorded mass against the recorded dissipation
    integrand; the linear-damping variant contributes -2 sigma_linear M.
    Needs at least three uniformly spaced records.  Second-order accurate in
    the record spacing.
    """
    if len(records) < 3:
        raise ValueError("need at least 3 records for a central difference")
    dt = _uniform_spacing([r.time for r in records])
    worst = 0.0
    for i in range(1, len(records) - 1):
        dm = (records[i + 1].mass - records[i - 1].mass) / (2.0 * dt)
        drain = (2.0 * params.sigma * records[i].lp1_norm_pow
                 + 2.0 * params.sigma_linear * records[i].mass)
        defect = abs(dm + drain)
        scale = max(records[i].lp1_norm_pow, _FLOOR)
        worst = max(worst, defect / scale)
    return worst


def ekappa_balance_residual(records: Sequence[DiagnosticsRecord],
                            states: Sequence[WaveFunction | None],
                            params: ModelParams,
                            refine: int = 2) -> float:
    """Worst normalized defect of the six-term E_kappa balance (p = 5).

    `states` aligns with `records`; a residual sample is produced at every
    interior index whose state was retained.  Each defect is normalized by
    the largest magnitude among the six balance terms at that time.  The
    terms are evaluated on a `refine`-times upsampled copy by default
    because their high powers alias on lattices that the state itself does
    not stress.
    """
    if len(records) != len(states):
        raise ValueError("records and states must align")
    if len(records) < 3:
        raise ValueError("need at least 3 records for a central difference")
    dt = _uniform_spacing([r.time for r in records])
    worst = -1.0
    for i in range(1, len(records) - 1):
        if states[i] is None:
            continue
        lhs = (records[i + 1].ekappa - records[i - 1].ekappa) / (2.0 * dt)
        terms = ekappa_rhs_terms(params, states[i], refine=refine)
        magnitudes = [abs(getattr(terms, f.name)) for f in dataclass_fields(terms)]
        scale = max(max(magnitudes), abs(terms.total()), _FLOOR)
        worst = max(worst, abs(lhs - terms.total()) / scale)
    if worst < 0.0:
        raise ValueError("no interior record has a retained state")
    return worst


def _damping_density_rate(params: ModelParams, rho: np.ndarray) -> np.ndarray:
    rate = np.zeros_like(rho)
    if params.sigma > 0.0:
        rate = rate + 2.0 * params.sigma * rho ** ((params.p + 1.0) / 2.0)
    if params.sigma_linear > 0.0:
        rate = rate + 2.0 * params.sigma_linear * rho
    return rate


def continuity_residual(prev_state: WaveFunction, next_state: WaveFunction,
                        params: ModelParams, dt: float) -> float:
    """Normalized defect of d rho/dt + div J = -(damping drain) at a midpoint.

    The time derivative is the centered difference of the two densities; the
    flux and drain are evaluated on the average of the two states' densities
    and currents, giving a second-order consistent residual.  Normalized by
    the largest L^2 norm among the three constituent fields.
    """
    grid = prev_state.grid
    if grid is not next_state.grid and grid.shape != next_state.grid.shape:
        raise ValueError("states live on different grids")
    rho_a, rho_b = density(prev_state), density(next_state)
    d_rho = (rho_b - rho_a) / dt

    def flux_divergence(state: WaveFunction) -> np.ndarray:
        grads = spectral_gradient(grid, state.values)
        out = np.zeros(grid.shape)
        for j, g in enumerate(grads):
            comp = np.imag(np.conj(state.values) * g)
            out = out + np.real(spectral_gradient(grid, comp)[j])
        return out

    div_j = 0.5 * (flux_divergence(prev_state) + flux_divergence(next_state))
    drain = _damping_density_rate(params, 0.5 * (rho_a + rho_b))
    residual = d_rho + div_j + drain

    def l2(fieldvals: np.ndarray) -> float:
        return math.sqrt(float(integrate(grid, fieldvals**2)))

    # the density norm keeps the ratio meaningful for stationary states,
    # where all three balance terms vanish together
    scale = max(l2(d_rho), l2(div_j), l2(drain), l2(0.5 * (rho_a + rho_b)), _FLOOR)
    return l2(residual) / scale


def qhd_momentum_residual(prev_state: WaveFunction, next_state: WaveFunction,
                          params: ModelParams, dt: float,
                          density_floor_factor: float = 1e-10) -> float:
    """Normalized defect of the hydrodynamic momentum balance at a midpoint.

    Checks, component by component,

        dJ/dt + div(J x J / rho) + (lam/2) grad(rho^2) + rho grad V
            = (1/2) rho grad(lap sqrt(rho) / sqrt(rho))
              - 2 sigma rho^((p-1)/2) J.

    The quantum-pressure force is evaluated through the division-free
    identity (1/2) rho grad(lap a / a) = (1/4) grad(lap rho)
    - div(grad a x grad a) with a = sqrt(rho), so no mask is needed there;
    only the convective quotient J x J / rho is floored, where rho falls
    below `density_floor_factor` times its maximum (the flux itself is
    quadratically small in that region).  Normalization is by the largest
    L^2 norm among the individual terms, floored by the density norm so
    stationary states report an absolute defect.
    """
    grid = prev_state.grid
    pot = potential(params, grid)

    def fields_of(state: WaveFunction):
        rho = density(state)
        grads = spectral_gradient(grid, state.values)
        current = tuple(np.imag(np.conj(state.values) * g) for g in grads)
        return rho, current

    rho_a, cur_a = fields_of(prev_state)
    rho_b, cur_b = fields_of(next_state)
    rho_mid = 0.5 * (rho_a + rho_b)
    cur_mid = tuple(0.5 * (a + b) for a, b in zip(cur_a, cur_b))

    floor = density_floor_factor * float(np.max(rho_mid))
    safe = rho_mid > floor
    if not np.any(safe):
        raise ValueError("density mask is empty; state is numerically zero")
    inv_rho = np.where(safe, 1.0 / np.where(safe, rho_mid, 1.0), 0.0)

    sqrt_rho = np.sqrt(rho_mid)
    sqrt_grads = tuple(np.real(g) for g in spectral_gradient(grid, sqrt_rho))
    lap_rho = np.real(
        inverse_transform(grid, -laplacian_symbol(grid) * transform(grid, rho_mid))
    )
    lap_rho_grad = spectral_gradient(grid, lap_rho)

    # grad V is analytic; the parabola is not periodic, so differentiating it
    # spectrally would ring across the whole box
    pot_grad = tuple(
        np.broadcast_to(params.omega[k] ** 2 * coordinate_mesh(grid, k), grid.shape)
        for k in range(grid.dim)
    )
    rho_sq_grad = spectral_gradient(grid, rho_mid**2)
    damp_factor = np.zeros(grid.shape)
    if params.sigma > 0.0:
        damp_factor = damp_factor + 2.0 * params.sigma * rho_mid ** ((params.p - 1.0) / 2.0)
    if params.sigma_linear > 0.0:
        damp_factor = damp_factor + 2.0 * params.sigma_linear

    def l2(vals: np.ndarray) -> float:
        return math.sqrt(float(integrate(grid, vals**2)))

    worst = 0.0
    for k in range(grid.dim):
        dj_dt = (cur_b[k] - cur_a[k]) / dt
        convective = np.zeros(grid.shape)
        stress = np.zeros(grid.shape)
        for j in range(grid.dim):
            flux = cur_mid[j] * cur_mid[k] * inv_rho
            convective = convective + np.real(spectral_gradient(grid, flux)[j])
            stress = stress + np.real(
                spectral_gradient(grid, sqrt_grads[j] * sqrt_grads[k])[j]
            )
        pressure = 0.5 * params.lam * np.real(rho_sq_grad[k])
        confinement = rho_mid * np.real(pot_grad[k])
        bohm = 0.25 * np.real(lap_rho_grad[k]) - stress
        drain = damp_factor * cur_mid[k]
        residual = (dj_dt + convective + pressure + confinement - bohm + drain) * safe
        scale = max(l2(dj_dt), l2(convective), l2(pressure), l2(confinement),
                    l2(bohm), l2(drain), l2(rho_mid), _FLOOR)
        worst = max(worst, l2(residual) / scale)
    return worst


@dataclass(frozen=True)
class DecayReport:
    """Monotonicity audit of the recorded mass."""

    monotone: bool
    max_relative_increase: float
    final_fraction: float
    initial_mass: float
    final_mass: float


def decay_report(records: Sequence[DiagnosticsRecord],
                 slack: float = 1e-12) -> DecayReport:
    """Check the recorded mass never increases (relative slack for round-off).

    `final_fraction` is M(t_end) / M(0), the surviving mass fraction; the
    zero field has nothing to lose, so its fraction is 1 by convention.
    """
    if not records:
        raise ValueError("no records to audit")
    worst = 0.0
    for a, b in zip(records, records[1:]):
        scale = max(abs(a.mass), _FLOOR)
        worst = max(worst, (b.mass - a.mass) / scale)
    m0 = records[0].mass
    m1 = records[-1].mass
    return DecayReport(
        monotone=worst <= slack,
        max_relative_increase=max(worst, 0.0),
        final_fraction=m1 / m0 if m0 > _FLOOR else 1.0,
        initial_mass=m0,
        final_mass=m1,
    )
