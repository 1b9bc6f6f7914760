"""Scenario configs, named presets, batch execution, and run verification.

Configs are INI text with sections grid/model/stepper/initial/output.
Parsing is strict: unknown sections or keys are rejected, and every
violated constraint is reported in one itemized error rather than stopping
at the first.  A run directory holds the resolved config, the CSV trace,
and binary snapshots; `verify_run` replays the balance checks against
those files.
"""

from __future__ import annotations

import configparser
import math
import os
import textwrap
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as dio
from .diagnostics import (
    DiagnosticsRecord,
    continuity_residual,
    decay_report,
    ekappa_balance_residual,
    mass_balance_residual,
    qhd_momentum_residual,
)
from .fields import WaveFunction, mass
from .grid import Grid, boundary_density_ratio, coordinate_mesh, integrate, make_grid
from .model import ModelParams, dissipation_budget, space_time_bounds
from .oracle import hermite_ground_state
from .propagator import (
    Scheme,
    StatusKind,
    StepperConfig,
    Trajectory,
    evolve,
    linear_damping_transform_check,
)

__all__ = [
    "ConfigError",
    "BoundaryMassWarning",
    "InitialSpec",
    "ScenarioConfig",
    "parse_config",
    "render_config",
    "build_initial",
    "PRESETS",
    "preset_config",
    "run_scenario",
    "run_preset",
    "CheckRow",
    "VerificationReport",
    "verify_run",
    "ConvergenceStudy",
    "convergence_study",
    "resolve_output_root",
]

OUTPUT_ROOT_ENV = "DAMPEDNLS_OUTPUT_ROOT"

# Verification tolerances, calibrated on the bundled presets.  The balance
# residuals are second order in the relevant sampling interval, so each
# tolerance is scaled up quadratically when records or snapshots are spaced
# more coarsely than the calibration cadence.
MASS_BALANCE_TOL = 1e-3          # at record spacing <= 1e-2
MASS_BALANCE_REF_SPACING = 1e-2
EKAPPA_BALANCE_TOL = 1e-2        # at record spacing <= 1e-3
EKAPPA_BALANCE_REF_SPACING = 1e-3
CONTINUITY_TOL = 1e-2            # at snapshot spacing <= 1e-2
CONTINUITY_REF_SPACING = 1e-2
QHD_TOL = 1e-2
QHD_REF_SPACING = 1e-2
BUDGET_RELATIVE_SLACK = 1e-6
MONOTONE_SLACK = 1e-12


class ConfigError(ValueError):
    """Carries every configuration problem found, not just the first."""

    def __init__(self, problems: list[str]) -> None:
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


class BoundaryMassWarning(UserWarning):
    """Initial state carries visible density at the box edge."""


@dataclass(frozen=True)
class InitialSpec:
    kind: str  # gaussian | ground_state | file
    amplitude: float = 1.0
    width: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    momentum: tuple[float, ...] = ()
    path: str = ""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    points: tuple[int, ...]
    half_width: tuple[float, ...]
    params: ModelParams
    stepper: StepperConfig
    initial: InitialSpec
    snapshot_every: int = 0  # records between retained snapshots; 0 = none
    csv_name: str = "trace.csv"

    @property
    def dim(self) -> int:
        return len(self.points)


_SECTION_KEYS = {
    "grid": {"points", "half_width"},
    "model": {"lam", "sigma", "p", "omega", "kappa", "sigma_linear"},
    "stepper": {"dt", "t_end", "scheme", "output_every",
                "amplitude_threshold", "gradient_threshold"},
    "initial": {"kind", "amplitude", "width", "center", "momentum", "path"},
    "output": {"name", "snapshot_every", "csv"},
}


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.replace(",", " ").split())


def parse_config(text: str) -> ScenarioConfig:
    """Parse and fully validate an INI scenario description.

    Raises ConfigError listing every unknown key, missing requirement, and
    violated model/stepper invariant found.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    problems: list[str] = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"not parseable as INI: {exc}"]) from exc

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            problems.append(f"unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in _SECTION_KEYS[section]:
                problems.append(f"unknown key '{key}' in [{section}]")
    for required in ("grid", "model", "stepper", "initial"):
        if not parser.has_section(required):
            problems.append(f"missing section [{required}]")

    def take(section: str, key: str, convert, default=None, required=False):
        if not parser.has_section(section) or key not in parser[section]:
            if required:
                problems.append(f"missing key '{key}' in [{section}]")
            return default
        raw = parser[section][key].strip()
        if raw == "":
            return default
        try:
            return convert(raw)
        except ValueError:
            problems.append(f"[{section}] {key} = '{raw}' is not valid")
            return default

    points = take("grid", "points", _ints, required=True)
    half_width = take("grid", "half_width", _floats, required=True)
    dim = len(points) if points else 0
    if points is not None and half_width is not None:
        if len(half_width) == 1 and dim > 1:
            half_width = half_width * dim
        if len(half_width) != dim:
            problems.append(
                f"[grid] half_width has {len(half_width)} entries for {dim} axes"
            )

    lam = take("model", "lam", float, required=True)
    sigma = take("model", "sigma", float, required=True)
    p = take("model", "p", float, required=True)
    omega = take("model", "omega", _floats, required=True)
    kappa = take("model", "kappa", float)
    sigma_linear = take("model", "sigma_linear", float, default=0.0)
    if omega is not None and dim and len(omega) == 1 and dim > 1:
        omega = omega * dim
    if omega is not None and dim and len(omega) != dim:
        problems.append(f"[model] omega has {len(omega)} entries for {dim} axes")

    dt = take("stepper", "dt", float, required=True)
    t_end = take("stepper", "t_end", float, required=True)
    scheme_raw = take("stepper", "scheme", str, default="strang")
    output_every = take("stepper", "output_every", int, default=1)
    amp_thr = take("stepper", "amplitude_threshold", float, default=1e6)
    grad_thr = take("stepper", "gradient_threshold", float, default=1e6)
    scheme = None
    if scheme_raw is not None:
        try:
            scheme = Scheme(scheme_raw.lower())
        except ValueError:
            problems.append(
                f"[stepper] scheme = '{scheme_raw}' is not one of: "
                + ", ".join(s.value for s in Scheme)
            )

    kind = take("initial", "kind", str, required=True)
    amplitude = take("initial", "amplitude", float, default=1.0)
    width = take("initial", "width", _floats, default=())
    center = take("initial", "center", _floats, default=())
    momentum = take("initial", "momentum", _floats, default=())
    init_path = take("initial", "path", str, default="")

    name = take("output", "name", str, default="scenario")
    snapshot_every = take("output", "snapshot_every", int, default=0)
    csv_name = take("output", "csv", str, default="trace.csv")

    if points is not None:
        if dim not in (1, 2, 3):
            problems.append(f"[grid] points has {dim} axes, expected 1 to 3")
        for j, n in enumerate(points):
            if n < 8 or (n & (n - 1)) != 0:
                problems.append(
                    f"[grid] points[{j}] = {n}: must be a power of two >= 8"
                )
    if half_width is not None:
        for j, L in enumerate(half_width):
            if not (L > 0 and math.isfinite(L)):
                problems.append(f"[grid] half_width[{j}] = {L}: must be positive")

    params = None
    if None not in (lam, sigma, p) and omega is not None and len(omega) == dim:
        try:
            params = ModelParams(lam=lam, sigma=sigma, p=p, omega=omega,
                                 kappa=kappa, sigma_linear=sigma_linear or 0.0)
        except ValueError as exc:
            problems.extend(f"[model] {msg}" for msg in str(exc).split("; "))

    stepper = None
    if None not in (dt, t_end) and scheme is not None:
        try:
            stepper = StepperConfig(
                dt=dt, t_end=t_end, scheme=scheme,
                amplitude_threshold=amp_thr, gradient_threshold=grad_thr,
                output_every=output_every,
            )
        except ValueError as exc:
            problems.extend(f"[stepper] {msg}" for msg in str(exc).split("; "))

    initial = None
    if kind is not None:
        kind = kind.lower()
        if kind not in ("gaussian", "ground_state", "file"):
            problems.append(
                f"[initial] kind = '{kind}' is not one of: gaussian, ground_state, file"
            )
        else:
            def per_axis(values: tuple[float, ...], label: str,
                         default: float) -> tuple[float, ...]:
                if not values:
                    return (default,) * dim
                if len(values) == 1 and dim > 1:
                    return values * dim
                if dim and len(values) != dim:
                    problems.append(
                        f"[initial] {label} has {len(values)} entries for {dim} axes"
                    )
                return values

            if kind == "gaussian":
                width = per_axis(width, "width", 1.0)
                center = per_axis(center, "center", 0.0)
                momentum = per_axis(momentum, "momentum", 0.0)
                if any(w <= 0 for w in width):
                    problems.append(f"[initial] width = {width}: must be positive")
                if amplitude is None or amplitude <= 0:
                    problems.append("[initial] amplitude must be positive")
            elif kind == "ground_state":
                if omega is not None and any(w <= 0 for w in omega):
                    problems.append(
                        "[initial] kind = ground_state needs every omega > 0"
                    )
            elif kind == "file" and not init_path:
                problems.append("[initial] kind = file requires a path")
            initial = InitialSpec(
                kind=kind, amplitude=amplitude or 1.0, width=width,
                center=center, momentum=momentum, path=init_path,
            )
    if snapshot_every is not None and snapshot_every < 0:
        problems.append(f"[output] snapshot_every = {snapshot_every}: must be >= 0")

    if problems:
        raise ConfigError(problems)
    assert points is not None and half_width is not None
    assert params is not None and stepper is not None and initial is not None
    return ScenarioConfig(
        name=name or "scenario", points=points, half_width=half_width,
        params=params, stepper=stepper, initial=initial,
        snapshot_every=snapshot_every or 0, csv_name=csv_name or "trace.csv",
    )


def _fmt(x: float) -> str:
    return format(x, ".17g")


def render_config(cfg: ScenarioConfig) -> str:
    """Canonical INI text for a config; parse_config(render_config(c)) == c."""
    lines = [
        "[grid]",
        "points = " + " ".join(str(n) for n in cfg.points),
        "half_width = " + " ".join(_fmt(L) for L in cfg.half_width),
        "",
        "[model]",
        f"lam = {_fmt(cfg.params.lam)}",
        f"sigma = {_fmt(cfg.params.sigma)}",
        f"p = {_fmt(cfg.params.p)}",
        "omega = " + " ".join(_fmt(w) for w in cfg.params.omega),
        f"kappa = {_fmt(cfg.params.kappa)}",
        f"sigma_linear = {_fmt(cfg.params.sigma_linear)}",
        "",
        "[stepper]",
        f"dt = {_fmt(cfg.stepper.dt)}",
        f"t_end = {_fmt(cfg.stepper.t_end)}",
        f"scheme = {cfg.stepper.scheme.value}",
        f"output_every = {cfg.stepper.output_every}",
        f"amplitude_threshold = {_fmt(cfg.stepper.amplitude_threshold)}",
        f"gradient_threshold = {_fmt(cfg.stepper.gradient_threshold)}",
        "",
        "[initial]",
        f"kind = {cfg.initial.kind}",
    ]
    if cfg.initial.kind == "gaussian":
        lines += [
            f"amplitude = {_fmt(cfg.initial.amplitude)}",
            "width = " + " ".join(_fmt(w) for w in cfg.initial.width),
            "center = " + " ".join(_fmt(c) for c in cfg.initial.center),
            "momentum = " + " ".join(_fmt(k) for k in cfg.initial.momentum),
        ]
    elif cfg.initial.kind == "file":
        lines.append(f"path = {cfg.initial.path}")
    lines += [
        "",
        "[output]",
        f"name = {cfg.name}",
        f"snapshot_every = {cfg.snapshot_every}",
        f"csv = {cfg.csv_name}",
        "",
    ]
    return "\n".join(lines)


def build_initial(cfg: ScenarioConfig) -> WaveFunction:
    """Construct the initial state and warn if it touches the box edge.

    Gaussians are analytically normalized to unit mass, scaled by the
    requested amplitude, then renormalized on the grid so the discrete mass
    equals amplitude^2 exactly; the mass-derived bounds then carry no
    initial quadrature error.
    """
    grid = make_grid(cfg.points, cfg.half_width)
    spec = cfg.initial
    if spec.kind == "ground_state":
        state = hermite_ground_state(grid, cfg.params.omega)
    elif spec.kind == "file":
        state, _ = dio.read_snapshot(spec.path)
        if state.grid.points != grid.points or state.grid.half_width != grid.half_width:
            raise ConfigError([
                f"snapshot grid {state.grid.points}/{state.grid.half_width} does not "
                f"match configured grid {grid.points}/{grid.half_width}"
            ])
    else:
        vals = np.ones(grid.shape, dtype=np.complex128)
        for j in range(grid.dim):
            x = coordinate_mesh(grid, j)
            w, c, k = spec.width[j], spec.center[j], spec.momentum[j]
            vals = vals * (np.pi * w**2) ** -0.25 * np.exp(
                -((x - c) ** 2) / (2.0 * w**2) + 1j * k * x
            )
        measured = float(integrate(grid, np.abs(vals) ** 2))
        vals *= spec.amplitude / math.sqrt(measured)
        state = WaveFunction(grid, vals)
    ratio = boundary_density_ratio(grid, np.abs(state.values) ** 2)
    if ratio > 1e-12:
        warnings.warn(
            f"initial density at the box edge is {ratio:.2e} of its peak; "
            "periodic truncation may contaminate the run",
            BoundaryMassWarning,
            stacklevel=2,
        )
    return state


# ---------------------------------------------------------------------------
# Presets


def _preset(description: str, text: str) -> tuple[str, str]:
    return description, textwrap.dedent(text).strip() + "\n"


PRESETS: dict[str, tuple[str, str]] = {
    "ground_state_check": _preset(
        "linear trap eigenstate held for one period (regression of phase accuracy)",
        """
        [grid]
        points = 256
        half_width = 8

        [model]
        lam = 0
        sigma = 0
        p = 3
        omega = 1

        [stepper]
        dt = 1e-3
        t_end = 1
        output_every = 10

        [initial]
        kind = ground_state

        [output]
        name = ground_state_check
        snapshot_every = 10
        """,
    ),
    "undamped_collapse": _preset(
        "focusing negative-energy Gaussian in 3d with no damping; stops at blow-up",
        """
        [grid]
        points = 64 64 64
        half_width = 8

        [model]
        lam = -1
        sigma = 0
        p = 5
        omega = 1 1 1

        [stepper]
        dt = 1e-3
        t_end = 5
        output_every = 10
        amplitude_threshold = 15
        gradient_threshold = 1000

        [initial]
        kind = gaussian
        amplitude = 5.0
        width = 0.7

        [output]
        name = undamped_collapse
        snapshot_every = 0
        """,
    ),
    "collapse_recombination": _preset(
        "the same negative-energy Gaussian with quintic damping; runs to t_end",
        """
        [grid]
        points = 64 64 64
        half_width = 8

        [model]
        lam = -1
        sigma = 0.1
        p = 5
        omega = 1 1 1

        [stepper]
        dt = 1e-3
        t_end = 5
        output_every = 2
        amplitude_threshold = 15
        gradient_threshold = 1000

        [initial]
        kind = gaussian
        amplitude = 5.0
        width = 0.7

        [output]
        name = collapse_recombination
        snapshot_every = 250
        """,
    ),
    "collapse_recombination_1d": _preset(
        "one-dimensional damped focusing run held long enough to watch mass decay",
        """
        [grid]
        points = 256
        half_width = 12

        [model]
        lam = -1
        sigma = 0.1
        p = 5
        omega = 1

        [stepper]
        dt = 1e-3
        t_end = 50
        output_every = 50

        [initial]
        kind = gaussian
        amplitude = 2.0
        width = 0.5

        [output]
        name = collapse_recombination_1d
        snapshot_every = 100
        """,
    ),
    "cubic_balance": _preset(
        "cubic damping exactly as strong as the cubic focusing (1d)",
        """
        [grid]
        points = 256
        half_width = 12

        [model]
        lam = -1
        sigma = 1
        p = 3
        omega = 1

        [stepper]
        dt = 1e-3
        t_end = 10
        output_every = 20

        [initial]
        kind = gaussian
        amplitude = 1.5
        width = 0.8

        [output]
        name = cubic_balance
        snapshot_every = 50
        """,
    ),
    "cubic_balance_2d": _preset(
        "cubic damping exactly as strong as the cubic focusing (2d)",
        """
        [grid]
        points = 128 128
        half_width = 10 10

        [model]
        lam = -1
        sigma = 1
        p = 3
        omega = 1 1

        [stepper]
        dt = 1e-3
        t_end = 10
        output_every = 20

        [initial]
        kind = gaussian
        amplitude = 1.5
        width = 0.8

        [output]
        name = cubic_balance_2d
        snapshot_every = 100
        """,
    ),
    "linear_damping_equiv": _preset(
        "linear damping run plus its phase-transform twin; writes their distance",
        """
        [grid]
        points = 256
        half_width = 8

        [model]
        lam = 1
        sigma = 0
        p = 3
        omega = 1
        sigma_linear = 0.3

        [stepper]
        dt = 1e-4
        t_end = 1
        output_every = 100

        [initial]
        kind = ground_state

        [output]
        name = linear_damping_equiv
        snapshot_every = 0
        """,
    ),
}


def preset_config(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset '{name}'; available: {known}")
    return parse_config(PRESETS[name][1])


def resolve_output_root(explicit: str | Path | None = None) -> Path:
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(env) if env else Path("runs")


def run_scenario(cfg: ScenarioConfig,
                 output_root: str | Path | None = None) -> tuple[Trajectory, Path]:
    """Execute a scenario, writing config, trace and snapshots to its directory.

    The directory is `<output-root>/<name>` and is overwritten on rerun so
    repeated identical runs can be compared byte for byte.  A config with
    `sigma_linear > 0` additionally writes `transform_check.txt` holding the
    L^2 distance between the damped run and its phase-transformed twin.
    """
    run_dir = resolve_output_root(output_root) / cfg.name
    run_dir.mkdir(parents=True, exist_ok=True)
    for stale in run_dir.glob("snapshot_*.bin"):
        stale.unlink()
    for stale in (run_dir / cfg.csv_name, run_dir / "transform_check.txt"):
        if stale.exists():
            stale.unlink()
    (run_dir / "config.ini").write_text(render_config(cfg), encoding="utf-8")

    initial = build_initial(cfg)
    counter = {"index": 0}

    def hook(t: float, state: WaveFunction, rec: DiagnosticsRecord) -> None:
        index = counter["index"]
        if cfg.snapshot_every and index % cfg.snapshot_every == 0:
            dio.write_snapshot(run_dir / f"snapshot_{index:06d}.bin", state, t)
        counter["index"] = index + 1

    traj = evolve(initial, cfg.params, cfg.stepper, hook=hook)
    dio.write_trace(run_dir / cfg.csv_name, traj.records)
    if traj.final_state is not None:
        dio.write_snapshot(run_dir / "snapshot_final.bin", traj.final_state,
                           traj.times[-1] if traj.times else 0.0)
    if cfg.params.sigma_linear > 0.0:
        distance = linear_damping_transform_check(initial, cfg.params, cfg.stepper)
        (run_dir / "transform_check.txt").write_text(
            f"l2_distance = {_fmt(distance)}\n", encoding="utf-8"
        )
    return traj, run_dir


def run_preset(name: str,
               output_root: str | Path | None = None) -> tuple[Trajectory, Path]:
    return run_scenario(preset_config(name), output_root)


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class CheckRow:
    name: str
    value: float
    bound: float
    passed: bool
    note: str = ""


@dataclass
class VerificationReport:
    rows: list[CheckRow] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def format_table(self) -> str:
        lines = [f"{'check':38s} {'measured':>13s} {'bound':>13s}  result"]
        for row in self.rows:
            verdict = "pass" if row.passed else "FAIL"
            note = f"  ({row.note})" if row.note else ""
            lines.append(
                f"{row.name:38s} {row.value:13.6g} {row.bound:13.6g}  {verdict}{note}"
            )
        for name in self.skipped:
            lines.append(f"skipped: {name}")
        return "\n".join(lines)


def _quadratic_tolerance(base: float, spacing: float, ref_spacing: float) -> float:
    return base * max(1.0, (spacing / ref_spacing) ** 2)


def _load_states(run_dir: Path, n_records: int) -> list[WaveFunction | None]:
    states: list[WaveFunction | None] = [None] * n_records
    for path in sorted(run_dir.glob("snapshot_[0-9]*.bin")):
        index = int(path.stem.split("_")[1])
        if 0 <= index < n_records:
            states[index], _ = dio.read_snapshot(path)
    return states


def verify_run(run_dir: str | Path) -> VerificationReport:
    """Re-check every applicable balance law from a run directory's files.

    Emits one row per executed check (measured value, tolerance, verdict) and
    lists checks that were skipped because the run lacks the needed data
    (e.g. no retained snapshots, or p != 5).
    """
    run_dir = Path(run_dir)
    problems = []
    config_path = run_dir / "config.ini"
    if not config_path.exists():
        problems.append(f"missing {config_path}")
        raise dio.TraceFormatError(problems)
    cfg = parse_config(config_path.read_text(encoding="utf-8"))
    records = dio.read_trace(run_dir / cfg.csv_name)
    if not records:
        raise dio.TraceFormatError([f"{run_dir / cfg.csv_name}: no records"])
    params = cfg.params
    report = VerificationReport()

    decay = decay_report(records, slack=MONOTONE_SLACK)
    report.rows.append(CheckRow(
        name="mass monotone (max relative rise)",
        value=decay.max_relative_increase,
        bound=MONOTONE_SLACK,
        passed=decay.monotone,
        note=f"final fraction {decay.final_fraction:.6g}",
    ))

    spacing = records[1].time - records[0].time if len(records) > 1 else 0.0
    if len(records) >= 3:
        tol = _quadratic_tolerance(MASS_BALANCE_TOL, spacing, MASS_BALANCE_REF_SPACING)
        try:
            value = mass_balance_residual(records, params)
            report.rows.append(CheckRow(
                "mass balance residual", value, tol, value <= tol,
                note=f"record spacing {spacing:.3g}",
            ))
        except ValueError as exc:
            report.skipped.append(f"mass balance residual: {exc}")
    else:
        report.skipped.append("mass balance residual: fewer than 3 records")

    m0 = records[0].mass
    if params.sigma > 0.0:
        drop_budget = (m0 - records[-1].mass) / (2.0 * params.sigma)
        measured = records[-1].lp1_accum
        bound = drop_budget * (1.0 + BUDGET_RELATIVE_SLACK)
        report.rows.append(CheckRow(
            "damping-norm budget vs mass drop", measured, bound, measured <= bound,
        ))
        ceiling = m0 / (2.0 * params.sigma) * (1.0 + BUDGET_RELATIVE_SLACK)
        report.rows.append(CheckRow(
            "damping-norm budget vs initial mass", measured, ceiling,
            measured <= ceiling,
        ))

    coercive = (params.p == 5.0 and params.kappa > 0.0
                and 6.0 * params.kappa < params.sigma)
    if coercive and params.lam != 0.0:
        constants = dissipation_budget(params)
        allowance = constants.c2
        worst_excess = -math.inf
        for rec in records:
            ceiling = records[0].ekappa + allowance * rec.lp1_accum
            scale = max(abs(records[0].ekappa), abs(ceiling), 1.0)
            worst_excess = max(worst_excess, (rec.ekappa - ceiling) / scale)
        report.rows.append(CheckRow(
            "running energy within dissipation budget",
            worst_excess, BUDGET_RELATIVE_SLACK, worst_excess <= BUDGET_RELATIVE_SLACK,
            note="relative excess over budgeted ceiling",
        ))
        bounds = space_time_bounds(params, m0, records[0].ekappa)
        for column, bound in bounds.items():
            measured = getattr(records[-1], column)
            limit = bound * (1.0 + BUDGET_RELATIVE_SLACK)
            report.rows.append(CheckRow(
                f"space-time ceiling: {column}", measured, limit,
                measured <= limit,
            ))
    elif params.p == 5.0:
        report.skipped.append(
            "energy budget checks: need 0 < 6 kappa < sigma and lam != 0"
        )

    states = _load_states(run_dir, len(records))
    have_states = [i for i, s in enumerate(states) if s is not None]
    if params.p == 5.0 and len(records) >= 3 and any(
        0 < i < len(records) - 1 for i in have_states
    ):
        tol = _quadratic_tolerance(EKAPPA_BALANCE_TOL, spacing,
                                   EKAPPA_BALANCE_REF_SPACING)
        value = ekappa_balance_residual(records, states, params)
        report.rows.append(CheckRow(
            "energy balance residual", value, tol, value <= tol,
            note=f"record spacing {spacing:.3g}",
        ))
    else:
        report.skipped.append(
            "energy balance residual: needs p = 5 and interior snapshots"
        )

    if len(have_states) >= 2:
        pairs = list(zip(have_states, have_states[1:]))
        probe = [pairs[0], pairs[len(pairs) // 2], pairs[-1]]
        worst_c = 0.0
        worst_q = 0.0
        snap_spacing = 0.0
        for i, j in dict.fromkeys(probe):
            dt_pair = records[j].time - records[i].time
            snap_spacing = max(snap_spacing, dt_pair)
            worst_c = max(worst_c, continuity_residual(
                states[i], states[j], params, dt_pair))
            worst_q = max(worst_q, qhd_momentum_residual(
                states[i], states[j], params, dt_pair))
        tol_c = _quadratic_tolerance(CONTINUITY_TOL, snap_spacing,
                                     CONTINUITY_REF_SPACING)
        report.rows.append(CheckRow(
            "continuity residual", worst_c, tol_c, worst_c <= tol_c,
            note=f"snapshot spacing {snap_spacing:.3g}",
        ))
        tol_q = _quadratic_tolerance(QHD_TOL, snap_spacing, QHD_REF_SPACING)
        report.rows.append(CheckRow(
            "momentum balance residual", worst_q, tol_q, worst_q <= tol_q,
            note=f"snapshot spacing {snap_spacing:.3g}",
        ))
    else:
        report.skipped.append("continuity/momentum residuals: need >= 2 snapshots")
    return report


# ---------------------------------------------------------------------------
# Convergence


@dataclass(frozen=True)
class ConvergenceStudy:
    dts: tuple[float, ...]          # the dts with an independent error measurement
    errors: tuple[float, ...]
    orders: tuple[float | None, ...]
    reference_dt: float
    plateau: float = 1e-11

    def format_table(self) -> str:
        lines = [f"{'dt':>12s} {'L2 error':>13s} {'order':>7s}"]
        for i, (dt, err) in enumerate(zip(self.dts, self.errors)):
            if i == 0:
                order = ""
            else:
                order = "-" if self.orders[i - 1] is None else f"{self.orders[i - 1]:.3f}"
            lines.append(f"{dt:12.6g} {err:13.6g} {order:>7s}")
        lines.append(f"reference: Richardson pair at dt = {self.reference_dt:.6g}")
        return "\n".join(lines)


def convergence_study(cfg: ScenarioConfig, dts: list[float]) -> ConvergenceStudy:
    """Self-convergence of the stepper under halving time steps.

    Runs the scenario at each dt and extrapolates a reference from the two
    finest runs (second-order Richardson).  The finest run is consumed by the
    reference and gets no error row of its own; every coarser run is compared
    against the reference, and consecutive observed orders are reported.
    Orders are not assigned below the round-off plateau (errors under 1e-11),
    where the measurement is meaningless.
    """
    if len(dts) < 3:
        raise ValueError("need at least 3 dt values")
    for a, b in zip(dts, dts[1:]):
        if not math.isclose(b, a / 2.0, rel_tol=1e-9):
            raise ValueError(f"dt list must halve at every step; {b} != {a}/2")
    initial = build_initial(cfg)
    finals = []
    for dt in dts:
        stepper = replace(cfg.stepper, dt=dt)
        traj = evolve(initial, cfg.params, stepper)
        if not traj.status.completed:
            raise RuntimeError(
                f"run at dt = {dt} ended early ({traj.status.kind.value}); "
                "convergence study needs completed runs"
            )
        finals.append(traj.final_state)
    grid = initial.grid
    reference = (4.0 * finals[-1].values - finals[-2].values) / 3.0
    errors = []
    for final in finals[:-1]:
        diff = np.abs(final.values - reference) ** 2
        errors.append(math.sqrt(float(integrate(grid, diff))))
    plateau = 1e-11
    orders: list[float | None] = []
    for e_coarse, e_fine in zip(errors, errors[1:]):
        if e_coarse < plateau or e_fine < plateau:
            orders.append(None)
        else:
            orders.append(math.log2(e_coarse / e_fine))
    return ConvergenceStudy(
        dts=tuple(dts[:-1]), errors=tuple(errors), orders=tuple(orders),
        reference_dt=dts[-1], plateau=plateau,
    )
