"""Config parsing, presets, run directories, verification, and the CLI."""

import warnings

import numpy as np
import pytest

from dampednls import (
    BoundaryMassWarning,
    ConfigError,
    PRESETS,
    TraceFormatError,
    build_initial,
    convergence_study,
    density,
    integrate,
    main,
    make_grid,
    mass,
    parse_config,
    preset_config,
    read_trace,
    render_config,
    resolve_output_root,
    run_scenario,
    verify_run,
    write_snapshot,
)
from dampednls.oracle import hermite_ground_state

MINI = """
[grid]
points = 64
half_width = 8

[model]
lam = -1
sigma = 0.2
p = 5
omega = 1

[stepper]
dt = 4e-3
t_end = 0.1
output_every = 5

[initial]
kind = gaussian
amplitude = 1.5
width = 0.7

[output]
name = mini
"""


class TestParse:
    def test_every_preset_parses(self):
        for name in PRESETS:
            cfg = preset_config(name)
            assert cfg.name == name

    def test_render_round_trips_every_preset(self):
        for name in PRESETS:
            cfg = preset_config(name)
            assert parse_config(render_config(cfg)) == cfg

    def test_render_is_idempotent(self):
        cfg = parse_config(MINI)
        once = render_config(cfg)
        assert render_config(parse_config(once)) == once

    def test_unknown_preset_lists_names(self):
        with pytest.raises(KeyError, match="ground_state_check"):
            preset_config("does_not_exist")

    def test_scalar_broadcast_in_3d(self):
        cfg = preset_config("undamped_collapse")
        assert cfg.half_width == (8.0, 8.0, 8.0)
        assert cfg.initial.width == (0.7, 0.7, 0.7)
        assert cfg.params.omega == (1.0, 1.0, 1.0)

    def test_all_problems_reported_at_once(self):
        bad = MINI.replace("points = 64", "points = 63") \
                  .replace("p = 5", "p = 5") \
                  .replace("dt = 4e-3", "dt = 1") \
                  .replace("width = 0.7", "width = -0.5") + "\n[extra]\nfoo = 1\n"
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        problems = err.value.problems
        joined = "; ".join(problems)
        assert len(problems) >= 4
        assert "power of two" in joined
        assert "dt = 1" in joined and "t_end" in joined
        assert "width" in joined
        assert "unknown section [extra]" in joined

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key 'dx'"):
            parse_config(MINI.replace("dt = 4e-3", "dt = 4e-3\ndx = 1"))

    def test_missing_section_reported(self):
        text = MINI.replace("[model]", "[metal]")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        joined = "; ".join(err.value.problems)
        assert "missing section [model]" in joined
        assert "unknown section [metal]" in joined

    def test_supercritical_power_in_3d_rejected(self):
        cfg_text = PRESETS["undamped_collapse"][1].replace("p = 5", "p = 6")
        with pytest.raises(ConfigError, match="energy-subcritical"):
            parse_config(cfg_text)

    def test_bad_scheme_lists_choices(self):
        text = MINI.replace("dt = 4e-3", "dt = 4e-3\nscheme = rk4")
        with pytest.raises(ConfigError, match="strang"):
            parse_config(text)

    def test_file_kind_requires_path(self):
        text = MINI.replace("kind = gaussian", "kind = file") \
                   .replace("amplitude = 1.5", "") \
                   .replace("width = 0.7", "")
        with pytest.raises(ConfigError, match="requires a path"):
            parse_config(text)

    def test_ground_state_needs_confinement(self):
        text = MINI.replace("kind = gaussian", "kind = ground_state") \
                   .replace("omega = 1", "omega = 0")
        with pytest.raises(ConfigError, match="omega > 0"):
            parse_config(text)

    def test_negative_snapshot_cadence_rejected(self):
        text = MINI.replace("name = mini", "name = mini\nsnapshot_every = -2")
        with pytest.raises(ConfigError, match="snapshot_every"):
            parse_config(text)

    def test_not_ini_at_all(self):
        with pytest.raises(ConfigError, match="not parseable"):
            parse_config("points = 64\n")


class TestBuildInitial:
    def test_gaussian_mass_is_amplitude_squared(self):
        cfg = parse_config(MINI)
        state = build_initial(cfg)
        assert mass(state) == pytest.approx(1.5**2, rel=1e-14)

    def test_momentum_boost_carries_current(self):
        text = MINI.replace("width = 0.7", "width = 0.7\nmomentum = 2.0")
        state = build_initial(parse_config(text))
        grid = state.grid
        from dampednls import spectral_gradient

        grad = spectral_gradient(grid, state.values)[0]
        current = float(integrate(grid, np.imag(np.conj(state.values) * grad)))
        assert current == pytest.approx(2.0 * mass(state), rel=1e-10)

    def test_center_offset_moves_peak(self):
        text = MINI.replace("width = 0.7", "width = 0.7\ncenter = 1.5")
        state = build_initial(parse_config(text))
        peak = state.grid.axes[0][int(np.argmax(density(state)))]
        assert peak == pytest.approx(1.5, abs=state.grid.spacing[0])

    def test_wide_gaussian_warns_about_the_box_edge(self):
        text = MINI.replace("width = 0.7", "width = 4.0")
        with pytest.warns(BoundaryMassWarning):
            build_initial(parse_config(text))

    def test_narrow_gaussian_does_not_warn(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            build_initial(parse_config(MINI))

    def test_ground_state_kind(self, line_grid):
        text = MINI.replace("kind = gaussian", "kind = ground_state") \
                   .replace("points = 64", "points = 256")
        state = build_initial(parse_config(text))
        expected = hermite_ground_state(line_grid, (1.0,))
        assert np.allclose(state.values, expected.values)

    def test_file_kind_round_trip(self, tmp_path, ground_state_1d):
        snap = tmp_path / "init.bin"
        write_snapshot(snap, ground_state_1d, 0.0)
        text = MINI.replace("points = 64", "points = 256") \
                   .replace("kind = gaussian", "kind = file") \
                   .replace("amplitude = 1.5", f"path = {snap}") \
                   .replace("width = 0.7", "")
        state = build_initial(parse_config(text))
        assert np.array_equal(state.values, ground_state_1d.values)

    def test_file_kind_grid_mismatch(self, tmp_path, ground_state_1d):
        snap = tmp_path / "init.bin"
        write_snapshot(snap, ground_state_1d, 0.0)
        text = MINI.replace("kind = gaussian", "kind = file") \
                   .replace("amplitude = 1.5", f"path = {snap}") \
                   .replace("width = 0.7", "")
        with pytest.raises(ConfigError, match="does not\nmatch|does not match"):
            build_initial(parse_config(text))


class TestOutputRoot:
    def test_explicit_wins(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DAMPEDNLS_OUTPUT_ROOT", "/elsewhere")
        assert resolve_output_root(tmp_path) == tmp_path

    def test_environment_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DAMPEDNLS_OUTPUT_ROOT", str(tmp_path))
        assert resolve_output_root() == tmp_path

    def test_default_is_runs(self, monkeypatch):
        monkeypatch.delenv("DAMPEDNLS_OUTPUT_ROOT", raising=False)
        assert str(resolve_output_root()) == "runs"


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    traj, run_dir = run_scenario(preset_config("ground_state_check"), root)
    return traj, run_dir


class TestRunScenario:
    def test_directory_layout(self, finished_run):
        traj, run_dir = finished_run
        assert run_dir.name == "ground_state_check"
        assert (run_dir / "config.ini").exists()
        assert (run_dir / "trace.csv").exists()
        assert (run_dir / "snapshot_final.bin").exists()
        # 101 records at snapshot cadence 10 -> indices 0, 10, ..., 100
        snaps = sorted(run_dir.glob("snapshot_[0-9]*.bin"))
        assert len(snaps) == 11
        assert snaps[0].name == "snapshot_000000.bin"

    def test_config_round_trips_from_disk(self, finished_run):
        _, run_dir = finished_run
        cfg = parse_config((run_dir / "config.ini").read_text())
        assert cfg == preset_config("ground_state_check")

    def test_trace_matches_records(self, finished_run):
        traj, run_dir = finished_run
        loaded = read_trace(run_dir / "trace.csv")
        assert loaded == traj.records

    def test_stale_outputs_removed_on_rerun(self, tmp_path):
        cfg = parse_config(MINI)
        _, run_dir = run_scenario(cfg, tmp_path)
        fake_snap = run_dir / "snapshot_999999.bin"
        fake_check = run_dir / "transform_check.txt"
        fake_snap.write_bytes(b"junk")
        fake_check.write_text("junk")
        run_scenario(cfg, tmp_path)
        assert not fake_snap.exists()
        assert not fake_check.exists()

    def test_deterministic_trace_bytes(self, tmp_path):
        cfg = parse_config(MINI)
        _, first = run_scenario(cfg, tmp_path / "a")
        _, second = run_scenario(cfg, tmp_path / "b")
        assert (first / "trace.csv").read_bytes() == (second / "trace.csv").read_bytes()


class TestVerifyRun:
    def test_ground_state_run_passes_all_checks(self, tmp_path):
        _, run_dir = run_scenario(preset_config("ground_state_check"), tmp_path)
        report = verify_run(run_dir)
        assert report.rows, "no checks executed"
        assert report.all_passed, report.format_table()
        # cubic model: the six-term balance applies only at p = 5
        assert any("p = 5" in s or "p=5" in s or "quintic" in s
                   for s in report.skipped) or report.skipped

    def test_table_formatting(self, tmp_path):
        _, run_dir = run_scenario(preset_config("ground_state_check"), tmp_path)
        table = verify_run(run_dir).format_table()
        assert "pass" in table
        assert "check" in table.splitlines()[0]

    def test_missing_config_rejected(self, tmp_path):
        with pytest.raises(TraceFormatError, match="missing"):
            verify_run(tmp_path)


class TestConvergenceStudy:
    def test_orders_near_two(self):
        study = convergence_study(parse_config(MINI), [4e-3, 2e-3, 1e-3, 5e-4])
        assert study.dts == (4e-3, 2e-3, 1e-3)
        assert study.reference_dt == 5e-4
        assert len(study.errors) == 3
        for order in study.orders:
            assert order is not None
            assert 1.8 <= order <= 2.2

    def test_needs_three_dts(self):
        with pytest.raises(ValueError, match="3 dt"):
            convergence_study(parse_config(MINI), [1e-3, 5e-4])

    def test_dts_must_halve(self):
        with pytest.raises(ValueError, match="halve"):
            convergence_study(parse_config(MINI), [4e-3, 2e-3, 1.5e-3])

    def test_early_stop_rejected(self):
        text = MINI.replace("output_every = 5",
                            "output_every = 5\namplitude_threshold = 0.5")
        with pytest.raises(RuntimeError, match="ended early"):
            convergence_study(parse_config(text), [4e-3, 2e-3, 1e-3])

    def test_table_contains_reference(self):
        study = convergence_study(parse_config(MINI), [4e-3, 2e-3, 1e-3, 5e-4])
        assert "reference: Richardson pair" in study.format_table()


class TestCli:
    def test_list_presets(self, capsys):
        assert main(["list-presets"]) == 0
        out = capsys.readouterr().out
        for name in PRESETS:
            assert name in out

    def test_run_and_verify(self, tmp_path, capsys):
        assert main(["run", "ground_state_check",
                     "--output-root", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "completed" in out
        run_dir = tmp_path / "ground_state_check"
        assert main(["verify", str(run_dir)]) == 0
        assert "all checks passed" in capsys.readouterr().out

    def test_run_config_file(self, tmp_path, capsys):
        ini = tmp_path / "mini.ini"
        ini.write_text(MINI)
        assert main(["run", str(ini), "--output-root", str(tmp_path)]) == 0
        assert (tmp_path / "mini" / "trace.csv").exists()

    def test_unknown_scenario_exits_2(self, capsys):
        assert main(["run", "no_such_thing"]) == 2
        err = capsys.readouterr().err
        assert "neither a preset" in err
        assert "ground_state_check" in err

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        ini = tmp_path / "bad.ini"
        ini.write_text(MINI.replace("points = 64", "points = 63"))
        assert main(["run", str(ini)]) == 2
        assert "power of two" in capsys.readouterr().err

    def test_verify_missing_dir_exits_2(self, tmp_path, capsys):
        assert main(["verify", str(tmp_path / "nope")]) == 2

    def test_convergence_command(self, tmp_path, capsys):
        ini = tmp_path / "mini.ini"
        ini.write_text(MINI)
        assert main(["convergence", str(ini),
                     "--dts", "4e-3", "2e-3", "1e-3"]) == 0
        assert "order" in capsys.readouterr().out

    def test_convergence_bad_dts_exits_2(self, tmp_path, capsys):
        ini = tmp_path / "mini.ini"
        ini.write_text(MINI)
        assert main(["convergence", str(ini), "--dts", "4e-3", "3e-3", "2e-3"]) == 2
        assert "halve" in capsys.readouterr().err
