from pathlib import Path

import numpy as np
import pytest
import toml

from revep.application import cmd_compare_kalamiza, cmd_kinetics, cmd_run, cmd_sweep
from revep.config import SimulationConfig, with_overrides
from revep.config_file import dump_config, load_config
from revep.dump_utils import read_grid


def _exit_code(excinfo: pytest.ExceptionInfo) -> int:
    return excinfo.value.code


def test_run_writes_all_outputs(tmp_path: Path, short_config_file: Path,
                                short_config: SimulationConfig) -> None:
    out = tmp_path / "run"
    cmd_run(config_path=str(short_config_file), output_dir=str(out), export_field=True)

    assert load_config(out / "manifest.toml") == with_overrides(short_config,
                                                                {"output.export_field": True})
    manifest = toml.load(out / "manifest.toml")["manifest"]
    assert manifest["steps"] == 252
    assert manifest["unstable"] is False
    assert manifest["stability_limit"].endswith(" s")

    ledger = np.loadtxt(out / "ledger.csv", delimiter=",", comments="#")
    assert ledger.shape == (253, 6)
    assert ledger[:, 5].max() <= 1e-11

    probe = np.loadtxt(out / "probe_x0.5_y0.5.csv", delimiter=",", comments="#")
    assert probe[0, 0] == 0.0
    assert probe[-1, 0] == pytest.approx(20.002)

    header, values = read_grid(out / "snapshots" / "c_re_1.txt")
    assert header["kind"] == "cycle_end"
    assert header["units"] == "a.u."
    assert values.shape == (51, 51)

    _, e_mag = read_grid(out / "field" / "e_mag.txt")
    np.testing.assert_allclose(e_mag, 60.0, rtol=1e-8)
    assert "Stability limit" in (out / "run.log").read_text(encoding="utf-8")


def test_run_rejects_the_unstable_step(tmp_path: Path, short_config: SimulationConfig) -> None:
    config_path = tmp_path / "unstable.toml"
    dump_config(with_overrides(short_config, {"grid.dt": 0.2}), config_path)
    with pytest.raises(SystemExit) as excinfo:
        cmd_run(config_path=str(config_path), output_dir=str(tmp_path / "out"))
    assert _exit_code(excinfo) == 1
    log = (tmp_path / "out" / "run.log").read_text(encoding="utf-8")
    assert "dt violates stability bound" in log


def test_allowed_unstable_run_fails_at_runtime(tmp_path: Path,
                                               short_config: SimulationConfig) -> None:
    config_path = tmp_path / "unstable.toml"
    dump_config(with_overrides(short_config, {"grid.dt": 0.2}), config_path)
    with pytest.raises(SystemExit) as excinfo:
        cmd_run(config_path=str(config_path), output_dir=str(tmp_path / "out"),
                allow_unstable=True)
    assert _exit_code(excinfo) == 2


def test_missing_config_is_an_io_error(tmp_path: Path) -> None:
    with pytest.raises(SystemExit) as excinfo:
        cmd_run(config_path=str(tmp_path / "absent.toml"), output_dir=str(tmp_path / "out"))
    assert _exit_code(excinfo) == 3


def test_malformed_config_is_a_usage_error(tmp_path: Path) -> None:
    config_path = tmp_path / "bad.toml"
    config_path.write_text("[tissue]\nlength = 1\n", encoding="utf-8")
    with pytest.raises(SystemExit) as excinfo:
        cmd_run(config_path=str(config_path), output_dir=str(tmp_path / "out"))
    assert _exit_code(excinfo) == 1


@pytest.mark.parametrize("axis,values", [("beta", []), ("gamma", [0.1]), ("PN", [1.5]),
                                         ("beta", [0.1, 0.1])])
def test_bad_sweeps_are_usage_errors(tmp_path: Path, short_config_file: Path, axis: str,
                                     values: list) -> None:
    with pytest.raises(SystemExit) as excinfo:
        cmd_sweep(axis, values, config_path=str(short_config_file),
                  output_dir=str(tmp_path / "sweep"))
    assert _exit_code(excinfo) == 1


def test_sweep_with_an_invalid_member_is_a_usage_error(tmp_path: Path,
                                                      short_config_file: Path) -> None:
    with pytest.raises(SystemExit) as excinfo:
        cmd_sweep("beta", [0.1, -1.0], config_path=str(short_config_file),
                  output_dir=str(tmp_path / "sweep"))
    assert _exit_code(excinfo) == 1


def test_sweep_writes_a_report(tmp_path: Path, short_config_file: Path) -> None:
    out = tmp_path / "sweep"
    cmd_sweep("beta", [0.0, 0.5], config_path=str(short_config_file), output_dir=str(out))
    report = np.loadtxt(out / "sweep_report.csv", delimiter=",", comments="#")
    assert report.shape == (2, 5)
    np.testing.assert_array_equal(report[:, 0], [0.0, 0.5])
    assert report[1, 3] > 0.0
    header = (out / "transects.csv").read_text(encoding="utf-8").splitlines()[0]
    assert "c_re_beta=0.5 [a.u.]" in header
    assert (out / "beta_0.5" / "manifest.toml").is_file()
    assert not (out / "sweep_failures.txt").exists()


def test_comparison_needs_a_single_pulse(tmp_path: Path, short_config_file: Path) -> None:
    with pytest.raises(SystemExit) as excinfo:
        cmd_compare_kalamiza(config_path=str(short_config_file),
                             output_dir=str(tmp_path / "cmp"), pulse_count=2)
    assert _exit_code(excinfo) == 1


def test_comparison_reports_the_gap(tmp_path: Path, short_config_file: Path) -> None:
    out = tmp_path / "cmp"
    cmd_compare_kalamiza(config_path=str(short_config_file), output_dir=str(out))
    summary = toml.load(out / "gap_summary.toml")
    assert summary["prefactor_ratio"] == pytest.approx(0.97456, rel=1e-4)
    assert summary["max_relative_gap"] == pytest.approx(0.0254, abs=1e-3)
    assert summary["final_c_re_model"] < summary["final_c_re_kalamiza"]
    curves = np.loadtxt(out / "mtc_curves.csv", delimiter=",", comments="#")
    assert curves.shape == (201, 3)
    assert (out / "c_re_probe.csv").is_file()
    log = (out / "run.log").read_text(encoding="utf-8")
    assert "The config asks for 2 pulses; the comparison runs a single pulse" in log


def test_kinetics_tables(tmp_path: Path, short_config_file: Path) -> None:
    out = tmp_path / "kinetics"
    cmd_kinetics(config_path=str(short_config_file), output_dir=str(out), e_max=100.0,
                 samples=101)
    field = np.loadtxt(out / "kinetics_field.csv", delimiter=",", comments="#")
    assert field.shape == (101, 3)
    assert field[-1, 0] == 100.0
    assert np.all(np.diff(field[:, 1]) > 0)
    mtc = np.loadtxt(out / "kinetics_mtc.csv", delimiter=",", comments="#")
    assert mtc[0, 1] == pytest.approx(3.157584e-3, rel=1e-6)
    with pytest.raises(SystemExit) as excinfo:
        cmd_kinetics(config_path=str(short_config_file), output_dir=str(out), samples=1)
    assert _exit_code(excinfo) == 1


def test_output_root_from_environment(tmp_path: Path, short_config_file: Path,
                                      monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("REVEP_OUTPUT_ROOT", str(tmp_path))
    cmd_kinetics(config_path=str(short_config_file))
    assert (tmp_path / "revep_kinetics" / "kinetics_mtc.csv").is_file()
    assert (tmp_path / "revep_kinetics" / "run.log").is_file()


def test_identical_runs_write_identical_files(tmp_path: Path, short_config_file: Path) -> None:
    for name in ("a", "b"):
        cmd_run(config_path=str(short_config_file), output_dir=str(tmp_path / name))
    for artifact in ("manifest.toml", "ledger.csv", "probe_x0.5_y0.5.csv",
                     "snapshots/c_e_0.txt"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" /
                                                            artifact).read_bytes()
