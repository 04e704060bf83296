import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Union

import fire  # type: ignore
import numpy as np

from .config import SimulationConfig, ValidatedConfig, validate, with_overrides
from .config_file import load_config, load_default_config
from .dump_utils import write_run, write_sweep_report, write_table, write_toml
from .errors import ConfigFileError, OutputError, SimulationError, ValidationError
from .field_solver import solve_field
from .logger import add_file_handler, setup_logger
from .membrane import KalamizaParams, MtcParams, conductivity, mtc, pore_fraction
from .oracles import compare_mtc_curves
from .sweep import SweepAxis, run_sweep
from .transport import run_pulses

OUTPUT_ROOT_ENV = "REVEP_OUTPUT_ROOT"
RUN_LOG = "run.log"

EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

LOG = logging.getLogger("revep")


def main() -> None:
    fire.Fire({
        "run": cmd_run,
        "sweep": cmd_sweep,
        "compare_kalamiza": cmd_compare_kalamiza,
        "kinetics": cmd_kinetics,
    })


def cmd_run(config_path: Optional[str] = None,
            output_dir: Optional[str] = None,
            allow_unstable: bool = False,
            literal_robin: bool = False,
            tau: Optional[float] = None,
            snapshot_every_cycle: Optional[bool] = None,
            export_field: bool = False,
            verbose: bool = False) -> None:
    """
    Solve the field and integrate the pulse schedule of one configuration
    """
    setup_logger(LOG, verbose)
    out_dir = _prepare_output(output_dir, "run")
    config = _load(config_path)
    config = _apply_flags(config, allow_unstable, literal_robin, tau,
                          snapshot_every_cycle, export_field)
    validated = _validate(config)

    try:
        field = solve_field(validated)
        output = run_pulses(validated, field)
    except SimulationError as simulation_error:
        LOG.error("Simulation failed: %s", simulation_error)
        sys.exit(EXIT_RUNTIME)
    if output.unstable:
        LOG.warning("Outputs are tagged unstable")
    _write(lambda: write_run(output, out_dir))


def cmd_sweep(axis: str,
              values: Union[float, Sequence[float]],
              config_path: Optional[str] = None,
              output_dir: Optional[str] = None,
              threads: int = 1,
              allow_unstable: bool = False,
              literal_robin: bool = False,
              tau: Optional[float] = None,
              snapshot_every_cycle: Optional[bool] = None,
              verbose: bool = False) -> None:
    """
    Run one simulation per value of beta, P or PN and write a summary report
    """
    setup_logger(LOG, verbose)
    if not isinstance(values, (list, tuple)):
        values = [values]
    if len(values) == 0:
        LOG.error("At least one sweep value is required")
        sys.exit(EXIT_USAGE)
    try:
        sweep_axis = SweepAxis.parse(axis)
        coerced = [sweep_axis.coerce(v) for v in values]
        if len(set(coerced)) != len(coerced):
            raise ValueError(f"sweep values must be distinct, got {coerced}")
    except (TypeError, ValueError) as value_error:
        LOG.error("%s", value_error)
        sys.exit(EXIT_USAGE)
    if threads < 1:
        LOG.error("threads must be >= 1")
        sys.exit(EXIT_USAGE)

    out_dir = _prepare_output(output_dir, "sweep")
    config = _load(config_path)
    config = _apply_flags(config, allow_unstable, literal_robin, tau,
                          snapshot_every_cycle, False)
    # Validate every member up front so usage errors exit before any run
    for value in coerced:
        _validate(with_overrides(config, {sweep_axis.path: value}))

    try:
        report = run_sweep(config, sweep_axis, coerced, out_dir, threads)
    except OutputError as output_error:
        LOG.error("%s", output_error)
        sys.exit(EXIT_IO)
    _write(lambda: write_sweep_report(report, out_dir))
    if report.failures:
        LOG.error("%d of %d sweep member(s) failed, see sweep_failures.txt",
                  len(report.failures), len(report.summaries))
        sys.exit(EXIT_RUNTIME)


def cmd_compare_kalamiza(config_path: Optional[str] = None,
                         output_dir: Optional[str] = None,
                         pulse_count: int = 1,
                         tau: Optional[float] = None,
                         samples: int = 201,
                         verbose: bool = False) -> None:
    """
    Compare the mass-transfer model with the Kalamiza coefficient for a
    single pulse, on both mu(t) and C_RE at the domain centre
    """
    setup_logger(LOG, verbose)
    if pulse_count != 1:
        LOG.error("The comparison is defined for a single pulse (pulse_count=1), got %s",
                  pulse_count)
        sys.exit(EXIT_USAGE)

    out_dir = _prepare_output(output_dir, "compare_kalamiza")
    config = _load(config_path)
    centre = 0.5 * config.tissue.length
    if config.pulses.pulse_count != 1:
        LOG.warning("The config asks for %d pulses; the comparison runs a single pulse",
                    config.pulses.pulse_count)
    config = _apply_flags(config, False, False, tau, None, False)
    config = with_overrides(config, {
        "pulses.pulse_count": 1,
        "output.probes": ((centre, centre),),
        "output.snapshot_every_cycle": False,
        "output.snapshot_times": (),
    })
    validated = _validate(config)

    cfg = validated.config
    model = MtcParams.from_params(cfg.tissue, cfg.drug, cfg.electro)
    kalamiza = KalamizaParams.from_params(cfg.comparison, cfg.tissue, cfg.drug,
                                          cfg.electro)
    try:
        field = solve_field(validated)
        model_run = run_pulses(validated, field)
        kalamiza_run = run_pulses(validated, field, mu0_override=kalamiza.prefactor)
    except SimulationError as simulation_error:
        LOG.error("Simulation failed: %s", simulation_error)
        sys.exit(EXIT_RUNTIME)
    comparison = compare_mtc_curves(model, model_run.membrane.pore_fraction,
                                    kalamiza, cfg.pulses.off_time, samples)
    LOG.info("Prefactor ratio (model / Kalamiza) = %.6g, max relative gap = %.6g",
             comparison.prefactor_ratio, comparison.max_relative_gap)

    model_probe = model_run.probe_series[0]
    kalamiza_probe = kalamiza_run.probe_series[0]
    summary: Dict[str, Any] = {
        "prefactor_ratio": comparison.prefactor_ratio,
        "max_relative_gap": comparison.max_relative_gap,
        "model_prefactor": f"{float(comparison.mu_model[0])!r} 1/s",
        "kalamiza_prefactor": f"{float(comparison.mu_kalamiza[0])!r} 1/s",
        "horizon": f"{cfg.pulses.off_time!r} s",
        "resealing_tau": f"{cfg.electro.resealing_tau!r} s",
        "probe": [centre, centre],
        "final_c_re_model": float(model_probe.c_re[-1]),
        "final_c_re_kalamiza": float(kalamiza_probe.c_re[-1]),
    }

    def write_comparison() -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_table(out_dir / "mtc_curves.csv",
                    [("clock", "s"), ("mu_model", "1/s"), ("mu_kalamiza", "1/s")],
                    [comparison.times, comparison.mu_model, comparison.mu_kalamiza])
        write_table(out_dir / "c_re_probe.csv",
                    [("time", "s"), ("c_re_model", "a.u."),
                     ("c_re_kalamiza", "a.u.")],
                    [model_probe.times, model_probe.c_re, kalamiza_probe.c_re])
        write_toml(out_dir / "gap_summary.toml", summary)

    _write(write_comparison)


def cmd_kinetics(config_path: Optional[str] = None,
                 output_dir: Optional[str] = None,
                 e_max: float = 120.0,
                 samples: int = 241,
                 tau: Optional[float] = None,
                 verbose: bool = False) -> None:
    """
    Tabulate pore fraction and conductivity against field strength, and the
    mass-transfer coefficient over one OFF interval
    """
    setup_logger(LOG, verbose)
    if not e_max > 0 or samples < 2:
        LOG.error("e_max must be positive and samples >= 2")
        sys.exit(EXIT_USAGE)
    out_dir = _prepare_output(output_dir, "kinetics")
    config = _load(config_path)
    config = _apply_flags(config, False, False, tau, None, False)
    validated = _validate(config)

    cfg = validated.config
    e_field = np.linspace(0.0, e_max, samples)
    nominal = abs(cfg.electro.phi_l - cfg.electro.phi0) / cfg.tissue.length
    fp_nominal = float(pore_fraction(nominal, cfg.electro))
    clock = np.linspace(0.0, cfg.pulses.off_time, samples)
    mu = mtc(clock, fp_nominal,
             MtcParams.from_params(cfg.tissue, cfg.drug, cfg.electro))
    LOG.info("Nominal field %.6g V/mm: f_p = %.6g, mu0 = %.6g 1/s", nominal,
             fp_nominal, mu[0])

    def write_kinetics() -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_table(out_dir / "kinetics_field.csv",
                    [("e_field", "V/mm"), ("pore_fraction", "1"),
                     ("sigma", "S/m")],
                    [e_field, pore_fraction(e_field, cfg.electro),
                     conductivity(e_field, cfg.tissue)])
        write_table(out_dir / "kinetics_mtc.csv",
                    [("clock", "s"), ("mu", "1/s")], [clock, mu])

    _write(write_kinetics)


def _load(config_path: Optional[str]) -> SimulationConfig:
    try:
        if config_path is None:
            LOG.info("Using the built-in default parameters")
            return load_default_config()
        path = Path(config_path)
        if not path.is_file():
            LOG.error("'%s' isn't a file or doesn't exist", path)
            sys.exit(EXIT_IO)
        config = load_config(path)
        LOG.info("Loaded config from '%s'", path)
        return config
    except OSError as os_error:
        LOG.error("Failed to read config: %s", os_error)
        sys.exit(EXIT_IO)
    except (ConfigFileError, TypeError) as config_error:
        LOG.error("Invalid config: %s", config_error)
        sys.exit(EXIT_USAGE)


def _apply_flags(config: SimulationConfig, allow_unstable: bool,
                 literal_robin: bool, tau: Optional[float],
                 snapshot_every_cycle: Optional[bool],
                 export_field: bool) -> SimulationConfig:
    overrides: Dict[str, Any] = {}
    if allow_unstable:
        overrides["run.allow_unstable"] = True
    if literal_robin:
        overrides["boundary.literal_robin"] = True
    if tau is not None:
        overrides["electro.resealing_tau"] = float(tau)
    if snapshot_every_cycle is not None:
        overrides["output.snapshot_every_cycle"] = bool(snapshot_every_cycle)
    if export_field:
        overrides["output.export_field"] = True
    return with_overrides(config, overrides)


def _validate(config: SimulationConfig) -> ValidatedConfig:
    try:
        validated = validate(config)
    except ValidationError as validation_error:
        LOG.error("Invalid configuration:")
        for violation in validation_error.violations:
            LOG.error("  %s", violation)
        sys.exit(EXIT_USAGE)
    LOG.info("Stability limit %g s, dt = %g s, tau = %g s",
             validated.stability_limit, config.grid.dt,
             config.electro.resealing_tau)
    return validated


def _prepare_output(output_dir: Optional[str], command: str) -> Path:
    if output_dir is None:
        output_dir = str(Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / f"revep_{command}")
    path = Path(output_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        add_file_handler(LOG, path / RUN_LOG)
    except OSError as os_error:
        LOG.error("Cannot write to output directory '%s': %s", path, os_error)
        sys.exit(EXIT_IO)
    return path


def _write(writer: Callable[[], None]) -> None:
    try:
        writer()
    except OutputError as output_error:
        LOG.error("%s", output_error)
        sys.exit(EXIT_IO)
    except OSError as os_error:
        LOG.error("Failed to write outputs: %s", os_error)
        sys.exit(EXIT_IO)
