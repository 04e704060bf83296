"""
Result files. Grids and tables are delimited text with a `#` metadata header
declaring units; numbers carry 17 significant digits so files round-trip.
"""
import logging
from pathlib import Path
from typing import (TYPE_CHECKING, Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple,
                    Union)

import numpy as np
import toml

from .config_file import dump_config
from .errors import OutputError
from .grid import ScalarField2D
from .run_output import RunOutput, Snapshot

if TYPE_CHECKING:
    from .field_solver import FieldSolution
    from .sweep import SweepReport

LOG = logging.getLogger(__name__)

NUMBER_FORMAT = "%.17g"
MANIFEST_FILE = "manifest.toml"
LEDGER_FILE = "ledger.csv"
SNAPSHOT_DIR = "snapshots"
FIELD_DIR = "field"

# (header name, unit)
Column = Tuple[str, str]


def write_run(output: RunOutput, output_dir: Path) -> None:
    """
    Every artifact of one run: manifest, ledger, probe series, snapshots
    and, when requested, the field grids.
    """
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        dump_config(output.config.config, output_dir / MANIFEST_FILE,
                    output.manifest)
        _write_ledger(output, output_dir / LEDGER_FILE)
        for series in output.probe_series:
            write_table(output_dir / probe_file_name(series.point),
                        [("time", "s"), ("c_e", "a.u."), ("c_re", "a.u.")],
                        [series.times, series.c_e, series.c_re])
        _write_snapshots(output.snapshots, output_dir / SNAPSHOT_DIR)
        if output.field_export is not None:
            write_field(output.field_export, output_dir / FIELD_DIR)
    except OSError as os_error:
        raise OutputError(f"Failed to write results to '{output_dir}': {os_error}") from os_error

    LOG.info("Output files have been saved in '%s'", output_dir)


def write_field(field: "FieldSolution", field_dir: Path) -> None:
    field_dir.mkdir(parents=True, exist_ok=True)
    extra = {"picard_iterations": field.picard_iterations}
    write_grid(field_dir / "phi.txt", field.phi, extra=extra)
    write_grid(field_dir / "e_mag.txt", field.e_mag, extra=extra)
    write_grid(field_dir / "sigma.txt", field.sigma, extra=extra)


def write_grid(path: Path,
               field: ScalarField2D,
               time: Optional[float] = None,
               extra: Optional[Mapping[str, Any]] = None) -> None:
    """
    One row per y node (bottom row first), one column per x node.
    """
    header = [
        f"quantity = {field.quantity.name.lower()}",
        f"units = {field.quantity.units}",
        f"nx = {field.nx}",
        f"ny = {field.ny}",
        f"dx = {field.dx!r} mm",
        f"dy = {field.dy!r} mm",
    ]
    if time is not None:
        header.append(f"time = {time!r} s")
    for key, value in (extra or {}).items():
        header.append(f"{key} = {value}")
    np.savetxt(path,
               field.values,
               fmt=NUMBER_FORMAT,
               delimiter=",",
               header="\n".join(header),
               comments="# ")


def read_grid(path: Path) -> Tuple[Dict[str, str], np.ndarray]:
    """
    Header entries and values of a file written by `write_grid`.
    """
    header: Dict[str, str] = {}
    with open(path, encoding="utf-8") as grid_file:
        for line in grid_file:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
    return header, np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def write_table(path: Path, columns: Sequence[Column],
                data: Sequence[Iterable[float]]) -> None:
    names = ",".join(f"{name} [{unit}]" for name, unit in columns)
    np.savetxt(path,
               np.column_stack([np.asarray(list(c), dtype=float) for c in data]),
               fmt=NUMBER_FORMAT,
               delimiter=",",
               header=names,
               comments="# ")


def write_toml(path: Path, data: Mapping[str, Any]) -> None:
    path.write_text(toml.dumps(dict(data)), encoding="utf-8")


def value_label(value: Union[int, float]) -> str:
    """
    Shortest text that reads back as `value`, so distinct values never share
    a file or column name.
    """
    if isinstance(value, (int, np.integer)):
        return repr(int(value))
    return repr(float(value))


def probe_file_name(point: Sequence[float]) -> str:
    x, y = point
    return f"probe_x{value_label(x)}_y{value_label(y)}.csv"


def write_sweep_report(report: "SweepReport", output_dir: Path) -> None:
    axis = report.axis
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        rows = [s for s in report.summaries if s.error is None]
        write_table(output_dir / "sweep_report.csv",
                    [(axis.label, axis.unit), ("ecs_mass", "a.u. mm^2"),
                     ("ics_mass", "a.u. mm^2"), ("boundary_loss", "a.u. mm^2"),
                     ("cov_c_re", "1")],
                    [[s.value for s in rows], [s.ecs_mass for s in rows],
                     [s.ics_mass for s in rows], [s.boundary_loss for s in rows],
                     [s.cov for s in rows]])
        if rows:
            columns: List[Column] = [("x", "mm")]
            data: List[Any] = [rows[0].transect_x]
            for s in rows:
                columns += [(f"c_re_{axis.label}={value_label(s.value)}", "a.u."),
                            (f"c_e_{axis.label}={value_label(s.value)}", "a.u.")]
                data += [s.transect_c_re, s.transect_c_e]
            write_table(output_dir / "transects.csv", columns, data)
        if report.failures:
            lines = [f"{axis.label}={value_label(s.value)}: {s.error}" for s in report.failures]
            (output_dir / "sweep_failures.txt").write_text("\n".join(lines) + "\n",
                                                          encoding="utf-8")
    except OSError as os_error:
        raise OutputError(f"Failed to write sweep report to '{output_dir}': {os_error}") from os_error

    LOG.info("Sweep report has been saved in '%s'", output_dir)


def _write_ledger(output: RunOutput, path: Path) -> None:
    ledger = output.ledger
    write_table(path, [("time", "s"), ("ecs_mass", "a.u. mm^2"),
                       ("ics_mass", "a.u. mm^2"), ("boundary_loss", "a.u. mm^2"),
                       ("clamp_gain", "a.u. mm^2"), ("residual", "1")],
                [ledger.times, ledger.ecs_mass, ledger.ics_mass,
                 ledger.boundary_loss, ledger.clamp_gain, ledger.residual])


def _write_snapshots(snapshots: Sequence[Snapshot], snapshot_dir: Path) -> None:
    if not snapshots:
        return
    snapshot_dir.mkdir(parents=True, exist_ok=True)
    for index, snapshot in enumerate(snapshots):
        extra = {
            "requested_time": f"{snapshot.requested_time!r} s",
            "kind": "cycle_end" if snapshot.cycle_end else "requested",
        }
        write_grid(snapshot_dir / f"c_e_{index}.txt", snapshot.c_e,
                   snapshot.time, extra)
        write_grid(snapshot_dir / f"c_re_{index}.txt", snapshot.c_re,
                   snapshot.time, extra)
