"""
TOML config files with explicit units.

Dimensional values are strings "<number> <unit>" ("50 um", "1e-3 mm^2/s");
the number is parsed as-is and pint converts the unit to the internal one.
Dimensionless values are bare numbers. Unknown tables and keys are errors.
"""
import functools
import logging
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Type

import pint
import toml

from .config import (BoundaryParams, ComparisonParams, DrugParams,
                     ElectroParams, GridSpec, OutputParams, PulseSchedule,
                     RunParams, SimulationConfig, SolverParams, TissueParams)
from .errors import ConfigFileError

LOG = logging.getLogger(__name__)

DEFAULT_CONFIG_RESOURCE = "reference.toml"
# Metadata table written into manifests; skipped when loading
MANIFEST_TABLE = "manifest"

FLOAT = "float"
INT = "int"
BOOL = "bool"
STR = "str"
POINT = "point"
POINTS = "points"
TIMES = "times"

# table -> (dataclass, {field: (kind, internal unit or None)})
SCHEMA: Dict[str, Tuple[Type[Any], Dict[str, Tuple[str, Optional[str]]]]] = {
    "tissue": (TissueParams, {
        "length": (FLOAT, "mm"),
        "sigma_min": (FLOAT, "S/m"),
        "sigma_max": (FLOAT, "S/m"),
        "e_rev": (FLOAT, "V/mm"),
        "e_irrev": (FLOAT, "V/mm"),
        "gamma1": (FLOAT, None),
        "gamma2": (FLOAT, None),
        "porosity": (FLOAT, None),
        "cell_radius": (FLOAT, "mm"),
    }),
    "drug": (DrugParams, {
        "diffusivity": (FLOAT, "mm^2/s"),
        "permeability": (FLOAT, "mm/s"),
        "dose": (FLOAT, None),
        "delta_width": (FLOAT, None),
        "injection_center": (POINT, "mm"),
    }),
    "electro": (ElectroParams, {
        "phi0": (FLOAT, "V"),
        "phi_l": (FLOAT, "V"),
        "e_f": (FLOAT, "V/mm"),
        "b_f": (FLOAT, "V/mm"),
        "resealing_tau": (FLOAT, "s"),
    }),
    "pulses": (PulseSchedule, {
        "pulse_count": (INT, None),
        "on_time": (FLOAT, "s"),
        "off_time": (FLOAT, "s"),
    }),
    "grid": (GridSpec, {
        "nx": (INT, None),
        "ny": (INT, None),
        "dx": (FLOAT, "mm"),
        "dy": (FLOAT, "mm"),
        "dt": (FLOAT, "s"),
    }),
    "boundary": (BoundaryParams, {
        "beta": (FLOAT, "mm^-1"),
        "literal_robin": (BOOL, None),
    }),
    "comparison": (ComparisonParams, {
        "fp_k": (FLOAT, None),
        "membrane_thickness": (FLOAT, "mm"),
    }),
    "solver": (SolverParams, {
        "field_tol": (FLOAT, None),
        "max_picard": (INT, None),
        "face_average": (STR, None),
    }),
    "output": (OutputParams, {
        "probes": (POINTS, "mm"),
        "snapshot_times": (TIMES, "s"),
        "snapshot_every_cycle": (BOOL, None),
        "probe_stride": (FLOAT, "s"),
        "export_field": (BOOL, None),
    }),
    "run": (RunParams, {
        "allow_unstable": (BOOL, None),
        "conservation_tol": (FLOAT, None),
        "seed": (INT, None),
    }),
}


@functools.lru_cache(maxsize=None)
def _registry() -> pint.UnitRegistry:
    return pint.UnitRegistry()


def load_config(config_path: Path) -> SimulationConfig:
    """
    Read a TOML config file. I/O errors propagate as `OSError`; malformed
    content raises `ConfigFileError`.
    """
    text = Path(config_path).read_text(encoding="utf-8")
    LOG.debug("Loading config from '%s'", config_path)
    return loads_config(text, source=str(config_path))


def load_default_config() -> SimulationConfig:
    text = resources.files("revep.resources").joinpath(
        DEFAULT_CONFIG_RESOURCE).read_text(encoding="utf-8")
    return loads_config(text, source=DEFAULT_CONFIG_RESOURCE)


def loads_config(text: str, source: str = "<string>") -> SimulationConfig:
    try:
        data = toml.loads(text)
    except toml.TomlDecodeError as decode_error:
        raise ConfigFileError(f"{source}: {decode_error}") from decode_error
    return config_from_dict(data, source)


def config_from_dict(data: Mapping[str, Any],
                     source: str = "<dict>") -> SimulationConfig:
    sections: Dict[str, Any] = {}
    for table, values in data.items():
        if table == MANIFEST_TABLE:
            continue
        if table not in SCHEMA:
            raise ConfigFileError(f"{source}: unknown table [{table}]")
        if not isinstance(values, Mapping):
            raise ConfigFileError(f"{source}: [{table}] must be a table")
        params_type, fields = SCHEMA[table]
        converted = {}
        for key, raw in values.items():
            if key not in fields:
                raise ConfigFileError(f"{source}: unknown key '{table}.{key}'")
            kind, unit = fields[key]
            converted[key] = _convert(f"{table}.{key}", raw, kind, unit)
        sections[table] = params_type(**converted)
    return SimulationConfig(**sections)


def config_to_dict(config: SimulationConfig) -> Dict[str, Dict[str, Any]]:
    """
    Every resolved value in internal units, as written to manifests.
    """
    data: Dict[str, Dict[str, Any]] = {}
    for table, (_, fields) in SCHEMA.items():
        section = getattr(config, table)
        data[table] = {
            key: _format(getattr(section, key), kind, unit)
            for key, (kind, unit) in fields.items()
        }
    return data


def dumps_config(config: SimulationConfig,
                 manifest: Optional[Mapping[str, Any]] = None) -> str:
    data: Dict[str, Any] = dict(config_to_dict(config))
    if manifest is not None:
        data[MANIFEST_TABLE] = dict(manifest)
    return toml.dumps(data)


def dump_config(config: SimulationConfig,
                config_path: Path,
                manifest: Optional[Mapping[str, Any]] = None) -> None:
    Path(config_path).write_text(dumps_config(config, manifest),
                                 encoding="utf-8")


def parse_quantity(name: str, text: Any, unit: str) -> float:
    if not isinstance(text, str):
        raise ConfigFileError(
            f"'{name}' needs an explicit unit (e.g. \"{text} {unit}\")")
    number, _, unit_text = text.strip().partition(" ")
    try:
        magnitude = float(number)
    except ValueError as value_error:
        raise ConfigFileError(
            f"'{name}': cannot read a number from '{text}'") from value_error
    unit_text = unit_text.strip()
    if not unit_text:
        raise ConfigFileError(f"'{name}' needs an explicit unit, got '{text}'")

    ureg = _registry()
    try:
        source_unit = ureg.Unit(unit_text)
        target_unit = ureg.Unit(unit)
        if source_unit == target_unit:
            return magnitude
        return float(ureg.Quantity(magnitude, source_unit).to(target_unit).magnitude)
    except pint.DimensionalityError as dim_error:
        raise ConfigFileError(
            f"'{name}': '{unit_text}' cannot be converted to {unit}") from dim_error
    except (pint.UndefinedUnitError, AttributeError, ValueError) as unit_error:
        raise ConfigFileError(f"'{name}': unknown unit '{unit_text}'") from unit_error


def _convert(name: str, raw: Any, kind: str, unit: Optional[str]) -> Any:
    if kind == BOOL:
        if not isinstance(raw, bool):
            raise ConfigFileError(f"'{name}' must be true or false")
        return raw
    if kind == INT:
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigFileError(f"'{name}' must be an integer")
        return raw
    if kind == STR:
        if not isinstance(raw, str):
            raise ConfigFileError(f"'{name}' must be a string")
        return raw
    if kind == FLOAT:
        return _scalar(name, raw, unit)
    if kind == POINT:
        return _point(name, raw, unit)
    if kind == POINTS:
        if not isinstance(raw, list):
            raise ConfigFileError(f"'{name}' must be a list of [x, y] pairs")
        return tuple(_point(f"{name}[{k}]", p, unit) for k, p in enumerate(raw))
    if kind == TIMES:
        if not isinstance(raw, list):
            raise ConfigFileError(f"'{name}' must be a list")
        return tuple(_scalar(f"{name}[{k}]", t, unit) for k, t in enumerate(raw))
    raise NotImplementedError(f"Unsupported field kind '{kind}'")


def _scalar(name: str, raw: Any, unit: Optional[str]) -> float:
    if unit is not None:
        return parse_quantity(name, raw, unit)
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigFileError(f"'{name}' must be a number")
    return float(raw)


def _point(name: str, raw: Any, unit: Optional[str]) -> Tuple[float, float]:
    if not isinstance(raw, list) or len(raw) != 2:
        raise ConfigFileError(f"'{name}' must be an [x, y] pair")
    return (_scalar(f"{name}.x", raw[0], unit), _scalar(f"{name}.y", raw[1], unit))


def _format(value: Any, kind: str, unit: Optional[str]) -> Any:
    if kind in (BOOL, INT, STR):
        return value
    if kind == FLOAT:
        return _format_scalar(value, unit)
    if kind == POINT:
        return [_format_scalar(v, unit) for v in value]
    if kind == POINTS:
        return [[_format_scalar(v, unit) for v in p] for p in value]
    if kind == TIMES:
        return [_format_scalar(v, unit) for v in value]
    raise NotImplementedError(f"Unsupported field kind '{kind}'")


def _format_scalar(value: float, unit: Optional[str]) -> Any:
    if unit is None:
        return float(value)
    return f"{float(value)!r} {unit}"

