"""
Simulation parameters. Every quantity is stored in the fixed internal unit
system: mm, s, V, S/m (fields in V/mm, diffusivity in mm^2/s).
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, List, Mapping, Tuple, Union

from .errors import ValidationError, Violation

LOG = logging.getLogger(__name__)
# Relative tolerance on (n - 1) * spacing == L
GRID_LENGTH_RTOL = 1e-12
FACE_AVERAGES = ("arithmetic", "harmonic")

Point = Tuple[float, float]


@dataclass(frozen=True)
class TissueParams:
    length: float = 1.0  # L, mm
    sigma_min: float = 0.0  # S/m
    sigma_max: float = 0.241  # S/m
    e_rev: float = 46.0  # V/mm
    e_irrev: float = 70.0  # V/mm
    gamma1: float = 8.0
    gamma2: float = 10.0
    porosity: float = 0.18  # epsilon
    cell_radius: float = 0.05  # r_c, mm


@dataclass(frozen=True)
class DrugParams:
    diffusivity: float = 1e-3  # D, mm^2/s
    permeability: float = 5e-4  # P, mm/s
    dose: float = 100.0  # n_d
    delta_width: float = 0.1  # d, fraction of L
    injection_center: Point = (0.0, 0.5)  # mm


@dataclass(frozen=True)
class ElectroParams:
    phi0: float = 0.0  # V, electrode at y=0
    phi_l: float = 60.0  # V, electrode at y=L
    e_f: float = 65.8  # V/mm
    b_f: float = 7.5  # V/mm
    # No published value; resealing happens "in a minute time frame"
    resealing_tau: float = 20.0  # s


@dataclass(frozen=True)
class PulseSchedule:
    pulse_count: int = 10  # PN
    on_time: float = 1e-3  # t_ep, s
    off_time: float = 100.0  # t_M, s

    @property
    def cycle_time(self) -> float:
        return self.on_time + self.off_time

    @property
    def total_time(self) -> float:
        return self.pulse_count * self.cycle_time


@dataclass(frozen=True)
class GridSpec:
    nx: int = 101  # M1
    ny: int = 101  # M2
    dx: float = 0.01  # mm
    dy: float = 0.01  # mm
    dt: float = 0.02  # s


@dataclass(frozen=True)
class BoundaryParams:
    beta: float = 0.1  # 1/mm
    literal_robin: bool = False


@dataclass(frozen=True)
class ComparisonParams:
    fp_k: float = 2.7e-7
    membrane_thickness: float = 5e-6  # d_m, mm


@dataclass(frozen=True)
class SolverParams:
    field_tol: float = 1e-8
    max_picard: int = 50
    face_average: str = "arithmetic"


@dataclass(frozen=True)
class OutputParams:
    probes: Tuple[Point, ...] = ((0.5, 0.5),)
    snapshot_times: Tuple[float, ...] = ()
    snapshot_every_cycle: bool = True
    probe_stride: float = 1.0  # s
    export_field: bool = False


@dataclass(frozen=True)
class RunParams:
    allow_unstable: bool = False
    conservation_tol: float = 1e-8
    seed: int = 0


@dataclass(frozen=True)
class SimulationConfig:
    tissue: TissueParams = field(default_factory=TissueParams)
    drug: DrugParams = field(default_factory=DrugParams)
    electro: ElectroParams = field(default_factory=ElectroParams)
    pulses: PulseSchedule = field(default_factory=PulseSchedule)
    grid: GridSpec = field(default_factory=GridSpec)
    boundary: BoundaryParams = field(default_factory=BoundaryParams)
    comparison: ComparisonParams = field(default_factory=ComparisonParams)
    solver: SolverParams = field(default_factory=SolverParams)
    output: OutputParams = field(default_factory=OutputParams)
    run: RunParams = field(default_factory=RunParams)

    @property
    def probes(self) -> Tuple[Point, ...]:
        return self.output.probes

    @property
    def snapshot_times(self) -> Tuple[float, ...]:
        return self.output.snapshot_times


@dataclass(frozen=True)
class ValidatedConfig:
    """
    A config that passed `validate`. Immutable, so it can be shared between
    concurrent runs.
    """
    config: SimulationConfig
    stability_limit: float
    unstable: bool = False

    def __getattr__(self, name: str) -> Any:
        # Section access (`validated.grid`, ...) goes straight to the config
        if name == "config":
            raise AttributeError(name)
        return getattr(self.config, name)


def stability_limit(grid: GridSpec, diffusivity: float) -> float:
    """
    Largest FTCS time step for 2-D diffusion (the bound itself is excluded).
    """
    dx2 = grid.dx * grid.dx
    dy2 = grid.dy * grid.dy
    return 0.5 * (dx2 * dy2) / (diffusivity * (dx2 + dy2))


def validate(
        config: Union[SimulationConfig, ValidatedConfig]) -> ValidatedConfig:
    if isinstance(config, ValidatedConfig):
        return config

    violations: List[Violation] = []
    violations += _check_tissue(config.tissue)
    violations += _check_drug(config.drug)
    violations += _check_electro(config.electro)
    violations += _check_pulses(config.pulses)
    violations += _check_boundary(config)
    violations += _check_solver_and_output(config)
    grid_violations = _check_grid(config.grid, config.tissue.length)
    violations += grid_violations

    limit = math.nan
    unstable = False
    if not grid_violations and config.drug.diffusivity > 0:
        limit = stability_limit(config.grid, config.drug.diffusivity)
        if not config.grid.dt < limit:
            if config.run.allow_unstable:
                LOG.warning(
                    "dt=%g s violates the stability bound (%g s); outputs will be tagged unstable",
                    config.grid.dt, limit)
                unstable = True
            else:
                violations.append(
                    Violation(
                        "grid.dt",
                        f"dt violates stability bound: {config.grid.dt:g} s >= {limit:g} s"
                    ))

    if violations:
        raise ValidationError(violations)

    LOG.debug("Stability limit %g s, dt=%g s", limit, config.grid.dt)
    return ValidatedConfig(config=config,
                           stability_limit=limit,
                           unstable=unstable)


def with_overrides(config: SimulationConfig,
                   overrides: Mapping[str, Any]) -> SimulationConfig:
    """
    Copy `config` with nested fields replaced, keyed by dotted path
    (`{"boundary.beta": 0.5}`).
    """
    for dotted, value in overrides.items():
        section_name, _, field_name = dotted.partition(".")
        section = getattr(config, section_name)
        if not field_name or not hasattr(section, field_name):
            raise AttributeError(f"unknown config field '{dotted}'")
        config = dataclasses.replace(
            config,
            **{section_name: dataclasses.replace(section, **{field_name: value})})
    return config


def _check_tissue(p: TissueParams) -> List[Violation]:
    violations = []
    if not p.length > 0:
        violations.append(Violation("tissue.length", "length must be positive"))
    if not p.sigma_min >= 0:
        violations.append(Violation("tissue.sigma_min", "sigma_min must be >= 0"))
    if not p.sigma_max > p.sigma_min:
        violations.append(
            Violation("tissue.sigma_max", "sigma_max must exceed sigma_min"))
    if not p.e_rev > 0:
        violations.append(Violation("tissue.e_rev", "E_rev must be positive"))
    if not p.e_irrev > p.e_rev:
        violations.append(Violation("tissue.e_irrev", "E_irrev must exceed E_rev"))
    if not 0 < p.porosity < 1:
        violations.append(Violation("tissue.porosity", "porosity must be in (0,1)"))
    if not p.cell_radius > 0:
        violations.append(
            Violation("tissue.cell_radius", "cell radius must be positive"))
    if not (p.gamma1 > 0 and p.gamma2 > 0):
        violations.append(
            Violation("tissue.gamma", "gamma1 and gamma2 must be positive"))
    return violations


def _check_drug(p: DrugParams) -> List[Violation]:
    violations = []
    if not p.diffusivity > 0:
        violations.append(
            Violation("drug.diffusivity", "diffusivity must be positive"))
    if not p.permeability >= 0:
        violations.append(
            Violation("drug.permeability", "permeability must be >= 0"))
    if not p.dose >= 0:
        violations.append(Violation("drug.dose", "dose must be >= 0"))
    if not 0 < p.delta_width < 1:
        violations.append(
            Violation("drug.delta_width", "delta width must be in (0,1)"))
    return violations


def _check_electro(p: ElectroParams) -> List[Violation]:
    violations = []
    if not p.b_f > 0:
        violations.append(Violation("electro.b_f", "b_f must be positive"))
    if not p.resealing_tau > 0:
        violations.append(
            Violation("electro.resealing_tau", "resealing tau must be positive"))
    return violations


def _check_pulses(p: PulseSchedule) -> List[Violation]:
    violations = []
    if not p.pulse_count >= 1:
        violations.append(
            Violation("pulses.pulse_count", "pulse count must be >= 1"))
    if not p.on_time > 0:
        violations.append(Violation("pulses.on_time", "on time must be positive"))
    if not p.off_time > 0:
        violations.append(
            Violation("pulses.off_time", "off time must be positive"))
    return violations


def _check_grid(grid: GridSpec, length: float) -> List[Violation]:
    violations = []
    if grid.nx < 3 or grid.ny < 3:
        violations.append(Violation("grid", "nx and ny must be >= 3"))
    if not (grid.dx > 0 and grid.dy > 0):
        violations.append(Violation("grid", "dx and dy must be positive"))
    if not grid.dt > 0:
        violations.append(Violation("grid.dt", "dt must be positive"))
    if violations or not length > 0:
        return violations
    for n, spacing, name in ((grid.nx, grid.dx, "dx"), (grid.ny, grid.dy,
                                                         "dy")):
        if abs((n - 1) * spacing - length) > GRID_LENGTH_RTOL * length:
            violations.append(
                Violation(f"grid.{name}",
                          f"(n-1)*{name} = {(n - 1) * spacing!r} mm does not span L = {length!r} mm"))
    return violations


def _check_boundary(config: SimulationConfig) -> List[Violation]:
    violations = []
    length = config.tissue.length
    if not config.boundary.beta >= 0:
        violations.append(Violation("boundary.beta", "beta must be >= 0"))
    if not _inside(config.drug.injection_center, length):
        violations.append(
            Violation("drug.injection_center",
                      "injection center must lie inside [0,L]x[0,L]"))
    for k, point in enumerate(config.output.probes):
        if not _inside(point, length):
            violations.append(
                Violation(f"output.probes[{k}]",
                          f"probe {tuple(point)} must lie inside [0,L]x[0,L]"))
    if len({tuple(p) for p in config.output.probes}) != len(config.output.probes):
        violations.append(Violation("output.probes", "probe points must be distinct"))
    return violations


def _check_solver_and_output(config: SimulationConfig) -> List[Violation]:
    violations = []
    if not config.solver.field_tol > 0:
        violations.append(Violation("solver.field_tol", "tolerance must be positive"))
    if config.solver.max_picard < 1:
        violations.append(Violation("solver.max_picard", "max_picard must be >= 1"))
    if config.solver.face_average not in FACE_AVERAGES:
        violations.append(
            Violation("solver.face_average",
                      f"face average must be one of {', '.join(FACE_AVERAGES)}"))
    if any(t < 0 for t in config.output.snapshot_times):
        violations.append(
            Violation("output.snapshot_times", "snapshot times must be >= 0"))
    if not config.output.probe_stride > 0:
        violations.append(
            Violation("output.probe_stride", "probe stride must be positive"))
    if not config.run.conservation_tol > 0:
        violations.append(
            Violation("run.conservation_tol", "conservation tolerance must be positive"))
    return violations


def _inside(point: Point, length: float) -> bool:
    x, y = point
    return 0 <= x <= length and 0 <= y <= length
