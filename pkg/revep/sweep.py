"""
Parameter sweeps: one independent run per value of a single axis, executed
in worker processes when more than one thread is requested.
"""
import concurrent.futures as cf
import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import SimulationConfig, ValidatedConfig, validate, with_overrides
from .dump_utils import value_label, write_run
from .errors import RevepException
from .field_solver import solve_field
from .grid import bilinear
from .oracles import uniformity
from .run_output import ProbeSeries
from .transport import run_pulses

LOG = logging.getLogger(__name__)


class SweepAxis(enum.Enum):
    BETA = ("beta", "boundary.beta", "1/mm")
    PERMEABILITY = ("P", "drug.permeability", "mm/s")
    PULSE_COUNT = ("PN", "pulses.pulse_count", "1")

    def __init__(self, label: str, path: str, unit: str) -> None:
        self.label = label
        self.path = path
        self.unit = unit

    @classmethod
    def parse(cls, name: str) -> "SweepAxis":
        aliases = {
            "beta": cls.BETA,
            "β": cls.BETA,
            "p": cls.PERMEABILITY,
            "permeability": cls.PERMEABILITY,
            "pn": cls.PULSE_COUNT,
            "pulse_count": cls.PULSE_COUNT,
        }
        try:
            return aliases[str(name).strip().lower()]
        except KeyError:
            raise ValueError(f"Unknown sweep axis '{name}' (expected beta, P or PN)") from None

    def coerce(self, value: float) -> Union[int, float]:
        if self is SweepAxis.PULSE_COUNT:
            if float(value) != int(value):
                raise ValueError(f"pulse count must be an integer, got {value}")
            return int(value)
        return float(value)


@dataclass(frozen=True)
class SweepSummary:
    value: Union[int, float]
    ecs_mass: float = float("nan")
    ics_mass: float = float("nan")
    boundary_loss: float = float("nan")
    cov: float = float("nan")  # coefficient of variation of the final C_RE
    probe_series: Tuple[ProbeSeries, ...] = ()
    transect_x: Optional[np.ndarray] = None  # mm
    transect_c_re: Optional[np.ndarray] = None  # C_RE(x, L/2)
    transect_c_e: Optional[np.ndarray] = None  # C_E(x, L/2)
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepReport:
    axis: SweepAxis
    values: List[Union[int, float]]
    summaries: List[SweepSummary]

    @property
    def failures(self) -> List[SweepSummary]:
        return [s for s in self.summaries if s.error is not None]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.summaries], dtype=float)


def run_sweep(config: Union[SimulationConfig, ValidatedConfig],
              axis: Union[SweepAxis, str],
              values: Sequence[float],
              output_dir: Optional[Path] = None,
              threads: int = 1) -> SweepReport:
    """
    Run one simulation per axis value. Member failures are reported in the
    summaries rather than raised. With `output_dir`, each member writes its
    full outputs to `<output_dir>/<axis>_<value>/`.
    """
    if isinstance(axis, str):
        axis = SweepAxis.parse(axis)
    if not values:
        raise ValueError("a sweep needs at least one value")
    if isinstance(config, ValidatedConfig):
        config = config.config
    coerced = [axis.coerce(v) for v in values]
    if len(set(coerced)) != len(coerced):
        raise ValueError(f"sweep values must be distinct, got {coerced}")
    member_dirs = [
        None if output_dir is None else Path(output_dir) / f"{axis.label}_{value_label(v)}"
        for v in coerced
    ]

    LOG.info("Sweeping %s over %s with %d thread(s)", axis.label, coerced, threads)
    if threads > 1:
        with cf.ProcessPoolExecutor(max_workers=threads) as executor:
            futures = [
                executor.submit(run_member, config, axis, v, d)
                for v, d in zip(coerced, member_dirs)
            ]
            summaries = [f.result() for f in futures]
    else:
        summaries = [
            run_member(config, axis, v, d) for v, d in zip(coerced, member_dirs)
        ]

    for summary in summaries:
        if summary.error is not None:
            LOG.error("Sweep member %s=%s failed: %s", axis.label, value_label(summary.value),
                      summary.error)
    return SweepReport(axis=axis, values=coerced, summaries=summaries)


def run_member(config: SimulationConfig,
               axis: SweepAxis,
               value: Union[int, float],
               member_dir: Optional[Path] = None) -> SweepSummary:
    try:
        validated = validate(with_overrides(config, {axis.path: value}))
        field = solve_field(validated)
        output = run_pulses(validated, field)
        if member_dir is not None:
            write_run(output, member_dir)
    except RevepException as revep_exception:
        return SweepSummary(value=value, error=str(revep_exception))

    cfg = validated.config
    final = output.final_state
    x = np.arange(cfg.grid.nx) * cfg.grid.dx
    y = np.full_like(x, 0.5 * cfg.tissue.length)
    transect_c_re = bilinear(final.c_re.values, cfg.grid.dx, cfg.grid.dy, x, y)
    transect_c_e = bilinear(final.c_e.values, cfg.grid.dx, cfg.grid.dy, x, y)
    ledger = output.ledger
    try:
        cov = uniformity(final.c_re)
    except RevepException:
        cov = float("nan")
    return SweepSummary(value=value,
                        ecs_mass=float(ledger.ecs_mass[-1]),
                        ics_mass=float(ledger.ics_mass[-1]),
                        boundary_loss=float(ledger.boundary_loss[-1]),
                        cov=cov,
                        probe_series=tuple(output.probe_series),
                        transect_x=x,
                        transect_c_re=transect_c_re,
                        transect_c_e=transect_c_e)
