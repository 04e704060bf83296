"""
Coupled extracellular (C_E) / intracellular (C_RE) drug transport.

C_E diffuses with drug loss through Robin faces and exchanges with C_RE at
the mass-transfer rate mu(t). Both are advanced with the explicit FTCS
scheme; the pulse schedule drives the resealing clock.
"""
import functools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import Point, SimulationConfig, ValidatedConfig, validate
from .errors import ConservationViolation, SnapshotTimeOutOfRange, StabilityViolation
from .field_solver import FieldSolution
from .grid import Quantity, ScalarField2D, bilinear, trapezoid_weights
from .ledger import LedgerRecorder
from .membrane import MembraneState, MtcParams, mtc, pore_fraction
from .pulses import ScheduledStep, iter_schedule, step_counts
from .run_output import ProbeSeries, RunOutput, Snapshot, build_manifest

LOG = logging.getLogger(__name__)

# Rounding noise below zero is clamped; anything lower is an instability
NEGATIVE_TOLERANCE = 1e-13
# A mu map this uniform (relative spread) is replaced by its mean
UNIFORM_RTOL = 1e-9
TIME_RTOL = 1e-12

MuValue = Union[float, np.ndarray]


@dataclass(frozen=True)
class ConcentrationState:
    c_e: ScalarField2D
    c_re: ScalarField2D
    time: float = 0.0  # s
    pulse_index: int = 0
    reseal_clock: float = 0.0  # s


@dataclass(frozen=True)
class StepCoefficients:
    a: float  # D dt / dx^2
    c: float  # D dt / dy^2
    b: MuValue
    d: MuValue
    dt: float  # s

    @classmethod
    def build(cls, dx: float, dy: float, dt: float, diffusivity: float,
              porosity: float, mu: MuValue) -> "StepCoefficients":
        exchange = (1.0 - porosity) / porosity * mu
        b = 1.0 - (2.0 * diffusivity * (1.0 / (dx * dx) + 1.0 /
                                         (dy * dy)) + exchange) * dt
        return cls(a=diffusivity * dt / (dx * dx),
                   c=diffusivity * dt / (dy * dy),
                   b=b,
                   d=exchange * dt,
                   dt=dt)

    def positivity_problem(self, mu: MuValue) -> Optional[str]:
        """
        Why this step can drive a non-negative state negative, or None. `mu`
        must be the coefficient the step was built with.
        """
        lowest_b = float(np.min(self.b))
        if not lowest_b > 0:
            return f"FTCS centre coefficient b = {lowest_b:.6g} is not positive at dt = {self.dt:g} s"
        mu_dt = float(np.max(mu)) * self.dt
        if mu_dt > 1:
            return f"exchange factor mu*dt = {mu_dt:.6g} exceeds 1 at dt = {self.dt:g} s"
        return None


def step_coefficients(config: Union[SimulationConfig, ValidatedConfig],
                      dt: float, mu: MuValue) -> StepCoefficients:
    grid = config.grid
    return StepCoefficients.build(grid.dx, grid.dy, dt, config.drug.diffusivity,
                                  config.tissue.porosity, mu)


def face_signs(literal_robin: bool) -> Tuple[float, float, float, float]:
    """
    Per-face sign of the Robin term for the faces x=0, x=L, y=0, y=L. +1
    removes drug through the face. The literal variant applies dC/dx = beta*C
    and dC/dy = beta*C on both opposite faces, so the far faces gain.
    """
    if literal_robin:
        return (1.0, -1.0, 1.0, -1.0)
    return (1.0, 1.0, 1.0, 1.0)


class FtcsKernel:
    """
    Preallocated FTCS stepper. The ghost-padded C_E buffer is reused on every
    step and results alternate between two output buffer pairs, so an input
    is never overwritten by the step that reads it.
    """

    def __init__(self,
                 nx: int,
                 ny: int,
                 dx: float,
                 dy: float,
                 beta: float,
                 literal_robin: bool = False) -> None:
        self.shape = (ny, nx)
        west, east, south, north = face_signs(literal_robin)
        # ghost = inner - factor * boundary
        self._factors = (2.0 * dx * beta * west, 2.0 * dx * beta * east,
                         2.0 * dy * beta * south, 2.0 * dy * beta * north)
        self._padded = np.zeros((ny + 2, nx + 2))
        self._outputs = [(np.empty(self.shape), np.empty(self.shape)),
                         (np.empty(self.shape), np.empty(self.shape))]
        self._slot = 0

    def step(self, c_e: np.ndarray, c_re: np.ndarray, mu_dt: MuValue,
             coeffs: StepCoefficients) -> Tuple[np.ndarray, np.ndarray]:
        padded = self._padded
        f_west, f_east, f_south, f_north = self._factors
        padded[1:-1, 1:-1] = c_e
        padded[1:-1, 0] = c_e[:, 1] - f_west * c_e[:, 0]
        padded[1:-1, -1] = c_e[:, -2] - f_east * c_e[:, -1]
        padded[0, 1:-1] = c_e[1, :] - f_south * c_e[0, :]
        padded[-1, 1:-1] = c_e[-2, :] - f_north * c_e[-1, :]

        c_e_next, c_re_next = self._outputs[self._slot]
        self._slot ^= 1
        c_e_next[...] = (coeffs.a * (padded[1:-1, 2:] + padded[1:-1, :-2]) +
                         coeffs.c * (padded[2:, 1:-1] + padded[:-2, 1:-1]) +
                         coeffs.b * c_e + coeffs.d * c_re)
        c_re_next[...] = c_re + mu_dt * (c_e - c_re)
        return c_e_next, c_re_next


def init_concentration(
        config: Union[SimulationConfig, ValidatedConfig]) -> ConcentrationState:
    """
    Gaussian-regularised point injection on the node column nearest the
    injection centre (x=0 by default); C_RE starts empty.
    """
    cfg = validate(config).config
    grid, drug = cfg.grid, cfg.drug
    width = drug.delta_width * cfg.tissue.length
    x_center, y_center = drug.injection_center
    y = np.arange(grid.ny) * grid.dy

    c_e = np.zeros((grid.ny, grid.nx))
    column = min(int(round(x_center / grid.dx)), grid.nx - 1)
    c_e[:, column] = drug.dose / (width * math.sqrt(math.pi)) * np.exp(
        -((y - y_center) / width)**2)
    return ConcentrationState(
        c_e=ScalarField2D(grid.nx, grid.ny, grid.dx, grid.dy, c_e,
                          Quantity.CONCENTRATION),
        c_re=ScalarField2D(grid.nx, grid.ny, grid.dx, grid.dy,
                           np.zeros_like(c_e), Quantity.CONCENTRATION))


def ftcs_step(state: ConcentrationState,
              mu_now: MuValue,
              coeffs: StepCoefficients,
              beta: float,
              literal_robin: bool = False) -> ConcentrationState:
    """
    One explicit step of both compartments. The state's time advances by
    `coeffs.dt`; the resealing clock belongs to the scheduler and is kept.
    """
    field = state.c_e
    kernel = FtcsKernel(field.nx, field.ny, field.dx, field.dy, beta,
                        literal_robin)
    c_e, c_re = kernel.step(field.values, state.c_re.values,
                            mu_now * coeffs.dt, coeffs)
    clamp_negatives(c_e)
    clamp_negatives(c_re)
    return ConcentrationState(c_e=field.like(c_e),
                              c_re=state.c_re.like(c_re),
                              time=state.time + coeffs.dt,
                              pulse_index=state.pulse_index,
                              reseal_clock=state.reseal_clock)


def boundary_flux(c_e: np.ndarray, config: Union[SimulationConfig,
                                                 ValidatedConfig],
                  dt: float) -> float:
    """
    ECS mass leaving through the Robin faces during one step of length `dt`,
    evaluated on the state at the start of the step. Negative when the
    literal variant gains more than it loses.
    """
    grid, beta = config.grid, config.boundary.beta
    if beta == 0:
        return 0.0
    west, east, south, north = face_signs(config.boundary.literal_robin)
    wx = edge_weights(grid.nx, grid.dx)
    wy = edge_weights(grid.ny, grid.dy)
    face_sum = (west * float(wy @ c_e[:, 0]) + east * float(wy @ c_e[:, -1]) +
                south * float(wx @ c_e[0, :]) + north * float(wx @ c_e[-1, :]))
    return (config.tissue.porosity * config.drug.diffusivity * beta * dt *
            face_sum)


@functools.lru_cache(maxsize=8)
def edge_weights(n: int, spacing: float) -> np.ndarray:
    """
    Trapezoid weights along one edge, built once per grid and read-only.
    """
    weights = trapezoid_weights(n, spacing)
    weights.flags.writeable = False
    return weights


def clamp_negatives(values: np.ndarray) -> Optional[np.ndarray]:
    """
    Raise rounding-level negatives to zero in place and return the amounts
    added (None when nothing was clamped).
    """
    lowest = values.min()
    if lowest >= 0:
        return None
    if not lowest >= -NEGATIVE_TOLERANCE:
        raise StabilityViolation(
            f"concentration reached {lowest:.6g} (below -{NEGATIVE_TOLERANCE:g})")
    negative = values < 0
    deficit = np.where(negative, -values, 0.0)
    values[negative] = 0.0
    return deficit


def probe(state: ConcentrationState, point: Point) -> Tuple[float, float]:
    x, y = point
    return state.c_e.at(x, y), state.c_re.at(x, y)


def mu0_map(config: Union[SimulationConfig, ValidatedConfig],
            field: FieldSolution) -> Tuple[MuValue, float]:
    """
    Mass-transfer coefficient at resealing-clock zero from the solved field,
    with the mean pore fraction. Uniform maps collapse to a scalar.
    """
    cfg = validate(config).config
    fp = pore_fraction(field.e_mag.values, cfg.electro)
    mu0 = mtc(0.0, fp, MtcParams.from_params(cfg.tissue, cfg.drug, cfg.electro))
    return collapse_uniform(mu0), float(np.mean(fp))


def collapse_uniform(values: MuValue) -> MuValue:
    if np.ndim(values) == 0:
        return float(values)
    high = float(np.max(values))
    low = float(np.min(values))
    if high - low <= UNIFORM_RTOL * max(abs(high), abs(low)):
        return float(np.mean(values))
    return values


def run_pulses(config: Union[SimulationConfig, ValidatedConfig],
               field: FieldSolution,
               mu0_override: Optional[MuValue] = None) -> RunOutput:
    """
    Integrate the whole pulse schedule. `mu0_override` replaces the
    mass-transfer prefactor derived from the field.
    """
    validated = validate(config)
    transport = PulseTransport(validated, field, mu0_override)
    return transport.run()


class PulseTransport:
    """
    One simulation run. Owns the kernel, ledger, probe and snapshot
    recorders; nothing is shared with other runs.
    """

    def __init__(self,
                 config: ValidatedConfig,
                 field: FieldSolution,
                 mu0_override: Optional[MuValue] = None,
                 initial: Optional[ConcentrationState] = None) -> None:
        self.config = config
        self.field = field
        self.initial = initial
        cfg = config.config
        total_time = cfg.pulses.total_time
        late = [t for t in cfg.snapshot_times if t > total_time * (1 + TIME_RTOL)]
        if late:
            raise SnapshotTimeOutOfRange(
                f"snapshot times {late} exceed the simulated time {total_time:g} s")

        mu0, fp_mean = mu0_map(config, field)
        if mu0_override is not None:
            if np.any(np.asarray(mu0_override) < 0):
                raise ValueError("mu0 override must be >= 0")
            mu0 = collapse_uniform(mu0_override)
        self.mu0 = mu0
        self.membrane = MembraneState(pore_fraction=fp_mean,
                                      mu0=float(np.mean(mu0)),
                                      resealing_tau=cfg.electro.resealing_tau)
        self.unstable = self._check_positivity()
        grid = cfg.grid
        self.kernel = FtcsKernel(grid.nx, grid.ny, grid.dx, grid.dy,
                                 cfg.boundary.beta, cfg.boundary.literal_robin)
        self.ledger = LedgerRecorder(grid.nx, grid.ny, grid.dx, grid.dy,
                                     cfg.tissue.porosity)
        self.probes = _ProbeRecorder(cfg.probes, cfg.output.probe_stride, grid.dx,
                                     grid.dy)
        self.snapshots = _SnapshotRecorder(cfg.snapshot_times,
                                           cfg.output.snapshot_every_cycle,
                                           grid.dx, grid.dy)
        self.clamped_nodes = 0

    def _check_positivity(self) -> bool:
        """
        Check the ON and OFF steps at the largest mu (mu0, before any decay).
        Returns whether the run is tagged unstable.
        """
        cfg = self.config.config
        grid, pulses = cfg.grid, cfg.pulses
        n_on, n_off = step_counts(pulses, grid.dt)
        problems = []
        for dt in (pulses.on_time / n_on, pulses.off_time / n_off):
            problem = step_coefficients(cfg, dt, self.mu0).positivity_problem(self.mu0)
            if problem is not None and problem not in problems:
                problems.append(problem)
        if not problems:
            return self.config.unstable
        if not cfg.run.allow_unstable:
            raise StabilityViolation("; ".join(problems))
        LOG.warning("%s; outputs will be tagged unstable", "; ".join(problems))
        return True

    def run(self) -> RunOutput:
        cfg = self.config.config
        LOG.info("Running %d pulse(s): t_ep=%g s, t_M=%g s, dt=%g s, tau=%g s, mu0=%.6g 1/s",
                 cfg.pulses.pulse_count, cfg.pulses.on_time, cfg.pulses.off_time,
                 cfg.grid.dt, cfg.electro.resealing_tau, self.membrane.mu0)

        state = self.initial if self.initial is not None else init_concentration(self.config)
        c_e = state.c_e.values
        c_re = state.c_re.values
        self.ledger.record(0.0, c_e, c_re)
        self.probes.record(0.0, c_e, c_re)
        self.snapshots.initial(c_e, c_re)

        steps = 0
        last_step: Optional[ScheduledStep] = None
        for step in iter_schedule(cfg.pulses, cfg.grid.dt):
            c_e, c_re = self._advance(step, c_e, c_re)
            steps += 1
            last_step = step
            self.probes.after_step(step.end, c_e, c_re)
            self.snapshots.after_step(step, c_e, c_re)
            if step.last_in_cycle:
                LOG.debug("Pulse cycle %d/%d done at t=%g s", step.cycle + 1,
                          cfg.pulses.pulse_count, step.end)
        assert last_step is not None
        self.probes.finish(last_step.end, c_e, c_re)

        if self.clamped_nodes:
            LOG.warning("Clamped %d slightly negative node value(s) to zero",
                        self.clamped_nodes)
        ledger = self.ledger.finish()
        if ledger.max_residual > cfg.run.conservation_tol:
            raise ConservationViolation(
                f"ledger residual {ledger.max_residual:.3e} exceeds {cfg.run.conservation_tol:g}")
        LOG.info("Done after %d steps: ECS mass %.6g, ICS mass %.6g, boundary loss %.6g",
                 steps, ledger.ecs_mass[-1], ledger.ics_mass[-1],
                 ledger.boundary_loss[-1])

        grid = cfg.grid
        final_state = ConcentrationState(
            c_e=ScalarField2D(grid.nx, grid.ny, grid.dx, grid.dy, c_e.copy(),
                              Quantity.CONCENTRATION),
            c_re=ScalarField2D(grid.nx, grid.ny, grid.dx, grid.dy, c_re.copy(),
                               Quantity.CONCENTRATION),
            time=last_step.end,
            pulse_index=last_step.cycle,
            reseal_clock=last_step.clock + last_step.dt)
        export = self.field if cfg.output.export_field else None
        return RunOutput(config=self.config,
                         manifest=build_manifest(self.config, self.membrane,
                                                 steps, self.clamped_nodes,
                                                 self.field, self.unstable),
                         probe_series=self.probes.series(),
                         snapshots=self.snapshots.snapshots,
                         ledger=ledger,
                         final_state=final_state,
                         membrane=self.membrane,
                         field_export=export,
                         unstable=self.unstable)

    def _advance(self, step: ScheduledStep, c_e: np.ndarray,
                 c_re: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        cfg = self.config.config
        # mu is frozen at the start of the step (forward Euler)
        mu = self.mu0 * self.membrane.decay(step.clock)
        coeffs = step_coefficients(cfg, step.dt, mu)
        loss = boundary_flux(c_e, cfg, step.dt)
        c_e, c_re = self.kernel.step(c_e, c_re, mu * step.dt, coeffs)

        gain = 0.0
        deficits = (clamp_negatives(c_e), clamp_negatives(c_re))
        if deficits[0] is not None or deficits[1] is not None:
            zeros = np.zeros_like(c_e)
            deficit_e = zeros if deficits[0] is None else deficits[0]
            deficit_re = zeros if deficits[1] is None else deficits[1]
            self.clamped_nodes += int(np.count_nonzero(deficit_e) +
                                      np.count_nonzero(deficit_re))
            gain = sum(self.ledger.masses(deficit_e, deficit_re))
        self.ledger.record(step.end, c_e, c_re, loss, gain)
        return c_e, c_re


class _ProbeRecorder:

    def __init__(self, points: Sequence[Point], stride: float, dx: float,
                 dy: float) -> None:
        self.points = list(points)
        self._xs = np.array([p[0] for p in self.points], dtype=float)
        self._ys = np.array([p[1] for p in self.points], dtype=float)
        self.stride = stride
        self.dx = dx
        self.dy = dy
        self._rows: List[List[Tuple[float, float, float]]] = [[] for _ in self.points]
        self._last_time = -math.inf
        self._next_index = 1

    def record(self, time: float, c_e: np.ndarray, c_re: np.ndarray) -> None:
        if self.points:
            at_e = bilinear(c_e, self.dx, self.dy, self._xs, self._ys)
            at_re = bilinear(c_re, self.dx, self.dy, self._xs, self._ys)
            for rows, value_e, value_re in zip(self._rows, at_e, at_re):
                rows.append((time, float(value_e), float(value_re)))
        self._last_time = time

    def after_step(self, time: float, c_e: np.ndarray,
                   c_re: np.ndarray) -> None:
        if time >= self._next_index * self.stride * (1 - TIME_RTOL):
            self.record(time, c_e, c_re)
            self._next_index = int(math.floor(time / self.stride *
                                              (1 + TIME_RTOL))) + 1

    def finish(self, time: float, c_e: np.ndarray, c_re: np.ndarray) -> None:
        if self._last_time != time:
            self.record(time, c_e, c_re)

    def series(self) -> List[ProbeSeries]:
        result = []
        for point, rows in zip(self.points, self._rows):
            times, c_e, c_re = np.array(rows, dtype=float).reshape(-1, 3).T
            result.append(
                ProbeSeries(point=tuple(point),
                            times=times.copy(),
                            c_e=c_e.copy(),
                            c_re=c_re.copy()))
        return result


class _SnapshotRecorder:

    def __init__(self, times: Sequence[float], every_cycle: bool, dx: float,
                 dy: float) -> None:
        self._pending = sorted(times)
        self.every_cycle = every_cycle
        self.dx = dx
        self.dy = dy
        self.snapshots: List[Snapshot] = []

    def initial(self, c_e: np.ndarray, c_re: np.ndarray) -> None:
        while self._pending and self._pending[0] <= 0:
            self._take(self._pending.pop(0), 0.0, c_e, c_re, False)

    def after_step(self, step: ScheduledStep, c_e: np.ndarray,
                   c_re: np.ndarray) -> None:
        while self._pending and step.end >= self._pending[0] * (1 - TIME_RTOL):
            self._take(self._pending.pop(0), step.end, c_e, c_re, False)
        if self.every_cycle and step.last_in_cycle:
            self._take(step.end, step.end, c_e, c_re, True)

    def _take(self, requested: float, time: float, c_e: np.ndarray,
              c_re: np.ndarray, cycle_end: bool) -> None:
        ny, nx = c_e.shape
        LOG.debug("Snapshot at t=%g s (requested %g s)", time, requested)
        self.snapshots.append(
            Snapshot(requested_time=requested,
                     time=time,
                     c_e=ScalarField2D(nx, ny, self.dx, self.dy, c_e.copy(),
                                       Quantity.CONCENTRATION),
                     c_re=ScalarField2D(nx, ny, self.dx, self.dy, c_re.copy(),
                                        Quantity.CONCENTRATION),
                     cycle_end=cycle_end))
