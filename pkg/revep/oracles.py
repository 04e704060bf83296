"""
Independent reference computations used to check the transport solver: the
closed-form well-mixed solution, a naive index-by-index stepper, the
comparison with the Kalamiza mass-transfer model and a uniformity metric.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .config import PulseSchedule
from .errors import DegenerateField
from .grid import ScalarField2D
from .membrane import KalamizaParams, MtcParams, mtc, mtc_kalamiza
from .transport import ConcentrationState, MuValue, StepCoefficients, face_signs

LOG = logging.getLogger(__name__)

ArrayOrFloat = Union[float, np.ndarray]


@dataclass(frozen=True)
class WellMixedSolution:
    """
    Spatially uniform two-compartment system: the difference C_E - C_RE
    decays with the integrated mass-transfer coefficient while the
    porosity-weighted mean stays fixed.
    """
    porosity: float
    mu0: float  # 1/s
    resealing_tau: float  # s
    c_e0: float
    c_re0: float

    def __post_init__(self) -> None:
        if not 0 < self.porosity < 1:
            raise ValueError("porosity must be in (0,1)")

    @property
    def mean(self) -> float:
        return self.porosity * self.c_e0 + (1.0 - self.porosity) * self.c_re0

    def from_integrated_mu(
            self, integrated: ArrayOrFloat) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
        gap = (self.c_e0 - self.c_re0) * np.exp(-integrated / self.porosity)
        return (self.mean + (1.0 - self.porosity) * gap,
                self.mean - self.porosity * gap)

    def c_e(self, t: ArrayOrFloat) -> ArrayOrFloat:
        return well_mixed_closed_form(self, t)[0]

    def c_re(self, t: ArrayOrFloat) -> ArrayOrFloat:
        return well_mixed_closed_form(self, t)[1]


def well_mixed_closed_form(
        p: WellMixedSolution, t: ArrayOrFloat) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """
    (C_E, C_RE) at resealing-clock time `t` for a single decay segment.
    """
    integrated = p.mu0 * p.resealing_tau * (1.0 - np.exp(-np.asarray(t, dtype=float) /
                                                         p.resealing_tau))
    c_e, c_re = p.from_integrated_mu(integrated)
    if np.ndim(t) == 0:
        return float(c_e), float(c_re)
    return c_e, c_re


def well_mixed_schedule(
        p: WellMixedSolution, schedule: PulseSchedule,
        times: ArrayOrFloat) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """
    Closed form chained across a multi-pulse schedule: mu is held at mu0
    during each ON interval and decays from the end of the pulse during OFF.
    """
    t = np.asarray(times, dtype=float)
    tau = p.resealing_tau
    per_cycle = p.mu0 * schedule.on_time + p.mu0 * tau * (
        1.0 - math.exp(-schedule.off_time / tau))
    cycle = np.minimum(np.floor(t / schedule.cycle_time),
                       schedule.pulse_count - 1)
    local = t - cycle * schedule.cycle_time
    since_pulse = np.maximum(local - schedule.on_time, 0.0)
    integrated = (cycle * per_cycle + p.mu0 * np.minimum(local, schedule.on_time) +
                  p.mu0 * tau * (1.0 - np.exp(-since_pulse / tau)))
    c_e, c_re = p.from_integrated_mu(integrated)
    if np.ndim(times) == 0:
        return float(c_e), float(c_re)
    return c_e, c_re


def brute_force_step(state: ConcentrationState,
                     mu_now: MuValue,
                     coeffs: StepCoefficients,
                     beta: float,
                     literal_robin: bool = False) -> ConcentrationState:
    """
    Reference FTCS step, one node at a time, with mirror ghosts on the
    Robin faces. Meant for grids up to about 11x11.
    """
    c_e = state.c_e.values
    c_re = state.c_re.values
    ny, nx = c_e.shape
    dx, dy = state.c_e.dx, state.c_e.dy
    s_west, s_east, s_south, s_north = face_signs(literal_robin)
    b_map = np.broadcast_to(coeffs.b, (ny, nx))
    d_map = np.broadcast_to(coeffs.d, (ny, nx))
    mu_dt_map = np.broadcast_to(mu_now * coeffs.dt, (ny, nx))

    new_e = np.zeros((ny, nx))
    new_re = np.zeros((ny, nx))
    for j in range(ny):
        for i in range(nx):
            centre = float(c_e[j, i])
            if i > 0:
                west = float(c_e[j, i - 1])
            else:
                west = float(c_e[j, 1]) - 2.0 * dx * beta * s_west * centre
            if i < nx - 1:
                east = float(c_e[j, i + 1])
            else:
                east = float(c_e[j, nx - 2]) - 2.0 * dx * beta * s_east * centre
            if j > 0:
                south = float(c_e[j - 1, i])
            else:
                south = float(c_e[1, i]) - 2.0 * dy * beta * s_south * centre
            if j < ny - 1:
                north = float(c_e[j + 1, i])
            else:
                north = float(c_e[ny - 2, i]) - 2.0 * dy * beta * s_north * centre

            cre = float(c_re[j, i])
            new_e[j, i] = (coeffs.a * (east + west) + coeffs.c * (north + south) +
                           float(b_map[j, i]) * centre + float(d_map[j, i]) * cre)
            new_re[j, i] = cre + float(mu_dt_map[j, i]) * (centre - cre)

    return ConcentrationState(c_e=state.c_e.like(new_e),
                              c_re=state.c_re.like(new_re),
                              time=state.time + coeffs.dt,
                              pulse_index=state.pulse_index,
                              reseal_clock=state.reseal_clock)


@dataclass(frozen=True)
class MtcComparison:
    times: np.ndarray  # s
    mu_model: np.ndarray  # 1/s
    mu_kalamiza: np.ndarray  # 1/s
    max_relative_gap: float
    prefactor_ratio: float


def compare_mtc_curves(model: MtcParams,
                       fp: float,
                       kalamiza: KalamizaParams,
                       horizon: float,
                       samples: int = 201) -> MtcComparison:
    """
    Sample both mass-transfer coefficients on [0, horizon]. The gap is taken
    relative to the Kalamiza curve; the ratio is model over Kalamiza at
    clock zero.
    """
    if not horizon > 0 or samples < 2:
        raise ValueError("need horizon > 0 and at least two samples")
    if model.resealing_tau != kalamiza.resealing_tau:
        LOG.debug("Comparing curves with different resealing constants (%g s vs %g s)",
                  model.resealing_tau, kalamiza.resealing_tau)
    times = np.linspace(0.0, horizon, samples)
    mu_model = mtc(times, fp, model)
    mu_kalamiza = mtc_kalamiza(times, kalamiza)
    gap = np.abs(mu_model - mu_kalamiza) / mu_kalamiza
    return MtcComparison(times=times,
                         mu_model=mu_model,
                         mu_kalamiza=mu_kalamiza,
                         max_relative_gap=float(np.max(gap)),
                         prefactor_ratio=float(mu_model[0] / mu_kalamiza[0]))


def uniformity(c_re: ScalarField2D) -> float:
    """
    Coefficient of variation (population stddev over mean) over all nodes.
    """
    values = c_re.values
    mean = float(np.mean(values))
    if mean == 0:
        raise DegenerateField("mean is zero, coefficient of variation undefined")
    return float(np.std(values) / mean)
