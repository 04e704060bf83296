import numpy as np

from revep.config import PulseSchedule, SimulationConfig, validate, with_overrides
from revep.field_solver import FieldSolution, solve_field
from revep.grid import Quantity, ScalarField2D
from revep.transport import ConcentrationState


def field_for(config: SimulationConfig) -> FieldSolution:
    return solve_field(validate(config))


def uniform_state(nx: int, ny: int, dx: float, dy: float, c_e: float,
                  c_re: float = 0.0) -> ConcentrationState:
    return state_from(np.full((ny, nx), c_e), np.full((ny, nx), c_re), dx, dy)


def state_from(c_e: np.ndarray, c_re: np.ndarray, dx: float,
               dy: float) -> ConcentrationState:
    ny, nx = c_e.shape
    return ConcentrationState(
        c_e=ScalarField2D(nx, ny, dx, dy, np.array(c_e, dtype=float),
                          Quantity.CONCENTRATION),
        c_re=ScalarField2D(nx, ny, dx, dy, np.array(c_re, dtype=float),
                           Quantity.CONCENTRATION))


def small_config(n: int = 5,
                 schedule: PulseSchedule = PulseSchedule(1, 1e-3, 100.0),
                 dt: float = 0.02) -> SimulationConfig:
    """
    n x n nodes over the default 1 mm square.
    """
    spacing = 1.0 / (n - 1)
    return with_overrides(SimulationConfig(), {
        "grid.nx": n,
        "grid.ny": n,
        "grid.dx": spacing,
        "grid.dy": spacing,
        "grid.dt": dt,
        "pulses.pulse_count": schedule.pulse_count,
        "pulses.on_time": schedule.on_time,
        "pulses.off_time": schedule.off_time,
    })
