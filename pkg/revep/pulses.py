"""
Pulse timeline. Each cycle is an ON interval (field applied, pores held open,
resealing clock pinned at 0) followed by an OFF interval during which the
clock runs and the mass-transfer coefficient decays.
"""
import enum
import math
from dataclasses import dataclass
from typing import Iterator, Tuple

from .config import PulseSchedule

# Interval/dt ratios this close to an integer are treated as that integer
STEP_COUNT_RTOL = 1e-9


class Phase(enum.Enum):
    ON = "on"
    OFF = "off"


@dataclass(frozen=True)
class ScheduledStep:
    cycle: int  # 0-based pulse index
    phase: Phase
    dt: float  # s
    start: float  # s
    end: float  # s
    clock: float  # resealing clock at the start of the step, s
    last_in_cycle: bool


def step_counts(schedule: PulseSchedule, dt: float) -> Tuple[int, int]:
    """
    Number of (equal) steps in the ON and OFF intervals of one cycle.
    """
    return _step_count(schedule.on_time, dt), _step_count(schedule.off_time, dt)


def iter_schedule(schedule: PulseSchedule, dt: float) -> Iterator[ScheduledStep]:
    """
    Walk the whole schedule. Step lengths never exceed `dt`; end times are
    computed from cycle offsets so they do not accumulate rounding.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_on, n_off = step_counts(schedule, dt)
    dt_on = schedule.on_time / n_on
    dt_off = schedule.off_time / n_off
    cycle_time = schedule.cycle_time

    for cycle in range(schedule.pulse_count):
        cycle_start = cycle * cycle_time
        for k in range(n_on):
            yield ScheduledStep(cycle=cycle,
                                phase=Phase.ON,
                                dt=dt_on,
                                start=cycle_start + k * dt_on,
                                end=cycle_start + (k + 1) * dt_on,
                                clock=0.0,
                                last_in_cycle=False)
        off_start = cycle_start + schedule.on_time
        for k in range(n_off):
            last = k == n_off - 1
            end = (cycle + 1) * cycle_time if last else off_start + (k + 1) * dt_off
            yield ScheduledStep(cycle=cycle,
                                phase=Phase.OFF,
                                dt=dt_off,
                                start=off_start + k * dt_off,
                                end=end,
                                clock=k * dt_off,
                                last_in_cycle=last)


def total_steps(schedule: PulseSchedule, dt: float) -> int:
    n_on, n_off = step_counts(schedule, dt)
    return schedule.pulse_count * (n_on + n_off)


def _step_count(interval: float, dt: float) -> int:
    ratio = interval / dt
    count = max(1, math.ceil(ratio))
    if count > 1 and abs(ratio - (count - 1)) <= STEP_COUNT_RTOL * ratio:
        count -= 1
    return count
