"""
Mass bookkeeping for the two compartments. Masses are control-volume
weighted sums, so the ledger closes to rounding error.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .grid import control_volume_weights

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class MassLedger:
    times: np.ndarray  # s
    ecs_mass: np.ndarray  # a.u. mm^2
    ics_mass: np.ndarray  # a.u. mm^2
    boundary_loss: np.ndarray  # cumulative, a.u. mm^2
    clamp_gain: np.ndarray  # cumulative mass added by clamping, a.u. mm^2
    residual: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    @property
    def total(self) -> np.ndarray:
        return self.ecs_mass + self.ics_mass

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual)) if len(self.residual) else 0.0


class LedgerRecorder:
    """
    Accumulates one ledger row per call to `record`. Step losses and clamp
    gains are summed here; the first record fixes the reference total.
    """

    def __init__(self, nx: int, ny: int, dx: float, dy: float,
                 porosity: float) -> None:
        self.weights = control_volume_weights(nx, ny, dx, dy)
        self.porosity = porosity
        self._rows: List[Tuple[float, float, float, float, float]] = []
        self._loss = 0.0
        self._gain = 0.0

    def masses(self, c_e: np.ndarray, c_re: np.ndarray) -> Tuple[float, float]:
        ecs = self.porosity * float(np.sum(self.weights * c_e))
        ics = (1.0 - self.porosity) * float(np.sum(self.weights * c_re))
        return ecs, ics

    def record(self,
               time: float,
               c_e: np.ndarray,
               c_re: np.ndarray,
               step_loss: float = 0.0,
               step_gain: float = 0.0) -> None:
        self._loss += step_loss
        self._gain += step_gain
        ecs, ics = self.masses(c_e, c_re)
        self._rows.append((time, ecs, ics, self._loss, self._gain))

    def finish(self) -> MassLedger:
        rows = np.array(self._rows, dtype=float).reshape(-1, 5)
        times, ecs, ics, loss, gain = rows.T
        total = ecs + ics
        total0 = total[0] if len(total) else 0.0
        drift = np.abs(total + loss - gain - total0)
        residual = drift / total0 if total0 > 0 else drift
        return MassLedger(times=times,
                          ecs_mass=ecs,
                          ics_mass=ics,
                          boundary_loss=loss,
                          clamp_gain=gain,
                          residual=residual)
