import platform
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .config import Point, ValidatedConfig
from .grid import ScalarField2D
from .ledger import MassLedger
from .membrane import MembraneState

if TYPE_CHECKING:
    from .field_solver import FieldSolution
    from .transport import ConcentrationState


@dataclass(frozen=True)
class ProbeSeries:
    point: Point  # (x, y) in mm
    times: np.ndarray  # s
    c_e: np.ndarray  # a.u.
    c_re: np.ndarray  # a.u.

    @property
    def peak_c_e(self) -> float:
        return float(np.max(self.c_e))


@dataclass(frozen=True)
class Snapshot:
    requested_time: float  # s
    time: float  # s, first step end at or after the requested time
    c_e: ScalarField2D
    c_re: ScalarField2D
    cycle_end: bool = False


@dataclass(frozen=True)
class RunOutput:
    config: ValidatedConfig
    manifest: Dict[str, Any]
    probe_series: List[ProbeSeries]
    snapshots: List[Snapshot]
    ledger: MassLedger
    final_state: "ConcentrationState"
    membrane: MembraneState
    field_export: Optional["FieldSolution"] = None
    # dt above the diffusion bound, or a step that is not positivity-preserving
    unstable: bool = False


def build_manifest(config: ValidatedConfig,
                   membrane: MembraneState,
                   steps: int,
                   clamped_nodes: int,
                   field: Optional["FieldSolution"] = None,
                   unstable: Optional[bool] = None) -> Dict[str, Any]:
    """
    Run metadata written next to the resolved config. Nothing here depends
    on wall-clock time, so identical runs produce identical manifests.
    """
    manifest: Dict[str, Any] = {
        "revep_version": __version__,
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "seed": config.config.run.seed,
        "resealing_tau": f"{config.config.electro.resealing_tau!r} s",
        "stability_limit": f"{config.stability_limit!r} s",
        "unstable": config.unstable if unstable is None else unstable,
        "steps": steps,
        "clamped_nodes": clamped_nodes,
        "pore_fraction": membrane.pore_fraction,
        "mu0": f"{membrane.mu0!r} 1/s",
    }
    if field is not None:
        manifest["picard_iterations"] = field.picard_iterations
        manifest["field_residual"] = field.final_residual
    return manifest
