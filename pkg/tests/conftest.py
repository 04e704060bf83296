from pathlib import Path

import pytest

from revep.config import SimulationConfig, with_overrides
from revep.config_file import dump_config


@pytest.fixture
def reference_config() -> SimulationConfig:
    return SimulationConfig()


@pytest.fixture
def coarse_config() -> SimulationConfig:
    """
    Reference parameters on 51x51 nodes (dx = 0.02 mm, stability limit 0.1 s).
    """
    return with_overrides(SimulationConfig(), {
        "grid.nx": 51,
        "grid.ny": 51,
        "grid.dx": 0.02,
        "grid.dy": 0.02,
        "grid.dt": 0.08,
    })


@pytest.fixture
def short_config(coarse_config: SimulationConfig) -> SimulationConfig:
    """
    Coarse grid with two short pulses.
    """
    return with_overrides(coarse_config, {
        "pulses.pulse_count": 2,
        "pulses.off_time": 10.0,
    })


@pytest.fixture
def short_config_file(tmp_path: Path, short_config: SimulationConfig) -> Path:
    config_path = tmp_path / "short.toml"
    dump_config(short_config, config_path)
    return config_path
