from pathlib import Path

import pytest

from revep.config import SimulationConfig, with_overrides
from revep.config_file import (config_to_dict, dump_config, dumps_config, load_config,
                               load_default_config, loads_config, parse_quantity)
from revep.errors import ConfigFileError


def test_default_resource_matches_defaults() -> None:
    assert load_default_config() == SimulationConfig()


def test_units_are_converted() -> None:
    config = loads_config("""
[tissue]
cell_radius = "50 um"

[pulses]
on_time = "1 ms"
off_time = "2 min"

[drug]
diffusivity = "1e-9 m^2/s"
""")
    assert config.tissue.cell_radius == pytest.approx(0.05, rel=1e-12)
    assert config.pulses.on_time == pytest.approx(1e-3, rel=1e-12)
    assert config.pulses.off_time == pytest.approx(120.0, rel=1e-12)
    assert config.drug.diffusivity == pytest.approx(1e-3, rel=1e-12)
    # Everything not listed keeps its default
    assert config.grid == SimulationConfig().grid


def test_same_unit_is_taken_verbatim() -> None:
    assert parse_quantity("grid.dx", "0.01 mm", "mm") == 0.01
    assert parse_quantity("boundary.beta", "0.1 mm^-1", "mm^-1") == 0.1


@pytest.mark.parametrize("text", [
    "[tissue]\nlength = 1\n",
    "[tissue]\nlength = \"1\"\n",
    "[tissue]\nlength = \"1 s\"\n",
    "[tissue]\nlength = \"1 parsec_per_fortnight\"\n",
    "[tissue]\nlength = \"one mm\"\n",
    "[tissue]\nradius = \"1 mm\"\n",
    "[tissues]\nlength = \"1 mm\"\n",
    "[grid]\nnx = 10.5\n",
    "[boundary]\nliteral_robin = 1\n",
    "[output]\nprobes = [[\"0.5 mm\"]]\n",
    "[tissue\nlength = \"1 mm\"\n",
])
def test_malformed_files_are_rejected(text: str) -> None:
    with pytest.raises(ConfigFileError):
        loads_config(text)


def test_round_trip_is_exact(short_config: SimulationConfig) -> None:
    config = with_overrides(short_config, {
        "output.probes": ((0.25, 0.75), (0.5, 0.5)),
        "output.snapshot_times": (0.0, 12.5),
        "drug.diffusivity": 1.0 / 3.0 * 1e-3,
    })
    assert loads_config(dumps_config(config)) == config


def test_manifest_table_is_ignored_on_load(tmp_path: Path,
                                          short_config: SimulationConfig) -> None:
    path = tmp_path / "manifest.toml"
    dump_config(short_config, path, {"steps": 12, "revep_version": "0.1.0"})
    assert "[manifest]" in path.read_text(encoding="utf-8")
    assert load_config(path) == short_config


def test_dict_has_explicit_units() -> None:
    data = config_to_dict(SimulationConfig())
    assert data["tissue"]["length"] == "1.0 mm"
    assert data["grid"]["dt"] == "0.02 s"
    assert data["tissue"]["porosity"] == 0.18
    assert data["grid"]["nx"] == 101


def test_missing_file_raises_os_error(tmp_path: Path) -> None:
    with pytest.raises(OSError):
        load_config(tmp_path / "absent.toml")
