from __future__ import annotations

from pathlib import Path

import pytest
import yaml
from hypothesis import settings

from lpbf_defects import DefectLabels, ProcessParameters, Record
from lpbf_defects.core import Split

# property tests do real work per example; wall-clock deadlines only add flake
settings.register_profile("toolkit", deadline=None)
settings.load_profile("toolkit")

DATA_DIR = Path(__file__).parent / "data"

FIXTURE_COLUMNS = {
    "Material": "material",
    "Power (W)": "power",
    "Velocity (mm/s)": "velocity",
    "Beam Diameter (um)": "beam_diameter",
    "Hatch Spacing (um)": "hatch_spacing",
    "Layer Height (um)": "layer_height",
    "Width (um)": "width",
    "Depth (um)": "depth",
    "Length (um)": "length",
}


@pytest.fixture
def geometry_fixture() -> Path:
    return DATA_DIR / "geometry_200.csv"


def no_defect() -> DefectLabels:
    return DefectLabels.from_flags(False, False, False)


def make_record(i: int, split: Split = Split.UNASSIGNED, **params) -> Record:
    defaults = dict(material="SS316L", power=200.0, velocity=500.0)
    defaults.update(params)
    return Record(
        id=f"rec-{i:05d}",
        params=ProcessParameters(**defaults),
        labels=no_defect(),
        split=split,
    )


def write_pipeline_config(
    tmp_path: Path,
    *,
    source_path: Path,
    grid: dict | None = None,
    seed: int = 42,
    k: int = 5,
    out_name: str = "out",
) -> Path:
    config = {
        "output_dir": out_name,
        "k": k,
        "sources": [
            {
                "name": "geometry_main",
                "path": str(source_path),
                "kind": "geometry",
                "columns": dict(FIXTURE_COLUMNS),
                "units": {"Power (W)": "W", "Velocity (mm/s)": "mm/s"},
            }
        ],
        "augment": grid or {"hatch_values": [0, 400], "layer_values": [0, 400]},
        "split": {"seed": seed},
    }
    path = tmp_path / "pipeline.yaml"
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return path
