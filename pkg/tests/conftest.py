from pathlib import Path

import pytest

SPECS = Path(__file__).resolve().parents[1] / "demos" / "specs"


@pytest.fixture
def spec_path():
    return lambda name: str(SPECS / f"{name}.json")
