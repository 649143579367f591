import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def scenarios_dir():
    return ROOT / "scenarios"


@pytest.fixture
def golden_dir():
    return ROOT / "tests" / "golden"
