import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fontfits.data import synth_record


@pytest.fixture(scope="session")
def synth_records():
    """A small deterministic record set shared by read-only tests."""
    return [synth_record(seed) for seed in range(6)]
