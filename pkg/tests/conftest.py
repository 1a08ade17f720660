import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from photonode import chip  # noqa: E402


@pytest.fixture(scope="session")
def flags():
    return chip.default_flags()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
