import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import make_rig  # noqa: E402


@pytest.fixture
def rig():
    return make_rig()
