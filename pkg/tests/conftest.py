import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bma_identify import ex4_exposure  # noqa: E402
from bma_identify.core import McConfig  # noqa: E402


@pytest.fixture(scope="session")
def cfg():
    return McConfig()


@pytest.fixture(scope="session")
def ex4_hyper():
    """Example 4 hyperparameters with a modest calibration run."""
    h = ex4_exposure.Ex4Hyper()
    return h.with_calibration(ex4_exposure.calibrate(h, McConfig(), draws=40_000))
