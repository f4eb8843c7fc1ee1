import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stripes.model import ModelParams  # noqa: E402


@pytest.fixture
def ps1() -> ModelParams:
    """d=1 reference parameters: C_tau = 20, J_c = 1, a = 0.05,
    alpha = 0.0025."""
    return ModelParams(d=1, p=3.0, tau=0.05, eps=0.05, L=1.0)


@pytest.fixture
def ps2() -> ModelParams:
    """d=2 reference parameters: C_tau = 40/3, J_c = 2/3."""
    return ModelParams(d=2, p=4.0, tau=0.05, eps=0.05, L=2.0)
