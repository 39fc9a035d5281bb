import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mmrecon.matrix import DegreeProfile, build_ensemble


@pytest.fixture(scope="session")
def toy_ensemble():
    """Three small distinct matrices: n=64, m=32, regular column degree 3."""
    return build_ensemble(64, 32, DegreeProfile.regular(3), u=3, base_seed=41)


@pytest.fixture(scope="session")
def mid_ensemble():
    """Desk-size ensemble for decode behavior tests: n=512, R=0.5."""
    return build_ensemble(512, 256, DegreeProfile.regular(3), u=3, base_seed=91)
