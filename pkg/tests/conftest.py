"""Shared pytest fixtures and configuration"""
import pytest
import sys
import os
from fractions import Fraction

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from exact_scalar import FieldElement
from lattice_core import Lattice
from numberfield import PRESETS, analyze_field, preset_lattice


@pytest.fixture
def z2():
    """The standard lattice Z^2"""
    return Lattice.standard(2)


@pytest.fixture
def sqrt2_field():
    """Q(sqrt 2) with embedding 0 reading theta as +sqrt 2"""
    return analyze_field(PRESETS["Z[sqrt2]"])


@pytest.fixture
def sqrt2(sqrt2_field):
    """sqrt 2 as an exact scalar"""
    return FieldElement(sqrt2_field, [0, 1])


@pytest.fixture
def sqrt2_lattice():
    """sigma(Z[sqrt 2]) with rows (1, 1) and (sqrt 2, -sqrt 2)"""
    return preset_lattice("Z[sqrt2]").embedded


@pytest.fixture
def strip_config():
    """Experiment descriptor for the unit strip (-1/2, 3/2) x (0, 1) along the x-axis"""
    return {
        "lattice": {"standard": 2},
        "subspace": {"axes": [0]},
        "domain": {"kind": "box", "center": ["1/2", "1/2"], "half_widths": [1, "1/2"]},
        "eps": {"base": 10, "from": 1, "to": 5},
        "regime": "smooth_slices",
    }


@pytest.fixture
def half():
    return Fraction(1, 2)
