import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / 'scripts'))

import symcore  # noqa: E402
from charts import Coeffs10  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long numerical sweeps')


@pytest.fixture
def root():
    return ROOT


@pytest.fixture
def oscillator():
    """Isotropic oscillator with its third-order integral X = L3 H."""
    return {
        'V': symcore.parse('(x1^2 + x2^2)/2'),
        'A': Coeffs10.from_mapping({'A120': '1/2', 'A102': '1/2'}),
        'g1': symcore.parse('-(x1^2*x2 + x2^3)/2'),
        'g2': symcore.parse('(x1*x2^2 + x1^3)/2'),
    }


@pytest.fixture
def config(tmp_path):
    """Configuration writing every artifact below tmp_path."""
    return {
        'paths': {
            'output': str(tmp_path / 'results'),
            'verified': str(tmp_path / 'results' / 'verified'),
            'rejected': str(tmp_path / 'results' / 'rejected'),
            'logs': str(tmp_path / 'logs'),
            'schemas': str(ROOT / 'schemas'),
        },
        'numerics': {'kernel_points': 24},
        'defaults': {'seed': 0},
        'logging': {'level': 'WARNING', 'file': str(tmp_path / 'logs' / 'test.log')},
    }
