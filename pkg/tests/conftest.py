import pytest

from pathlib import Path

from app.adjoint import example51_problem
from app.problem import discretize

FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def example51():
    return example51_problem()


@pytest.fixture
def example51_dp(example51):
    return discretize(example51, 100)
