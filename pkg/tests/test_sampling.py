import numpy as np
import pytest

from app.constants import SamplingStatus
from app.exceptions import ConfigurationError, PreconditionError
from app.convexfn import Affine
from app.problem import ContinuousProblem, Grid, GridTrajectory
from app.verify import SamplerConfig, sufficiency_sampling_test

from tests.helpers import discrete_optimum


def slower_arc(grid: Grid) -> GridTrajectory:
    """e^(t/2) with x(delta) moved onto the fixed initial slope of the worked example."""
    values = np.exp(grid.nodes / 2.0)
    values[1] = 1.0 + grid.delta / 3.0
    return GridTrajectory(grid, values)


def test_discrete_optimum_is_never_beaten(example51):
    report = sufficiency_sampling_test(example51, discrete_optimum(Grid(100)))
    assert report.status == SamplingStatus.OK
    assert report.passed
    assert report.samples == 1000
    assert report.min_gap >= -1e-9
    assert 0.0 < report.acceptance_rate <= 1.0


def test_zero_amplitude_gives_zero_gap(example51):
    cfg = SamplerConfig.create(samples=10, amplitude=0.0)
    report = sufficiency_sampling_test(example51, discrete_optimum(Grid(50)), cfg)
    assert report.min_gap == 0.0
    assert report.acceptance_rate == 1.0
    assert report.passed


def test_suboptimal_arc_is_beaten(example51):
    cfg = SamplerConfig.create(samples=200)
    report = sufficiency_sampling_test(example51, slower_arc(Grid(100)), cfg)
    assert report.status == SamplingStatus.VIOLATION
    assert not report.passed
    assert report.violations > 0
    assert report.best_objective < report.optimal_objective


def test_infeasible_candidate_is_rejected(example51):
    with pytest.raises(PreconditionError):
        sufficiency_sampling_test(example51, GridTrajectory(Grid(20), np.full(21, 2.0)))


def test_sampling_failure_when_nothing_is_feasible(example51):
    # Rows sit 1e-10 above zero: accepted as a candidate, rejected as a sample.
    pc = ContinuousProblem(example51.f, example51.q,
                           [Affine.constraint([1.0], [-3.0], offset=1e-10)],
                           example51.v0, example51.v1)
    cfg = SamplerConfig.create(samples=5, amplitude=0.0, budget_factor=2)
    report = sufficiency_sampling_test(pc, discrete_optimum(Grid(20)), cfg)
    assert report.status == SamplingStatus.SAMPLING_FAILURE
    assert report.draws == 10
    assert report.min_gap is None
    assert not report.passed


def test_sampler_config_validates():
    with pytest.raises(ConfigurationError):
        SamplerConfig.create(samples=0)
    with pytest.raises(ConfigurationError):
        SamplerConfig.create(amplitude=-1.0)


def test_spent_budget_is_a_sampling_failure(example51):
    # One draw per requested sample: a single infeasible draw leaves the count short.
    cfg = SamplerConfig.create(samples=50, budget_factor=1)
    report = sufficiency_sampling_test(example51, discrete_optimum(Grid(100)), cfg)
    assert report.status == SamplingStatus.SAMPLING_FAILURE
    assert report.draws == 50
    assert report.samples < 50
    assert not report.passed
