import numpy as np
import pytest

from levy_conditioned.conditioning import (
    ConditionedPath,
    ConditionedSampleConfig,
    decompose_at_minimum,
    htransform_weight,
    minimum_law_cdf,
    post_minimum_values,
    reweighted_marginal,
    sample_conditioned_barrier,
    sample_conditioned_many,
    sample_conditioned_rejection,
    sample_entrance_law,
    sample_post_min_limit_construction,
    sample_post_min_limit_many,
)
from levy_conditioned.harmonic import HarmonicEstimate, HarmonicMethod
from levy_conditioned.models import JumpLaw, LevyModelSpec
from levy_conditioned.path import GridPath
from levy_conditioned.report import EmpiricalDistribution
from levy_conditioned.util import ResampleRequired, SamplerExhaustedError, SpecValidationError
from levy_conditioned.verify.stats import ks_two_sample
from common import BM, BM_DOWN, LEVELS, SP_EXP, SP_EXP_DOWN, rng, within_ks_margin

INVALID_CONFIGS = (
    dict(x0=-1.0, epsilon=0.1, dt=0.01, horizon=1.0),
    dict(x0=1.0, epsilon=0.0, dt=0.01, horizon=1.0),
    dict(x0=1.0, epsilon=0.1, dt=0.0, horizon=1.0),
    dict(x0=1.0, epsilon=0.1, dt=0.1, horizon=0.01),
    dict(x0=1.0, epsilon=0.1, dt=0.01, horizon=1.0, max_rejections=0),
)


@pytest.mark.parametrize("kwargs", INVALID_CONFIGS)
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        ConditionedSampleConfig(**kwargs)


def _config(x0=1.0, epsilon=0.1, seed=1, **kwargs):
    return ConditionedSampleConfig(x0, epsilon, 0.01, 20.0, seed=seed, **kwargs)


def test_rejection_paths_stay_positive():
    batch = sample_conditioned_many(BM, _config(), 30)
    assert len(batch.paths) == 30
    assert batch.attempts >= 30
    assert 0 < batch.acceptance_rate <= 1
    for path in batch.paths:
        assert path.start == 1.0
        # free continuation of 20 / 0.01 steps after the clock
        assert len(path) == path.clock_index + 2001
        assert path.clock == path.clock_index * 0.01
        assert np.all(path.conditioned.values[1:] > 0)
        assert len(path.conditioned) == path.clock_index + 1
    manifest = batch.manifest()
    assert manifest["accepted"] == 30
    assert manifest["rejections"] == batch.attempts - 30
    assert manifest["epsilon"] == 0.1


def test_rejection_reproducible():
    a = sample_conditioned_many(BM, _config(seed=5), 5)
    b = sample_conditioned_many(BM, _config(seed=5), 5)
    assert a.attempts == b.attempts
    assert all(np.array_equal(p.values, q.values) for p, q in zip(a.paths, b.paths))
    single = sample_conditioned_rejection(BM, _config(seed=5))
    assert np.array_equal(single.values, a.paths[0].values)


def test_acceptance_monotone_in_start():
    # attempt i uses the same increments from every start point
    low = sample_conditioned_many(BM, _config(x0=0.5, seed=2), 20)
    high = sample_conditioned_many(BM, _config(x0=2.0, seed=2), 20)
    assert high.attempts <= low.attempts


def test_acceptance_monotone_in_epsilon():
    # a smaller epsilon stretches the same exponential draw
    short = sample_conditioned_many(BM, _config(epsilon=0.1, seed=3), 20)
    long = sample_conditioned_many(BM, _config(epsilon=0.01, seed=3), 20)
    assert long.attempts >= short.attempts


def test_rejection_clock_is_not_capped():
    # P_1(tau > e / 0.1) = 1 - exp(-sqrt(0.2)) = 0.361 for Brownian motion; monitoring the
    # skeleton only shifts the start up by about 0.58 sqrt(dt). Capping the clock at the
    # horizon would give at least P_1(tau > 2) = 0.52.
    batch = sample_conditioned_many(BM, ConditionedSampleConfig(1.0, 0.1, 0.01, 2.0, seed=4), 200)
    assert batch.acceptance_rate == pytest.approx(0.377, abs=0.07)
    assert max(path.clock for path in batch.paths) > 2.0
    assert all(len(path) == path.clock_index + 201 for path in batch.paths)


def test_rejection_agrees_with_weighted_marginal():
    h_est = HarmonicEstimate.from_closed_form(BM, LEVELS, 0.02)
    batch = sample_conditioned_many(BM, ConditionedSampleConfig(1.0, 0.01, 0.02, 1.0, seed=8), 300)
    rejection = EmpiricalDistribution(np.array([path.value_at(1.0) for path in batch.paths]))
    weighted = reweighted_marginal(BM, h_est, 1.0, 1.0, 0.02, 2000, rng(8))
    assert within_ks_margin(ks_two_sample(rejection, weighted))


def test_start_at_zero():
    with pytest.raises(SpecValidationError):
        sample_conditioned_many(BM, _config(x0=0.0), 1)


def test_sampler_exhausted():
    with pytest.raises(SamplerExhaustedError) as e:
        sample_conditioned_many(BM, _config(x0=1e-6, epsilon=0.01, max_rejections=1), 5)
    assert e.value.attempts >= 2
    assert 0 <= e.value.acceptance_rate < 1


def test_barrier_conditioning():
    batch = sample_conditioned_barrier(BM, 1.0, 3.0, 0.01, 20, seed=6)
    assert len(batch.paths) == 20
    assert batch.attempts >= 20
    for path in batch.paths:
        assert path.values[-1] >= 3.0
        assert np.all(path.values[1:] > 0)
        assert np.all(path.values[:-1] < 3.0)
    with pytest.raises(SpecValidationError):
        sample_conditioned_barrier(BM_DOWN, 1.0, 3.0, 0.01, 1, seed=6)
    with pytest.raises(ValueError):
        sample_conditioned_barrier(BM, 1.0, 0.5, 0.01, 1, seed=6)


def test_htransform_weight():
    h_est = HarmonicEstimate.from_closed_form(BM, LEVELS)
    assert htransform_weight(GridPath(0.5, [1.0, -0.1, 1.0]), h_est, 1.0, 1.0) == 0.0
    assert htransform_weight(GridPath(0.5, [1.0, 0.5, 1.0]), h_est, 1.0, 1.0) == 1.0
    assert htransform_weight(GridPath(0.5, [1.0, 0.5, 2.0]), h_est, 1.0, 1.0) == 2.0
    assert htransform_weight(GridPath(0.5, [1.0, 0.5, 2.0], killed_at=2), h_est, 1.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        htransform_weight(GridPath(0.5, [1.0, 0.5]), h_est, 1.0, 1.0)


def test_reweighted_total_mass():
    # h-harmonic: E_x[h(X_t); t < zeta] = h(x), so the weights average to 1
    h_est = HarmonicEstimate.from_closed_form(BM, LEVELS, 0.01)
    n_paths = 4000
    distribution = reweighted_marginal(BM, h_est, 1.0, 1.0, 0.01, n_paths, rng(7))
    assert np.all(distribution.samples > 0)
    assert distribution.weights.sum() / n_paths == pytest.approx(1.0, abs=0.1)


def test_post_minimum_law_free_of_start():
    # after its minimum the conditioned process starts afresh from 0, whatever x0
    samples = []
    for x0 in (0.5, 1.0):
        cfg = ConditionedSampleConfig(x0, 0.01, 0.02, 0.02, seed=9)
        batch = sample_conditioned_many(BM, cfg, 300)
        records, post = post_minimum_values(batch.paths, 0.5)
        assert len(records) == len(post) >= 250
        assert all(0 < r.U <= x0 for r in records)
        assert np.all(post >= 0)
        samples.append(post)
    assert within_ks_margin(ks_two_sample(*samples))


def test_post_minimum_values_drop_short_paths():
    paths = [
        ConditionedPath(1.0, [2.0, 1.0, 3.0, 4.0, -1.0], clock_index=3),
        ConditionedPath(1.0, [2.0, 1.0, 3.0, -5.0], clock_index=2),
    ]
    records, post = post_minimum_values(paths, 2.0)
    assert [r.U for r in records] == [1.0]
    assert list(post) == [3.0]


DECOMPOSITIONS = (
    ([1.0, 2.0, 3.0], 1.0, 0, [0.0, 1.0, 2.0]),
    ([2.0, 1.0, 3.0], 1.0, 1, [0.0, 2.0]),
    ([2.0, 1.0, 3.0, 1.0, 4.0], 1.0, 3, [0.0, 3.0]),
)


@pytest.mark.parametrize("values, U, m_index, post", DECOMPOSITIONS)
def test_decompose_at_minimum(values, U, m_index, post):
    record = decompose_at_minimum(GridPath(0.5, values))
    assert record.U == U
    assert record.m_index == m_index
    assert record.m == m_index * 0.5
    assert list(record.post_min.values) == post
    if m_index == 0:
        assert record.pre_min is None
    else:
        assert list(record.pre_min.values) == values[:m_index]


MINIMUM_LAW = (
    (1.0, 0.0, 1.0),
    (1.0, 0.25, 0.75),
    (1.0, 1.0, 0.0),
    (1.0, 1.5, 0.0),
    (2.0, 0.5, 0.75),
)


@pytest.mark.parametrize("x, y, p", MINIMUM_LAW)
def test_minimum_law_cdf(x, y, p):
    h_est = HarmonicEstimate.from_closed_form(BM, LEVELS)
    assert minimum_law_cdf(h_est, x, y) == pytest.approx(p)


def test_minimum_law_cdf_atom():
    # h(0) = 1 for an irregular downward start
    h_est = HarmonicEstimate([0.0, 1.0], [1.0, 4.0], [0.0, 0.0], HarmonicMethod.LadderCounting)
    assert minimum_law_cdf(h_est, 1.0, 1.0) == 0.25
    with pytest.raises(ValueError):
        minimum_law_cdf(h_est, 1.0, -0.5)


def test_entrance_law():
    assert np.all(sample_entrance_law(_point_model(), rng(0), 10) == 0.7)
    draws = sample_entrance_law(SP_EXP_DOWN, rng(8), 5000)
    # Gamma(2, 1)
    assert draws.mean() == pytest.approx(2.0, abs=0.1)
    assert isinstance(sample_entrance_law(SP_EXP_DOWN, rng(8)), float)
    with pytest.raises(SpecValidationError):
        sample_entrance_law(BM, rng(0))


def test_entrance_law_drifting_up():
    # h(x)/x thinning favours small jumps
    draws = sample_entrance_law(SP_EXP, rng(9), 5000)
    assert len(draws) == 5000
    assert np.all(draws > 0)
    assert draws.mean() < 1.9


def _point_model():
    return LevyModelSpec.spectrally_positive(-2.0, 1.0, JumpLaw.point_mass(0.7), label="point")


def test_limit_construction():
    generator = rng(10)
    while True:
        try:
            segment = sample_post_min_limit_construction(BM, 10.0, 0.01, generator)
            break
        except ResampleRequired:
            # the final grid point was a new minimum
            continue
    assert segment.values[0] == 0.0
    assert np.all(segment.values >= 0)
    assert len(segment) >= 2
    with pytest.raises(SpecValidationError):
        sample_post_min_limit_construction(BM_DOWN, 10.0, 0.01, rng(10))


def test_limit_construction_batch():
    segments = sample_post_min_limit_many(BM, 10.0, 0.05, 20, rng(11), min_length=1.0)
    assert len(segments) == 20
    for segment in segments:
        assert len(segment) > 20
        assert segment.values[0] == 0.0
        assert np.all(segment.values[1:] > 0)
    again = sample_post_min_limit_many(BM, 10.0, 0.05, 20, rng(11), min_length=1.0)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(segments, again))
