import math

import numpy as np
import pytest

from levy_conditioned.harmonic import (
    HarmonicEstimate,
    HarmonicMethod,
    check_excessive_invariant,
    estimate_h_exit_grid,
    estimate_h_exit_ratio,
    estimate_h_exponential_clock,
    estimate_h_ladder,
    h_closed_form,
    skeleton_shift,
)
from levy_conditioned.models import LevyModelSpec
from levy_conditioned.util import (
    GAUSSIAN_OVERSHOOT_CONSTANT,
    HarmonicRangeError,
    LevyError,
    SpecValidationError,
    derive_seed,
    replicate_map,
)
from common import BM, BM_DOWN, BM_UP, CAUCHY, LEVELS, SN, SP_EXP, SP_EXP_DOWN, rng

CLOSED_FORMS = (
    (BM, 2.0, 2.0),
    (BM_DOWN, 2.0, 2.0),
    (SP_EXP_DOWN, 0.5, 0.5),
    # (1 - exp(-2x)) / 2
    (BM_UP, 1.0, -math.expm1(-2.0) / 2),
    # Phi = 1
    (SP_EXP, 1.0, -math.expm1(-1.0)),
    # x ** (alpha (1 - rho)) with rho = 1/2
    (CAUCHY, 4.0, 2.0),
    (LevyModelSpec.stable(1.5, 1.0), 8.0, 8.0 ** 1.0),
    (SN, 1.0, None),
)


@pytest.mark.parametrize("spec, x, h", CLOSED_FORMS)
def test_h_closed_form(spec, x, h):
    value = h_closed_form(spec, x)
    if h is None:
        assert value is None
    else:
        assert value == pytest.approx(h)


def test_h_closed_form_negative_level():
    with pytest.raises(ValueError):
        h_closed_form(BM, -1.0)


def test_skeleton_shift():
    assert skeleton_shift(BM, 0.01) == pytest.approx(GAUSSIAN_OVERSHOOT_CONSTANT * 0.1)
    assert skeleton_shift(LevyModelSpec.stable(2.0), 0.01) == pytest.approx(
        GAUSSIAN_OVERSHOOT_CONSTANT * math.sqrt(2) * 0.1
    )
    assert skeleton_shift(SP_EXP, 0.01) == 0.0
    assert skeleton_shift(CAUCHY, 0.01) == 0.0


def test_estimate_validation():
    with pytest.raises(ValueError):
        HarmonicEstimate([1.0, 0.5], [1.0, 2.0], [0.0, 0.0], HarmonicMethod.ClosedForm)
    with pytest.raises(ValueError):
        HarmonicEstimate([0.0, 1.0], [1.0], [0.0], HarmonicMethod.ClosedForm)
    with pytest.raises(ValueError):
        HarmonicEstimate([-1.0, 1.0], [1.0, 2.0], [0.0, 0.0], HarmonicMethod.ClosedForm)


def test_evaluate():
    h_est = HarmonicEstimate(
        [0.0, 1.0, 3.0], [1.0, 2.0, 6.0], [0.0, 0.1, 0.3], HarmonicMethod.LadderCounting
    )
    assert h_est.evaluate(0.5) == pytest.approx(1.5)
    assert list(h_est.evaluate(np.array([1.0, 2.0]))) == pytest.approx([2.0, 4.0])
    assert h_est.evaluate_stderr(2.0) == pytest.approx(0.2)
    with pytest.raises(HarmonicRangeError):
        h_est.evaluate(3.5)
    ratio, stderr = h_est.ratio(1.0, 3.0)
    assert ratio == pytest.approx(1.0 / 3.0)
    assert stderr == pytest.approx(ratio * math.hypot(0.1 / 2.0, 0.3 / 6.0))
    assert h_est.is_monotone()
    scaled = h_est.scaled(2.0)
    assert list(scaled.values) == [2.0, 4.0, 12.0]
    assert scaled.method == HarmonicMethod.LadderCounting
    with pytest.raises(ValueError):
        h_est.scaled(0.0)


def test_is_monotone():
    dropping = HarmonicEstimate([0.0, 1.0], [2.0, 1.0], [0.1, 0.1], HarmonicMethod.ExitRatio)
    assert not dropping.is_monotone()
    noisy = HarmonicEstimate([0.0, 1.0], [2.0, 1.9], [0.1, 0.1], HarmonicMethod.ExitRatio)
    assert noisy.is_monotone()


def test_from_closed_form():
    h_est = HarmonicEstimate.from_closed_form(BM, LEVELS)
    assert list(h_est.values) == list(LEVELS)
    assert h_est.method == HarmonicMethod.ClosedForm
    shifted = HarmonicEstimate.from_closed_form(BM, LEVELS, 0.01)
    assert shifted.evaluate(1.0) == pytest.approx(1.0 + skeleton_shift(BM, 0.01))
    assert "skeleton shift" in shifted.normalization_note
    with pytest.raises(LevyError):
        HarmonicEstimate.from_closed_form(SN, LEVELS)


def test_csv(tmp_path):
    h_est = HarmonicEstimate(
        [0.0, 0.5, 1.0],
        [1.0, 1.5, 2.5],
        [0.0, 0.1, 0.2],
        HarmonicMethod.LadderCounting,
        "h(0)=1",
    )
    h_est.to_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "# h(0)=1"
    assert lines[1] == "level,value,stderr,method"
    loaded = HarmonicEstimate.from_csv(tmp_path / "h.csv")
    assert np.array_equal(loaded.values, h_est.values)
    assert loaded.method == HarmonicMethod.LadderCounting
    assert loaded.normalization_note == "h(0)=1"


def test_ladder_counting_brownian():
    levels = (0.0, 0.5, 1.0, 2.0)
    dt = 0.04
    h_est = estimate_h_ladder(BM, levels, dt, 400, 20.0, rng(11))
    assert h_est.method == HarmonicMethod.LadderCounting
    # epoch 0 is the only count at level 0
    assert h_est.values[0] == 1.0 and h_est.stderr[0] == 0.0
    assert np.all(np.diff(h_est.values) > 0)
    ratio, _ = h_est.ratio(1.0, 2.0)
    reference, _ = HarmonicEstimate.from_closed_form(BM, levels, dt).ratio(1.0, 2.0)
    assert ratio == pytest.approx(reference, abs=0.06)


def test_ladder_counting_reproducible():
    a = estimate_h_ladder(SP_EXP_DOWN, (0.0, 1.0), 0.05, 50, 20.0, rng(3))
    b = estimate_h_ladder(SP_EXP_DOWN, (0.0, 1.0), 0.05, 50, 20.0, rng(3))
    assert np.array_equal(a.values, b.values)


def test_exit_ratio_brownian():
    estimate = estimate_h_exit_ratio(BM, 1.0, 2.0, 20.0, 0.05, 4000, rng(12))
    assert estimate.ratio == pytest.approx(0.5, abs=0.15)
    assert 0 < estimate.p_x < estimate.p_y < 1
    assert estimate.stderr > 0


def test_exit_ratio_preconditions():
    with pytest.raises(SpecValidationError):
        estimate_h_exit_ratio(BM_DOWN, 1.0, 2.0, 20.0, 0.05, 10, rng(0))
    with pytest.raises(ValueError):
        estimate_h_exit_ratio(BM, 1.0, 2.0, 5.0, 0.05, 10, rng(0))
    with pytest.raises(ValueError):
        estimate_h_exit_ratio(BM, 0.0, 2.0, 20.0, 0.05, 10, rng(0))


def test_exit_grid_brownian():
    h_est = estimate_h_exit_grid(BM, (0.0, 1.0, 2.0), 20.0, 0.05, 4000, rng(13))
    assert h_est.method == HarmonicMethod.ExitRatio
    # level 0 is dropped, the top level is the reference
    assert list(h_est.levels) == [1.0, 2.0]
    assert h_est.values[-1] == 1.0
    assert h_est.values[0] == pytest.approx(0.5, abs=0.15)
    with pytest.raises(ValueError):
        estimate_h_exit_grid(BM, (1.0, 4.0), 20.0, 0.05, 10, rng(0))


def test_exponential_clock():
    levels = (0.25, 0.5, 1.0, 2.0)
    h_est = estimate_h_exponential_clock(BM, levels, 0.1, 0.05, 500, rng(14))
    assert h_est.method == HarmonicMethod.ExponentialClock
    assert h_est.values[-1] == 1.0
    assert h_est.values[0] < h_est.values[-1]
    with pytest.raises(ValueError):
        estimate_h_exponential_clock(BM, levels, 0.0, 0.05, 10, rng(0))


def test_excessive_invariant_brownian():
    h_est = HarmonicEstimate.from_closed_form(BM, LEVELS, 0.01)
    report = check_excessive_invariant(BM, h_est, 1.0, 1.0, 0.01, 4000, rng(15))
    assert report.test_name == "excessive-invariant"
    assert abs(report.statistics["mean"] - report.statistics["h_x"]) < 0.1
    assert 0 < report.statistics["survival"] < 1


def test_excessive_drifting_down():
    h_est = HarmonicEstimate.from_closed_form(BM_DOWN, LEVELS, 0.01)
    report = check_excessive_invariant(BM_DOWN, h_est, 1.0, 1.0, 0.01, 4000, rng(16))
    # E[X_1; alive] is well below x for a downward drift
    assert report.statistics["mean"] < report.statistics["h_x"]
    assert report.passed


def test_excessive_at_time_zero():
    h_est = HarmonicEstimate.from_closed_form(BM, LEVELS)
    report = check_excessive_invariant(BM, h_est, 0.5, 0.0, 0.01, 10, rng(0))
    assert report.passed and report.statistic == 0.0 and report.n_samples == 0


def _uniforms(size, generator):
    return generator.random(size)


def test_replicate_map_chunks():
    seed = derive_seed(1, "replicates")
    chunks = replicate_map(_uniforms, 10, seed, chunk=4)
    assert [len(c) for c in chunks] == [4, 4, 2]
    # chunk streams depend on the chunk index only
    again = replicate_map(_uniforms, 6, seed, chunk=4)
    assert np.array_equal(chunks[0], again[0])
    assert np.array_equal(chunks[1][:2], again[1])
    parallel = replicate_map(_uniforms, 10, seed, workers=2, chunk=4)
    assert all(np.array_equal(a, b) for a, b in zip(chunks, parallel))
