from dataclasses import replace

import numpy as np
import pytest

from levy_conditioned.harmonic import HarmonicEstimate, HarmonicMethod
from levy_conditioned.util import SpecValidationError, derive_seed
from levy_conditioned.verify import CHECK_IMPL, Check, CheckSettings, run_check
from levy_conditioned.verify.checks import (
    creep_probabilities,
    killed_expectation,
    passage_combination,
    subadditivity_violations,
    verify_last_passage_identity,
)
from common import BM, BM_DOWN, SN, SP_EXP, SP_OSC, STABLE_GAUSSIAN, TINY, rng, within_ks_margin


def test_check_tags():
    tags = Check.tags()
    assert len(tags) == len(set(tags)) == len(Check)
    for check in Check:
        assert Check.from_tag(check.tag) == check
    with pytest.raises(ValueError):
        Check.from_tag("min_law")


def test_every_check_has_a_runner():
    assert set(CHECK_IMPL) == set(Check)


def test_settings_validation():
    with pytest.raises(ValueError):
        CheckSettings(h_source="guess")
    with pytest.raises(ValueError):
        CheckSettings(functional="log")
    with pytest.raises(ValueError):
        CheckSettings(x_pairs=(1.0, 2.0, 3.0))
    assert CheckSettings(xt_pairs=(1.0, 0.5, 2.0, 1.0)).xt_points == ((1.0, 0.5), (2.0, 1.0))


def _seed(name):
    return derive_seed(5, name)


def test_jump_sign():
    report = run_check(Check.JumpSign, SP_EXP, TINY, _seed("jump-sign"))
    assert report.passed and report.statistic == 0.0
    assert report.statistics["increments_below_drift"] == 0.0
    assert run_check(Check.JumpSign, SN, TINY, _seed("jump-sign")).passed
    with pytest.raises(SpecValidationError):
        run_check(Check.JumpSign, BM, TINY, _seed("jump-sign"))


def test_stable_gaussian():
    report = run_check(Check.StableGaussian, STABLE_GAUSSIAN, TINY, _seed("stable-gaussian"))
    assert report.test_name == "stable-gaussian"
    assert within_ks_margin(report)
    assert report.parameters["sd"] == pytest.approx(np.sqrt(2 * TINY.dt))
    with pytest.raises(SpecValidationError):
        run_check(Check.StableGaussian, BM, TINY, _seed("stable-gaussian"))


@pytest.mark.parametrize("spec", (BM, SN, SP_EXP))
def test_additivity(spec):
    report = run_check(Check.Additivity, spec, TINY, _seed("additivity"))
    assert report.model_label == spec.label
    assert within_ks_margin(report)


def test_null_calibration():
    report = run_check(Check.NullCalibration, BM, TINY, _seed("null-calibration"))
    assert report.table["test"] == ["ks-two-sample", "ks-one-sample", "distance-correlation"]
    assert all(rate >= 0.7 for rate in report.table["pass_rate"])
    assert report.statistic == pytest.approx(1 - min(report.table["pass_rate"]))


def test_min_law_brownian():
    report = run_check(Check.MinLaw, BM, TINY, _seed("min-law"))
    assert report.test_name == "min-law"
    assert report.parameters["h_method"] == "closed_form"
    assert within_ks_margin(report)
    # h(0) = 0: no atom at x0
    assert report.statistics["expected_atom"] == pytest.approx(0.0, abs=0.1)
    assert set(report.table) == {"y", "empirical_cdf", "reference_cdf"}
    assert report.table["reference_cdf"][-1] == 1.0


def test_min_law_is_reproducible():
    settings = replace(TINY, n_paths=20)
    a = run_check(Check.MinLaw, BM, settings, 3)
    b = run_check(Check.MinLaw, BM, settings, 3)
    assert a.to_json() == b.to_json()


def test_weak_convergence_structure():
    settings = replace(TINY, x_grid=(0.8, 0.4), n_paths=100)
    report = run_check(Check.WeakConvergence, BM, settings, _seed("weak-convergence"))
    assert report.table["x"] == [0.8, 0.4]
    assert len(report.table["distance"]) == 2
    assert "fewer than 3 start points: no trend test" in report.notes
    assert report.notes[0].startswith("reference: bes3")
    in_proof = max(report.table["p_m_gt_eta"][-1], report.table["p_max_gt_eta"][-1]) < 0.05
    assert report.statistics["in_proof_below_threshold"] == float(in_proof)
    assert report.passed == (report.statistic <= report.critical_value and in_proof)
    with pytest.raises(ValueError):
        run_check(Check.WeakConvergence, BM, replace(settings, x_grid=(0.4, 0.8)), 1)


def test_weak_convergence_rise_before_minimum():
    # the sup before m always exceeds x; only the rise above x is small as x tends to 0
    settings = replace(TINY, x_grid=(0.8, 0.4), n_paths=100, eta=0.1)
    report = run_check(Check.WeakConvergence, BM, settings, _seed("weak-convergence"))
    # E[d / (d + 0.1)] = 0.6 for d uniform on (0, 0.4)
    assert 0.3 < report.table["p_max_gt_eta"][-1] < 0.9


def test_independence_controls():
    report = run_check(Check.Independence, BM, TINY, _seed("independence"))
    assert report.test_name == "independence"
    assert report.statistics["mismatch_detected"] == 1.0
    assert report.passed == (report.statistic <= report.critical_value)
    kept = len(report.table["post_value"])
    assert kept == round((1 - report.statistics["dropped_fraction"]) * TINY.n_paths)
    assert kept >= TINY.n_paths // 2
    # minimum and post-minimum values of the conditioned part only
    assert all(0 < u <= TINY.x0 for u in report.table["U"])
    assert all(v >= 0 for v in report.table["post_value"])


def test_sampler_agreement():
    settings = replace(TINY, epsilon=0.01)
    report = run_check(Check.SamplerAgreement, BM, settings, _seed("sampler-agreement"))
    assert report.test_name == "sampler-agreement"
    assert report.table["x"] == [1.0, 0.5]
    assert within_ks_margin(report)
    # h is invariant for Brownian motion
    assert all(0.5 < mass < 1.5 for mass in report.table["weighted_mass"])
    with pytest.raises(ValueError):
        run_check(Check.SamplerAgreement, BM, replace(settings, agreement_starts=(0.0,)), 1)


def test_creeping_brownian():
    settings = replace(TINY, excursion_horizon=50.0, t_large=20.0, x_grid=(0.8, 0.4, 0.2))
    report = run_check(Check.CreepingHeight, BM, settings, _seed("creeping"))
    assert report.test_name == "creeping"
    assert report.table["x"] == [0.8, 0.4, 0.2]
    assert report.table["normalized"][0] == 1.0
    assert report.statistics["creep_probability"] >= 0.9
    assert report.statistics["last_passage_creep_probability"] >= 0.9
    with pytest.raises(SpecValidationError):
        run_check(Check.CreepingHeight, BM_DOWN, settings, 1)


def test_excessive_drifting_down():
    report = run_check(Check.ExcessiveInvariant, BM_DOWN, TINY, _seed("excessive"))
    assert report.passed
    assert report.table["x"] == [1.0, 0.5]


def test_h_consistency_structure():
    settings = replace(TINY, ladder_cap=20.0, levels=(0.0, 0.5, 1.0, 2.0))
    report = run_check(Check.HConsistency, BM, settings, _seed("h-consistency"))
    assert report.table["x"] == [1.0, 0.5]
    assert len(report.table["exit_ratio"]) == 2
    assert len(report.table["closed_ratio"]) == 2
    assert "subadditivity_violations" in report.statistics


def test_entrance_law_size_biased():
    settings = replace(TINY, t_large=20.0, entrance_min_length=1.0)
    report = run_check(Check.EntranceLaw, SP_OSC, settings, _seed("entrance-law"))
    assert report.test_name == "entrance-law"
    # Gamma(2, 1)
    assert report.statistics["mean_first_value"] == pytest.approx(2.0, abs=0.4)
    with pytest.raises(SpecValidationError):
        run_check(Check.EntranceLaw, BM, settings, 1)


EXCURSION_SETTINGS = replace(
    TINY,
    n_paths=50,
    excursion_paths=50,
    excursion_horizon=20.0,
    t_large=10.0,
    t=1.0,
    t_values=(0.5, 1.0),
    a_grid=(0.1, 0.3, 0.5),
)


def test_excursion_identity_structure():
    report = run_check(Check.ExcursionIdentity, BM, EXCURSION_SETTINGS, _seed("excursion"))
    assert report.test_name == "excursion-identity"
    assert report.table["t"] == [0.5] * 3 + [1.0] * 3
    assert report.statistics["k"] > 0
    assert report.statistics["k_spread"] >= 0
    with pytest.raises(SpecValidationError):
        run_check(Check.ExcursionIdentity, BM_DOWN, EXCURSION_SETTINGS, 1)


def test_entrance_asymptotics_structure():
    settings = replace(EXCURSION_SETTINGS, x_grid=(0.8, 0.4))
    report = run_check(Check.EntranceAsymptotics, BM, settings, _seed("entrance-asymptotics"))
    assert report.table["x"] == [0.8, 0.4]
    assert len(report.table["ratio"]) == 2
    assert all(0 <= v <= 1 for v in report.table["killed_expectation"])
    assert report.statistic == pytest.approx(abs(report.table["ratio"][-1] - 1))


def test_killed_expectation():
    mean, stderr = killed_expectation(BM, 1.0, 0.5, 0.02, lambda y: np.ones_like(y), 200, rng(1))
    # P_1(tau > 1/2) = 2 Phi(sqrt 2) - 1
    assert mean == pytest.approx(0.843, abs=4 * stderr + 0.03)


def test_passage_combination():
    values = passage_combination(SP_EXP, 1.0, 0.02, 20.0, 100, rng(2))
    assert len(values) == 100
    # X(g) >= X(tau-) and X(tau) >= x
    assert np.all(values[~np.isnan(values)] >= 1.0)


def test_last_passage_structure():
    settings = replace(TINY, t_large=20.0, level=0.5, n_paths=100)
    report = run_check(Check.LastPassage, SP_EXP, settings, _seed("last-passage"))
    assert report.test_name == "last-passage"
    assert {"censored_conditioned", "censored_unconditioned"} <= set(report.statistics)
    with pytest.raises(SpecValidationError):
        run_check(Check.LastPassage, BM_DOWN, settings, 1)
    with pytest.raises(ValueError):
        verify_last_passage_identity(SP_EXP, 0.0, 10, 0.02, 5.0, 5.0, 1)


def test_creep_probabilities():
    overshoot = np.array([[0.0, np.nan], [0.5, 0.01], [np.nan, np.nan]])
    assert list(creep_probabilities(overshoot, 0.1)) == [0.5, 1.0]


SUBADDITIVITY = (
    ([0.0, 1.0, 2.0], 0),
    # h(2) > 2 h(1)
    ([0.0, 1.0, 3.0], 1),
    ([1.0, 1.5, 2.0], 0),
)


@pytest.mark.parametrize("values, violations", SUBADDITIVITY)
def test_subadditivity_violations(values, violations):
    h_est = HarmonicEstimate([0.0, 1.0, 2.0], values, [0.0] * 3, HarmonicMethod.ClosedForm)
    assert subadditivity_violations(h_est) == violations
