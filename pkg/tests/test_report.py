import json
import math

import numpy as np
import pytest

from levy_conditioned.report import EmpiricalDistribution, TestReport, write_table_csv


def _report(**kwargs):
    values = dict(
        test_name="min-law",
        statistic=0.02,
        critical_value=0.05,
        passed=True,
        n_samples=100,
        seeds=[1, 2],
        model_label="bm",
    )
    values.update(kwargs)
    return TestReport(**values)


STATUS = (
    (dict(passed=True), "pass"),
    (dict(passed=False), "fail"),
    (dict(passed=True, conclusive=False), "error"),
)


@pytest.mark.parametrize("kwargs, status", STATUS)
def test_status(kwargs, status):
    assert _report(**kwargs).status == status


def test_json():
    report = _report(statistics={"p": np.float64(0.5)}, table={"x": np.arange(3)})
    report.note("first").note("second")
    data = json.loads(report.to_json())
    assert data["statistics"] == {"p": 0.5}
    assert data["table"] == {"x": [0, 1, 2]}
    assert data["notes"] == ["first", "second"]
    loaded = TestReport.from_json(report.to_json())
    assert loaded.statistic == report.statistic
    assert loaded.seeds == [1, 2]


def test_json_not_finite():
    report = _report(statistic=math.nan, critical_value=math.inf)
    data = json.loads(report.to_json())
    assert data["statistic"] == "nan"
    assert data["critical_value"] == "inf"
    loaded = TestReport.from_json(report.to_json())
    assert math.isnan(loaded.statistic)
    assert loaded.critical_value == math.inf


def test_write(tmp_path):
    report = _report(table={"level": [0.0, 1.0], "value": [1.0, 2.0]})
    report.write(tmp_path)
    assert (tmp_path / "min-law.json").exists()
    report.write(tmp_path, "min-law-bm")
    lines = (tmp_path / "min-law-bm.csv").read_text().splitlines()
    assert lines == ["level,value", "0.0,1.0", "1.0,2.0"]


def test_write_ragged_table(tmp_path):
    write_table_csv({"a": [1, 2, 3], "b": [0.5]}, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["a,b", "1,0.5", "2,", "3,"]
    write_table_csv({}, tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text().strip() == ""


def test_empirical_distribution():
    distribution = EmpiricalDistribution([3.0, 1.0, 2.0, 2.0])
    assert len(distribution) == 4
    assert distribution.effective_size == 4.0
    assert distribution.mean() == 2.0
    assert distribution.cdf(0.5) == 0.0
    assert distribution.cdf(2.0) == 0.75
    # ties count every copy
    assert list(distribution.cdf(np.array([2.0, 2.0]))) == [0.75, 0.75]
    assert list(distribution.cdf(np.array([1.0, 3.0]))) == [0.25, 1.0]


def test_weighted_distribution():
    distribution = EmpiricalDistribution([1.0, 2.0], [3.0, 1.0])
    assert distribution.mean() == pytest.approx(1.25)
    assert distribution.cdf(1.0) == pytest.approx(0.75)
    # (3 + 1)^2 / (9 + 1)
    assert distribution.effective_size == pytest.approx(1.6)


INVALID_DISTRIBUTIONS = (
    ([], None),
    ([[1.0, 2.0]], None),
    ([1.0, 2.0], [1.0]),
    ([1.0, 2.0], [-1.0, 2.0]),
    ([1.0, 2.0], [0.0, 0.0]),
)


@pytest.mark.parametrize("samples, weights", INVALID_DISTRIBUTIONS)
def test_invalid_distribution(samples, weights):
    with pytest.raises(ValueError):
        EmpiricalDistribution(samples, weights)
