from __future__ import annotations
import csv
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to JSON-friendly python values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


@dataclass
class TestReport:
    """
    Outcome of one verification. `passed` means statistic <= critical_value unless the
    check documents a different acceptance rule in `notes`. A report that could not
    reach a verdict (e.g. censored samples) has `conclusive = False`.
    """

    __test__ = False  # not a pytest class

    test_name: str
    statistic: float
    critical_value: float
    passed: bool
    n_samples: int
    seeds: List[int] = field(default_factory=list)
    model_label: str = ""
    parameters: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    statistics: Dict[str, float] = field(default_factory=dict)
    table: Dict[str, List[float]] = field(default_factory=dict)
    conclusive: bool = True

    @property
    def status(self) -> str:
        if not self.conclusive:
            return "error"
        return "pass" if self.passed else "fail"

    def note(self, message: str) -> TestReport:
        self.notes.append(message)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> TestReport:
        data = json.loads(text)
        for key in ("statistic", "critical_value"):
            if isinstance(data[key], str):
                data[key] = float(data[key])
        return TestReport(**data)

    def write(self, directory: Union[str, Path], stem: Optional[str] = None) -> None:
        """Writes <stem>.json and <stem>.csv (the table data), stem defaulting to test_name"""
        directory = Path(directory)
        stem = stem or self.test_name
        (directory / f"{stem}.json").write_text(self.to_json())
        write_table_csv(self.table, directory / f"{stem}.csv")


def write_table_csv(table: Dict[str, Sequence[Any]], file: Union[str, Path]) -> None:
    columns = list(table)
    n_rows = max((len(table[c]) for c in columns), default=0)
    with open(file, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for i in range(n_rows):
            writer.writerow(
                [_cell(table[c][i]) if i < len(table[c]) else "" for c in columns]
            )


def _cell(value: Any) -> str:
    value = _plain(value)
    return repr(value) if isinstance(value, float) else str(value)


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Samples of a real law, optionally weighted (h-transform estimates)."""

    samples: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or len(samples) == 0:
            raise ValueError("EmpiricalDistribution needs a nonempty one-dimensional sample")
        object.__setattr__(self, "samples", samples)
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float)
            if weights.shape != samples.shape:
                raise ValueError("weights and samples must have the same length")
            total = weights.sum()
            if np.any(weights < 0) or not (np.isfinite(total) and total > 0):
                raise ValueError("weights must be nonnegative with a positive finite sum")
            object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def normalized_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self.samples), 1.0 / len(self.samples))
        return self.weights / self.weights.sum()

    @property
    def effective_size(self) -> float:
        """Kish effective sample size (the sample size when unweighted)."""
        if self.weights is None:
            return float(len(self.samples))
        return float(self.weights.sum() ** 2 / np.sum(self.weights**2))

    def cdf(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        order = np.argsort(self.samples, kind="stable")
        points = self.samples[order]
        cumulative = np.concatenate([[0.0], np.cumsum(self.normalized_weights[order])])
        out = cumulative[np.searchsorted(points, x, side="right")]
        return float(out) if np.ndim(x) == 0 else out

    def mean(self) -> float:
        return float(np.dot(self.normalized_weights, self.samples))
