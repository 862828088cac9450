"""
analysis.py
-----------

Twin-versus-real comparison of metric time series (throughput, SINR, ...).

The similarity score is the normalized cross-correlation

    ρ(k) = Σ_n (x(n) − x̄)(y(n + k) − ȳ) / sqrt(Σ (x − x̄)² · Σ (y − ȳ)²)

maximised over k in [−K, K]. The shorter series is zero-padded at the end
before the means are taken, so padding pulls the means toward zero; heavily
padded pairs score lower than their overlap alone would.
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .core import power_to_db
from .errors import ValidationError

logger = logging.getLogger(__name__)

DEFAULT_MAX_LAG = 10
CSV_COLUMNS = ("t_s", "value")


class AnalysisError(ValidationError):
    """Raised for empty, constant or mismatched metric series."""
    pass


@dataclass(frozen=True, eq=False)
class MetricSeries:
    """
    Evenly spaced metric samples; NaN marks a gap.

    Attributes:
        values: the samples.
        period: spacing in seconds.
        label: free text (e.g. "arena-static-sinr").
        unit: "dB" makes the series dB-valued for `jamming_report`.
        t0: time of the first sample.
    """
    values: np.ndarray
    period: float = 1.0
    label: str = ""
    unit: str = ""
    t0: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if not (self.period > 0 and math.isfinite(self.period)):
            raise AnalysisError(f"period must be > 0, got {self.period}")
        if np.any(np.isinf(values)):
            raise AnalysisError(f"series {self.label!r} holds infinite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.period * np.arange(len(self))

    @property
    def gaps(self) -> int:
        return int(np.count_nonzero(np.isnan(self.values)))

    def valid(self) -> np.ndarray:
        return self.values[~np.isnan(self.values)]

    def mean(self) -> float:
        v = self.valid()
        if v.size == 0:
            raise AnalysisError(f"series {self.label!r} has no valid samples")
        return float(v.mean())

    def filled(self) -> np.ndarray:
        """Values with gaps replaced by the series mean."""
        if not self.gaps:
            return self.values.copy()
        return np.where(np.isnan(self.values), self.mean(), self.values)

    @classmethod
    def from_csv(cls, path, label: Optional[str] = None, unit: str = "") -> "MetricSeries":
        """
        Read a `t_s,value` CSV. Empty or `nan` values are gaps.

        Raises:
            AnalysisError: missing columns, unparseable or unevenly spaced rows.
        """
        path = Path(path)
        times: List[float] = []
        values: List[float] = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]:
                raise AnalysisError(f"{path}: expected header {','.join(CSV_COLUMNS)}")
            for row in reader:
                try:
                    times.append(float(row["t_s"]))
                    raw = (row["value"] or "").strip()
                    values.append(math.nan if raw == "" else float(raw))
                except (TypeError, ValueError) as e:
                    raise AnalysisError(f"{path}, line {reader.line_num}: {e}") from e
        if not values:
            raise AnalysisError(f"{path}: no samples")
        if len(times) > 1:
            steps = np.diff(times)
            period = float(np.median(steps))
            if period <= 0 or np.any(np.abs(steps - period) > 1e-6 * max(period, 1.0)):
                raise AnalysisError(f"{path}: samples must be evenly spaced in t_s")
        else:
            period = 1.0
        return cls(np.asarray(values), period, label if label is not None else path.stem, unit, times[0])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for t, v in zip(self.times, self.values):
                writer.writerow([f"{t:.6f}", "" if np.isnan(v) else repr(float(v))])
        return path

    def __repr__(self) -> str:
        return f"<MetricSeries(label={self.label!r}, n={len(self)}, period={self.period!r}, unit={self.unit!r})>"


@dataclass
class SimilarityReport:
    lags: np.ndarray
    rho_by_lag: np.ndarray
    best_lag: int
    score: float
    max_lag: int
    labels: Tuple[str, str] = ("", "")

    def rho(self, k: int) -> float:
        if abs(k) > self.max_lag:
            raise AnalysisError(f"lag {k} outside [-{self.max_lag}, {self.max_lag}]")
        return float(self.rho_by_lag[k + self.max_lag])

    def to_dict(self) -> Dict[str, object]:
        return {
            "real": self.labels[0],
            "twin": self.labels[1],
            "max_lag": self.max_lag,
            "best_lag": self.best_lag,
            "score": self.score,
            "rho_by_lag": {str(int(k)): float(r) for k, r in zip(self.lags, self.rho_by_lag)},
        }


def _as_array(x) -> Tuple[np.ndarray, str]:
    if isinstance(x, MetricSeries):
        return x.filled(), x.label
    arr = np.asarray(x, dtype=np.float64).ravel()
    if np.any(np.isnan(arr)):
        arr = np.where(np.isnan(arr), np.nanmean(arr), arr)
    return arr, ""


def normalized_xcorr(x, y, max_lag: int = DEFAULT_MAX_LAG) -> SimilarityReport:
    """
    ρ(k) for k in [−max_lag, max_lag] and its maximum.

    `y` is slid against `x`: ρ(k) pairs x(n) with y(n + k). Centred terms
    that fall off either end contribute nothing.

    Raises:
        AnalysisError: an empty series, a negative lag bound, or a constant
            series (zero variance).
    """
    xs, xl = _as_array(x)
    ys, yl = _as_array(y)
    if xs.size == 0 or ys.size == 0:
        raise AnalysisError("cannot correlate an empty series")
    if max_lag < 0:
        raise AnalysisError(f"max_lag must be >= 0, got {max_lag}")
    n = max(xs.size, ys.size)
    xs = np.pad(xs, (0, n - xs.size))
    ys = np.pad(ys, (0, n - ys.size))
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    den = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    if den == 0:
        raise AnalysisError("a series is constant; normalized cross-correlation is undefined")

    full = np.correlate(yc, xc, mode="full") / den  # index n-1+k holds lag k
    lags = np.arange(-max_lag, max_lag + 1)
    rho = np.zeros(lags.size)
    inside = np.abs(lags) <= n - 1
    rho[inside] = full[n - 1 + lags[inside]]
    best = int(np.argmax(rho))
    report = SimilarityReport(lags, rho, int(lags[best]), float(rho[best]), int(max_lag), (xl, yl))
    logger.debug("normalized_xcorr %r vs %r: score %.4f at lag %d", xl, yl, report.score, report.best_lag)
    return report


def compare_runs(real: MetricSeries, twin: MetricSeries, max_lag: int = DEFAULT_MAX_LAG) -> SimilarityReport:
    """Similarity of a twin run against the real one, 10 lags either way by default."""
    if not math.isclose(real.period, twin.period, rel_tol=1e-6):
        raise AnalysisError(f"series are sampled differently: {real.period} s vs {twin.period} s")
    if real.unit and twin.unit and real.unit != twin.unit:
        raise AnalysisError(f"series carry different units: {real.unit!r} vs {twin.unit!r}")
    if len(real) != len(twin):
        logger.info("Zero-padding the shorter series (%d vs %d samples)", len(real), len(twin))
    return normalized_xcorr(real, twin, max_lag)


def summarize_scores(scores: Mapping[Tuple[str, str], float]) -> Dict[str, object]:
    """
    Average a {(metric, unit): score} table three ways.

    Returns:
        dict: "per_metric" and "per_unit" means, plus the "overall" mean.
    """
    if not scores:
        raise AnalysisError("no scores to summarize")
    per_metric: Dict[str, List[float]] = {}
    per_unit: Dict[str, List[float]] = {}
    for (metric, unit), s in sorted(scores.items()):
        per_metric.setdefault(metric, []).append(float(s))
        per_unit.setdefault(unit, []).append(float(s))
    return {
        "per_metric": {k: float(np.mean(v)) for k, v in per_metric.items()},
        "per_unit": {k: float(np.mean(v)) for k, v in per_unit.items()},
        "overall": float(np.mean(list(scores.values()))),
    }


def segment(series: MetricSeries, start_s: float, stop_s: float) -> MetricSeries:
    """Samples with start_s <= t < stop_s."""
    if stop_s <= start_s:
        raise AnalysisError(f"empty window [{start_s}, {stop_s})")
    t = series.times
    eps = 1e-9 * series.period
    mask = (t >= start_s - eps) & (t < stop_s - eps)
    if not np.any(mask):
        raise AnalysisError(f"series {series.label!r} has no samples in [{start_s}, {stop_s})")
    first = int(np.flatnonzero(mask)[0])
    return MetricSeries(series.values[mask], series.period, series.label, series.unit, float(t[first]))


@dataclass
class JammingReport:
    drop_fraction: float
    drop_db: float
    pre_mean: float
    during_mean: float
    details: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        out = {"drop_fraction": self.drop_fraction, "drop_db": self.drop_db,
               "pre_mean": self.pre_mean, "during_mean": self.during_mean}
        out.update(self.details)
        return out


def jamming_report(pre_jam: MetricSeries, during_jam: MetricSeries, db_valued: Optional[bool] = None) -> JammingReport:
    """
    How much a metric fell while the jammer was on.

    drop_fraction = 1 − mean(during)/mean(pre). For dB-valued series
    drop_db is the plain difference of means; otherwise it is the ratio of
    means in dB.

    Raises:
        AnalysisError: an empty segment or a zero pre-jam mean.
    """
    pre = pre_jam.mean()
    during = during_jam.mean()
    if pre == 0:
        raise AnalysisError("pre-jam mean is zero; the drop fraction is undefined")
    if db_valued is None:
        db_valued = pre_jam.unit.lower() == "db"
    if db_valued:
        drop_db = pre - during
    elif during <= 0 or pre < 0:
        drop_db = math.inf
    else:
        drop_db = power_to_db(pre / during)
    report = JammingReport(1.0 - during / pre, drop_db, pre, during)
    logger.info("Jamming drop: %.3f (%.2f dB)", report.drop_fraction, report.drop_db)
    return report
