"""
Tests for metric series, normalized cross-correlation similarity and
jamming reports.
"""
import math
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from twinchan.analysis import (
    AnalysisError,
    MetricSeries,
    compare_runs,
    jamming_report,
    normalized_xcorr,
    segment,
    summarize_scores,
)
from twinchan.experiments import (
    DATA_DIR,
    SIMILARITY_PAIRS,
    SIMILARITY_REFERENCE,
    SIMILARITY_TOLERANCE,
    brute_force_xcorr,
)


def test_xcorr_known_values():
    report = normalized_xcorr([1, 2, 3, 4], [0, 1, 2, 3, 4], max_lag=3)
    assert report.rho(0) == pytest.approx(0.0, abs=1e-12)
    assert report.rho(1) == pytest.approx(0.6)
    assert report.rho(2) == pytest.approx(0.2)
    assert report.rho(-1) == pytest.approx(-0.3)
    assert report.best_lag == 1
    assert report.score == pytest.approx(0.6)
    with pytest.raises(AnalysisError):
        report.rho(4)


def test_xcorr_lags_beyond_the_series_read_zero():
    report = normalized_xcorr([1, 2, 3, 4], [0, 1, 2, 3, 4], max_lag=10)
    assert report.rho(7) == 0.0
    assert report.rho(-9) == 0.0
    assert len(report.lags) == 21


def test_xcorr_matches_brute_force():
    rng = np.random.default_rng(3)
    for nx, ny in ((7, 7), (5, 12), (30, 9)):
        x, y = rng.standard_normal(nx), rng.standard_normal(ny)
        report = normalized_xcorr(x, y, max(nx, ny) - 1)
        for k in report.lags:
            assert report.rho(int(k)) == pytest.approx(brute_force_xcorr(x, y, int(k)), abs=1e-12)


def test_xcorr_of_identical_series():
    x = np.sin(np.arange(40) * 0.3)
    report = normalized_xcorr(x, x)
    assert report.score == pytest.approx(1.0)
    assert report.best_lag == 0


def test_xcorr_rejects_degenerate_input():
    with pytest.raises(AnalysisError):
        normalized_xcorr([1, 1, 1], [1, 2, 3])
    with pytest.raises(AnalysisError):
        normalized_xcorr([], [1, 2])
    with pytest.raises(AnalysisError):
        normalized_xcorr([1, 2], [2, 1], max_lag=-1)


def test_metric_series_csv(tmp_path):
    series = MetricSeries([1.0, float("nan"), 3.0], period=0.5, label="sinr", unit="dB", t0=2.0)
    assert series.gaps == 1
    assert series.mean() == pytest.approx(2.0)
    assert list(series.filled()) == [1.0, 2.0, 3.0]
    path = series.to_csv(tmp_path / "s.csv")
    loaded = MetricSeries.from_csv(path, unit="dB")
    assert loaded.period == pytest.approx(0.5)
    assert loaded.t0 == pytest.approx(2.0)
    assert loaded.gaps == 1
    assert loaded.label == "s"


def test_metric_series_rejects_bad_files(tmp_path):
    path = tmp_path / "uneven.csv"
    path.write_text("t_s,value\n0,1\n1,2\n3,3\n")
    with pytest.raises(AnalysisError, match="evenly"):
        MetricSeries.from_csv(path)
    path.write_text("time,value\n0,1\n")
    with pytest.raises(AnalysisError, match="header"):
        MetricSeries.from_csv(path)
    with pytest.raises(AnalysisError):
        MetricSeries([1.0, math.inf])


def test_compare_runs_checks_sampling_and_units():
    a = MetricSeries(np.arange(10.0), 1.0, unit="dB")
    with pytest.raises(AnalysisError):
        compare_runs(a, MetricSeries(np.arange(10.0), 0.5, unit="dB"))
    with pytest.raises(AnalysisError):
        compare_runs(a, MetricSeries(np.arange(10.0), 1.0, unit="Mbps"))
    assert compare_runs(a, MetricSeries(np.arange(12.0), 1.0)).max_lag == 10


def test_shipped_runs_are_similar():
    for real_file, twin_file in SIMILARITY_PAIRS.values():
        real = MetricSeries.from_csv(DATA_DIR / real_file, unit="dB")
        twin = MetricSeries.from_csv(DATA_DIR / twin_file, unit="dB")
        assert len(real) == 60
        assert compare_runs(real, twin).score >= 0.93


def test_static_run_lands_near_the_reference_score():
    real_file, twin_file = SIMILARITY_PAIRS["static"]
    real = MetricSeries.from_csv(DATA_DIR / real_file, unit="dB")
    twin = MetricSeries.from_csv(DATA_DIR / twin_file, unit="dB")
    score = compare_runs(real, twin).score
    assert abs(score - SIMILARITY_REFERENCE["static"]) <= SIMILARITY_TOLERANCE


def test_summarize_scores():
    summary = summarize_scores({("sinr", "dB"): 0.9, ("rssi", "dB"): 1.0, ("throughput", "Mbps"): 0.8})
    assert summary["per_unit"]["dB"] == pytest.approx(0.95)
    assert summary["per_metric"]["throughput"] == pytest.approx(0.8)
    assert summary["overall"] == pytest.approx(0.9)
    with pytest.raises(AnalysisError):
        summarize_scores({})


def test_segment_and_jamming_report():
    values = np.where((np.arange(60) >= 20) & (np.arange(60) < 40), 5.0, 25.0)
    series = MetricSeries(values, 1.0, "sinr", "dB")
    during = segment(series, 20, 40)
    assert len(during) == 20
    assert during.t0 == 20.0
    report = jamming_report(segment(series, 0, 20), during)
    assert report.drop_db == pytest.approx(20.0)
    assert report.drop_fraction == pytest.approx(0.8)

    linear = jamming_report(MetricSeries([100.0, 100.0]), MetricSeries([10.0, 10.0]))
    assert linear.drop_db == pytest.approx(10.0)
    assert linear.drop_fraction == pytest.approx(0.9)

    with pytest.raises(AnalysisError):
        jamming_report(MetricSeries([0.0, 0.0]), MetricSeries([1.0]))
    with pytest.raises(AnalysisError):
        segment(series, 70, 80)
