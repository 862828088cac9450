"""
Tests for the bundled fixtures, the jamming demo and the reproduce runs.
"""
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from twinchan.core import db_to_linear
from twinchan.experiments import (
    JAMMER_ID,
    REPRODUCERS,
    ExperimentError,
    four_tap_tapset,
    jam_nodes,
    run_jam_demo,
    run_reproduce,
)


def test_four_tap_tapset():
    tapset = four_tap_tapset()
    assert list(tapset.slots) == [0, 128, 200, 400]
    assert np.allclose(np.abs(tapset.gains), [db_to_linear(g) for g in (-3.0, -20.0, -15.0, -8.0)])


def test_jam_nodes():
    static = jam_nodes("static", 60)
    assert [n.id for n in static] == [1, 2, 3]
    assert not static[2].is_mobile
    mobile = jam_nodes("mobile", 60)
    jammer = [n for n in mobile if n.id == JAMMER_ID][0]
    assert jammer.is_mobile
    assert len(jammer.trajectory) == 2
    with pytest.raises(ExperimentError):
        jam_nodes("flying", 60)


def test_short_jam_demo():
    kwargs = dict(mobility="static", on_s=1.0, off_s=3.0, total_s=4, snapshot_s=1e-3, seed=2)
    wide = run_jam_demo("wideband", **kwargs)
    narrow = run_jam_demo("narrowband", **kwargs)
    assert len(wide) == 4
    assert wide.unit == "dB"
    assert wide.label == "wideband-static"

    inside = np.array([False, True, True, False])
    assert wide.values[inside].max() < wide.values[~inside].min() - 5.0
    wide_drop = wide.values[~inside].mean() - wide.values[inside].mean()
    narrow_drop = narrow.values[~inside].mean() - narrow.values[inside].mean()
    assert narrow_drop < wide_drop

    assert np.array_equal(wide.values, run_jam_demo("wideband", **kwargs).values)


def test_jam_demo_rejects_bad_windows():
    with pytest.raises(ExperimentError):
        run_jam_demo(on_s=5.0, off_s=2.0, total_s=10)
    with pytest.raises(ExperimentError):
        run_jam_demo(on_s=0.0, off_s=20.0, total_s=10)
    with pytest.raises(ExperimentError):
        run_jam_demo(total_s=0)


@pytest.mark.parametrize("experiment", ["seq-tuning", "similarity", "multitap", "base-loss", "jam-static"])
def test_reproduce_passes(experiment):
    report = run_reproduce(experiment, seed=0)
    assert report.passed, report.table()
    assert report.to_dict()["experiment"] == experiment


def test_unknown_experiment():
    assert "jam-mobile" in REPRODUCERS
    with pytest.raises(ExperimentError, match="unknown experiment"):
        run_reproduce("everything")
