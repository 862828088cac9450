"""
Tests for unit conversions and the frozen value types in twinchan.core.
"""
import math
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from twinchan.core import (
    CirTimeline,
    IqBlock,
    RadioParams,
    RawCir,
    SignalError,
    Tap,
    TapSet,
    TapSetError,
    UnitError,
    db_to_linear,
    db_to_power,
    linear_to_db,
    power_to_db,
)


def test_db_conversions():
    assert db_to_linear(20.0) == pytest.approx(10.0)
    assert db_to_power(10.0) == pytest.approx(10.0)
    assert linear_to_db(100.0) == pytest.approx(40.0)
    assert power_to_db(100.0) == pytest.approx(20.0)
    assert linear_to_db(0.0) == -math.inf
    with pytest.raises(UnitError):
        power_to_db(-1.0)
    with pytest.raises(UnitError):
        db_to_linear(float("nan"))


def test_base_loss_amplitude():
    radio = RadioParams()
    assert radio.base_loss_db == 57.55
    assert 1.0 / radio.base_loss_amplitude == pytest.approx(754.2234, rel=1e-5)
    assert radio.noise_power == pytest.approx(1e-10)


def test_iq_block_invariants():
    block = IqBlock([1, 2, 3], 1e6, t0=0.5)
    assert block.samples.dtype == np.complex128
    assert block.duration == pytest.approx(3e-6)
    with pytest.raises(ValueError):
        block.samples[0] = 0
    with pytest.raises(SignalError):
        IqBlock([], 1e6)
    with pytest.raises(SignalError):
        IqBlock([1.0], 0.0)
    with pytest.raises(SignalError):
        IqBlock(np.zeros((2, 2)), 1e6)


def test_tapset_sorting_and_limits():
    taps = TapSet.from_pairs([(200, 0.5), (0, 1.0)])
    assert list(taps.slots) == [0, 200]
    assert taps.total_power() == pytest.approx(1.25)
    assert taps.delays_s()[1] == pytest.approx(2e-6)

    with pytest.raises(TapSetError):
        TapSet.from_pairs([(s, 1.0) for s in range(5)])
    # zero-gain taps do not count against the limit
    TapSet.from_pairs([(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0), (4, 0.0)])
    with pytest.raises(TapSetError):
        TapSet((Tap(3, 1.0), Tap(3, 0.5)))
    with pytest.raises(TapSetError):
        TapSet.single(1.0, slot=512)
    with pytest.raises(TapSetError):
        Tap(-1, 1.0)


def test_tapset_records():
    taps = TapSet.from_pairs([(0, 1 + 1j), (128, -0.25)])
    rec = taps.to_records()
    assert list(rec["slot"]) == [0, 128, -1, -1]
    assert TapSet.from_records(rec) == taps


def test_timeline_frames():
    a, b = TapSet.single(1.0), TapSet.single(0.5)
    timeline = CirTimeline((a, b), update_interval=1e-3)
    assert timeline.duration == pytest.approx(2e-3)
    assert timeline.frame_at(0.0) == a
    assert timeline.frame_at(1.5e-3) == b
    assert timeline.frame_at(2.5e-3, loop=True) == a
    assert not timeline.is_static
    assert CirTimeline.static(a, 3).is_static
    with pytest.raises(SignalError):
        timeline.frame_at(2.5e-3)
    with pytest.raises(SignalError):
        CirTimeline(())


def test_raw_cir_must_be_sorted():
    raw = RawCir.from_paths([(2e-6, 0.5), (1e-6, 1.0)])
    assert list(raw.toas) == [1e-6, 2e-6]
    assert raw.total_power() == pytest.approx(1.25)
    with pytest.raises(SignalError):
        RawCir(((2e-6, 1.0), (1e-6, 1.0)))
