"""
Tests for the tapped-delay-line emulator: FIR filtering, time-varying
links, superposition with base loss and noise, jammers and SINR.
"""
import math
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from twinchan.core import CirTimeline, IqBlock, RadioParams, TapSet, db_to_linear
from twinchan.emulator import (
    AlignmentError,
    EmulationError,
    JammerError,
    TimelineOverrunError,
    emulate_link,
    fir_apply,
    gen_jammer,
    measure_sinr,
    measure_subband_sinr,
    receiver_noise,
    superimpose,
    tap_sample_delays,
)
from twinchan.session import EmulationSession
from twinchan.utils import ScenarioBuilder


def flat_scenario(n_nodes=2, gain=1.0, frames=10, radio=None):
    builder = ScenarioBuilder("flat").with_radio(radio).static_all(TapSet.single(gain)).n_frames(frames)
    for i in range(1, n_nodes + 1):
        builder.add_node(i, position=(float(i), 0.0, 1.0))
    return builder.build()


def test_fir_apply_places_taps():
    x = IqBlock([1, 0, 0], 100e6)
    y = fir_apply(x, TapSet.from_pairs([(0, 1.0), (2, 0.5)]))
    assert np.allclose(y.samples, [1, 0, 0.5, 0, 0])


def test_tap_delays_round_to_samples():
    delays = tap_sample_delays(TapSet.from_pairs([(0, 1.0), (128, 1.0), (200, 1.0), (400, 1.0)]), 50e6)
    assert list(delays) == [0, 64, 100, 200]
    assert list(tap_sample_delays(TapSet.single(1.0, slot=3), 20e6)) == [1]


def test_static_timeline_equals_one_filter():
    rng = np.random.default_rng(1)
    x = IqBlock(rng.standard_normal(3000) + 1j * rng.standard_normal(3000), 1e6)
    taps = TapSet.from_pairs([(0, 1.0), (300, 0.5j)])
    timeline = CirTimeline.static(taps, 5)
    assert np.allclose(emulate_link(x, timeline).samples, fir_apply(x, taps).samples)


def test_time_varying_link_switches_on_frame_boundaries():
    timeline = CirTimeline((TapSet.single(1.0), TapSet.single(2.0)), update_interval=1e-3)
    y = emulate_link(IqBlock(np.ones(2000), 1e6), timeline)
    assert np.allclose(y.samples[:1000], 1.0)
    assert np.allclose(y.samples[1000:], 2.0)


def test_overrun_needs_loop():
    timeline = CirTimeline.static(TapSet.single(1.0), 1)
    x = IqBlock(np.ones(1500), 1e6)
    with pytest.raises(TimelineOverrunError):
        emulate_link(x, timeline)
    assert len(emulate_link(x, timeline, loop=True)) == 1500
    with pytest.raises(AlignmentError):
        emulate_link(x, timeline, sample_rate=2e6)


def test_superimpose_applies_base_loss():
    scenario = flat_scenario()
    session = EmulationSession(scenario, sample_rate=1e6, noise_enabled=False)
    x = IqBlock(np.ones(100), 1e6)
    y = superimpose(2, {1: x}, session)
    assert np.allclose(y.samples, RadioParams().base_loss_amplitude)


def test_superimpose_sums_transmitters():
    scenario = flat_scenario(3, radio=RadioParams(base_loss_db=0.0))
    session = EmulationSession(scenario, sample_rate=1e6, noise_enabled=False)
    y = superimpose(3, {1: IqBlock(np.ones(10), 1e6), 2: IqBlock(2 * np.ones(5), 1e6)}, session)
    assert len(y) == 10
    assert np.allclose(y.samples[:5], 3.0)
    assert np.allclose(y.samples[5:], 1.0)


def test_superimpose_checks_inputs():
    session = EmulationSession(flat_scenario(3), sample_rate=1e6, noise_enabled=False)
    with pytest.raises(AlignmentError):
        superimpose(2, {1: IqBlock(np.ones(10), 2e6)}, session)
    with pytest.raises(AlignmentError):
        superimpose(3, {1: IqBlock(np.ones(10), 1e6), 2: IqBlock(np.ones(10), 1e6, t0=1e-3)}, session)
    with pytest.raises(EmulationError):
        superimpose(1, {1: IqBlock(np.ones(10), 1e6)}, session)
    with pytest.raises(EmulationError):
        superimpose(1, {}, session)


def test_receiver_noise_streams():
    session = EmulationSession(flat_scenario(), sample_rate=1e6, rng_seed=7)
    a = receiver_noise(session, 50_000, 2, 0)
    assert np.array_equal(a, receiver_noise(session, 50_000, 2, 0))
    assert not np.array_equal(a, receiver_noise(session, 50_000, 2, 1))
    assert not np.array_equal(a, receiver_noise(session, 50_000, 1, 0))
    assert np.mean(np.abs(a) ** 2) == pytest.approx(1e-10, rel=0.05)


def test_jammer_power_and_determinism():
    jam = gen_jammer("narrowband", power_db=-20.0, duration_s=1e-3, seed=4, sample_rate=20e6)
    assert len(jam) == 20_000
    assert np.mean(np.abs(jam.samples) ** 2) == pytest.approx(db_to_linear(-20.0) ** 2, rel=1e-9)
    again = gen_jammer("narrowband", power_db=-20.0, duration_s=1e-3, seed=4, sample_rate=20e6)
    assert np.array_equal(jam.samples, again.samples)

    # almost all energy within the 156 kHz band
    spectrum = np.abs(np.fft.fftshift(np.fft.fft(jam.samples))) ** 2
    freqs = np.fft.fftshift(np.fft.fftfreq(len(jam), 1 / 20e6))
    in_band = spectrum[np.abs(freqs) <= 156e3].sum() / spectrum.sum()
    assert in_band > 0.95


def test_jammer_argument_checks():
    with pytest.raises(JammerError):
        gen_jammer("pulsed")
    with pytest.raises(JammerError):
        gen_jammer("wideband", bandwidth_hz=30e6, sample_rate=20e6)
    with pytest.raises(JammerError):
        gen_jammer("wideband", bandwidth_hz=0.0)
    full = gen_jammer("wideband", bandwidth_hz=20e6, sample_rate=20e6, duration_s=1e-4)
    assert len(full) == 2000


def test_sinr_measures():
    rng = np.random.default_rng(2)
    s = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    assert measure_sinr(s, 0.1 * s) == pytest.approx(20.0)
    assert measure_sinr(s, np.zeros(64)) == math.inf
    assert measure_subband_sinr(s, s, 8) == pytest.approx(0.0, abs=1e-9)
    assert measure_subband_sinr(s, np.zeros(64), 8) == math.inf
    with pytest.raises(EmulationError):
        measure_sinr(s, s[:10])


def test_subband_sinr_punishes_wide_interference():
    rng = np.random.default_rng(0)
    n = 4096
    signal = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    narrow = gen_jammer("narrowband", power_db=10.0, duration_s=n / 20e6, seed=1, sample_rate=20e6)
    wide = gen_jammer("wideband", power_db=10.0, duration_s=n / 20e6, seed=1, sample_rate=20e6)
    floor = 1e-3 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    assert measure_subband_sinr(signal, narrow.samples + floor) > measure_subband_sinr(signal, wide.samples + floor)


def test_receiver_noise_processing_gain():
    session = EmulationSession(flat_scenario(), sample_rate=1e6, rng_seed=7)
    plain = receiver_noise(session, 50_000, 2, 0)
    boosted = receiver_noise(session, 50_000, 2, 0, processing_gain=255)
    assert np.allclose(boosted, np.sqrt(255) * plain)
    with pytest.raises(EmulationError):
        receiver_noise(session, 10, 2, 0, processing_gain=0.5)


def multipath_scenario(n_nodes=3):
    builder = ScenarioBuilder("multipath").static_all(TapSet.from_pairs([(0, 0.6), (200, -0.25)])).n_frames(2)
    for i in range(1, n_nodes + 1):
        builder.add_node(i, position=(float(i), 0.0, 1.0))
    return builder.build()


def two_frame_timeline():
    taps = (TapSet.from_pairs([(0, 0.8), (300, 0.3j)]), TapSet.from_pairs([(100, 0.5 - 0.2j), (400, 0.1)]))
    return CirTimeline(taps, update_interval=1e-3)


def random_block(rng, n, t0=0.0):
    return IqBlock(rng.standard_normal(n) + 1j * rng.standard_normal(n), 1e6, t0)


def test_superimpose_is_linear():
    scenario = multipath_scenario()
    session = EmulationSession(scenario, sample_rate=1e6, noise_enabled=False)
    rng = np.random.default_rng(11)
    x = random_block(rng, 1800)
    y = superimpose(3, {1: x}, session).samples
    for alpha in (0.0, -2.5, 3e-4 + 1.7j, 1e6):
        scaled = superimpose(3, {1: x.with_samples(alpha * x.samples)}, session).samples
        assert np.max(np.abs(scaled - alpha * y)) <= 1e-12 * max(np.max(np.abs(alpha * y)), 1e-300)


def test_joint_emulation_equals_sum_of_single_emulations():
    scenario = multipath_scenario()
    session = EmulationSession(scenario, sample_rate=1e6, noise_enabled=False)
    rng = np.random.default_rng(12)
    a, b = random_block(rng, 1500), random_block(rng, 1500)
    joint = superimpose(3, {1: a, 2: b}, session).samples
    single = superimpose(3, {1: a}, session).samples + superimpose(3, {2: b}, session).samples
    assert np.max(np.abs(joint - single)) <= 1e-12 * np.max(np.abs(joint))


def test_output_energy_stays_within_the_frame_gain_bound():
    timeline = two_frame_timeline()
    rng = np.random.default_rng(13)
    for _ in range(5):
        x = random_block(rng, 2000)
        y = emulate_link(x, timeline)
        energy_in = np.sum(np.abs(x.samples) ** 2)
        energy_out = np.sum(np.abs(y.samples) ** 2)
        # Young's bound with the largest per-frame tap-magnitude sum
        amp = max(np.sum(np.abs(frame.gains)) for frame in timeline.frames)
        assert energy_out <= amp ** 2 * energy_in
        # white input: output power follows the per-frame tap power
        powers = [np.sum(np.abs(frame.gains) ** 2) for frame in timeline.frames]
        assert energy_out <= 1.1 * max(powers) * energy_in
        assert energy_out >= 0.9 * min(powers) * energy_in
