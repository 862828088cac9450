"""
Tests for the channel sounder: waveform, correlation, CIR estimation,
tap extraction and link / matrix sounding.
"""
import math
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from twinchan.core import RadioParams, TapSet, db_to_linear
from twinchan.emulator import AlignmentError, EmulationError, receiver_noise
from twinchan.errors import ValidationError
from twinchan.experiments import FOUR_TAP_PROFILE, four_tap_tapset, synthetic_scenario
from twinchan.model import RecordError
from twinchan.sequences import gen_glfsr, periodic_autocorrelation
from twinchan.session import EmulationSession
from twinchan.sounder import (
    NoSignalError,
    SoundingConfig,
    bpsk_modulate,
    cir_magnitude,
    cross_correlate,
    equalize_sidelobes,
    estimate_cir,
    estimate_cir_frames,
    extract_taps,
    analyze_capture,
    capture_link,
    path_gain_db,
    sound_link,
    sound_matrix,
)
from twinchan.utils import ScenarioBuilder

BASE_LOSS_DB = RadioParams().base_loss_db


def test_cross_correlate_modes():
    assert np.allclose(cross_correlate([1, -1], [0, 1, -1, 0]), [-1, 2, -1, 0])
    assert np.allclose(cross_correlate([1, -1], [1, 0, 0, -1], mode="cyclic"), [1, 0, 1, -2])
    with pytest.raises(ValidationError):
        cross_correlate([1], [1], mode="circular")


def test_bpsk_waveform():
    code = gen_glfsr(5, 0, 1)
    tx = bpsk_modulate(code, 3, 1e6, chip_rate=5e5)
    assert len(tx) == 3 * 31 * 2
    assert np.array_equal(tx.samples[:2].real, [code.chips[0]] * 2)
    with pytest.raises(ValidationError):
        bpsk_modulate(code, 0, 1e6)
    with pytest.raises(ValidationError):
        bpsk_modulate(code, 1, 1e6, chip_rate=3e5)


def test_estimate_cir_finds_a_delayed_copy():
    code = gen_glfsr(8, 0, 1)
    rx = np.zeros(2 * 255, dtype=complex)
    rx[10:265] = 0.5 * code.as_float()
    h_i, h_q = estimate_cir(rx, code)
    assert h_i[10] == pytest.approx(0.5)
    assert np.argmax(np.abs(h_i)) == 10
    assert np.allclose(h_q, 0.0)
    assert cir_magnitude(3.0, 4.0) == pytest.approx(5.0)


def test_frames_and_sidelobe_equalization():
    code = gen_glfsr(8, 0, 1)
    rx = np.tile(code.as_float(), 6).astype(complex)
    frames = estimate_cir_frames(rx, code, mode="zero-pad")
    assert frames.shape == (4, 255)
    assert np.allclose(frames[:, 0], 1.0)
    assert np.allclose(frames[:, 1:], -1 / 255)

    flat = equalize_sidelobes(frames, code)
    assert np.allclose(flat[:, 0], 1.0)
    assert np.allclose(flat[:, 1:], 0.0, atol=1e-12)

    cyclic = estimate_cir_frames(rx, code, mode="cyclic")
    assert cyclic.shape == (5, 255)
    assert np.allclose(cyclic.real * 255, periodic_autocorrelation(code))


def test_extract_taps():
    mag = np.full(255, 1e-4)
    mag[5] = 1.0
    mag[25] = 0.1
    taps = extract_taps(mag, 50e6, 255)
    assert taps[0] == (0.0, pytest.approx(0.0))
    assert taps[1][0] == pytest.approx(20 / 50e6)
    assert taps[1][1] == pytest.approx(-20.0)
    assert len(taps) == 2

    with pytest.raises(NoSignalError):
        extract_taps(np.ones(255), 50e6, 255)
    with pytest.raises(NoSignalError):
        extract_taps(np.zeros(255), 50e6, 255)


def test_path_gain_subtracts_radio_terms():
    radio = RadioParams(tx_power_db=10.0, tx_gain_db=2.0, rx_gain_db=3.0)
    assert path_gain_db(0.1, radio) == pytest.approx(-35.0)
    assert path_gain_db(0.0) == -200.0


def test_sounding_config_validation():
    config = SoundingConfig(code="golay:a128", sample_rate=50e6, chip_rate=25e6)
    assert config.code.family == "GolayA"
    assert config.samples_per_chip == 2
    assert config.period_samples == 256
    assert config.d_peak == pytest.approx(256 / 50e6)
    assert config.to_dict()["code"] == "golay:a128"
    assert SoundingConfig(code=[1, -1, 1, 1]).to_dict()["code"] == [1, -1, 1, 1]

    with pytest.raises(RecordError):
        SoundingConfig(code="glfsr:8:0:1", sample_rate=50e6, chip_rate=3e6)
    with pytest.raises(ValidationError):
        SoundingConfig(code="glfsr:8:0:1", tx_gain_db=16.0)
    with pytest.raises(RecordError):
        SoundingConfig(code="glfsr:8:0:1", repetitions=1000, capture_duration=1e-3)
    with pytest.raises(ValidationError):
        SoundingConfig(code="nonsense")


def test_sound_link_recovers_four_taps():
    scenario = synthetic_scenario(four_tap_tapset(), 2, 0.002)
    config = SoundingConfig(code=gen_glfsr(8, 0, 1), sample_rate=50e6, capture_duration=0.002,
                            equalize_sidelobes=True)
    with EmulationSession(scenario, sample_rate=50e6, noise_enabled=False) as session:
        result = sound_link(session, 1, 2, config)

    assert len(result.taps) == 4
    for (slot, gain_db), (toa, measured) in zip(FOUR_TAP_PROFILE, result.taps):
        assert toa == pytest.approx(slot * 10e-9, abs=1e-12)
        assert measured == pytest.approx(gain_db - BASE_LOSS_DB, abs=0.01)
    assert result.path_loss_db == pytest.approx(3.0 + BASE_LOSS_DB, abs=0.01)
    assert result.missing_frames == 0
    assert result.cir_frames.shape[1] == 255
    assert result.to_dict()["n_frames"] == result.n_frames


def test_raw_estimate_stays_within_half_a_db():
    scenario = synthetic_scenario(four_tap_tapset(), 2, 0.002)
    config = SoundingConfig(code=gen_glfsr(8, 0, 1), sample_rate=50e6, capture_duration=0.002)
    with EmulationSession(scenario, sample_rate=50e6, noise_enabled=False) as session:
        result = sound_link(session, 1, 2, config)
    for (slot, gain_db), (toa, measured) in zip(FOUR_TAP_PROFILE, result.taps):
        assert measured == pytest.approx(gain_db - BASE_LOSS_DB, abs=0.5)


def test_sound_link_checks():
    scenario = synthetic_scenario(TapSet.single(1.0), 2, 0.01)
    with EmulationSession(scenario, sample_rate=1e6) as session:
        with pytest.raises(AlignmentError):
            sound_link(session, 1, 2, SoundingConfig(code="glfsr:8:0:1", sample_rate=50e6))
        with pytest.raises(EmulationError):
            sound_link(session, 1, 1, SoundingConfig(code="glfsr:8:0:1", sample_rate=1e6))


def test_sound_matrix_measures_base_loss():
    scenario = synthetic_scenario(TapSet.single(1.0), 3, 0.01)
    config = SoundingConfig(code="glfsr:8:0:1", sample_rate=1e6, capture_duration=0.01)
    with EmulationSession(scenario, sample_rate=1e6, noise_enabled=False) as session:
        matrix = sound_matrix(session, config)
    assert matrix.node_ids == [1, 2, 3]
    assert np.all(np.isnan(np.diag(matrix.loss_db)))
    assert np.allclose(matrix.off_diagonal(), BASE_LOSS_DB, atol=1e-6)
    assert matrix.no_signal == []


def test_sound_matrix_is_thread_independent():
    scenario = synthetic_scenario(TapSet.single(1.0), 3, 0.01)
    config = SoundingConfig(code="glfsr:8:0:1", sample_rate=1e6, capture_duration=0.01)

    def run(threads):
        with EmulationSession(scenario, sample_rate=1e6, rng_seed=5, threads=threads) as session:
            return sound_matrix(session, config).loss_db

    assert np.array_equal(run(1), run(3), equal_nan=True)


def test_silent_link_is_reported_as_no_signal():
    scenario = (ScenarioBuilder("silent").add_node(1).add_node(2)
                .static_all(TapSet.single(1.0)).static_link(1, 2, TapSet((), 512))
                .lasting(0.01).build())
    config = SoundingConfig(code="glfsr:8:0:1", sample_rate=1e6, capture_duration=0.01)
    with EmulationSession(scenario, sample_rate=1e6, noise_enabled=False) as session:
        with pytest.raises(NoSignalError):
            sound_link(session, 1, 2, config)
        matrix = sound_matrix(session, config)
    assert matrix.no_signal == [(1, 2)]
    assert math.isinf(matrix.loss_db[0, 1])
    assert matrix.to_dict()["loss_db"][0][1] is None


def test_capture_then_analyze_matches_sound_link():
    scenario = synthetic_scenario(four_tap_tapset(), 2, 0.002)
    config = SoundingConfig(code=gen_glfsr(8, 0, 1), sample_rate=50e6, capture_duration=0.002)
    with EmulationSession(scenario, sample_rate=50e6, rng_seed=4) as session:
        direct = sound_link(session, 1, 2, config)
    with EmulationSession(scenario, sample_rate=50e6, rng_seed=4) as session:
        capture = capture_link(session, 1, 2, config)
    assert len(capture) == config.capture_samples
    offline = analyze_capture(capture, config, scenario.radio, 1, 2)
    assert offline.path_loss_db == direct.path_loss_db
    assert offline.taps == direct.taps
    with pytest.raises(AlignmentError):
        analyze_capture(capture, SoundingConfig(code="glfsr:8:0:1", sample_rate=1e6))


def test_noise_floor_reads_on_the_estimate():
    scenario = synthetic_scenario(TapSet.single(1.0), 2, 0.05)
    session = EmulationSession(scenario, sample_rate=1e6, rng_seed=3)
    noise = receiver_noise(session, 255 * 101, 2, 0, processing_gain=255)
    frames = estimate_cir_frames(noise, gen_glfsr(8, 0, 1))
    assert 10 * np.log10(np.mean(np.abs(frames) ** 2)) == pytest.approx(RadioParams().noise_floor_db, abs=0.3)


def test_link_inside_the_dynamic_range_is_measured_with_noise():
    scenario = synthetic_scenario(TapSet.single(db_to_linear(-25.0)), 2, 0.01)
    config = SoundingConfig(code="glfsr:8:0:1", sample_rate=1e6, capture_duration=0.01)
    with EmulationSession(scenario, sample_rate=1e6, rng_seed=1) as session:
        result = sound_link(session, 1, 2, config)
    assert result.path_loss_db == pytest.approx(BASE_LOSS_DB + 25.0, abs=0.5)


@pytest.mark.parametrize("tap_db", [-45.0, -50.0, -55.0, -60.0])
def test_links_beyond_the_dynamic_range_report_no_signal(tap_db):
    scenario = synthetic_scenario(TapSet.single(db_to_linear(tap_db)), 2, 0.01)
    config = SoundingConfig(code="glfsr:8:0:1", sample_rate=1e6, capture_duration=0.01)
    with EmulationSession(scenario, sample_rate=1e6, rng_seed=1) as session:
        with pytest.raises(NoSignalError):
            sound_link(session, 1, 2, config)
        matrix = sound_matrix(session, config)
    assert math.isinf(matrix.loss_db[0, 1])
