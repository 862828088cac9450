"""
experiments.py
--------------

End-to-end pipelines behind `twinchan jam` and `twinchan reproduce`.

The jamming demo puts a Wi-Fi pair 10 m apart and a jammer either parked
10 m from the receiver or walking past it at 1.2 m/s. Links are free-space
line-of-sight rays compiled at one channel sample per second. Every second
a short snapshot is emulated and its sub-band SINR recorded.

The `reproduce` checks rerun the validation experiments with pinned seeds
and report PASS/FAIL per named check.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from .analysis import MetricSeries, compare_runs, jamming_report, normalized_xcorr, segment, summarize_scores
from .core import IqBlock, RadioParams, TapSet, db_to_linear
from .emulator import DEFAULT_SUBBANDS, gen_jammer, measure_subband_sinr, receiver_noise, superimpose
from .errors import ValidationError
from .scenario import Node, build_scenario, free_space_rays, parse_ray_paths
from .sequences import (
    aperiodic_autocorrelation,
    gen_glfsr,
    gen_gold,
    gen_golay_a128,
    gen_golay_b128,
    gen_ls,
    merit_report,
    rank_sequences,
)
from .session import EmulationSession
from .sounder import SoundingConfig, bpsk_modulate, cir_magnitude, estimate_cir, sound_link, sound_matrix
from .utils.builder import ScenarioBuilder
from .utils.rng import SeedTree

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"

# (slot, gain dB): 0 / 1.28 / 2 / 4 µs on the 10 ns grid
FOUR_TAP_PROFILE = ((0, -3.0), (128, -20.0), (200, -15.0), (400, -8.0))

WIFI_TX_ID = 1
WIFI_RX_ID = 2
JAMMER_ID = 3
LINK_DISTANCE_M = 10.0
ANTENNA_HEIGHT_M = 1.5
JAMMER_SPEED_MPS = 1.2
JAMMER_CLOSEST_S = 15.0
JAMMER_OFFSET_M = 5.0
WIFI_FREQ_HZ = 2.412e9
JAM_SAMPLE_RATE = 20e6

SIMILARITY_PAIRS = {
    "static": ("sinr_static_arena.csv", "sinr_static_colosseum.csv"),
    "mobile": ("sinr_mobile_arena.csv", "sinr_mobile_colosseum.csv"),
}
SIMILARITY_FLOOR = 0.93
# published static-jammer SINR score and the tolerance for the shipped traces
SIMILARITY_REFERENCE = {"static": 0.986}
SIMILARITY_TOLERANCE = 0.02

# tap power relative to a 0 dB link; the noise floor sits ~43 dB below it
IN_RANGE_TAP_DB = -25.0
OUT_OF_RANGE_TAPS_DB = (-45.0, -50.0, -55.0, -60.0)


class ExperimentError(ValidationError):
    """Raised for an unknown experiment id or impossible demo parameters."""
    pass


# ---------------------------------------------------------------- fixtures

def four_tap_tapset() -> TapSet:
    return TapSet.from_pairs((slot, db_to_linear(g)) for slot, g in FOUR_TAP_PROFILE)


def synthetic_scenario(
    tapset: TapSet,
    n_nodes: int = 2,
    duration_s: float = 1.0,
    radio: Optional[RadioParams] = None,
    name: str = "synthetic",
):
    """Every ordered pair of `n_nodes` static nodes carries `tapset` for `duration_s`."""
    builder = ScenarioBuilder(name).with_radio(radio).static_all(tapset).lasting(duration_s)
    for i in range(1, n_nodes + 1):
        builder.add_node(i, position=(float(i), 0.0, ANTENNA_HEIGHT_M))
    return builder.build()


# ---------------------------------------------------------------- jamming demo

def jam_nodes(mobility: str, total_s: float) -> List[Node]:
    """Wi-Fi transmitter, receiver and a jammer, static or walking past the receiver."""
    h = ANTENNA_HEIGHT_M
    rx_x = LINK_DISTANCE_M
    nodes = [
        Node(id=WIFI_TX_ID, position=(0.0, 0.0, h)),
        Node(id=WIFI_RX_ID, position=(rx_x, 0.0, h)),
    ]
    if mobility == "static":
        nodes.append(Node(id=JAMMER_ID, position=(rx_x + LINK_DISTANCE_M, 0.0, h)))
    elif mobility == "mobile":
        start = (rx_x - JAMMER_SPEED_MPS * JAMMER_CLOSEST_S, JAMMER_OFFSET_M, h)
        end = (start[0] + JAMMER_SPEED_MPS * total_s, JAMMER_OFFSET_M, h)
        nodes.append(Node(id=JAMMER_ID, kind="mobile", position=start, speed=JAMMER_SPEED_MPS,
                          trajectory=(start, end)))
    else:
        raise ExperimentError(f"unknown mobility {mobility!r}; expected static or mobile")
    return nodes


def run_jam_demo(
    kind: str = "wideband",
    mobility: str = "static",
    on_s: float = 20.0,
    off_s: float = 40.0,
    total_s: int = 60,
    seed: int = 0,
    sample_rate: float = JAM_SAMPLE_RATE,
    snapshot_s: float = 2e-3,
    signal_power_db: float = 40.0,
    jammer_power_db: float = 40.0,
    bandwidth_hz: Optional[float] = None,
    n_subbands: int = DEFAULT_SUBBANDS,
    threads: int = 1,
) -> MetricSeries:
    """
    Per-second SINR at the Wi-Fi receiver with a jammer active in [on_s, off_s).

    Returns:
        MetricSeries: one dB value per second, labelled "<kind>-<mobility>".

    Raises:
        ExperimentError: an empty or out-of-range jamming interval.
    """
    total_s = int(total_s)
    if total_s < 1:
        raise ExperimentError(f"total must be >= 1 s, got {total_s}")
    if not 0 <= on_s < off_s <= total_s:
        raise ExperimentError(f"need 0 <= on < off <= total, got on={on_s}, off={off_s}, total={total_s}")

    nodes = jam_nodes(mobility, total_s)
    rays = free_space_rays(nodes, [float(t) for t in range(total_s)], WIFI_FREQ_HZ)
    scenario = build_scenario(
        nodes, RadioParams(center_freq_hz=WIFI_FREQ_HZ), parse_ray_paths(rays), Ts=1.0,
        update_interval=1.0, name=f"jam-{mobility}", threads=threads,
    )
    n = int(round(snapshot_s * sample_rate))
    tree = SeedTree(seed)
    amplitude = db_to_linear(signal_power_db)
    noisy = EmulationSession(scenario, sample_rate=sample_rate, rng_seed=seed)
    quiet = EmulationSession(scenario, sample_rate=sample_rate, rng_seed=seed, noise_enabled=False)

    values = []
    for b in range(total_s):
        t0 = float(b)
        chips = 1.0 - 2.0 * tree.child(WIFI_TX_ID, b).integers(0, 2, n)
        wifi = IqBlock(amplitude * chips.astype(np.complex128), sample_rate, t0)
        signal = superimpose(WIFI_RX_ID, {WIFI_TX_ID: wifi}, quiet).samples[:n]
        if on_s <= t0 < off_s:
            jam = gen_jammer(kind, bandwidth_hz, jammer_power_db, snapshot_s,
                             seed=tree.fork(JAMMER_ID, b).seed, sample_rate=sample_rate, t0=t0)
            interference = superimpose(WIFI_RX_ID, {JAMMER_ID: jam}, noisy, stream=b).samples[:n]
        else:
            interference = receiver_noise(noisy, n, WIFI_RX_ID, b)
        values.append(measure_subband_sinr(signal, interference, n_subbands))
        logger.debug("Jam demo %s/%s t=%ds: SINR %.2f dB", kind, mobility, b, values[-1])

    series = MetricSeries(np.asarray(values), 1.0, f"{kind}-{mobility}", "dB")
    logger.info("Jam demo %s/%s: %d s, jammer on [%g, %g) s", kind, mobility, total_s, on_s, off_s)
    return series


# ---------------------------------------------------------------- reproduce

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ReproduceReport:
    experiment: str
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name, bool(passed), detail))
        logger.info("%s / %s: %s %s", self.experiment, name, "PASS" if passed else "FAIL", detail)

    def table(self) -> str:
        width = max([len(c.name) for c in self.checks] + [5])
        lines = [f"{'check'.ljust(width)}  result  detail"]
        for c in self.checks:
            lines.append(f"{c.name.ljust(width)}  {'PASS' if c.passed else 'FAIL':6}  {c.detail}")
        lines.append(f"{self.experiment}: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, object]:
        return {"experiment": self.experiment, "passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks]}


def _peak_spacing(code, sample_rate: float) -> np.ndarray:
    tx = bpsk_modulate(code, 4, sample_rate)
    mag = cir_magnitude(*estimate_cir(tx, code, 1, mode="cyclic"))
    peaks, _ = find_peaks(mag, height=0.6 * mag.max(), distance=len(code) // 2)
    return np.diff(peaks) / sample_rate


def reproduce_seq_tuning(seed: int = 0, threads: int = 1) -> ReproduceReport:
    report = ReproduceReport("seq-tuning")
    glfsr = gen_glfsr(8, 0, 1)
    candidates = [glfsr, gen_gold(), gen_golay_a128(), gen_golay_b128(), gen_ls(256)]
    ranking = rank_sequences(candidates)
    order = ", ".join(f"{r.name} ({r.peak_to_sidelobe_db:.1f} dB)" for _, r in ranking)
    report.check("glfsr-ranked-first", ranking[0][0].family == "GLFSR", order)

    merit = merit_report(glfsr)
    chips = glfsr.chips.astype(np.int64)
    brute = max(abs(int(np.dot(chips, np.roll(chips, -k)))) for k in range(1, len(chips)))
    report.check("glfsr-off-peak-is-1", merit.max_off_peak_abs == 1 and brute == 1,
                 f"merit {merit.max_off_peak_abs}, brute force {brute}")

    a, b = gen_golay_a128(), gen_golay_b128()
    total = aperiodic_autocorrelation(a) + aperiodic_autocorrelation(b)
    center = len(a) - 1
    ok = total[center] == 2 * len(a) and not np.any(np.delete(total, center))
    report.check("golay-complementary", ok, f"sum at lag 0 = {int(total[center])}")

    for code, expected in ((glfsr, 255e-6), (a, 128e-6)):
        spacing = _peak_spacing(code, 1e6)
        ok = spacing.size > 0 and np.all(np.abs(spacing - expected) <= 1e-6)
        report.check(f"d-peak-{code.name}", ok, f"spacing {sorted(set(np.round(spacing * 1e6, 3)))} µs")
    return report


def reproduce_base_loss(seed: int = 0, threads: int = 1, n_nodes: int = 10,
                        capture_s: float = 0.05, sample_rate: float = 1e6) -> ReproduceReport:
    report = ReproduceReport("base-loss")
    radio = RadioParams()
    scenario = synthetic_scenario(TapSet.single(1.0), n_nodes, capture_s, radio, name="zero-db")
    config = SoundingConfig(code=gen_glfsr(8, 0, 1), sample_rate=sample_rate, capture_duration=capture_s)

    for noise, tol in ((False, 0.01), (True, 0.05)):
        with EmulationSession(scenario, sample_rate=sample_rate, rng_seed=seed,
                              noise_enabled=noise, threads=threads) as session:
            matrix = sound_matrix(session, config)
        mean = float(np.mean(matrix.off_diagonal()))
        sd = float(np.std(matrix.off_diagonal()))
        label = "noise-on" if noise else "noise-off"
        report.check(f"mean-loss-{label}", abs(mean - radio.base_loss_db) <= tol,
                     f"mean {mean:.4f} dB (sd {sd:.4f}), expected {radio.base_loss_db} ± {tol}")

    for tap_db in (IN_RANGE_TAP_DB,) + OUT_OF_RANGE_TAPS_DB:
        weak = synthetic_scenario(TapSet.single(db_to_linear(tap_db)), 2, capture_s, radio, name="attenuated")
        with EmulationSession(weak, sample_rate=sample_rate, rng_seed=seed) as session:
            loss = sound_matrix(session, config, node_ids=[1, 2]).loss_db[0, 1]
        detail = "no signal detected" if not np.isfinite(loss) else f"loss {loss:.2f} dB"
        if tap_db == IN_RANGE_TAP_DB:
            expected = radio.base_loss_db - tap_db
            report.check(f"measurable-{-tap_db:g}dB", abs(loss - expected) <= 0.5,
                         f"{detail}, expected {expected:.2f}")
        else:
            report.check(f"dynamic-range-{-tap_db:g}dB", not np.isfinite(loss) or loss >= 99.0, detail)
    return report


def reproduce_multitap(seed: int = 0, threads: int = 1, capture_s: float = 0.01,
                       sample_rate: float = 50e6) -> ReproduceReport:
    report = ReproduceReport("multitap")
    radio = RadioParams()
    scenario = synthetic_scenario(four_tap_tapset(), 2, capture_s, radio, name="four-tap")
    config = SoundingConfig(code=gen_glfsr(8, 0, 1), sample_rate=sample_rate, capture_duration=capture_s)
    with EmulationSession(scenario, sample_rate=sample_rate, rng_seed=seed, threads=threads) as session:
        result = sound_link(session, 1, 2, config)

    report.check("tap-count", len(result.taps) == len(FOUR_TAP_PROFILE), f"{len(result.taps)} taps")
    for (slot, gain_db), (toa, measured) in zip(FOUR_TAP_PROFILE, result.taps):
        expected_toa = slot * scenario.slot_width
        expected_gain = gain_db - radio.base_loss_db
        ok = abs(toa - expected_toa) <= 20e-9 and abs(measured - expected_gain) <= 0.5
        report.check(f"tap-{expected_toa * 1e6:g}us", ok,
                     f"toa {toa * 1e6:.3f} µs, gain {measured:.2f} dB (expected {expected_gain:.2f})")

    if len(result.tap_stats) == len(FOUR_TAP_PROFILE):
        strongest = max(result.tap_stats, key=lambda s: s.median_db)
        weakest = min(result.tap_stats, key=lambda s: s.median_db)
        report.check("tap-stability", strongest.sd_db <= 0.1 and strongest.sd_db < weakest.sd_db,
                     f"strongest sd {strongest.sd_db:.4f} dB, weakest sd {weakest.sd_db:.4f} dB "
                     f"over {result.n_frames} frames")
    return report


def _check_jamming(report: ReproduceReport, mobility: str, seed: int, threads: int,
                   on_s: float = 20.0, off_s: float = 40.0, total_s: int = 60) -> None:
    drops = {}
    for kind in ("narrowband", "wideband"):
        series = run_jam_demo(kind, mobility, on_s, off_s, total_s, seed=seed, threads=threads)
        t = series.times
        inside = (t >= on_s) & (t < off_s)
        quiet_level = float(np.median(series.values[~inside]))
        confined = np.all(np.abs(series.values[~inside] - quiet_level) <= 0.5)
        dropped = np.all(series.values[inside] < quiet_level - 0.25)
        report.check(f"{kind}-drop-confined", bool(confined and dropped),
                     f"outside {quiet_level:.2f} dB, inside min/max "
                     f"{series.values[inside].min():.2f}/{series.values[inside].max():.2f} dB")
        drops[kind] = jamming_report(segment(series, 0.0, on_s), segment(series, on_s, off_s)).drop_db
    report.check("wideband-hurts-more", drops["wideband"] > drops["narrowband"],
                 f"drop wideband {drops['wideband']:.2f} dB vs narrowband {drops['narrowband']:.2f} dB")


def reproduce_jam_static(seed: int = 0, threads: int = 1) -> ReproduceReport:
    report = ReproduceReport("jam-static")
    _check_jamming(report, "static", seed, threads)
    return report


def reproduce_jam_mobile(seed: int = 0, threads: int = 1) -> ReproduceReport:
    report = ReproduceReport("jam-mobile")
    _check_jamming(report, "mobile", seed, threads)
    return report


def brute_force_xcorr(x: Sequence[float], y: Sequence[float], k: int) -> float:
    """Direct evaluation of ρ(k) with explicit loops."""
    n = max(len(x), len(y))
    xs = list(x) + [0.0] * (n - len(x))
    ys = list(y) + [0.0] * (n - len(y))
    mx, my = sum(xs) / n, sum(ys) / n
    num = 0.0
    for i in range(n):
        if 0 <= i + k < n:
            num += (xs[i] - mx) * (ys[i + k] - my)
    den = math.sqrt(sum((v - mx) ** 2 for v in xs) * sum((v - my) ** 2 for v in ys))
    return num / den


def reproduce_similarity(seed: int = 0, threads: int = 1, data_dir=DATA_DIR) -> ReproduceReport:
    report = ReproduceReport("similarity")
    rng = SeedTree(seed).child(9)
    worst = 0.0
    for _ in range(20):
        nx, ny = rng.integers(2, 65, size=2)
        x, y = rng.standard_normal(nx), rng.standard_normal(ny)
        k_max = int(max(nx, ny)) - 1
        rep = normalized_xcorr(x, y, k_max)
        for k in range(-k_max, k_max + 1):
            worst = max(worst, abs(rep.rho(k) - brute_force_xcorr(x, y, k)))
    report.check("matches-brute-force", worst <= 1e-12, f"max |error| {worst:.2e}")

    scores = {}
    for name, (real_file, twin_file) in SIMILARITY_PAIRS.items():
        real = MetricSeries.from_csv(Path(data_dir) / real_file, unit="dB")
        twin = MetricSeries.from_csv(Path(data_dir) / twin_file, unit="dB")
        rep = compare_runs(real, twin)
        scores[("sinr", name)] = rep.score
        report.check(f"{name}-sinr-similarity", rep.score >= SIMILARITY_FLOOR,
                     f"score {rep.score:.3f} at lag {rep.best_lag}")
        if name in SIMILARITY_REFERENCE:
            reference = SIMILARITY_REFERENCE[name]
            report.check(f"{name}-sinr-reference", abs(rep.score - reference) <= SIMILARITY_TOLERANCE,
                         f"score {rep.score:.3f}, reference {reference} ± {SIMILARITY_TOLERANCE}")
    summary = summarize_scores(scores)
    report.check("average-similarity", summary["overall"] >= SIMILARITY_FLOOR, f"average {summary['overall']:.3f}")
    return report


REPRODUCERS: Dict[str, Callable[..., ReproduceReport]] = {
    "seq-tuning": reproduce_seq_tuning,
    "base-loss": reproduce_base_loss,
    "multitap": reproduce_multitap,
    "jam-static": reproduce_jam_static,
    "jam-mobile": reproduce_jam_mobile,
    "similarity": reproduce_similarity,
}


def run_reproduce(experiment_id: str, seed: int = 0, threads: int = 1) -> ReproduceReport:
    """
    Run one validation experiment end to end.

    Raises:
        ExperimentError: unknown experiment id.
    """
    try:
        runner = REPRODUCERS[experiment_id]
    except KeyError as e:
        raise ExperimentError(
            f"unknown experiment {experiment_id!r}; expected one of {sorted(REPRODUCERS)}"
        ) from e
    logger.info("Reproducing %s (seed %d)", experiment_id, seed)
    return runner(seed=seed, threads=threads)
