"""
sounder.py
----------

Software channel sounder: a known BPSK code is sent over an emulated link,
the capture is correlated against the code, and every code period yields one
channel impulse response estimate. Taps are the peaks of that estimate; the
path loss is the strongest tap's gain with the sign flipped.

Correlation modes:
    - "zero-pad": the tail of the capture is padded with zeros, so lags near
      the end see part of the code. Frames are cut from 2-period windows so
      every reported lag is a full-period sum.
    - "cyclic": the capture wraps onto itself (periodic correlation).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import correlate, find_peaks

from .core import IqBlock, RadioParams, SignalError, db_to_linear, linear_to_db
from .emulator import AlignmentError, EmulationError, superimpose
from .fields import BooleanField, Field, FloatField, IntegerField, TextField
from .model import BaseRecord, RecordError
from .sequences import CodeSequence, SequenceError, parse_code_spec, periodic_autocorrelation

logger = logging.getLogger(__name__)

CORRELATION_MODES = ("zero-pad", "cyclic")
DEFAULT_THRESHOLD_DB = 12.0
MIN_PATH_GAIN_DB = -200.0
MAX_SOUNDER_GAIN_DB = 15.0

Tap = Tuple[float, float]  # (toa_s relative to the strongest tap, gain_db)


class SounderError(EmulationError):
    """Base exception for sounding errors."""
    pass


class NoSignalError(SounderError):
    """Raised when no correlation peak rises above the detection threshold."""
    pass


class CodeField(Field):
    """A CodeSequence, given directly or as a `parse_code_spec` string."""

    def to_python(self, value):
        if isinstance(value, CodeSequence):
            return value
        if isinstance(value, str):
            try:
                return parse_code_spec(value)
            except SequenceError as e:
                raise ValueError(str(e)) from e
        if isinstance(value, (list, tuple, np.ndarray)):
            return CodeSequence(np.asarray(value), "Custom")
        raise TypeError(f"expected a CodeSequence or a code spec string, got {type(value).__name__}")

    def to_json(self, value):
        spec = value.spec
        return spec if spec is not None else [int(c) for c in value.chips]


class SoundingConfig(BaseRecord):
    """
    Sounder settings for one capture.

    `repetitions` left unset fills the capture with whole code periods;
    `chip_rate` left unset means one sample per chip.
    """
    code = CodeField(doc="sounding code")
    repetitions = IntegerField(min_value=1, nullable=True, default=None)
    sample_rate = FloatField(min_value=0.0, exclusive_min=True, default=50e6)
    chip_rate = FloatField(min_value=0.0, exclusive_min=True, nullable=True, default=None)
    capture_duration = FloatField(min_value=0.0, exclusive_min=True, default=3.0)
    tx_gain_db = FloatField(min_value=0.0, max_value=MAX_SOUNDER_GAIN_DB, default=0.0)
    rx_gain_db = FloatField(min_value=0.0, max_value=MAX_SOUNDER_GAIN_DB, default=0.0)
    threshold_db = FloatField(min_value=0.0, default=DEFAULT_THRESHOLD_DB)
    correlation_mode = TextField(choices=CORRELATION_MODES, default="zero-pad")
    equalize_sidelobes = BooleanField(default=False)
    compensate_gains = BooleanField(default=False)
    start_time = FloatField(min_value=0.0, default=0.0)

    def validate(self):
        chip_rate = self.chip_rate or self.sample_rate
        if chip_rate > self.sample_rate:
            raise RecordError(f"chip_rate {chip_rate} exceeds sample_rate {self.sample_rate}")
        spc = self.sample_rate / chip_rate
        if abs(spc - round(spc)) > 1e-9:
            raise RecordError(f"sample_rate / chip_rate must be an integer, got {spc:.6g}")
        if self.repetitions is not None:
            needed = self.repetitions * self.period_samples / self.sample_rate
            if self.capture_duration < needed * (1 - 1e-12):
                raise RecordError(
                    f"capture_duration {self.capture_duration} s is shorter than "
                    f"{self.repetitions} code periods ({needed:.6g} s)"
                )

    @property
    def samples_per_chip(self) -> int:
        return int(round(self.sample_rate / (self.chip_rate or self.sample_rate)))

    @property
    def period_samples(self) -> int:
        return len(self.code) * self.samples_per_chip

    @property
    def capture_samples(self) -> int:
        return int(round(self.capture_duration * self.sample_rate))

    @property
    def d_peak(self) -> float:
        """Delay window of one code period, seconds."""
        return self.period_samples / self.sample_rate


@dataclass
class TapStats:
    toa_s: float
    mean_db: float
    sd_db: float
    median_db: float
    count: int

    def to_dict(self) -> Dict[str, float]:
        return {"toa_s": self.toa_s, "mean_db": self.mean_db, "sd_db": self.sd_db,
                "median_db": self.median_db, "count": self.count}


@dataclass
class SoundingResult:
    """
    Outcome of sounding one link.

    Attributes:
        cir_frames (np.ndarray): |h| per code period, shape (frames, period).
        taps (list): (toa_s, median gain_db) of taps seen in most frames.
        path_loss_db (float): minus the median strongest-tap gain.
        d_peak (float): delay window of one period, seconds.
        frame_taps (list): the (toa_s, gain_db) taps of every detecting frame.
        tap_stats (list): per-tap statistics, same order as `taps`.
        missing_frames (int): frames in which nothing was detected.
    """
    tx: int
    rx: int
    cir_frames: np.ndarray
    taps: List[Tap]
    path_loss_db: float
    d_peak: float
    frame_taps: List[List[Tap]] = field(default_factory=list)
    tap_stats: List[TapStats] = field(default_factory=list)
    missing_frames: int = 0

    @property
    def n_frames(self) -> int:
        return int(self.cir_frames.shape[0])

    def mean_cir(self) -> np.ndarray:
        return self.cir_frames.mean(axis=0) if self.n_frames else np.zeros(0)

    def to_dict(self) -> Dict[str, object]:
        return {
            "tx": self.tx,
            "rx": self.rx,
            "taps": [{"toa_s": t, "gain_db": g} for t, g in self.taps],
            "path_loss_db": self.path_loss_db,
            "d_peak_s": self.d_peak,
            "n_frames": self.n_frames,
            "missing_frames": self.missing_frames,
            "tap_stats": [s.to_dict() for s in self.tap_stats],
        }

    def __repr__(self) -> str:
        return (f"<SoundingResult(link={self.tx}->{self.rx}, taps={len(self.taps)}, "
                f"path_loss_db={self.path_loss_db:.2f}, frames={self.n_frames})>")


# ---------------------------------------------------------------- waveform

def _samples_per_chip(sample_rate: float, chip_rate: Optional[float]) -> int:
    chip_rate = sample_rate if chip_rate is None else chip_rate
    if chip_rate <= 0 or chip_rate > sample_rate:
        raise SignalError(f"chip_rate must be in (0, {sample_rate}], got {chip_rate}")
    spc = sample_rate / chip_rate
    if abs(spc - round(spc)) > 1e-9:
        raise SignalError(f"sample_rate / chip_rate must be an integer, got {spc:.6g}")
    return int(round(spc))


def reference_waveform(code: CodeSequence, samples_per_chip: int = 1) -> np.ndarray:
    """One period of the code, each chip held for `samples_per_chip` samples."""
    return np.repeat(code.as_float(), samples_per_chip)


def bpsk_modulate(
    code: CodeSequence,
    repetitions: int,
    sample_rate: float,
    chip_rate: Optional[float] = None,
    t0: float = 0.0,
) -> IqBlock:
    """
    BPSK waveform: chip +1 -> 1+0j, -1 -> -1+0j, repeated back to back.

    Raises:
        SignalError: repetitions < 1, or a chip rate that does not divide
            the sample rate.
    """
    if repetitions < 1:
        raise SignalError(f"repetitions must be >= 1, got {repetitions}")
    spc = _samples_per_chip(sample_rate, chip_rate)
    period = reference_waveform(code, spc)
    return IqBlock(np.tile(period, int(repetitions)).astype(np.complex128), sample_rate, t0)


# ---------------------------------------------------------------- correlation

def cross_correlate(x, y, mode: str = "zero-pad") -> np.ndarray:
    """
    χ(k) = Σ_n x(n)·y(n + k) for k in [0, len(y) − 1].

    Beyond the end `y` is zero-padded or, in cyclic mode, wrapped.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    n = x.size
    if n == 0 or y.size == 0:
        raise SignalError("cannot correlate empty sequences")
    if mode == "zero-pad":
        ext = np.concatenate([y, np.zeros(n - 1, dtype=y.dtype)])
    elif mode == "cyclic":
        ext = np.take(y, np.arange(y.size + n - 1) % y.size)
    else:
        raise SignalError(f"unknown correlation mode {mode!r}; expected one of {list(CORRELATION_MODES)}")
    return correlate(ext, np.conj(x), mode="valid")


def estimate_cir(rx, code: CodeSequence, samples_per_chip: int = 1,
                 mode: str = "zero-pad") -> Tuple[np.ndarray, np.ndarray]:
    """
    Correlate a capture against the code; returns (h_I, h_Q).

    Each rail is correlated against the real reference and scaled by the
    number of samples in one period, so a unit tap reads 1 at its lag.

    Raises:
        SignalError: the capture is shorter than one code period.
    """
    r = rx.samples if isinstance(rx, IqBlock) else np.asarray(rx, dtype=np.complex128)
    ref = reference_waveform(code, samples_per_chip)
    if r.size < ref.size:
        raise SignalError(f"capture of {r.size} samples is shorter than one code period ({ref.size})")
    scale = float(ref.size)
    h_i = cross_correlate(ref, r.real, mode).real / scale
    h_q = cross_correlate(ref, r.imag, mode).real / scale
    return h_i, h_q


def estimate_cir_frames(rx, code: CodeSequence, samples_per_chip: int = 1,
                        mode: str = "zero-pad") -> np.ndarray:
    """
    Complex CIR estimate per code period, shape (frames, period).

    The first period (no preceding tail) and any trailing partial period
    are discarded.
    """
    r = rx.samples if isinstance(rx, IqBlock) else np.asarray(rx, dtype=np.complex128)
    ref = reference_waveform(code, samples_per_chip)
    p = ref.size
    if mode not in CORRELATION_MODES:
        raise SignalError(f"unknown correlation mode {mode!r}; expected one of {list(CORRELATION_MODES)}")
    span = 2 * p if mode == "zero-pad" else p
    if r.size < p + span:
        return np.zeros((0, p), dtype=np.complex128)
    windows = sliding_window_view(r, span)[p::p]
    ref_f = np.conj(np.fft.fft(ref, span))
    frames = np.fft.ifft(np.fft.fft(windows, axis=1) * ref_f, axis=1)[:, :p]
    return frames / float(p)


def equalize_sidelobes(frames: np.ndarray, code: CodeSequence) -> np.ndarray:
    """
    Remove the −1 off-peak floor of a two-valued periodic autocorrelation.

    With R(τ) = (N+1)·g(τ) − Σg, the taps are g = (N·h + N·Σh) / (N+1)
    where h = R/N is the raw estimate. Codes without a two-valued
    autocorrelation are returned unchanged.
    """
    acf = periodic_autocorrelation(code)
    n = len(code)
    if not np.all(acf[1:] == -1) or frames.shape[-1] != n:
        logger.warning("Sidelobe equalization needs a two-valued code at one sample per chip; skipped for %s",
                       code.name)
        return frames
    total = frames.sum(axis=-1, keepdims=True)
    return (n * frames + n * total) / (n + 1)


def cir_magnitude(h_i, h_q) -> np.ndarray:
    """|h| = sqrt(h_I² + h_Q²)."""
    return np.hypot(np.asarray(h_i, dtype=np.float64), np.asarray(h_q, dtype=np.float64))


def path_gain_db(h_mag, params: Optional[RadioParams] = None) -> float:
    """
    G_p = 20·log10|h| − P_t − G_t − G_r, clamped at −200 dB for |h| = 0.
    """
    params = params or RadioParams()
    mag = float(h_mag)
    raw = MIN_PATH_GAIN_DB if mag <= 0 else max(linear_to_db(mag), MIN_PATH_GAIN_DB)
    return raw - params.tx_power_db - params.tx_gain_db - params.rx_gain_db


def extract_taps(
    h_mag,
    sample_rate: float,
    code_period_samples: int,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    params: Optional[RadioParams] = None,
) -> List[Tap]:
    """
    Peaks of one CIR magnitude window.

    The strongest sample anchors ToA 0; the window is read cyclically from
    there, and every local maximum above median + threshold_db is a tap.

    Returns:
        list: (toa_s, gain_db) sorted by ToA.

    Raises:
        NoSignalError: nothing exceeds the threshold.
    """
    mag = np.asarray(h_mag, dtype=np.float64)
    if mag.size < code_period_samples:
        raise SignalError(f"CIR window has {mag.size} samples, expected at least {code_period_samples}")
    window = mag[:code_period_samples]
    anchor = int(np.argmax(window))
    peak = float(window[anchor])
    if peak <= 0:
        raise NoSignalError("no signal detected (all-zero CIR)")
    rotated = np.roll(window, -anchor)
    floor = max(float(np.median(rotated)), peak * 1e-9)
    threshold = floor * db_to_linear(threshold_db)
    if peak < threshold:
        raise NoSignalError(
            f"no signal detected: peak {linear_to_db(peak):.1f} dB is below "
            f"noise {linear_to_db(floor):.1f} dB + {threshold_db} dB"
        )
    ext = np.concatenate([rotated[-1:], rotated, rotated[:1]])
    peaks, _ = find_peaks(ext, height=threshold)
    idx = sorted({0} | {int(i) - 1 for i in peaks if 1 <= i <= rotated.size})
    return [(i / sample_rate, path_gain_db(rotated[i], params)) for i in idx]


# ---------------------------------------------------------------- sounding

def _sounder_params(radio: RadioParams, config: SoundingConfig) -> RadioParams:
    if config.compensate_gains:
        return radio.replace(tx_gain_db=config.tx_gain_db, rx_gain_db=config.rx_gain_db)
    return radio.replace(tx_gain_db=0.0, rx_gain_db=0.0)


def _aggregate(frame_taps: Sequence[List[Tap]], sample_rate: float) -> List[TapStats]:
    by_lag: Dict[int, List[float]] = {}
    for taps in frame_taps:
        for toa, gain in taps:
            by_lag.setdefault(int(round(toa * sample_rate)), []).append(gain)
    stats = []
    for lag in sorted(by_lag):
        g = np.asarray(by_lag[lag])
        sd = float(np.std(g, ddof=1)) if g.size > 1 else 0.0
        stats.append(TapStats(lag / sample_rate, float(np.mean(g)), sd, float(np.median(g)), int(g.size)))
    return stats


def capture_link(session, tx_id: int, rx_id: int, config: SoundingConfig,
                 stream: Optional[int] = None) -> IqBlock:
    """
    Send the sounding code over one link and return the received capture.

    The code is repeated over the capture (zero-padded when `repetitions`
    is shorter), scaled by the transmit power and tx gain, pushed through
    the emulator with receiver noise and scaled by the rx gain. Receiver
    noise carries the code period as processing gain, so an empty link
    reads noise_floor_db on the CIR estimate.

    Raises:
        AlignmentError: the config and session sample rates differ.
        EmulationError: tx == rx or an inactive node.
    """
    if tx_id == rx_id:
        raise EmulationError(f"cannot sound node {tx_id} against itself")
    if not math.isclose(config.sample_rate, session.sample_rate):
        raise AlignmentError(f"sounding at {config.sample_rate} S/s on a session at {session.sample_rate} S/s")
    radio = session.scenario.radio
    spc = config.samples_per_chip
    period = config.period_samples
    n = max(config.capture_samples, period)
    reps = config.repetitions or math.ceil(n / period)

    tx = bpsk_modulate(config.code, reps, config.sample_rate, config.sample_rate / spc, config.start_time)
    samples = np.zeros(n, dtype=np.complex128)
    m = min(n, len(tx))
    samples[:m] = tx.samples[:m]
    samples *= db_to_linear(radio.tx_power_db + config.tx_gain_db)
    logger.info("Sounding %d -> %d with %s: %d sample(s), %d period(s)", tx_id, rx_id, config.code.name, n, reps)

    rx = superimpose(rx_id, {tx_id: tx.with_samples(samples)}, session, stream=stream,
                     processing_gain=period)
    return rx.with_samples(rx.samples[:n] * db_to_linear(config.rx_gain_db))


def analyze_capture(capture: IqBlock, config: SoundingConfig, radio: Optional[RadioParams] = None,
                    tx_id: int = 0, rx_id: int = 0) -> SoundingResult:
    """
    Estimate the channel from a capture, one CIR per code period.

    Works on emulated captures and on files recorded elsewhere alike. A tap
    is reported when it is detected in more than half of the frames that
    detected anything.

    Raises:
        AlignmentError: the capture and config sample rates differ.
        SignalError: the capture holds no complete frame.
        NoSignalError: half of the frames or more detected nothing.
    """
    if not math.isclose(capture.sample_rate, config.sample_rate):
        raise AlignmentError(f"capture is at {capture.sample_rate} S/s, config expects {config.sample_rate} S/s")
    radio = radio or RadioParams()
    period = config.period_samples
    frames = estimate_cir_frames(capture, config.code, config.samples_per_chip, config.correlation_mode)
    if config.equalize_sidelobes:
        frames = equalize_sidelobes(frames, config.code)
    mags = np.abs(frames)
    if mags.shape[0] == 0:
        raise SignalError(f"capture of {len(capture)} samples holds no complete frame of {period} samples")

    params = _sounder_params(radio, config)
    frame_taps: List[List[Tap]] = []
    strongest: List[float] = []
    missing = 0
    for mag in mags:
        try:
            taps = extract_taps(mag, config.sample_rate, period, config.threshold_db, params)
        except NoSignalError:
            missing += 1
            continue
        frame_taps.append(taps)
        strongest.append(taps[0][1])
    if 2 * len(frame_taps) <= mags.shape[0]:
        logger.warning("No signal detected on link %d -> %d: %d of %d frame(s) crossed the threshold",
                       tx_id, rx_id, len(frame_taps), mags.shape[0])
        raise NoSignalError(f"no signal detected on link {tx_id} -> {rx_id}")
    if missing:
        logger.warning("Link %d -> %d: %d of %d frame(s) detected nothing", tx_id, rx_id, missing, mags.shape[0])

    stats = [s for s in _aggregate(frame_taps, config.sample_rate) if 2 * s.count > len(frame_taps)]
    result = SoundingResult(
        tx=tx_id,
        rx=rx_id,
        cir_frames=mags,
        taps=[(s.toa_s, s.median_db) for s in stats],
        path_loss_db=-float(np.median(strongest)),
        d_peak=config.d_peak,
        frame_taps=frame_taps,
        tap_stats=stats,
        missing_frames=missing,
    )
    logger.info("Sounded %r", result)
    return result


def sound_link(session, tx_id: int, rx_id: int, config: SoundingConfig,
               stream: Optional[int] = None) -> SoundingResult:
    """
    Sound one link of an emulation session: `capture_link` then `analyze_capture`.

    Raises:
        AlignmentError: the config and session sample rates differ.
        NoSignalError: half of the frames or more detected nothing.
        EmulationError: tx == rx or an inactive node.
    """
    capture = capture_link(session, tx_id, rx_id, config, stream)
    return analyze_capture(capture, config, session.scenario.radio, tx_id, rx_id)


@dataclass
class LossMatrix:
    """Measured path loss per ordered link; NaN on the diagonal, inf where nothing was detected."""
    node_ids: List[int]
    loss_db: np.ndarray
    sd_db: np.ndarray
    results: Dict[Tuple[int, int], SoundingResult] = field(default_factory=dict)

    @property
    def no_signal(self) -> List[Tuple[int, int]]:
        ids = self.node_ids
        return [(ids[i], ids[j]) for i, j in zip(*np.nonzero(np.isinf(self.loss_db)))]

    def off_diagonal(self) -> np.ndarray:
        mask = ~np.eye(len(self.node_ids), dtype=bool)
        return self.loss_db[mask]

    def to_dict(self) -> Dict[str, object]:
        def clean(a):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]
        return {"node_ids": list(self.node_ids), "loss_db": clean(self.loss_db), "sd_db": clean(self.sd_db),
                "no_signal": [list(link) for link in self.no_signal]}


def sound_matrix(session, config: SoundingConfig, node_ids: Optional[Sequence[int]] = None) -> LossMatrix:
    """
    Sound every ordered pair of nodes; links run on `session.threads` workers.

    Each link draws receiver noise from the stream keyed by its transmitter,
    so the matrix does not depend on thread scheduling.
    """
    ids = sorted(session.active_nodes if node_ids is None else node_ids)
    index = {nid: i for i, nid in enumerate(ids)}
    links = [(a, b) for a in ids for b in ids if a != b]

    def run(link):
        try:
            return link, sound_link(session, link[0], link[1], config, stream=link[0])
        except NoSignalError:
            return link, None

    if session.threads > 1 and len(links) > 1:
        with ThreadPoolExecutor(max_workers=session.threads) as pool:
            outcomes = list(pool.map(run, links))
    else:
        outcomes = [run(link) for link in links]

    loss = np.full((len(ids), len(ids)), np.nan)
    sd = np.full((len(ids), len(ids)), np.nan)
    results = {}
    for (a, b), res in sorted(outcomes, key=lambda item: item[0]):
        i, j = index[a], index[b]
        if res is None:
            loss[i, j] = np.inf
            continue
        results[(a, b)] = res
        loss[i, j] = res.path_loss_db
        sd[i, j] = res.tap_stats[0].sd_db if res.tap_stats else 0.0
    logger.info("Sounded %d link(s) among %d node(s)", len(links), len(ids))
    return LossMatrix(ids, loss, sd, results)
