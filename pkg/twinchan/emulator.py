"""
emulator.py
-----------

The software channel emulator: tapped-delay-line filtering of IqBlocks,
frame-by-frame time variation, superposition at a receiver, base loss and a
receiver-referred noise floor. Also the jammer waveforms and the SINR
measurements used by the jamming experiments.
"""
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.signal import fftconvolve, firwin, kaiserord

from .core import SLOT_WIDTH_S, CirTimeline, IqBlock, TapSet, db_to_power, power_to_db
from .errors import ValidationError
from .utils.rng import SeedTree, complex_gaussian

if TYPE_CHECKING:
    from .session import EmulationSession

logger = logging.getLogger(__name__)

MIN_SAMPLE_RATE = 1e6
MAX_SAMPLE_RATE = 50e6
NARROWBAND_BW_HZ = 156e3
WIDEBAND_BW_HZ = 10e6
JAMMER_STOPBAND_DB = 60.0
DEFAULT_SUBBANDS = 64

ArrayLike = Union[IqBlock, np.ndarray]


class EmulationError(ValidationError):
    """Base exception for emulation errors."""
    pass


class AlignmentError(EmulationError):
    """Raised when inputs disagree on sample rate or start time."""
    pass


class TimelineOverrunError(EmulationError):
    """Raised when a block runs past the end of a timeline and looping is off."""
    pass


class JammerError(EmulationError):
    """Raised for an unknown jammer kind or an impossible bandwidth."""
    pass


_warned_delays = set()
_warned_lock = threading.Lock()


def check_sample_rate(sample_rate: float) -> None:
    """Warn when a rate lies outside the exercised 1–50 MS/s range."""
    if not MIN_SAMPLE_RATE <= sample_rate <= MAX_SAMPLE_RATE:
        logger.warning(
            "Sample rate %.3g S/s is outside the exercised range [%.0e, %.0e]",
            sample_rate, MIN_SAMPLE_RATE, MAX_SAMPLE_RATE,
        )


def tap_sample_delays(taps: TapSet, sample_rate: float, slot_width: float = SLOT_WIDTH_S) -> np.ndarray:
    """
    Integer sample delay per tap: round(slot · slot_width · sample_rate).

    A delay that falls between samples is rounded to the nearest one and
    logged once per (slot, rate) pair.
    """
    exact = taps.slots * slot_width * sample_rate
    delays = np.floor(exact + 0.5).astype(np.int64)
    off = np.abs(exact - delays) > 1e-6
    if np.any(off):
        for slot, e, d in zip(taps.slots[off], exact[off], delays[off]):
            key = (int(slot), float(sample_rate), float(slot_width))
            with _warned_lock:
                if key in _warned_delays:
                    continue
                _warned_delays.add(key)
            logger.warning(
                "Tap slot %d is %.3f samples at %.4g S/s; rounded to %d",
                slot, e, sample_rate, d,
            )
    return delays


def fir_apply(
    x: IqBlock,
    taps: TapSet,
    sample_rate: Optional[float] = None,
    slot_width: float = SLOT_WIDTH_S,
) -> IqBlock:
    """
    y(n) = Σ_k g_k · x(n − d_k), full convolution tail included.

    Args:
        x (IqBlock): input block.
        taps (TapSet): the channel snapshot.
        sample_rate (float): expected rate of `x`; checked when given.

    Returns:
        IqBlock: len(x) + max(d_k) samples, same t0.
    """
    if sample_rate is not None and not math.isclose(sample_rate, x.sample_rate):
        raise AlignmentError(f"block rate {x.sample_rate} does not match {sample_rate}")
    n = len(x)
    if len(taps) == 0:
        return x.with_samples(np.zeros(n, dtype=np.complex128))
    delays = tap_sample_delays(taps, x.sample_rate, slot_width)
    out = np.zeros(n + int(delays.max()), dtype=np.complex128)
    for d, g in zip(delays, taps.gains):
        if g != 0:
            out[d:d + n] += g * x.samples
    return x.with_samples(out)


def frame_indices(x: IqBlock, timeline: CirTimeline, loop: bool = False) -> np.ndarray:
    """Frame in force for every sample of `x` (sample n sits at x.t0 + n/fs)."""
    per_frame = timeline.update_interval * x.sample_rate
    pos = x.t0 * x.sample_rate + np.arange(len(x), dtype=np.float64)
    k = np.floor(pos / per_frame + 1e-9).astype(np.int64)
    if k[0] < 0:
        raise TimelineOverrunError(f"block starts at t0={x.t0} s, before the timeline")
    if loop:
        return k % timeline.n_frames
    if k[-1] >= timeline.n_frames:
        raise TimelineOverrunError(
            f"block ends at {x.t0 + x.duration:.6f} s but the timeline covers only "
            f"{timeline.duration:.6f} s (enable looping to wrap frames)"
        )
    return k


def emulate_link(
    x: IqBlock,
    timeline: CirTimeline,
    sample_rate: Optional[float] = None,
    loop: bool = False,
    slot_width: float = SLOT_WIDTH_S,
) -> IqBlock:
    """
    Filter a block through a time-varying channel.

    The block is cut at every frame boundary where the TapSet changes; each
    run is filtered with its frame's taps and the results are overlap-added,
    so a run's convolution tail spills into the following run. Consecutive
    identical frames form one run, which makes a static timeline exactly
    equal to a single `fir_apply`.

    Raises:
        TimelineOverrunError: the block outlasts the timeline and `loop` is off.
    """
    if sample_rate is not None and not math.isclose(sample_rate, x.sample_rate):
        raise AlignmentError(f"block rate {x.sample_rate} does not match {sample_rate}")
    k = frame_indices(x, timeline, loop)
    change = np.flatnonzero(k[1:] != k[:-1]) + 1
    runs: List[Tuple[int, int, TapSet]] = []
    start = 0
    for b in list(change) + [len(x)]:
        frame = timeline.frames[k[start]]
        if runs and runs[-1][2] == frame:
            runs[-1] = (runs[-1][0], b, frame)
        else:
            runs.append((start, b, frame))
        start = b

    pieces = []
    for a, b, frame in runs:
        seg = IqBlock(x.samples[a:b], x.sample_rate, x.t0 + a / x.sample_rate)
        pieces.append((a, fir_apply(seg, frame, slot_width=slot_width).samples))
    total = max(a + p.size for a, p in pieces)
    out = np.zeros(total, dtype=np.complex128)
    for a, p in pieces:
        out[a:a + p.size] += p
    logger.debug("Emulated %d samples over %d run(s)", len(x), len(runs))
    return x.with_samples(out)


def receiver_noise(session: "EmulationSession", n: int, rx_id: int, stream: int = 0,
                   processing_gain: float = 1.0) -> np.ndarray:
    """
    Receiver noise: complex Gaussian with per-sample power
    processing_gain · 10^(noise_floor_db/10).

    A correlating receiver that averages over `processing_gain` samples
    (the sounder, one code period) then sees the floor at noise_floor_db
    on its estimate; a plain receiver uses 1.

    Drawn from the child generator keyed by (rx_id, stream) under the
    session seed.

    Raises:
        EmulationError: processing_gain < 1.
    """
    if processing_gain < 1:
        raise EmulationError(f"processing_gain must be >= 1, got {processing_gain}")
    power = db_to_power(session.scenario.radio.noise_floor_db) * processing_gain
    rng = SeedTree(session.rng_seed).child(rx_id, stream)
    return complex_gaussian(rng, n, power)


def superimpose(
    receiver_id: int,
    inputs: Mapping[int, IqBlock],
    session: "EmulationSession",
    stream: Optional[int] = None,
    processing_gain: float = 1.0,
) -> IqBlock:
    """
    Signal at one receiver: y_j = base_loss · Σ_i (x_i ∗ h_ij) + noise.

    Links are emulated (possibly in parallel) and summed in ascending
    transmitter order, padded to the longest output. Noise is added once
    per receiver when the session has it enabled, scaled by
    `processing_gain` as in `receiver_noise`.

    Args:
        receiver_id (int): the receiving node.
        inputs (Mapping[int, IqBlock]): transmitter id -> transmitted block.
        session (EmulationSession): scenario, rate, seed and switches.
        stream (int): noise stream index; the session hands out the next
            one for this receiver when omitted.
        processing_gain (float): samples the receiver correlates over.

    Raises:
        AlignmentError: blocks disagree with the session rate or each other's t0.
        EmulationError: unknown/inactive node, self link, or no inputs.
    """
    if not inputs:
        raise EmulationError(f"nothing to superimpose at receiver {receiver_id}")
    session.require_active(receiver_id)
    t0s = set()
    for tx, block in inputs.items():
        session.require_active(tx)
        if tx == receiver_id:
            raise EmulationError(f"node {tx} cannot transmit to itself")
        if not math.isclose(block.sample_rate, session.sample_rate):
            raise AlignmentError(
                f"transmitter {tx} block is at {block.sample_rate} S/s, session runs at {session.sample_rate} S/s"
            )
        t0s.add(block.t0)
    if len(t0s) != 1:
        raise AlignmentError(f"transmitted blocks start at different times: {sorted(t0s)}")

    order = sorted(inputs)
    scenario = session.scenario

    def run(tx: int) -> np.ndarray:
        return emulate_link(inputs[tx], scenario.link(tx, receiver_id), loop=session.loop,
                            slot_width=scenario.slot_width).samples

    if session.threads > 1 and len(order) > 1:
        with ThreadPoolExecutor(max_workers=session.threads) as pool:
            outputs = list(pool.map(run, order))
    else:
        outputs = [run(tx) for tx in order]

    total = np.zeros(max(o.size for o in outputs), dtype=np.complex128)
    for o in outputs:
        total[:o.size] += o
    total *= scenario.radio.base_loss_amplitude

    if session.noise_enabled:
        if stream is None:
            stream = session.next_stream(receiver_id)
        total += receiver_noise(session, total.size, receiver_id, stream, processing_gain)
    return IqBlock(total, session.sample_rate, t0s.pop())


# ---------------------------------------------------------------- jamming

def jammer_filter(bandwidth_hz: float, sample_rate: float) -> Optional[np.ndarray]:
    """
    Linear-phase Kaiser low-pass for a jammer of two-sided bandwidth
    `bandwidth_hz`: cutoff 0.46·bw, transition 0.08·bw, 60 dB stopband.
    None when the jammer fills the whole band.
    """
    if bandwidth_hz >= sample_rate:
        return None
    nyq = sample_rate / 2.0
    numtaps, beta = kaiserord(JAMMER_STOPBAND_DB, 0.08 * bandwidth_hz / nyq)
    numtaps |= 1
    return firwin(numtaps, 0.46 * bandwidth_hz, window=("kaiser", beta), fs=sample_rate)


def gen_jammer(
    kind: str = "narrowband",
    bandwidth_hz: Optional[float] = None,
    power_db: float = 0.0,
    duration_s: float = 1e-3,
    seed: int = 0,
    sample_rate: float = 20e6,
    t0: float = 0.0,
) -> IqBlock:
    """
    Band-limited Gaussian noise centred at DC.

    White complex Gaussian noise is low-pass filtered to the requested
    bandwidth and scaled so the mean power is exactly 10^(power_db/10).

    Args:
        kind (str): "narrowband" (156 kHz default) or "wideband" (10 MHz default).
        bandwidth_hz (float): two-sided bandwidth; overrides the kind default.
        power_db (float): mean sample power in dB.
        duration_s (float): block length in seconds.
        seed (int): generator seed; equal seeds give identical blocks.

    Raises:
        JammerError: unknown kind, non-positive bandwidth, or bandwidth > sample rate.
    """
    defaults = {"narrowband": NARROWBAND_BW_HZ, "wideband": WIDEBAND_BW_HZ}
    if kind not in defaults:
        raise JammerError(f"unknown jammer kind {kind!r}; expected one of {sorted(defaults)}")
    bw = defaults[kind] if bandwidth_hz is None else float(bandwidth_hz)
    if bw <= 0:
        raise JammerError(f"bandwidth must be > 0, got {bw}")
    if bw > sample_rate:
        raise JammerError(f"bandwidth {bw} Hz exceeds the sample rate {sample_rate} S/s")
    n = int(round(duration_s * sample_rate))
    if n < 1:
        raise JammerError(f"duration {duration_s} s is shorter than one sample")

    rng = SeedTree(seed).child()
    taps = jammer_filter(bw, sample_rate)
    if taps is None:
        noise = complex_gaussian(rng, n)
    else:
        white = complex_gaussian(rng, n + taps.size - 1)
        noise = fftconvolve(white, taps, mode="valid")
    noise *= math.sqrt(db_to_power(power_db) / np.mean(np.abs(noise) ** 2))
    logger.debug("Generated %s jammer: %.0f Hz, %.1f dB, %d samples", kind, bw, power_db, n)
    return IqBlock(noise, sample_rate, t0)


def _samples(x: ArrayLike) -> np.ndarray:
    return x.samples if isinstance(x, IqBlock) else np.asarray(x, dtype=np.complex128)


def measure_sinr(signal: ArrayLike, interference_plus_noise: ArrayLike) -> float:
    """
    10·log10(Σ|s|² / Σ|i+n|²) in dB; +inf when the denominator is zero.

    Raises:
        EmulationError: the inputs differ in length.
    """
    s, i = _samples(signal), _samples(interference_plus_noise)
    if s.size != i.size:
        raise EmulationError(f"SINR needs equal lengths, got {s.size} and {i.size}")
    den = float(np.sum(np.abs(i) ** 2))
    if den == 0:
        return math.inf
    return power_to_db(float(np.sum(np.abs(s) ** 2)) / den)


def measure_subband_sinr(signal: ArrayLike, interference: ArrayLike, n_subbands: int = DEFAULT_SUBBANDS) -> float:
    """
    Capacity-equivalent SINR over equal-width sub-bands, in dB.

    Both inputs are split into `n_subbands` contiguous frequency bands; with
    per-band ratios γ_k the result is 2^{mean log2(1 + γ_k)} − 1. A jammer
    that covers a few bands costs little; one that covers half the band
    costs a lot, even at equal total power.
    """
    s, i = _samples(signal), _samples(interference)
    if s.size != i.size:
        raise EmulationError(f"SINR needs equal lengths, got {s.size} and {i.size}")
    if not 1 <= n_subbands <= s.size:
        raise EmulationError(f"n_subbands must be in [1, {s.size}], got {n_subbands}")
    S = np.abs(np.fft.fftshift(np.fft.fft(s))) ** 2
    I = np.abs(np.fft.fftshift(np.fft.fft(i))) ** 2
    sig_bands = np.array([b.sum() for b in np.array_split(S, n_subbands)])
    int_bands = np.array([b.sum() for b in np.array_split(I, n_subbands)])
    if np.any((int_bands == 0) & (sig_bands > 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(int_bands > 0, sig_bands / int_bands, 0.0)
    equivalent = 2.0 ** np.mean(np.log2(1.0 + gamma)) - 1.0
    return power_to_db(float(equivalent)) if equivalent > 0 else -math.inf
