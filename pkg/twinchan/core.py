"""
core.py
-------

Domain types, units and numeric conventions shared by every twinchan module.

All signal math is complex128/float64. Decibel conversions are explicit:
`db_to_linear` is the amplitude form (x/20) and `db_to_power` the power
form (x/10); callers pick one, nothing is inferred from context.

The value types here (IqBlock, Tap, TapSet, CirTimeline, RawCir) are frozen
and keep their arrays read-only, so they can be shared between worker
threads without copying.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .errors import TwinchanError, ValidationError
from .fields import FloatField
from .model import BaseRecord

logger = logging.getLogger(__name__)

SLOT_WIDTH_S = 10e-9
SLOT_COUNT = 512
MAX_NONZERO_TAPS = 4
DEFAULT_UPDATE_INTERVAL_S = 1e-3
DEFAULT_NOISE_FLOOR_DB = -100.0
DEFAULT_BASE_LOSS_DB = 57.55
COHERENCE_DISTANCE_M = 15.0

# One bundle record per tap slot: slot index (-1 = padding) and the complex gain.
TAP_RECORD_DTYPE = np.dtype([("slot", "<i4"), ("re", "<f8"), ("im", "<f8")])

__all__ = [
    "TwinchanError",
    "ValidationError",
    "UnitError",
    "SignalError",
    "TapSetError",
    "SLOT_WIDTH_S",
    "SLOT_COUNT",
    "MAX_NONZERO_TAPS",
    "DEFAULT_UPDATE_INTERVAL_S",
    "DEFAULT_NOISE_FLOOR_DB",
    "DEFAULT_BASE_LOSS_DB",
    "COHERENCE_DISTANCE_M",
    "TAP_RECORD_DTYPE",
    "db_to_linear",
    "db_to_power",
    "linear_to_db",
    "power_to_db",
    "IqBlock",
    "Tap",
    "TapSet",
    "CirTimeline",
    "RawCir",
    "RadioParams",
]


class UnitError(ValidationError):
    """Raised when a unit conversion receives a non-finite or negative value."""
    pass


class SignalError(ValidationError):
    """Raised when an IqBlock or timeline violates its invariants."""
    pass


class TapSetError(ValidationError):
    """Raised when a tap layout breaks the slot grid or the non-zero tap limit."""
    pass


# ---------------------------------------------------------------- units

def _finite(x, what: str) -> float:
    try:
        value = float(x)
    except (TypeError, ValueError) as e:
        raise UnitError(f"{what} must be a real number, got {x!r}") from e
    if not math.isfinite(value):
        raise UnitError(f"{what} must be finite, got {x!r}")
    return value


def db_to_linear(x_db) -> float:
    """Amplitude ratio for a dB value: 10^(x/20)."""
    return 10.0 ** (_finite(x_db, "x_db") / 20.0)


def db_to_power(x_db) -> float:
    """Power ratio for a dB value: 10^(x/10)."""
    return 10.0 ** (_finite(x_db, "x_db") / 10.0)


def linear_to_db(x) -> float:
    """Amplitude ratio to dB (20·log10). Zero maps to -inf; callers clamp."""
    value = _finite(x, "amplitude")
    if value < 0:
        raise UnitError(f"amplitude must be >= 0, got {x!r}")
    if value == 0:
        return -math.inf
    return 20.0 * math.log10(value)


def power_to_db(p) -> float:
    """Power ratio to dB (10·log10). Zero maps to -inf; callers clamp."""
    value = _finite(p, "power")
    if value < 0:
        raise UnitError(f"power must be >= 0, got {p!r}")
    if value == 0:
        return -math.inf
    return 10.0 * math.log10(value)


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------- signals

@dataclass(frozen=True, eq=False)
class IqBlock:
    """Complex baseband samples at a sample rate, starting at t0 seconds."""
    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.atleast_1d(np.asarray(self.samples))
        if samples.ndim != 1:
            raise SignalError(f"IqBlock samples must be one-dimensional, got shape {samples.shape}")
        if samples.size < 1:
            raise SignalError("IqBlock needs at least one sample")
        rate = float(self.sample_rate)
        if not math.isfinite(rate) or rate <= 0:
            raise SignalError(f"sample_rate must be > 0, got {self.sample_rate!r}")
        t0 = float(self.t0)
        if not math.isfinite(t0):
            raise SignalError(f"t0 must be finite, got {self.t0!r}")
        object.__setattr__(self, "samples", _frozen_array(samples, np.complex128))
        object.__setattr__(self, "sample_rate", rate)
        object.__setattr__(self, "t0", t0)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def power(self) -> float:
        """Mean |x|^2."""
        return float(np.mean(np.abs(self.samples) ** 2))

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    def scaled(self, alpha) -> "IqBlock":
        return IqBlock(self.samples * alpha, self.sample_rate, self.t0)

    def with_samples(self, samples) -> "IqBlock":
        return IqBlock(samples, self.sample_rate, self.t0)

    def __repr__(self) -> str:
        return f"<IqBlock(n={len(self)}, sample_rate={self.sample_rate!r}, t0={self.t0!r})>"


# ---------------------------------------------------------------- taps

@dataclass(frozen=True)
class Tap:
    """One tapped-delay-line component: slot index on the 10 ns grid and a linear complex gain."""
    delay_slot: int
    gain: complex

    def __post_init__(self):
        if isinstance(self.delay_slot, bool) or int(self.delay_slot) != self.delay_slot:
            raise TapSetError(f"delay_slot must be an integer, got {self.delay_slot!r}")
        if self.delay_slot < 0:
            raise TapSetError(f"delay_slot must be >= 0, got {self.delay_slot}")
        gain = complex(self.gain)
        if not (math.isfinite(gain.real) and math.isfinite(gain.imag)):
            raise TapSetError(f"tap gain must be finite, got {self.gain!r}")
        object.__setattr__(self, "delay_slot", int(self.delay_slot))
        object.__setattr__(self, "gain", gain)

    @property
    def power(self) -> float:
        return abs(self.gain) ** 2


@dataclass(frozen=True)
class TapSet:
    """
    One emulated CIR snapshot.

    Taps are kept sorted by slot with unique slots; at most four of them
    may carry a non-zero gain. `slot_count` is the grid size the set was
    validated against (512 unless a scenario overrides it).
    """
    taps: Tuple[Tap, ...] = ()
    slot_count: int = SLOT_COUNT

    def __post_init__(self):
        taps = tuple(t if isinstance(t, Tap) else Tap(*t) for t in self.taps)
        slots = [t.delay_slot for t in taps]
        if any(b <= a for a, b in zip(slots, slots[1:])):
            raise TapSetError(f"tap slots must be strictly increasing, got {slots}")
        if slots and slots[-1] >= self.slot_count:
            raise TapSetError(f"tap slot {slots[-1]} outside the {self.slot_count}-slot grid")
        nonzero = sum(1 for t in taps if t.gain != 0)
        if nonzero > MAX_NONZERO_TAPS:
            raise TapSetError(f"at most {MAX_NONZERO_TAPS} non-zero taps allowed, got {nonzero}")
        object.__setattr__(self, "taps", taps)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[int, complex]], slot_count: int = SLOT_COUNT) -> "TapSet":
        """Build from (slot, gain) pairs in any order."""
        return cls(tuple(Tap(s, g) for s, g in sorted(pairs, key=lambda p: p[0])), slot_count)

    @classmethod
    def single(cls, gain: complex = 1.0, slot: int = 0) -> "TapSet":
        return cls((Tap(slot, gain),))

    def __len__(self) -> int:
        return len(self.taps)

    def __iter__(self):
        return iter(self.taps)

    @property
    def slots(self) -> np.ndarray:
        return np.array([t.delay_slot for t in self.taps], dtype=np.int64)

    @property
    def gains(self) -> np.ndarray:
        return np.array([t.gain for t in self.taps], dtype=np.complex128)

    def nonzero(self) -> "TapSet":
        return TapSet(tuple(t for t in self.taps if t.gain != 0), self.slot_count)

    def total_power(self) -> float:
        return float(sum(t.power for t in self.taps))

    def delays_s(self, slot_width: float = SLOT_WIDTH_S) -> np.ndarray:
        return self.slots * slot_width

    def scaled(self, alpha) -> "TapSet":
        return TapSet(tuple(Tap(t.delay_slot, t.gain * alpha) for t in self.taps), self.slot_count)

    def to_records(self, width: int = MAX_NONZERO_TAPS) -> np.ndarray:
        """Fixed-size record array for the bundle; unused rows carry slot -1."""
        if len(self.taps) > width:
            raise TapSetError(f"TapSet has {len(self.taps)} taps, record width is {width}")
        rec = np.zeros(width, dtype=TAP_RECORD_DTYPE)
        rec["slot"] = -1
        for i, t in enumerate(self.taps):
            rec[i] = (t.delay_slot, t.gain.real, t.gain.imag)
        return rec

    @classmethod
    def from_records(cls, rec: np.ndarray, slot_count: int = SLOT_COUNT) -> "TapSet":
        taps = tuple(
            Tap(int(r["slot"]), complex(float(r["re"]), float(r["im"])))
            for r in rec if int(r["slot"]) >= 0
        )
        return cls(taps, slot_count)


@dataclass(frozen=True)
class CirTimeline:
    """TapSet frames in force over [k·update_interval, (k+1)·update_interval)."""
    frames: Tuple[TapSet, ...]
    update_interval: float = DEFAULT_UPDATE_INTERVAL_S

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise SignalError("CirTimeline needs at least one frame")
        ui = float(self.update_interval)
        if not math.isfinite(ui) or ui <= 0:
            raise SignalError(f"update_interval must be > 0, got {self.update_interval!r}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "update_interval", ui)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        return len(self.frames) * self.update_interval

    @property
    def is_static(self) -> bool:
        first = self.frames[0]
        return all(f == first for f in self.frames[1:])

    def frame_index(self, t: float, loop: bool = False) -> int:
        k = int(math.floor(t / self.update_interval + 1e-9))
        if loop:
            return k % len(self.frames)
        if k < 0 or k >= len(self.frames):
            raise SignalError(f"t={t} s is outside the {self.duration} s timeline")
        return k

    def frame_at(self, t: float, loop: bool = False) -> TapSet:
        return self.frames[self.frame_index(t, loop)]

    @classmethod
    def static(cls, tapset: TapSet, n_frames: int = 1, update_interval: float = DEFAULT_UPDATE_INTERVAL_S) -> "CirTimeline":
        return cls((tapset,) * n_frames, update_interval)


@dataclass(frozen=True)
class RawCir:
    """Pre-quantization CIR: (toa seconds, complex gain) paths sorted by toa."""
    paths: Tuple[Tuple[float, complex], ...]
    timestamp: float = 0.0

    def __post_init__(self):
        paths = tuple((float(toa), complex(g)) for toa, g in self.paths)
        toas = [p[0] for p in paths]
        if any(not math.isfinite(t) or t < 0 for t in toas):
            raise SignalError(f"path toa must be finite and >= 0, got {toas}")
        if any(b < a for a, b in zip(toas, toas[1:])):
            raise SignalError("RawCir paths must be sorted by toa")
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "timestamp", float(self.timestamp))

    @classmethod
    def from_paths(cls, paths: Iterable[Tuple[float, complex]], timestamp: float = 0.0) -> "RawCir":
        return cls(tuple(sorted(paths, key=lambda p: p[0])), timestamp)

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def toas(self) -> np.ndarray:
        return np.array([p[0] for p in self.paths], dtype=np.float64)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p[1] for p in self.paths], dtype=np.complex128)

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2)) if self.paths else 0.0


# ---------------------------------------------------------------- radio

class RadioParams(BaseRecord):
    """Transmit power, antenna gains and the emulator's fixed loss chain (all dB)."""
    tx_power_db = FloatField(default=0.0)
    tx_gain_db = FloatField(default=0.0)
    rx_gain_db = FloatField(default=0.0)
    center_freq_hz = FloatField(default=1e9, min_value=0.0, exclusive_min=True)
    noise_floor_db = FloatField(default=DEFAULT_NOISE_FLOOR_DB, max_value=0.0, exclusive_max=True)
    base_loss_db = FloatField(default=DEFAULT_BASE_LOSS_DB, min_value=0.0)

    @property
    def noise_power(self) -> float:
        """Per-sample receiver noise power, linear."""
        return db_to_power(self.noise_floor_db)

    @property
    def base_loss_amplitude(self) -> float:
        """Amplitude scale applied after superposition."""
        return db_to_linear(-self.base_loss_db)
