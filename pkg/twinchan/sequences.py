"""
sequences.py
------------

Sounding code sequences and their correlation figures of merit.

Families:
    - GLFSR: Galois LFSR with a pinned maximal-length feedback polynomial per
      degree and an output XOR mask (mask 0 is the plain LFSR output).
    - Gold: chip-wise product of a preferred pair of m-sequences.
    - GolayA / GolayB: the 128-chip 802.11ad complementary pair.
    - LS: first (or second) codeset built from a Golay pair, optionally with
      an interference-free window of zeros between the halves.

Bits map to chips as 0 -> +1 and 1 -> -1 everywhere in this module.
"""
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ValidationError

logger = logging.getLogger(__name__)

FAMILIES = ("GLFSR", "Gold", "GolayA", "GolayB", "LS", "Custom")

# Maximal-length feedback taps per degree, x^n + ... + 1 written as its
# exponents (the +1 term implied). Galois toggle mask = sum(1 << (t - 1)).
GLFSR_FEEDBACK_TAPS: Dict[int, Tuple[int, ...]] = {
    2: (2, 1), 3: (3, 2), 4: (4, 3), 5: (5, 3), 6: (6, 5), 7: (7, 6),
    8: (8, 6, 5, 4), 9: (9, 5), 10: (10, 7), 11: (11, 9),
    12: (12, 11, 10, 4), 13: (13, 12, 11, 8), 14: (14, 13, 12, 2),
    15: (15, 14), 16: (16, 15, 13, 4), 17: (17, 14), 18: (18, 11),
    19: (19, 18, 17, 14), 20: (20, 17), 21: (21, 19), 22: (22, 21),
    23: (23, 18), 24: (24, 23, 22, 17), 25: (25, 22), 26: (26, 6, 2, 1),
    27: (27, 5, 2, 1), 28: (28, 25), 29: (29, 27), 30: (30, 6, 4, 1),
    31: (31, 28), 32: (32, 22, 2, 1),
}

# 802.11ad Ga128/Gb128 recursion parameters.
GOLAY_128_DELAYS = (1, 8, 2, 4, 16, 32, 64)
GOLAY_128_WEIGHTS = (-1, -1, -1, -1, 1, -1, -1)

LS_LENGTHS = tuple(2 ** k for k in range(2, 13))  # 4 .. 4096

# chips per vectorized GLFSR extension step; a power of two
GLFSR_BLOCK = 4096

DEFAULT_GOLD_POLYS = (0x43, 0x67)  # z^6+z+1, z^6+z^5+z^2+z+1


class SequenceError(ValidationError):
    """Base exception for code sequence errors."""
    pass


class NonPrimitiveError(SequenceError):
    """Raised when a generator configuration does not yield a maximal-length sequence."""
    pass


class PreferredPairError(SequenceError):
    """
    Raised when two polynomials do not form a preferred pair.

    Attributes:
        values (tuple): the distinct periodic cross-correlation values measured.
        allowed (tuple): the three values a preferred pair may take.
    """

    def __init__(self, message: str, values=(), allowed=()):
        super().__init__(message)
        self.values = tuple(values)
        self.allowed = tuple(allowed)


class UnsupportedLengthError(SequenceError):
    """Raised when a family cannot produce the requested length."""
    pass


@dataclass(frozen=True, eq=False)
class CodeSequence:
    """A ±1 chip sequence plus the family and parameters that produced it."""
    chips: np.ndarray
    family: str
    params: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        chips = np.asarray(self.chips)
        if chips.ndim != 1:
            raise SequenceError(f"chips must be one-dimensional, got shape {chips.shape}")
        if chips.size < 2:
            raise SequenceError(f"a code sequence needs at least 2 chips, got {chips.size}")
        if not np.all(np.isin(chips, (-1, 1))):
            raise SequenceError("every chip must be -1 or +1")
        if self.family not in FAMILIES:
            raise SequenceError(f"unknown family {self.family!r}; expected one of {list(FAMILIES)}")
        frozen = chips.astype(np.int8)
        frozen.setflags(write=False)
        object.__setattr__(self, "chips", frozen)
        object.__setattr__(self, "params", dict(self.params))

    def __len__(self) -> int:
        return int(self.chips.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeSequence):
            return NotImplemented
        return self.family == other.family and np.array_equal(self.chips, other.chips)

    def __hash__(self):
        return hash((self.family, self.chips.tobytes()))

    @property
    def name(self) -> str:
        return f"{self.family}-{len(self)}"

    @property
    def spec(self) -> Optional[str]:
        """The `parse_code_spec` string that rebuilds this sequence, if any."""
        p = self.params
        if self.family == "GLFSR":
            return f"glfsr:{p['degree']}:{p['mask']}:{p['seed']}"
        if self.family == "Gold":
            return f"gold:{p['poly_a']:#x}:{p['poly_b']:#x}:{p['shift']}"
        if self.family == "GolayA":
            return "golay:a128"
        if self.family == "GolayB":
            return "golay:b128"
        if self.family == "LS":
            return f"ls:{p['length']}:{p['codeset']}"
        return None

    def as_float(self) -> np.ndarray:
        return self.chips.astype(np.float64)

    def __repr__(self) -> str:
        return f"<CodeSequence(family={self.family!r}, n={len(self)}, params={self.params!r})>"


def _bits_to_chips(bits: np.ndarray) -> np.ndarray:
    return (1 - 2 * np.asarray(bits, dtype=np.int8)).astype(np.int8, copy=False)


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


def _check_balance(chips: np.ndarray, what: str) -> None:
    imbalance = int(np.sum(chips, dtype=np.int64))
    if abs(imbalance) != 1:
        raise NonPrimitiveError(f"{what}: balance check failed (sum of chips {imbalance}, expected ±1)")


# ---------------------------------------------------------------- GLFSR

def _linear_recurrence(bits: np.ndarray) -> Tuple[int, List[int]]:
    """
    Berlekamp-Massey over GF(2).

    Returns:
        tuple: (linear complexity L, lags) with s(n) = XOR of s(n - lag).
    """
    s = [int(v) for v in bits]
    size = len(s)
    c = [1] + [0] * size
    b = [1] + [0] * size
    length, last = 0, -1
    for n in range(size):
        d = s[n]
        for i in range(1, length + 1):
            d ^= c[i] & s[n - i]
        if d:
            t = list(c)
            shift = n - last
            for j in range(size + 1 - shift):
                c[j + shift] ^= b[j]
            if 2 * length <= n:
                length, last, b = n + 1 - length, n, t
    return length, [i for i in range(1, length + 1) if c[i]]


def _extend_by_blocks(bits: np.ndarray, start: int, lags: Sequence[int]) -> None:
    """Fill bits[start:] in place from s(n) = XOR s(n - lag); every lag must be >= GLFSR_BLOCK."""
    n = bits.size
    for a in range(start, n, GLFSR_BLOCK):
        b = min(a + GLFSR_BLOCK, n)
        acc = np.zeros(b - a, dtype=np.uint8)
        for lag in lags:
            acc ^= bits[a - lag:b - lag]
        bits[a:b] = acc


def gen_glfsr(degree: int, mask: int = 0, seed: int = 1) -> CodeSequence:
    """
    One full period of a Galois LFSR with an output XOR mask.

    Each step emits LSB ⊕ parity(state & mask), then shifts right and
    toggles the feedback mask when the shifted-out bit was 1.

    Up to degree * GLFSR_BLOCK chips come from stepping the register. Longer
    periods are extended in numpy blocks from the output's own recurrence,
    found by Berlekamp-Massey and raised to the GLFSR_BLOCK-th power (over
    GF(2) that spaces every lag GLFSR_BLOCK apart). Generation holds a few
    bytes per chip (one uint8 bit array, the int8 chips and their checks),
    so degree 24 needs on the order of 100 MiB and degree 32 tens of GiB.

    Args:
        degree (int): register length, 2..32.
        mask (int): output XOR mask, 0 <= mask < 2^degree.
        seed (int): initial state, 0 < seed < 2^degree.

    Returns:
        CodeSequence: 2^degree - 1 chips.

    Raises:
        SequenceError: zero seed or out-of-range arguments.
        NonPrimitiveError: the period, linear complexity or balance check fails.
    """
    if isinstance(degree, bool) or int(degree) != degree or degree not in GLFSR_FEEDBACK_TAPS:
        raise SequenceError(f"GLFSR degree must be an integer in [2, 32], got {degree!r}")
    limit = 1 << degree
    if seed == 0:
        raise SequenceError("GLFSR seed must be non-zero (the all-zero state locks the register)")
    if not 0 < seed < limit:
        raise SequenceError(f"GLFSR seed must be in [1, {limit - 1}], got {seed}")
    if not 0 <= mask < limit:
        raise SequenceError(f"GLFSR mask must be in [0, {limit - 1}], got {mask}")

    toggle = sum(1 << (t - 1) for t in GLFSR_FEEDBACK_TAPS[degree])
    n = limit - 1
    stepped = min(n, degree * GLFSR_BLOCK)
    bits = np.empty(n, dtype=np.uint8)
    state = seed
    for i in range(stepped):
        if i and state == seed:
            raise NonPrimitiveError(f"GLFSR degree {degree}: state repeated after {i} steps, expected {n}")
        bits[i] = (state & 1) ^ _parity(state & mask)
        lsb = state & 1
        state >>= 1
        if lsb:
            state ^= toggle

    if stepped == n:
        if state != seed:
            raise NonPrimitiveError(f"GLFSR degree {degree}: register did not return to its seed after {n} steps")
    else:
        complexity, lags = _linear_recurrence(bits[:2 * degree])
        if complexity != degree:
            raise NonPrimitiveError(f"GLFSR degree {degree}: output has linear complexity {complexity}")
        spaced = [GLFSR_BLOCK * lag for lag in lags]
        _extend_by_blocks(bits, stepped, spaced)
        head = np.arange(GLFSR_BLOCK)
        wrapped = np.zeros(GLFSR_BLOCK, dtype=np.uint8)
        for lag in spaced:
            wrapped ^= bits[(head - lag) % n]
        if not np.array_equal(wrapped, bits[:GLFSR_BLOCK]):
            raise NonPrimitiveError(f"GLFSR degree {degree}: output does not repeat after {n} chips")
        logger.debug("GLFSR degree=%d: stepped %d chips, extended %d by recurrence lags %s",
                     degree, stepped, n - stepped, lags)

    chips = _bits_to_chips(bits)
    _check_balance(chips, f"GLFSR(degree={degree}, mask={mask:#x})")
    logger.debug("Generated GLFSR degree=%d mask=%#x seed=%#x (%d chips)", degree, mask, seed, n)
    return CodeSequence(chips, "GLFSR", {"degree": int(degree), "mask": int(mask), "seed": int(seed)})


# ---------------------------------------------------------------- Gold

PolynomialLike = Union[int, str, Sequence[int]]


def parse_polynomial(poly: PolynomialLike) -> int:
    """
    Read a GF(2) polynomial as a bitmask (bit i = coefficient of z^i).

    Accepts an int (0x43), a hex/decimal string ("0x43"), an expression
    ("z^6+z+1") or a list of exponents ([6, 1, 0]).
    """
    if isinstance(poly, bool):
        raise SequenceError(f"cannot read polynomial {poly!r}")
    if isinstance(poly, int):
        value = poly
    elif isinstance(poly, str):
        text = poly.replace(" ", "").lower()
        if re.fullmatch(r"0x[0-9a-f]+|\d+", text):
            value = int(text, 0)
        else:
            value = 0
            for term in text.split("+"):
                if term == "1":
                    exp = 0
                elif re.fullmatch(r"[zx]", term):
                    exp = 1
                else:
                    m = re.fullmatch(r"[zx]\^(\d+)", term)
                    if not m:
                        raise SequenceError(f"cannot read polynomial term {term!r} in {poly!r}")
                    exp = int(m.group(1))
                value ^= 1 << exp
    else:
        value = 0
        for exp in poly:
            value ^= 1 << int(exp)
    if value < 3:
        raise SequenceError(f"polynomial {poly!r} has degree < 1")
    return value


def _fibonacci_mseq(poly: int) -> np.ndarray:
    """Bits of the m-sequence a(n+m) = Σ c_i a(n+i), all-ones initial state."""
    m = poly.bit_length() - 1
    feedback = poly & ((1 << m) - 1)
    n = (1 << m) - 1
    start = (1 << m) - 1
    state = start
    bits = np.empty(n, dtype=np.uint8)
    for i in range(n):
        if i and state == start:
            raise NonPrimitiveError(f"polynomial {poly:#x} is not primitive (period {i} < {n})")
        bits[i] = state & 1
        new = _parity(state & feedback)
        state = (state >> 1) | (new << (m - 1))
    if state != start:
        raise NonPrimitiveError(f"polynomial {poly:#x} is not primitive")
    return bits


def gen_m_sequence(poly: PolynomialLike) -> CodeSequence:
    """
    The m-sequence of a primitive polynomial (Fibonacci form, all-ones start).

    Raises:
        NonPrimitiveError: the polynomial is not primitive.
    """
    p = parse_polynomial(poly)
    return CodeSequence(_bits_to_chips(_fibonacci_mseq(p)), "Custom", {"poly": p})


def preferred_pair_values(m: int) -> Tuple[int, int, int]:
    """The three-valued cross-correlation set {-1, -t, t-2} of a degree-m preferred pair."""
    t = 1 + 2 ** ((m + 2) // 2)
    return (-1, -t, t - 2)


def gen_gold(poly_a: PolynomialLike = DEFAULT_GOLD_POLYS[0],
             poly_b: PolynomialLike = DEFAULT_GOLD_POLYS[1],
             shift: int = 0) -> CodeSequence:
    """
    Gold sequence a(n)·b(n + shift) from a preferred pair of polynomials.

    Raises:
        NonPrimitiveError: either polynomial is not primitive.
        PreferredPairError: the measured cross-correlation is not three-valued
            within {-1, -t, t-2}; the measured values are attached.
    """
    pa, pb = parse_polynomial(poly_a), parse_polynomial(poly_b)
    m = pa.bit_length() - 1
    if pb.bit_length() - 1 != m:
        raise SequenceError(f"Gold polynomials must share a degree, got {m} and {pb.bit_length() - 1}")
    n = (1 << m) - 1
    if not 0 <= shift < n:
        raise SequenceError(f"Gold shift must be in [0, {n - 1}], got {shift}")

    a = gen_m_sequence(pa).chips
    b = gen_m_sequence(pb).chips
    allowed = preferred_pair_values(m)
    measured = tuple(sorted(set(int(v) for v in _periodic_xcorr(a, b))))
    if not set(measured) <= set(allowed):
        logger.error("Polynomials %#x/%#x are not a preferred pair: %s", pa, pb, measured)
        raise PreferredPairError(
            f"{pa:#x} and {pb:#x} are not a preferred pair: cross-correlation takes "
            f"{list(measured)}, allowed {list(allowed)}",
            values=measured,
            allowed=allowed,
        )

    chips = a * np.roll(b, -shift)
    logger.debug("Generated Gold %#x/%#x shift=%d (%d chips)", pa, pb, shift, n)
    return CodeSequence(chips, "Gold", {"poly_a": pa, "poly_b": pb, "shift": int(shift)})


# ---------------------------------------------------------------- Golay / LS

def gen_golay_pair(delays: Sequence[int], weights: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Recursive Golay construction.

        A_k(n) = W_k·A_{k-1}(n) + B_{k-1}(n - D_k)
        B_k(n) = W_k·A_{k-1}(n) - B_{k-1}(n - D_k)

    starting from A_0 = B_0 = δ(n). Returns the two int64 chip arrays of
    length 1 + Σ D_k.

    Raises:
        SequenceError: mismatched parameters, or delays that leave gaps
            (the result is then not a ±1 sequence).
    """
    if len(delays) != len(weights) or not delays:
        raise SequenceError("Golay construction needs equally many delays and weights (at least one)")
    if any(w not in (-1, 1) for w in weights):
        raise SequenceError(f"Golay weights must be ±1, got {list(weights)}")
    a = np.ones(1, dtype=np.int64)
    b = np.ones(1, dtype=np.int64)
    for d, w in zip(delays, weights):
        if d < 1:
            raise SequenceError(f"Golay delays must be positive, got {d}")
        n = max(a.size, b.size + d)
        a_pad = np.zeros(n, dtype=np.int64)
        a_pad[:a.size] = a
        b_shift = np.zeros(n, dtype=np.int64)
        b_shift[d:d + b.size] = b
        a, b = w * a_pad + b_shift, w * a_pad - b_shift
    if not (np.all(np.abs(a) == 1) and np.all(np.abs(b) == 1)):
        raise SequenceError(f"delays {list(delays)} do not produce a ±1 Golay pair")
    return a, b


def _golay_128() -> Tuple[np.ndarray, np.ndarray]:
    a, b = gen_golay_pair(GOLAY_128_DELAYS, GOLAY_128_WEIGHTS)
    # Ga128(n) = A_7(127 - n)
    return a[::-1].copy(), b[::-1].copy()


def gen_golay_a128() -> CodeSequence:
    """The 128-chip Ga128 sequence of 802.11ad."""
    a, _ = _golay_128()
    return CodeSequence(a, "GolayA", {"length": 128})


def gen_golay_b128() -> CodeSequence:
    """Gb128, the complementary partner of Ga128."""
    _, b = _golay_128()
    return CodeSequence(b, "GolayB", {"length": 128})


def _ls_halves(length: int, codeset: int) -> Tuple[np.ndarray, np.ndarray]:
    if length not in LS_LENGTHS:
        raise UnsupportedLengthError(
            f"LS length {length} is not supported; supported lengths: {list(LS_LENGTHS)}"
        )
    if codeset not in (0, 1):
        raise SequenceError(f"LS codeset must be 0 or 1, got {codeset}")
    half = length // 2
    k = int(math.log2(half))
    if k == 0:
        c, s = np.ones(1, dtype=np.int64), np.ones(1, dtype=np.int64)
    else:
        c, s = gen_golay_pair([2 ** i for i in range(k)], [1] * k)
    return c, (s if codeset == 0 else -s)


def gen_ls(length: int, codeset: int = 0) -> CodeSequence:
    """
    LS code without interference-free window: [C, ±S] for a Golay pair of
    length length/2 (codeset 0 takes +S, codeset 1 takes -S).

    Raises:
        UnsupportedLengthError: length not in LS_LENGTHS (the message lists them).
    """
    c, s = _ls_halves(length, codeset)
    return CodeSequence(np.concatenate([c, s]), "LS", {"length": int(length), "codeset": int(codeset)})


def ls_with_ifw(length: int, ifw: int, codeset: int = 0) -> np.ndarray:
    """
    Ternary LS code [C, 0^ifw, ±S]. Its aperiodic autocorrelation is zero
    for every lag 1 <= |k| <= ifw.
    """
    if ifw < 0:
        raise SequenceError(f"ifw must be >= 0, got {ifw}")
    c, s = _ls_halves(length, codeset)
    return np.concatenate([c, np.zeros(ifw, dtype=np.int64), s])


# ---------------------------------------------------------------- correlation

def _chips_of(seq) -> np.ndarray:
    if isinstance(seq, CodeSequence):
        return seq.chips.astype(np.int64)
    return np.asarray(seq, dtype=np.int64)


def _periodic_xcorr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.size
    return np.correlate(np.concatenate([b, b]).astype(np.int64), a.astype(np.int64), "valid")[:n]


def periodic_autocorrelation(seq) -> np.ndarray:
    """χ(k) = Σ_n c(n)·c((n + k) mod N) for k in [0, N-1], int64."""
    c = _chips_of(seq)
    return _periodic_xcorr(c, c)


def periodic_crosscorrelation(a, b) -> np.ndarray:
    """θ(k) = Σ_n a(n)·b((n + k) mod N) for equal-length sequences, int64."""
    ca, cb = _chips_of(a), _chips_of(b)
    if ca.size != cb.size:
        raise SequenceError(f"periodic cross-correlation needs equal lengths, got {ca.size} and {cb.size}")
    return _periodic_xcorr(ca, cb)


def aperiodic_autocorrelation(seq) -> np.ndarray:
    """Aperiodic autocorrelation over lags -(N-1)..(N-1); lag 0 sits at index N-1."""
    c = _chips_of(seq)
    return np.correlate(c, c, "full")


@dataclass(frozen=True)
class MeritReport:
    """Periodic autocorrelation summary of one sequence."""
    name: str
    length: int
    peak: int
    max_off_peak_abs: int
    peak_to_sidelobe_db: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "length": self.length,
            "peak": self.peak,
            "max_off_peak_abs": self.max_off_peak_abs,
            "peak_to_sidelobe_db": self.peak_to_sidelobe_db,
        }


def merit_report(seq: CodeSequence) -> MeritReport:
    acf = periodic_autocorrelation(seq)
    peak = int(acf[0])
    off = int(np.max(np.abs(acf[1:]))) if acf.size > 1 else 0
    psl = math.inf if off == 0 else 20.0 * math.log10(peak / off)
    return MeritReport(seq.name, len(seq), peak, off, psl)


def rank_sequences(seqs: Iterable[CodeSequence]) -> List[Tuple[CodeSequence, MeritReport]]:
    """Sequences with their reports, best peak-to-sidelobe ratio first (ties by name)."""
    scored = [(s, merit_report(s)) for s in seqs]
    scored.sort(key=lambda item: (-item[1].peak_to_sidelobe_db, item[1].name))
    return scored


# ---------------------------------------------------------------- specs & files

def parse_code_spec(spec: str) -> CodeSequence:
    """
    Build a sequence from a compact spec string.

        glfsr:<degree>:<mask>:<seed>     e.g. glfsr:8:0:1
        gold:<poly_a>:<poly_b>:<shift>   e.g. gold:0x43:0x67:0
        golay:a128 | golay:b128
        ls:<length>[:<codeset>]          e.g. ls:256
    """
    parts = spec.strip().split(":")
    kind = parts[0].lower()
    try:
        if kind == "glfsr":
            degree, mask, seed = (parts[1:] + ["0", "1"])[:3]
            return gen_glfsr(int(degree), int(mask, 0), int(seed, 0))
        if kind == "gold":
            if len(parts) == 1:
                return gen_gold()
            poly_a, poly_b = parts[1], parts[2]
            shift = int(parts[3]) if len(parts) > 3 else 0
            return gen_gold(poly_a, poly_b, shift)
        if kind == "golay":
            which = parts[1].lower() if len(parts) > 1 else "a128"
            if which == "a128":
                return gen_golay_a128()
            if which == "b128":
                return gen_golay_b128()
            raise SequenceError(f"unknown Golay sequence {which!r}; expected a128 or b128")
        if kind == "ls":
            length = int(parts[1])
            codeset = int(parts[2]) if len(parts) > 2 else 0
            return gen_ls(length, codeset)
    except (IndexError, ValueError) as e:
        if isinstance(e, SequenceError):
            raise
        raise SequenceError(f"cannot parse code spec {spec!r}: {e}") from e
    raise SequenceError(f"unknown code family in {spec!r}; expected glfsr, gold, golay or ls")


def write_chips_text(seq: CodeSequence, path) -> None:
    """One chip per line, written as +1 / -1."""
    lines = ["+1" if c > 0 else "-1" for c in seq.chips]
    Path(path).write_text("\n".join(lines) + "\n")


def write_chips_binary(seq: CodeSequence, path) -> None:
    """Raw int8 ±1 byte stream."""
    Path(path).write_bytes(seq.chips.astype(np.int8).tobytes())


def read_chips(path) -> CodeSequence:
    """Read a chip file written by write_chips_text or write_chips_binary (by suffix)."""
    p = Path(path)
    if p.suffix in (".bin", ".i8", ".int8"):
        chips = np.frombuffer(p.read_bytes(), dtype=np.int8)
    else:
        chips = np.array([int(line) for line in p.read_text().split()], dtype=np.int64)
    return CodeSequence(chips, "Custom", {"source": p.name})
