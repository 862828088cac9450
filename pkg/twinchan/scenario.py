"""
scenario.py
-----------

Compiles multipath descriptions and node mobility into a Scenario: one
CirTimeline per ordered node pair, with taps quantized onto the emulator's
10 ns slot grid.

Pipeline:
    ray CSV --read_ray_paths--> RayPathFile --parse_ray_paths--> RawCir per
    (tx, rx, t) --quantize_cir--> TapSet --build_scenario--> Scenario

The bundle format lives in `twinchan.bundle`; the fluent front end in
`twinchan.utils.builder`.
"""
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .clustering import BaseClusterer, KMeansClusterer
from .core import (
    COHERENCE_DISTANCE_M,
    DEFAULT_UPDATE_INTERVAL_S,
    MAX_NONZERO_TAPS,
    SLOT_COUNT,
    SLOT_WIDTH_S,
    CirTimeline,
    RadioParams,
    RawCir,
    Tap,
    TapSet,
    power_to_db,
)
from .errors import ValidationError
from .fields import FloatField, IntegerField, PolylineField, TextField, VectorField
from .model import BaseRecord, RecordError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
RAY_COLUMNS = ("t_s", "tx", "rx", "toa_s", "gain_db", "phase_rad")
MAX_DROPPED_POWER_FRACTION = 0.05
DOMINANT_ERROR_WARN_DB = 0.5
NEAR_ZERO_RATIO = 1e-6

Link = Tuple[int, int]


class ScenarioError(ValidationError):
    """Base exception for scenario compilation errors."""
    pass


class TrajectoryError(ScenarioError):
    """Raised when a node trajectory cannot be sampled."""
    pass


class RayPathError(ScenarioError):
    """
    Raised for malformed or inconsistent ray-path input.

    Attributes:
        row (int | None): line number in the CSV file (header is line 1).
    """

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class QuantizationError(ScenarioError):
    """Raised when a CIR cannot be mapped onto the tap grid."""
    pass


class CoverageError(ScenarioError):
    """Raised when ray samples do not cover every link at every timestamp."""

    def __init__(self, message: str, link: Optional[Link] = None, timestamp: Optional[float] = None):
        super().__init__(message)
        self.link = link
        self.timestamp = timestamp


# ---------------------------------------------------------------- nodes

class Node(BaseRecord):
    """A radio node: fixed antenna, static node, or a mobile node on a polyline."""
    id = IntegerField(min_value=0)
    kind = TextField(choices=("antenna", "static", "mobile"), default="static")
    position = VectorField(length=3)
    speed = FloatField(min_value=0.0, default=0.0)
    trajectory = PolylineField(dims=3)

    def validate(self):
        if self.position[2] < 0:
            raise RecordError(f"Node {self.id}: height must be >= 0, got {self.position[2]}")
        if any(p[2] < 0 for p in self.trajectory):
            raise RecordError(f"Node {self.id}: trajectory waypoints must have z >= 0")
        if self.kind == "mobile":
            if self.speed <= 0:
                raise RecordError(f"Node {self.id}: mobile nodes need speed > 0")
            if len(self.trajectory) < 2:
                raise RecordError(f"Node {self.id}: mobile nodes need at least 2 waypoints")
        elif self.speed != 0:
            raise RecordError(f"Node {self.id}: only mobile nodes may have a speed, got {self.speed}")

    @property
    def is_mobile(self) -> bool:
        return self.kind == "mobile"


def _polyline(node: Node) -> Tuple[np.ndarray, np.ndarray]:
    """Waypoints with zero-length segments removed, and their cumulative arc length."""
    pts = np.asarray(node.trajectory, dtype=np.float64)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 0])
    pts = pts[keep]
    seg = seg[seg > 0]
    return pts, np.concatenate([[0.0], np.cumsum(seg)])


def _interp_path(pts: np.ndarray, cum: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.column_stack([np.interp(s, cum, pts[:, i]) for i in range(pts.shape[1])])


def sample_trajectory(node: Node, Ts: float) -> np.ndarray:
    """
    Positions along a mobile node's polyline spaced D = speed·Ts apart.

    Starts at the first waypoint and always ends at the last one, so the
    final step may be shorter than D.

    Args:
        node (Node): a mobile node.
        Ts (float): channel sampling interval in seconds.

    Returns:
        np.ndarray: (M, 3) positions in meters.

    Raises:
        TrajectoryError: non-mobile node, Ts <= 0, or a zero-length trajectory.
    """
    if not node.is_mobile:
        raise TrajectoryError(f"Node {node.id} is {node.kind}; only mobile nodes have trajectories to sample")
    if not (Ts > 0 and math.isfinite(Ts)):
        raise TrajectoryError(f"Ts must be > 0, got {Ts}")
    pts, cum = _polyline(node)
    length = float(cum[-1])
    if length == 0:
        raise TrajectoryError(f"Node {node.id}: trajectory has zero length")

    step = node.speed * Ts
    if step > COHERENCE_DISTANCE_M:
        logger.warning(
            "Node %d: sampling spacing %.2f m exceeds the %.0f m coherence distance",
            node.id, step, COHERENCE_DISTANCE_M,
        )
    n_full = int(math.ceil(length / step))
    s = np.arange(n_full + 1) * step
    s = s[s < length - 1e-9 * max(length, 1.0)]
    s = np.append(s, length)
    return _interp_path(pts, cum, s)


def node_position(node: Node, t: float) -> np.ndarray:
    """Where a node is at time t; mobile nodes stop at their last waypoint."""
    if not node.is_mobile:
        return np.asarray(node.position, dtype=np.float64)
    pts, cum = _polyline(node)
    s = min(max(t, 0.0) * node.speed, float(cum[-1]))
    return _interp_path(pts, cum, np.array([s]))[0]


# ---------------------------------------------------------------- rays

@dataclass(frozen=True)
class RayRecord:
    t_s: float
    tx: int
    rx: int
    toa_s: float
    gain_db: float
    phase_rad: float
    row: Optional[int] = None


@dataclass(frozen=True)
class RayPathFile:
    """Ray-tracer export: one multipath component per record."""
    records: Tuple[RayRecord, ...] = ()

    def __len__(self):
        return len(self.records)


def read_ray_paths(path) -> RayPathFile:
    """
    Read a ray CSV with header `t_s,tx,rx,toa_s,gain_db,phase_rad`.

    Raises:
        RayPathError: missing columns or a malformed row (the error carries
            the file line number).
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in RAY_COLUMNS if c not in header]
        if missing:
            raise RayPathError(f"missing column(s) {missing}; expected header {','.join(RAY_COLUMNS)}", row=1)
        for row in reader:
            line = reader.line_num
            try:
                rec = RayRecord(
                    t_s=float(row["t_s"]),
                    tx=int(row["tx"]),
                    rx=int(row["rx"]),
                    toa_s=float(row["toa_s"]),
                    gain_db=float(row["gain_db"]),
                    phase_rad=float(row["phase_rad"]),
                    row=line,
                )
            except (TypeError, ValueError) as e:
                raise RayPathError(f"cannot parse {dict(row)}: {e}", row=line) from e
            if not all(math.isfinite(v) for v in (rec.t_s, rec.toa_s, rec.gain_db, rec.phase_rad)):
                raise RayPathError("non-finite value", row=line)
            if rec.toa_s < 0:
                raise RayPathError(f"toa_s must be >= 0, got {rec.toa_s}", row=line)
            records.append(rec)
    logger.info("Read %d ray records from %s", len(records), path)
    return RayPathFile(tuple(records))


def write_ray_paths(rays: RayPathFile, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAY_COLUMNS)
        for r in rays.records:
            writer.writerow([repr(r.t_s), r.tx, r.rx, repr(r.toa_s), repr(r.gain_db), repr(r.phase_rad)])


def parse_ray_paths(rays: RayPathFile) -> Dict[Tuple[int, int, float], RawCir]:
    """
    Group ray records into one RawCir per (tx, rx, timestamp).

    Gains become 10^(gain_db/20)·e^{j·phase}; paths come back sorted by toa.

    Raises:
        RayPathError: duplicate (link, t, toa), decreasing timestamps on a
            link, or a self link.
        CoverageError: a link is missing at a timestamp another link has.
    """
    grouped: Dict[Tuple[int, int, float], List[Tuple[float, complex]]] = {}
    seen_toa = set()
    last_t: Dict[Link, float] = {}
    for rec in rays.records:
        link = (rec.tx, rec.rx)
        if rec.tx == rec.rx:
            raise RayPathError(f"self link {link}", row=rec.row)
        if link in last_t and rec.t_s < last_t[link]:
            raise RayPathError(
                f"timestamps decrease on link {link}: {rec.t_s} after {last_t[link]}", row=rec.row
            )
        last_t[link] = rec.t_s
        key = (rec.tx, rec.rx, rec.t_s, rec.toa_s)
        if key in seen_toa:
            raise RayPathError(f"duplicate path toa={rec.toa_s} on link {link} at t={rec.t_s}", row=rec.row)
        seen_toa.add(key)
        gain = 10.0 ** (rec.gain_db / 20.0) * complex(math.cos(rec.phase_rad), math.sin(rec.phase_rad))
        grouped.setdefault((rec.tx, rec.rx, rec.t_s), []).append((rec.toa_s, gain))

    times = sorted({k[2] for k in grouped})
    links = sorted({(k[0], k[1]) for k in grouped})
    for link in links:
        for t in times:
            if (link[0], link[1], t) not in grouped:
                logger.error("Link %s has no rays at t=%s", link, t)
                raise CoverageError(f"link {link[0]}->{link[1]} is missing at t={t}", link=link, timestamp=t)

    return {key: RawCir.from_paths(paths, key[2]) for key, paths in sorted(grouped.items())}


# ---------------------------------------------------------------- quantization

@dataclass(frozen=True)
class TapQuantization:
    """Result of mapping one RawCir onto the slot grid."""
    tapset: TapSet
    first_arrival_s: float
    dropped_paths: int = 0
    dropped_power_fraction: float = 0.0
    dominant_error_db: float = 0.0
    n_clusters: int = 0


def quantize_cir(
    raw: RawCir,
    clusterer: Optional[BaseClusterer] = None,
    slot_width: float = SLOT_WIDTH_S,
    slot_count: int = SLOT_COUNT,
    max_taps: int = MAX_NONZERO_TAPS,
) -> TapQuantization:
    """
    Cluster a RawCir's paths by delay and emit at most `max_taps` taps.

    Delays are taken relative to the first arrival. Each cluster becomes a
    tap at its power-weighted mean delay rounded to the nearest slot, with
    the coherent sum of its member gains. Clusters landing on the same slot
    are merged. In-phase members add up, so a tap may carry more power than
    its members did separately; members in opposition may cancel.

    Raises:
        QuantizationError: empty CIR, or more than 5% of the power beyond
            the grid's maximum excess delay.
    """
    if len(raw) == 0:
        raise QuantizationError(f"RawCir at t={raw.timestamp} has no paths")
    clusterer = clusterer or KMeansClusterer()

    toas = raw.toas
    gains = raw.gains
    power = np.abs(gains) ** 2
    first = float(toas[0])
    rel = toas - first

    own_slot = np.floor(rel / slot_width + 0.5)
    keep = own_slot <= slot_count - 1
    dropped = int(np.count_nonzero(~keep))
    total = float(power.sum())
    dropped_fraction = float(power[~keep].sum() / total) if total > 0 else 0.0
    if dropped:
        logger.warning(
            "t=%s: dropped %d path(s) beyond %.2f us excess delay (%.2f%% of power)",
            raw.timestamp, dropped, slot_count * slot_width * 1e6, 100 * dropped_fraction,
        )
        if dropped_fraction > MAX_DROPPED_POWER_FRACTION:
            raise QuantizationError(
                f"t={raw.timestamp}: {100 * dropped_fraction:.1f}% of the power lies beyond the "
                f"maximum excess delay (limit {100 * MAX_DROPPED_POWER_FRACTION:.0f}%)"
            )
        rel, gains, power = rel[keep], gains[keep], power[keep]

    k = min(max_taps, int(np.unique(rel[power > 0]).size))
    if k == 0:
        logger.warning("t=%s: every path has zero gain; emitting a silent tap", raw.timestamp)
        return TapQuantization(TapSet((Tap(0, 0j),), slot_count), first, dropped, dropped_fraction, 0.0, 0)

    labels = clusterer.assign(rel, power, k)

    per_slot: Dict[int, List[float]] = {}
    for label in np.unique(labels):
        members = labels == label
        w = power[members]
        centroid = float(np.sum(w * rel[members]) / w.sum()) if w.sum() > 0 else float(np.mean(rel[members]))
        slot = min(int(math.floor(centroid / slot_width + 0.5)), slot_count - 1)
        acc = per_slot.setdefault(slot, [0j, 0.0])
        acc[0] += complex(np.sum(gains[members]))
        acc[1] += float(w.sum())

    taps = []
    dominant = (0.0, 0.0)  # (incoherent, emitted)
    for slot in sorted(per_slot):
        gain, incoherent = per_slot[slot]
        if incoherent > 0 and abs(gain) ** 2 < NEAR_ZERO_RATIO * incoherent:
            logger.warning(
                "t=%s: cluster at slot %d cancels coherently (%.1f dB below its members)",
                raw.timestamp, slot, -power_to_db(max(abs(gain) ** 2, 1e-300) / incoherent),
            )
        if incoherent > dominant[0]:
            dominant = (incoherent, abs(gain) ** 2)
        taps.append(Tap(slot, gain))

    dominant_error = 0.0
    if dominant[1] > 0:
        dominant_error = power_to_db(dominant[0] / dominant[1])
    elif dominant[0] > 0:
        dominant_error = math.inf
    if dominant_error > DOMINANT_ERROR_WARN_DB:
        logger.warning("t=%s: dominant tap is %.2f dB below its cluster power", raw.timestamp, dominant_error)

    return TapQuantization(
        TapSet(tuple(taps), slot_count), first, dropped, dropped_fraction, dominant_error, len(taps)
    )


def quantize_taps(raw: RawCir, clusterer: Optional[BaseClusterer] = None) -> TapSet:
    """TapSet of `quantize_cir` with default grid settings."""
    return quantize_cir(raw, clusterer).tapset


# ---------------------------------------------------------------- scenario

@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Nodes, radio parameters and one CirTimeline per ordered node pair.

    Attributes:
        nodes: the participating nodes, sorted by id.
        radio: shared radio parameters.
        sampling_interval: channel sampling interval T_s in seconds.
        links: (tx, rx) -> CirTimeline for every ordered pair of distinct nodes.
        metadata: JSON-ready description (grid, intervals, per-link details).
    """
    nodes: Tuple[Node, ...]
    radio: RadioParams
    sampling_interval: float
    links: Mapping[Link, CirTimeline]
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes, key=lambda n: n.id))
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ScenarioError(f"duplicate node ids in {ids}")
        if len(nodes) < 2:
            raise ScenarioError("a scenario needs at least 2 nodes")
        expected = {(a, b) for a in ids for b in ids if a != b}
        got = set(self.links)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ScenarioError(f"links must cover every ordered node pair; missing {missing[:5]}, unexpected {extra[:5]}")
        timelines = list(self.links.values())
        ui = {tl.update_interval for tl in timelines}
        nf = {tl.n_frames for tl in timelines}
        if len(ui) != 1 or len(nf) != 1:
            raise ScenarioError(f"all timelines must share update interval and frame count, got {sorted(ui)} / {sorted(nf)}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "links", {k: self.links[k] for k in sorted(self.links)})
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def node_ids(self) -> List[int]:
        return [n.id for n in self.nodes]

    def node(self, node_id: int) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise ScenarioError(f"no node with id {node_id}")

    def link(self, tx: int, rx: int) -> CirTimeline:
        try:
            return self.links[(tx, rx)]
        except KeyError as e:
            raise ScenarioError(f"no link {tx}->{rx} in scenario") from e

    @property
    def n_frames(self) -> int:
        return next(iter(self.links.values())).n_frames

    @property
    def update_interval(self) -> float:
        return next(iter(self.links.values())).update_interval

    @property
    def slot_width(self) -> float:
        return float(self.metadata.get("slot_width_s", SLOT_WIDTH_S))

    @property
    def slot_count(self) -> int:
        return int(self.metadata.get("slot_count", SLOT_COUNT))

    @property
    def name(self) -> str:
        return str(self.metadata.get("name", "scenario"))

    def __repr__(self) -> str:
        return (f"<Scenario(name={self.name!r}, nodes={len(self.nodes)}, links={len(self.links)}, "
                f"frames={self.n_frames}, update_interval={self.update_interval!r})>")


def _link_key(link: Link) -> str:
    return f"{link[0]}-{link[1]}"


def scenario_metadata(name: str, slot_width: float, slot_count: int, update_interval: float,
                      sampling_interval: float, **extra) -> Dict[str, object]:
    meta = {
        "name": name,
        "slot_width_s": slot_width,
        "slot_count": slot_count,
        "update_interval_s": update_interval,
        "sampling_interval_s": sampling_interval,
        "coherence_distance_m": COHERENCE_DISTANCE_M,
        "format_version": FORMAT_VERSION,
    }
    meta.update(extra)
    return meta


def build_scenario(
    nodes: Sequence[Node],
    radio: RadioParams,
    rawcirs: Mapping[Tuple[int, int, float], RawCir],
    Ts: float,
    update_interval: float = DEFAULT_UPDATE_INTERVAL_S,
    name: str = "scenario",
    clusterer: Optional[BaseClusterer] = None,
    threads: int = 1,
    slot_width: float = SLOT_WIDTH_S,
    slot_count: int = SLOT_COUNT,
) -> Scenario:
    """
    Quantize every RawCir and lay the TapSets out on the frame clock.

    There are round(n_samples·Ts / update_interval) frames (at least one).
    Frame k holds the latest ray sample taken at or before
    t_first + k·update_interval (zero-order hold).

    Args:
        nodes: every participating node.
        radio: shared radio parameters.
        rawcirs: (tx, rx, t) -> RawCir for every ordered pair and timestamp.
        Ts: channel sampling interval (seconds).
        update_interval: emulator frame period (seconds).
        threads: worker threads for per-link quantization.

    Raises:
        CoverageError: a (link, timestamp) is missing.
    """
    if not (Ts > 0 and math.isfinite(Ts)):
        raise ScenarioError(f"Ts must be > 0, got {Ts}")
    if not (update_interval > 0 and math.isfinite(update_interval)):
        raise ScenarioError(f"update_interval must be > 0, got {update_interval}")
    clusterer = clusterer or KMeansClusterer()
    ids = sorted(n.id for n in nodes)
    links = [(a, b) for a in ids for b in ids if a != b]
    times = sorted({key[2] for key in rawcirs})
    if not times:
        raise CoverageError("no channel samples supplied")

    for node in nodes:
        if node.is_mobile and node.speed * Ts > COHERENCE_DISTANCE_M:
            logger.warning(
                "Node %d moves %.2f m per channel sample, beyond the %.0f m coherence distance",
                node.id, node.speed * Ts, COHERENCE_DISTANCE_M,
            )
    for link in links:
        for t in times:
            if (link[0], link[1], t) not in rawcirs:
                logger.error("Coverage gap: link %s at t=%s", link, t)
                raise CoverageError(f"no channel sample for link {link[0]}->{link[1]} at t={t}", link=link, timestamp=t)

    n_frames = max(1, int(round(len(times) * Ts / update_interval)))
    t_first = times[0]
    frame_sample = []
    j = 0
    for k in range(n_frames):
        t_frame = t_first + k * update_interval
        while j + 1 < len(times) and times[j + 1] <= t_frame + 1e-9 * update_interval:
            j += 1
        frame_sample.append(j)

    def compile_link(link: Link) -> Tuple[Link, CirTimeline, List[TapQuantization]]:
        quantized = [
            quantize_cir(rawcirs[(link[0], link[1], t)], clusterer, slot_width, slot_count)
            for t in times
        ]
        frames = tuple(quantized[j].tapset for j in frame_sample)
        logger.debug("Compiled link %s: %d samples -> %d frames", link, len(times), n_frames)
        return link, CirTimeline(frames, update_interval), quantized

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(compile_link, links))

    timelines: Dict[Link, CirTimeline] = {}
    first_arrival: Dict[str, List[float]] = {}
    dropped: Dict[str, int] = {}
    for link, timeline, quantized in sorted(results, key=lambda r: r[0]):
        timelines[link] = timeline
        first_arrival[_link_key(link)] = [q.first_arrival_s for q in quantized]
        n_dropped = sum(q.dropped_paths for q in quantized)
        if n_dropped:
            dropped[_link_key(link)] = n_dropped

    meta = scenario_metadata(
        name, slot_width, slot_count, update_interval, Ts,
        first_arrival_s=first_arrival,
        dropped_paths=dropped,
        sample_times_s=list(times),
        creation={"clusterer": clusterer.describe(), "n_samples": len(times), "n_frames": n_frames},
    )
    scenario = Scenario(tuple(nodes), radio, Ts, timelines, meta)
    logger.info("Built scenario %r: %d nodes, %d links, %d frames", name, len(ids), len(links), n_frames)
    return scenario


def pathloss_matrix(scenario: Scenario, frame: int = 0) -> Tuple[List[int], np.ndarray]:
    """
    Per-link loss −10·log10(Σ|g|²) in dB at one frame.

    Returns:
        (node_ids, matrix): rows are transmitters, columns receivers; the
        diagonal is NaN and a silent link is +inf.
    """
    if not 0 <= frame < scenario.n_frames:
        raise ScenarioError(f"frame {frame} outside [0, {scenario.n_frames - 1}]")
    ids = scenario.node_ids
    out = np.full((len(ids), len(ids)), np.nan)
    for i, tx in enumerate(ids):
        for j, rx in enumerate(ids):
            if tx == rx:
                continue
            p = scenario.links[(tx, rx)].frames[frame].total_power()
            out[i, j] = math.inf if p == 0 else -10.0 * math.log10(p)
    return ids, out


# ---------------------------------------------------------------- free space

def free_space_raw_cir(tx_pos, rx_pos, center_freq_hz: float, timestamp: float = 0.0) -> RawCir:
    """
    Single line-of-sight path: delay d/c, Friis amplitude λ/(4πd), phase −2πd/λ.

    Raises:
        ScenarioError: coincident positions or a non-positive frequency.
    """
    d = float(np.linalg.norm(np.asarray(rx_pos, dtype=np.float64) - np.asarray(tx_pos, dtype=np.float64)))
    if d <= 0:
        raise ScenarioError("transmitter and receiver positions coincide")
    if center_freq_hz <= 0:
        raise ScenarioError(f"center_freq_hz must be > 0, got {center_freq_hz}")
    wavelength = SPEED_OF_LIGHT / center_freq_hz
    amplitude = wavelength / (4 * math.pi * d)
    phase = -2 * math.pi * math.fmod(d / wavelength, 1.0)
    return RawCir(((d / SPEED_OF_LIGHT, amplitude * complex(math.cos(phase), math.sin(phase))),), timestamp)


def free_space_rays(nodes: Sequence[Node], times: Iterable[float], center_freq_hz: float) -> RayPathFile:
    """Synthesize a ray file of line-of-sight paths between every ordered node pair."""
    records = []
    ordered = sorted(nodes, key=lambda n: n.id)
    for t in times:
        positions = {n.id: node_position(n, t) for n in ordered}
        for a in ordered:
            for b in ordered:
                if a.id == b.id:
                    continue
                (toa, gain), = free_space_raw_cir(positions[a.id], positions[b.id], center_freq_hz, t).paths
                records.append(RayRecord(float(t), a.id, b.id, toa, 20 * math.log10(abs(gain)), math.atan2(gain.imag, gain.real)))
    return RayPathFile(tuple(records))
