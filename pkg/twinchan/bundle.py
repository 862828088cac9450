"""
bundle.py
---------

The `.twsc` scenario bundle.

Layout (little-endian):
    b"TWSC" | uint16 format version | uint32 header length | JSON header
    then, per link in sorted (tx, rx) order and per frame, `taps_per_frame`
    records of (<i4 slot, <f8 real, <f8 imag); slot -1 marks padding.

The header is JSON with sorted keys, so identical scenarios serialize to
identical bytes.
"""
import json
import logging
import struct
from pathlib import Path
from typing import Dict, List

import numpy as np

from .core import TAP_RECORD_DTYPE, CirTimeline, RadioParams, TapSet
from .errors import TwinchanError
from .scenario import FORMAT_VERSION, Node, Scenario, ScenarioError

logger = logging.getLogger(__name__)

MAGIC = b"TWSC"
_PREFIX = struct.Struct("<4sHI")


class BundleError(ScenarioError):
    """Raised when a bundle is truncated, has a bad magic or an unknown version."""
    pass


class BundleWriteError(TwinchanError):
    """Raised when a bundle cannot be written."""
    pass


def scenario_header(scenario: Scenario) -> Dict[str, object]:
    taps_per_frame = max(
        1, max(len(frame) for tl in scenario.links.values() for frame in tl.frames)
    )
    return {
        "format_version": FORMAT_VERSION,
        "nodes": [n.to_dict() for n in scenario.nodes],
        "radio": scenario.radio.to_dict(),
        "sampling_interval_s": scenario.sampling_interval,
        "update_interval_s": scenario.update_interval,
        "n_frames": scenario.n_frames,
        "taps_per_frame": taps_per_frame,
        "links": [list(link) for link in scenario.links],
        "metadata": scenario.metadata,
    }


def dumps_scenario(scenario: Scenario) -> bytes:
    header = scenario_header(scenario)
    width = header["taps_per_frame"]
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks = [_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)), header_bytes]
    for link, timeline in scenario.links.items():
        records = np.concatenate([frame.to_records(width) for frame in timeline.frames])
        chunks.append(records.tobytes())
    return b"".join(chunks)


def loads_scenario(data: bytes) -> Scenario:
    if len(data) < _PREFIX.size:
        raise BundleError("bundle is truncated (no header)")
    magic, version, header_len = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise BundleError(f"not a scenario bundle (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle format version {version}; this build reads {FORMAT_VERSION}")
    start = _PREFIX.size
    try:
        header = json.loads(data[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BundleError(f"bundle header is not valid JSON: {e}") from e

    width = int(header["taps_per_frame"])
    n_frames = int(header["n_frames"])
    ui = float(header["update_interval_s"])
    slot_count = int(header["metadata"].get("slot_count", 512))
    links: List[tuple] = [tuple(link) for link in header["links"]]
    expected = len(links) * n_frames * width
    body_bytes = len(data) - start - header_len
    if body_bytes != expected * TAP_RECORD_DTYPE.itemsize:
        raise BundleError(
            f"bundle body is {body_bytes} bytes, expected {expected} tap records "
            f"({expected * TAP_RECORD_DTYPE.itemsize} bytes)"
        )
    body = np.frombuffer(data, dtype=TAP_RECORD_DTYPE, offset=start + header_len)
    body = body.reshape(len(links), n_frames, width)

    timelines = {}
    for i, link in enumerate(links):
        frames = tuple(TapSet.from_records(body[i, k], slot_count) for k in range(n_frames))
        timelines[(int(link[0]), int(link[1]))] = CirTimeline(frames, ui)
    nodes = tuple(Node.from_dict(n) for n in header["nodes"])
    radio = RadioParams.from_dict(header["radio"])
    return Scenario(nodes, radio, float(header["sampling_interval_s"]), timelines, header["metadata"])


def save_scenario(scenario: Scenario, path) -> Path:
    """
    Write a scenario bundle.

    Args:
        scenario (Scenario): the compiled scenario.
        path: destination, conventionally `*.twsc`.

    Returns:
        Path: the written path.
    """
    path = Path(path)
    data = dumps_scenario(scenario)
    try:
        path.write_bytes(data)
    except OSError as e:
        logger.error("Failed to write bundle %s: %s", path, e)
        raise BundleWriteError(f"cannot write {path}: {e}") from e
    logger.info("Bundle written: %s (%d bytes, %d links)", path, len(data), len(scenario.links))
    return path


def load_scenario(path) -> Scenario:
    """Read a `.twsc` bundle written by `save_scenario`."""
    path = Path(path)
    scenario = loads_scenario(path.read_bytes())
    logger.info("Bundle loaded: %s (%r)", path, scenario)
    return scenario
