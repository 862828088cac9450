"""
iqfile.py
---------

`.iq32` sample files: little-endian interleaved float32 I/Q, with a JSON
sidecar `<file>.json` carrying sample_rate and t0.
"""
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from .core import IqBlock
from .errors import ValidationError

logger = logging.getLogger(__name__)

IQ_DTYPE = np.dtype("<f4")


class IqFileError(ValidationError):
    """Raised when an IQ file or its sidecar is unreadable or inconsistent."""
    pass


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_iq(block: IqBlock, path) -> Path:
    """
    Write samples as interleaved float32 I/Q plus the JSON sidecar.

    Values are rounded to float32 on disk; in-memory math stays float64.
    """
    path = Path(path)
    interleaved = np.empty(2 * len(block), dtype=IQ_DTYPE)
    interleaved[0::2] = block.samples.real
    interleaved[1::2] = block.samples.imag
    path.write_bytes(interleaved.tobytes())
    meta = {
        "sample_rate": block.sample_rate,
        "t0": block.t0,
        "dtype": "float32",
        "byte_order": "little",
        "n_samples": len(block),
    }
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    logger.debug("Wrote %d samples to %s", len(block), path)
    return path


def read_iq(path, sample_rate: Optional[float] = None) -> IqBlock:
    """
    Read an `.iq32` file; the sidecar supplies sample_rate and t0.

    Args:
        path: the sample file.
        sample_rate: used only when no sidecar exists.

    Raises:
        IqFileError: odd float count, unsupported sidecar dtype, or no rate.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) % (2 * IQ_DTYPE.itemsize):
        raise IqFileError(f"{path}: size {len(raw)} is not a whole number of float32 I/Q pairs")
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError as e:
            raise IqFileError(f"{side}: invalid JSON sidecar: {e}") from e
        if meta.get("dtype", "float32") != "float32" or meta.get("byte_order", "little") != "little":
            raise IqFileError(f"{side}: only little-endian float32 samples are supported")
    rate = meta.get("sample_rate", sample_rate)
    if rate is None:
        raise IqFileError(f"{path}: no sidecar and no sample_rate given")
    values = np.frombuffer(raw, dtype=IQ_DTYPE).astype(np.float64)
    samples = values[0::2] + 1j * values[1::2]
    return IqBlock(samples, float(rate), float(meta.get("t0", 0.0)))
