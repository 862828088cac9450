"""
manifest.py
-----------

RunManifest: the record written next to every artifact a command produces,
so a result can be traced back to its inputs, settings and seed.
"""
import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping

from . import __version__
from .fields import IntegerField, MappingField, TextField
from .model import BaseRecord

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"
_CHUNK = 1 << 20


class RunManifest(BaseRecord):
    command = TextField()
    config = MappingField()
    seed = IntegerField(min_value=0, default=0)
    version = TextField(default=__version__)
    inputs = MappingField(doc="input path -> sha256 hex digest")
    outputs = MappingField(doc="output path -> sha256 hex digest")
    started_utc = TextField()
    finished_utc = TextField()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def file_digest(path) -> str:
    """sha256 of a file, read in 1 MiB chunks."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(_CHUNK), b""):
            h.update(chunk)
    return h.hexdigest()


def digests(paths: Iterable) -> Dict[str, str]:
    return {str(p): file_digest(p) for p in paths if p is not None and Path(p).is_file()}


def manifest_path(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + MANIFEST_SUFFIX)


def write_manifest(
    output,
    command: str,
    config: Mapping[str, Any],
    seed: int,
    inputs: Iterable = (),
    outputs: Iterable = (),
    started_utc: str = "",
) -> Path:
    """
    Write `<output>.manifest.json` for a finished command.

    Args:
        output: the command's primary output file.
        command (str): the command line, e.g. "sound run".
        config (Mapping): the resolved configuration.
        seed (int): the root seed used.
        inputs / outputs: files to fingerprint.
        started_utc (str): ISO timestamp taken when the command began.

    Returns:
        Path: where the manifest was written.
    """
    record = RunManifest(
        command=command,
        config=json.loads(json.dumps(dict(config), default=str)),
        seed=seed,
        inputs=digests(inputs),
        outputs=digests(list(outputs) or [output]),
        started_utc=started_utc or utc_now(),
        finished_utc=utc_now(),
    )
    path = manifest_path(output)
    path.write_text(json.dumps(record.to_dict(), sort_keys=True, indent=2) + "\n")
    logger.info("Manifest written: %s", path)
    return path


def read_manifest(path) -> RunManifest:
    return RunManifest.from_dict(json.loads(Path(path).read_text()))
