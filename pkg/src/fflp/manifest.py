"""Run manifests: every CLI command records its resolved arguments,
seeds, tool version, and content digests of input/output files, so a
run can be reproduced and verified byte for byte.

One deliberate carve-out: CSV logs carry a ``wallclock_s`` telemetry
column that can never reproduce.  content_digest() masks exactly that
column; every other byte of every file participates in the digest.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path


class ManifestError(ValueError):
    """Malformed manifest file."""


def _mask_wallclock(data: bytes) -> bytes:
    """If the payload is a CSV whose header names a wallclock_s column,
    blank that column in every row; otherwise return the data unchanged."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        return data
    lines = text.split("\n")
    if not lines:
        return data
    header = lines[0].rstrip("\r").split(",")
    if "wallclock_s" not in header:
        return data
    col = header.index("wallclock_s")
    out = [lines[0]]
    for line in lines[1:]:
        body = line.rstrip("\r")
        if not body:
            out.append(line)
            continue
        cr = "\r" if line.endswith("\r") else ""
        cells = body.split(",")
        if col < len(cells):
            cells[col] = ""
        out.append(",".join(cells) + cr)
    return "\n".join(out).encode("utf-8")


def content_digest(path) -> str:
    """SHA-256 of the file with volatile wallclock columns masked."""
    data = Path(path).read_bytes()
    return hashlib.sha256(_mask_wallclock(data)).hexdigest()


@dataclass
class RunManifest:
    command: str
    args: dict
    seeds: dict
    tool_version: str
    input_digests: dict = field(default_factory=dict)
    output_digests: dict = field(default_factory=dict)
    wallclock_s: float = 0.0

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ManifestError(f"cannot parse manifest {path}: {e}") from e
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
        missing = {"command", "args", "seeds", "tool_version"} - set(raw)
        if missing:
            raise ManifestError(f"manifest missing keys: {sorted(missing)}")
        return cls(**raw)


class ManifestWriter:
    """Collects digests while a command runs, then writes the manifest."""

    def __init__(self, command: str, args: dict, seeds: dict):
        from . import __version__

        self._t0 = time.monotonic()
        self.manifest = RunManifest(
            command=command,
            args=dict(args),
            seeds=dict(seeds),
            tool_version=__version__,
        )

    def add_input(self, path) -> None:
        self.manifest.input_digests[Path(path).name] = content_digest(path)

    def add_output(self, path) -> None:
        self.manifest.output_digests[Path(path).name] = content_digest(path)

    def write(self, path) -> RunManifest:
        self.manifest.wallclock_s = round(time.monotonic() - self._t0, 3)
        self.manifest.save(path)
        return self.manifest
