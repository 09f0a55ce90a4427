"""Run manifests: everything needed to reproduce a command byte-for-byte.

Each CLI command writes a manifest beside its outputs recording the tool
version, the exact parameters and derived seeds, and content hashes of every
input and output file. Re-running the command with the recorded parameters
reproduces the recorded output hashes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from . import MODEL_FORMAT, __version__
from .errors import ArtifactIOError


def derive_seed(seed: int, stage: str) -> int:
    """Fan one run seed out to a per-stage sub-seed (sha256 of seed:stage)."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise ArtifactIOError(f"cannot hash {path}: {exc}") from exc
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    parameters: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timing_seconds: dict = field(default_factory=dict)
    tool: str = "floodwatch"
    version: str = __version__
    model_format: str = MODEL_FORMAT

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def write(self, path) -> None:
        payload = {
            "tool": self.tool,
            "version": self.version,
            "model_format": self.model_format,
            "command": self.command,
            "parameters": self.parameters,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timing_seconds": self.timing_seconds,
        }
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise ArtifactIOError(f"cannot write manifest {path}: {exc}") from exc
