"""Reproducibility manifests: one JSON sidecar per CLI run recording the
subcommand, its resolved parameters and a content digest of every input file."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    inputs: dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    @classmethod
    def collect(cls, subcommand: str, parameters: dict,
                input_paths: list[str | Path]) -> "RunManifest":
        inputs = {str(p): file_digest(p) for p in input_paths}
        clean = {k: v for k, v in parameters.items() if v is not None}
        return cls(subcommand=subcommand, parameters=clean, inputs=inputs)

    def write(self, path: str | Path) -> None:
        payload = {
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "tool_version": self.tool_version,
            "created_at": self.created_at,
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
