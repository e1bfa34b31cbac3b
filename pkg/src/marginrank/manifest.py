"""Run manifests: one JSON document per CLI run recording config and checksums.

The manifest ties every emitted artifact to the exact flags and seed that
produced it.  Keys are sorted and floats written by repr, so two runs with
identical inputs differ only in the duration field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: Mapping[str, Any]
    inputs: Mapping[str, str]
    outputs: Mapping[str, Any] = field(default_factory=dict)
    seed: int | None = None
    duration_seconds: float = 0.0

    def with_outputs(self, paths: Mapping[str, str | Path]) -> "RunManifest":
        """Return a copy with each output path recorded beside its checksum."""
        recorded = dict(self.outputs)
        for name, path in paths.items():
            recorded[name] = {"path": str(path), "sha256": sha256_file(path)}
        return RunManifest(
            command=self.command,
            config=self.config,
            inputs=self.inputs,
            outputs=recorded,
            seed=self.seed,
            duration_seconds=self.duration_seconds,
        )

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "config": dict(self.config),
            "inputs": dict(self.inputs),
            "outputs": dict(self.outputs),
            "seed": self.seed,
            "duration_seconds": self.duration_seconds,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    Path(path).write_text(manifest.to_json(), encoding="utf-8")
