"""Run manifests: every CLI command records its config, inputs, and output
hashes so a run can be audited and replayed to identical artifacts."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

__all__ = ["sha256_file", "write_manifest"]


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    out_dir,
    command: str,
    config: dict,
    seed: int | None,
    inputs: list,
    outputs: list,
    wall_time_s: float,
) -> Path:
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "wall_time_s": round(wall_time_s, 3),
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = Path(out_dir) / f"{command}_manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
