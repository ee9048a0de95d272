"""
On-disk results: versioned CSV tables, the run manifest and optimizer
checkpoints. Every file that other runs read back is replaced atomically
(write to a temporary sibling, then ``os.replace``).
"""

import hashlib
import json
import logging
import os
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import ValidationError

from qthermo.config import get_settings
from qthermo.errors import CheckpointError
from qthermo.schemas.results import CSV_SCHEMA_VERSION, RunManifest, SwarmCheckpoint

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def config_fingerprint(config: dict[str, Any]) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ── CSV ─────────────────────────────────────────────────────────────────────


def write_csv(path: Path, frame: pd.DataFrame, kind: str, metadata: dict[str, Any] | None = None) -> Path:
    """
    UTF-8 CSV with ``#``-prefixed metadata lines before the header row.
    The first line always carries the schema tag ``qthermo-<kind>/<version>``.
    """
    lines = [f"# schema: qthermo-{kind}/{CSV_SCHEMA_VERSION}"]
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}: {value}")
    body = frame.to_csv(index=False, float_format="%.12g", lineterminator="\n")
    _atomic_write_text(path, "\n".join(lines) + "\n" + body)
    logger.debug("csv written  path=%s  rows=%d", path, len(frame))
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_csv_metadata(path: Path) -> dict[str, str]:
    metadata: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(":")
            metadata[key.strip()] = value.strip()
    return metadata


# ── Manifest ────────────────────────────────────────────────────────────────


class ManifestWriter:
    """Owns ``manifest.json`` of one output directory."""

    def __init__(self, out_dir: Path, command: str, config: dict[str, Any], seed: int):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path = self.out_dir / MANIFEST_NAME
        self._t0 = time.monotonic()
        self.manifest = RunManifest(
            command=command,
            config=config,
            config_fingerprint=config_fingerprint(config),
            code_version=get_settings().app_version,
            seed=seed,
            started_at=datetime.now(timezone.utc).isoformat(),
        )
        self.flush()

    def flush(self) -> None:
        _atomic_write_text(self.path, self.manifest.model_dump_json(indent=2))

    def add_output(self, path: Path) -> None:
        name = str(Path(path).relative_to(self.out_dir)) if Path(path).is_absolute() else str(path)
        if name not in self.manifest.outputs:
            self.manifest.outputs.append(name)

    def record(self, key: str, value: Any) -> None:
        self.manifest.convergence[key] = value

    def finish(self, status: str = "completed", error: str | None = None) -> RunManifest:
        self.manifest.status = status
        self.manifest.error = error
        self.manifest.finished_at = datetime.now(timezone.utc).isoformat()
        self.manifest.wall_clock_seconds = round(time.monotonic() - self._t0, 3)
        self.flush()
        logger.info("manifest written  path=%s  status=%s  outputs=%d", self.path, status, len(self.manifest.outputs))
        return self.manifest


def load_manifest(out_dir: Path) -> RunManifest:
    return RunManifest.model_validate_json((Path(out_dir) / MANIFEST_NAME).read_text(encoding="utf-8"))


# ── Checkpoints ─────────────────────────────────────────────────────────────


def checkpoint_path(out_dir: Path) -> Path:
    return Path(out_dir) / get_settings().checkpoint_name


def save_checkpoint(path: Path, checkpoint: SwarmCheckpoint) -> None:
    _atomic_write_text(Path(path), checkpoint.model_dump_json())
    logger.info("checkpoint saved  iteration=%d  best=%.6g", checkpoint.iteration, checkpoint.global_best_fitness)


def load_checkpoint(path: Path) -> SwarmCheckpoint:
    path = Path(path)
    if path.is_dir():
        path = checkpoint_path(path)
    try:
        return SwarmCheckpoint.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    except (ValidationError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
