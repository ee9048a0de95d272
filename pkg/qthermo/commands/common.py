"""
Shared plumbing for the subcommands: the per-run context, the bounded worker
pool, and small helpers for naming output files.
"""

import logging
from collections.abc import Iterator
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pandas as pd

from qthermo.config import Settings
from qthermo.errors import ConfigError
from qthermo.schemas.scenario import ScenarioConfig
from qthermo.services.plotting import overlay_plot
from qthermo.services.results_store import ManifestWriter, write_csv

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    config: ScenarioConfig | None
    out_dir: Path
    seed: int
    workers: int
    manifest: ManifestWriter
    settings: Settings
    resume: Path | None = None
    plot: bool = False

    @property
    def delta_fraction(self) -> float:
        return self.config.derivative.relative_step

    def write(self, name: str, frame: pd.DataFrame, kind: str, metadata: dict[str, Any] | None = None) -> Path:
        path = write_csv(self.out_dir / name, frame, kind, metadata)
        self.manifest.add_output(path.relative_to(self.out_dir))
        return path

    def plot_overlay(self, name: str, frames: dict[str, pd.DataFrame], x: str, y: str, **kwargs) -> None:
        if not self.plot:
            return
        path = overlay_plot(self.out_dir / name, frames, x, y, **kwargs)
        self.manifest.add_output(path.relative_to(self.out_dir))


@contextmanager
def worker_pool(workers: int) -> Iterator[Executor | None]:
    """A process pool of ``workers`` processes, or None when running serially."""
    if workers <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        logger.info("worker pool started  workers=%d", workers)
        yield pool


def point_tag(lam: float, omega_c: float, T: float) -> str:
    return f"lam{lam:g}_wc{omega_c:g}_T{T:g}"


def point_metadata(cfg: ScenarioConfig, lam: float, omega_c: float, T: float) -> dict[str, Any]:
    return {
        "system": cfg.system.kind,
        "solver": cfg.solver.kind,
        "lambda": f"{lam:g}",
        "omega_c": f"{omega_c:g}",
        "T": f"{T:g}",
        "units": "omega0 = 1",
    }


def require_single_point(cfg: ScenarioConfig, command: str) -> tuple[float, float, float]:
    points = cfg.grid_points()
    if len(points) != 1:
        raise ConfigError(f"{command} needs scalar lambda, omega_c and temperature (got {len(points)} grid points)")
    return points[0]
