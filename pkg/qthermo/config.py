"""
Process configuration via environment variables.
Uses pydantic-settings for validation and type safety.

Physics parameters never live here; they come from the per-run scenario file
(see ``qthermo.schemas.scenario``).
"""

import os
from functools import lru_cache
from typing import Literal

from pydantic_settings import BaseSettings

from qthermo import __version__


class Settings(BaseSettings):
    # ── App ──────────────────────────────────────────────
    app_name: str = "qthermo"
    app_version: str = __version__
    log_level: str = "INFO"

    # ── Worker pool ──────────────────────────────────────
    # 0 means "one worker per available core"
    workers: int = 0

    # ── Solver defaults ──────────────────────────────────
    hierarchy_cap: int = 200_000
    rtol: float = 1e-8
    atol: float = 1e-10

    # ── Steady-state detection ───────────────────────────
    # "direct": sparse stationary solve; "propagate": probe-window detector
    steady_method: Literal["auto", "direct", "propagate"] = "auto"
    steady_tolerance: float = 1e-7
    steady_probe_window: float = 20.0
    steady_t_max: float = 1e4

    # ── Output ───────────────────────────────────────────
    checkpoint_name: str = "checkpoint.json"
    plot_format: str = "svg"

    model_config = {
        "env_prefix": "QTHERMO_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": False,
        "extra": "ignore",
    }

    @property
    def worker_count(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


@lru_cache
def get_settings() -> Settings:
    return Settings()
