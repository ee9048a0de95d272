"""
sweep – summary grid over (λ, ω_c, T): best and final QSNR, optionally the
library-maximal BLP measure. Rows run on the worker pool and fail
independently; the table is written in sorted key order.
"""

import logging
import math

import pandas as pd

from qthermo.commands.blp import blp_point
from qthermo.commands.common import RunContext, worker_pool
from qthermo.commands.dynamics import compute_point
from qthermo.errors import QThermoError
from qthermo.schemas.scenario import ScenarioConfig

logger = logging.getLogger(__name__)


def sweep_row(cfg: ScenarioConfig, lam: float, omega_c: float, T: float) -> dict:
    row = {
        "lambda": lam,
        "omega_c": omega_c,
        "T": T,
        "qsnr_opt": math.nan,
        "t_opt": math.nan,
        "qsnr_final": math.nan,
        "status": "ok",
        "error": "",
    }
    if cfg.sweep.include_blp:
        row["blp_n"] = math.nan
    try:
        series = compute_point(cfg, lam, omega_c, T)
        row["qsnr_opt"] = series.best.qsnr
        row["t_opt"] = series.best.time
        row["qsnr_final"] = series.final.qsnr
        if cfg.sweep.include_blp:
            row["blp_n"] = blp_point(cfg, lam, omega_c, T).measure
    except QThermoError as exc:
        logger.warning("sweep row failed  lambda=%g  omega_c=%g  T=%g  error=%s", lam, omega_c, T, exc)
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run(ctx: RunContext) -> None:
    cfg = ctx.config
    points = cfg.grid_points()
    ctx.manifest.record("sweep_points", len(points))
    ctx.manifest.flush()

    with worker_pool(min(ctx.workers, len(points))) as pool:
        if pool is None:
            rows = [sweep_row(cfg, *p) for p in points]
        else:
            futures = {p: pool.submit(sweep_row, cfg, *p) for p in points}
            rows = [futures[p].result() for p in points]

    frame = pd.DataFrame(rows)
    ctx.write("sweep.csv", frame, "sweep", {"system": cfg.system.kind, "solver": cfg.solver.kind, "units": "omega0 = 1"})
    failed = int((frame["status"] != "ok").sum())
    ctx.manifest.record("sweep_failed_rows", failed)
    logger.info("sweep done  rows=%d  failed=%d", len(frame), failed)
