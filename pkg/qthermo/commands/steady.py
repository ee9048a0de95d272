"""
steady – steady-state QSNR against the equilibrium benchmark over (λ, ω_c, T).
"""

import logging
import math

import pandas as pd

from qthermo.commands.common import RunContext, worker_pool
from qthermo.errors import ConvergenceError
from qthermo.schemas.scenario import ScenarioConfig
from qthermo.services.metrology import steady_qsnr, thermal_reference
from qthermo.services.scenario import scenario_from_config

logger = logging.getLogger(__name__)


def steady_row(cfg: ScenarioConfig, lam: float, omega_c: float, T: float) -> dict:
    scenario = scenario_from_config(cfg, lam, omega_c)
    row = {
        "T": T,
        "lambda": lam,
        "omega_c": omega_c,
        f"qsnr_{cfg.solver.kind}": math.nan,
        "qsnr_thermal": thermal_reference(scenario.model, T),
        "convergence_time": math.nan,
        "converged": False,
        "error": "",
    }
    try:
        point = steady_qsnr(
            scenario,
            T,
            cfg.derivative.relative_step * T,
            richardson=cfg.derivative.richardson,
        )
    except ConvergenceError as exc:
        logger.warning("steady row failed  lambda=%g  omega_c=%g  T=%g  error=%s", lam, omega_c, T, exc)
        row["error"] = str(exc)
        return row
    row[f"qsnr_{cfg.solver.kind}"] = point.qsnr
    row["convergence_time"] = point.time
    row["converged"] = True
    return row


def run(ctx: RunContext) -> None:
    cfg = ctx.config
    points = cfg.grid_points()
    with worker_pool(min(ctx.workers, len(points))) as pool:
        if pool is None:
            rows = [steady_row(cfg, *p) for p in points]
        else:
            rows = [f.result() for f in [pool.submit(steady_row, cfg, *p) for p in points]]

    frame = pd.DataFrame(rows)
    ctx.write("steady.csv", frame, "steady", {"system": cfg.system.kind, "solver": cfg.solver.kind, "units": "omega0 = 1"})
    ctx.manifest.record("steady_all_converged", bool(frame["converged"].all()))
    ctx.manifest.record("steady_rows", len(frame))

    if ctx.plot:
        column = f"qsnr_{cfg.solver.kind}"
        frames = {f"λ={lam:g}": part.sort_values("T") for lam, part in frame.groupby("lambda")}
        thermal = frame.drop_duplicates("T").sort_values("T")
        frames["thermal"] = thermal.assign(**{column: thermal["qsnr_thermal"]})
        ctx.plot_overlay("steady_qsnr", frames, "T", column, logy=True)
    logger.info("steady done  rows=%d  converged=%d", len(frame), int(frame["converged"].sum()))
