"""
dynamics – QSNR and Bloch trajectories, one CSV per (λ, ω_c, T) point.
"""

import logging
from concurrent.futures import Executor

import pandas as pd

from qthermo.commands.common import RunContext, point_metadata, point_tag, worker_pool
from qthermo.schemas.scenario import HeomSolverConfig, ScenarioConfig
from qthermo.services.bath import SpectralDensity
from qthermo.services.heom import convergence_sweep
from qthermo.services.metrology import QsnrSeries, qsnr_trajectory
from qthermo.services.scenario import scenario_from_config

logger = logging.getLogger(__name__)

DYNAMICS_COLUMNS = ["t", "sx", "sy", "sz", "qfi", "qsnr"]


def series_frame(series: QsnrSeries) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (p.time, p.bloch.sx, p.bloch.sy, p.bloch.sz, p.qfi, p.qsnr)
            for p in series.points
        ],
        columns=DYNAMICS_COLUMNS,
    )


def compute_point(
    cfg: ScenarioConfig,
    lam: float,
    omega_c: float,
    T: float,
    executor: Executor | None = None,
) -> QsnrSeries:
    scenario = scenario_from_config(cfg, lam, omega_c)
    return qsnr_trajectory(
        scenario,
        T,
        cfg.grid.times(),
        cfg.derivative.relative_step * T,
        richardson=cfg.derivative.richardson,
        executor=executor,
    )


def _point_frame(cfg: ScenarioConfig, lam: float, omega_c: float, T: float) -> pd.DataFrame:
    return series_frame(compute_point(cfg, lam, omega_c, T))


def _convergence(ctx: RunContext, lam: float, omega_c: float, T: float) -> None:
    cfg = ctx.config
    if cfg.convergence is None or not isinstance(cfg.solver, HeomSolverConfig):
        return
    scenario = scenario_from_config(cfg, lam, omega_c)
    report = convergence_sweep(
        scenario.model,
        SpectralDensity(lam, omega_c),
        T,
        scenario.solver,
        cfg.convergence.depths,
        cfg.convergence.n_matsubaras,
        cfg.grid.times(),
    )
    frame = pd.DataFrame(
        [(r.axis, r.depth, r.n_matsubara, r.deviation, r.converged) for r in report.rows],
        columns=["axis", "depth", "n_matsubara", "deviation", "converged"],
    )
    tag = point_tag(lam, omega_c, T)
    ctx.write(f"convergence_{tag}.csv", frame, "convergence", point_metadata(cfg, lam, omega_c, T))
    ctx.manifest.record(f"convergence_{tag}", report.converged)


def run(ctx: RunContext) -> None:
    cfg = ctx.config
    points = cfg.grid_points()
    frames: dict[str, pd.DataFrame] = {}

    with worker_pool(min(ctx.workers, max(len(points), 2))) as pool:
        if pool is None or len(points) == 1:
            # a single point parallelizes its T ± δ propagations instead
            results = [series_frame(compute_point(cfg, *point, executor=pool)) for point in points]
        else:
            futures = [pool.submit(_point_frame, cfg, *point) for point in points]
            results = [f.result() for f in futures]

    for (lam, omega_c, T), frame in zip(points, results):
        tag = point_tag(lam, omega_c, T)
        ctx.write(f"dynamics_{tag}.csv", frame, "dynamics", point_metadata(cfg, lam, omega_c, T))
        best = frame["qsnr"].idxmax()
        ctx.manifest.record(
            f"dynamics_{tag}",
            {
                "qsnr_max": float(frame["qsnr"][best]),
                "t_max_qsnr": float(frame["t"][best]),
                "qsnr_final": float(frame["qsnr"].iloc[-1]),
            },
        )
        frames[f"λ={lam:g}, ω_c={omega_c:g}, T={T:g}"] = frame
        _convergence(ctx, lam, omega_c, T)

    ctx.plot_overlay("dynamics_qsnr", frames, "t", "qsnr", title="QSNR dynamics")
    logger.info("dynamics done  points=%d", len(points))
