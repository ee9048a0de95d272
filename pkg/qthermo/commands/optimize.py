"""
optimize – swarm search for piecewise-constant controls that maximize the
time-weighted QSNR. Emits the fitness history, the best control table and the
controlled vs uncontrolled QSNR trajectories; the swarm is checkpointed after
every iteration so a run can be resumed with ``--resume``.
"""

import logging

import numpy as np
import pandas as pd

from qthermo.commands.common import RunContext, point_metadata, require_single_point, worker_pool
from qthermo.services.control import FitnessSpec, QsnrFitness, RunParams, optimize, weighted_fitness
from qthermo.services.results_store import checkpoint_path
from qthermo.services.scenario import scenario_from_config

logger = logging.getLogger(__name__)


def run_params_from_config(ctx: RunContext) -> RunParams:
    opt = ctx.config.optimizer
    return RunParams(
        algorithm=opt.algorithm,
        swarm_size=opt.swarm_size,
        iterations=opt.iterations,
        bound=opt.bound,
        seed=ctx.seed,
        inertia=opt.inertia,
        cognitive=opt.cognitive,
        social=opt.social,
        alpha_start=opt.alpha_start,
        alpha_end=opt.alpha_end,
        attractor=opt.attractor,
        seed_origin=opt.seed_origin,
    )


def controls_frame(fitness: QsnrFitness, x: np.ndarray) -> pd.DataFrame:
    cs = fitness.control(x)
    edges = np.linspace(0.0, cs.t_max, cs.n_segments + 1)
    return pd.DataFrame(
        {
            "segment": np.arange(cs.n_segments),
            "t_start": edges[:-1],
            "t_end": edges[1:],
            "Dx": cs.amplitudes[:, 0],
            "Dy": cs.amplitudes[:, 1],
            "Dz": cs.amplitudes[:, 2],
        }
    )


def run(ctx: RunContext) -> None:
    cfg = ctx.config
    opt = cfg.optimizer
    lam, omega_c, T = require_single_point(cfg, "optimize")
    scenario = scenario_from_config(cfg, lam, omega_c)
    spec = FitnessSpec(n_time_samples=opt.n_time_samples)
    fitness = QsnrFitness(
        scenario=scenario,
        temperature=T,
        t_max=opt.t_max,
        bound=opt.bound,
        spec=spec,
        delta=cfg.derivative.relative_step * T,
    )

    uncontrolled = fitness.trajectory(None)
    baseline = weighted_fitness(uncontrolled.points, spec)
    ctx.manifest.record("optimize_baseline_fitness", baseline)
    ctx.manifest.flush()
    logger.info("optimize baseline  fitness=%.6g  segments=%d", baseline, opt.n_segments)

    with worker_pool(min(ctx.workers, opt.swarm_size)) as pool:
        result = optimize(
            fitness,
            3 * opt.n_segments,
            run_params_from_config(ctx),
            checkpoint=checkpoint_path(ctx.out_dir),
            resume=ctx.resume,
            fingerprint=ctx.manifest.manifest.config_fingerprint,
            mapper=map if pool is None else pool.map,
        )
    ctx.manifest.add_output(ctx.settings.checkpoint_name)

    controlled = fitness.trajectory(result.best_position)
    metadata = point_metadata(cfg, lam, omega_c, T) | {"algorithm": opt.algorithm, "seed": ctx.seed}
    history = pd.DataFrame({"iteration": np.arange(len(result.history)), "best_fitness": result.history})
    ctx.write("optimize_history.csv", history, "optimize-history", metadata)
    ctx.write("optimize_controls.csv", controls_frame(fitness, result.best_position), "optimize-controls", metadata)
    comparison = pd.DataFrame(
        {
            "t": [p.time for p in controlled.points],
            "qsnr_controlled": controlled.qsnr_values(),
            "qsnr_uncontrolled": uncontrolled.qsnr_values(),
        }
    )
    ctx.write("optimize_comparison.csv", comparison, "optimize-comparison", metadata)

    ctx.manifest.record("optimize_best_fitness", result.best_fitness)
    ctx.manifest.record("optimize_improvement", result.best_fitness / baseline if baseline > 0 else float("nan"))
    if ctx.plot:
        ctx.plot_overlay(
            "optimize_comparison",
            {
                "controlled": comparison.rename(columns={"qsnr_controlled": "qsnr"}),
                "uncontrolled": comparison.rename(columns={"qsnr_uncontrolled": "qsnr"}),
            },
            "t",
            "qsnr",
            title="QSNR with and without control",
        )
    logger.info(
        "optimize done  best=%.6g  baseline=%.6g  iterations=%d",
        result.best_fitness, baseline, len(result.history) - 1,
    )
