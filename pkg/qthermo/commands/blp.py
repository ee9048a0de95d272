"""
blp – trace-distance dynamics and the BLP measure over the state-pair library.
"""

import logging

import pandas as pd

from qthermo.commands.common import RunContext, point_metadata, point_tag, worker_pool
from qthermo.errors import ConfigError
from qthermo.schemas.scenario import ScenarioConfig
from qthermo.services.nonmarkov import BlpResult, StatePair, blp_maximize, builtin_pairs
from qthermo.services.scenario import scenario_from_config, state_vector

logger = logging.getLogger(__name__)


def pairs_from_config(cfg: ScenarioConfig, dim: int) -> list[StatePair]:
    pairs = builtin_pairs() if cfg.blp.include_builtin else []
    pairs += [
        StatePair.from_vectors(p.label, state_vector(p.state_a), state_vector(p.state_b))
        for p in cfg.blp.pairs
    ]
    for pair in pairs:
        if pair.rho_a.shape != (dim, dim):
            raise ConfigError(
                f"blp pair {pair.label!r} has dimension {pair.rho_a.shape[0]} but the system has {dim}; "
                "set blp.include_builtin = false and supply pairs for this system"
            )
    return pairs


def blp_point(cfg: ScenarioConfig, lam: float, omega_c: float, T: float, executor=None) -> BlpResult:
    scenario = scenario_from_config(cfg, lam, omega_c)
    pairs = pairs_from_config(cfg, scenario.model.dim)
    return blp_maximize(scenario, T, cfg.grid.times(), pairs, executor=executor)


def run(ctx: RunContext) -> None:
    cfg = ctx.config
    points = cfg.grid_points()
    with worker_pool(ctx.workers) as pool:
        if pool is None or len(points) == 1:
            results = [blp_point(cfg, *p, executor=pool) for p in points]
        else:
            results = [f.result() for f in [pool.submit(blp_point, cfg, *p) for p in points]]

    summary_rows = []
    for (lam, omega_c, T), result in zip(points, results):
        tag = point_tag(lam, omega_c, T)
        series = pd.DataFrame({"t": result.times})
        for candidate in result.candidates:
            series[candidate.pair_label] = candidate.distances
        ctx.write(f"blp_distance_{tag}.csv", series, "blp-distance", point_metadata(cfg, lam, omega_c, T))
        for candidate in result.candidates:
            summary_rows.append(
                {
                    "lambda": lam,
                    "omega_c": omega_c,
                    "T": T,
                    "pair": candidate.pair_label,
                    "N": candidate.measure,
                    "resolved": candidate.resolved,
                    "winner": candidate.pair_label == result.pair_label,
                }
            )
        ctx.manifest.record(f"blp_{tag}", {"winner": result.pair_label, "N": result.measure, "resolved": result.resolved})
        if ctx.plot:
            frames = {c.pair_label: pd.DataFrame({"t": c.times, "D": c.distances}) for c in result.candidates}
            ctx.plot_overlay(f"blp_distance_{tag}", frames, "t", "D", title="Trace distance")

    ctx.write("blp_summary.csv", pd.DataFrame(summary_rows), "blp-summary", {"solver": cfg.solver.kind})
    logger.info("blp done  points=%d", len(points))
