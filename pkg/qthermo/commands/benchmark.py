"""
Reference commands.

benchmark-thermal
    Equilibrium QSNR of the bare qubit and its low-temperature form on a T grid.
compare-brme
    HEOM and Bloch–Redfield Bloch trajectories side by side for one point.
"""

import logging

import numpy as np
import pandas as pd

from qthermo.commands.common import RunContext, point_metadata, point_tag, require_single_point
from qthermo.schemas.scenario import HeomSolverConfig
from qthermo.services.metrology import thermal_benchmark, thermal_benchmark_asymptotic
from qthermo.services.redfield import RedfieldOptions
from qthermo.services.scenario import scenario_from_config, solver_from_config

logger = logging.getLogger(__name__)

DEFAULT_T_GRID = np.linspace(0.05, 1.0, 100)


# ── benchmark-thermal ───────────────────────────────────────────────────────


def thermal_frame(temperatures, omega0: float = 1.0) -> pd.DataFrame:
    temperatures = np.asarray(temperatures, dtype=float)
    return pd.DataFrame(
        {
            "T": temperatures,
            "qsnr_thermal": [thermal_benchmark(T, omega0) for T in temperatures],
            "qsnr_asymptotic": [thermal_benchmark_asymptotic(T, omega0) for T in temperatures],
        }
    )


def run_thermal(ctx: RunContext) -> None:
    if ctx.config is None:
        temperatures, omega0 = DEFAULT_T_GRID, 1.0
    else:
        temperatures, omega0 = sorted(ctx.config.temperatures), ctx.config.system.omega0
    frame = thermal_frame(temperatures, omega0)
    ctx.write("benchmark_thermal.csv", frame, "benchmark-thermal", {"omega0": f"{omega0:g}", "units": "omega0 = 1"})
    if ctx.plot:
        ctx.plot_overlay(
            "benchmark_thermal",
            {
                "exact": frame,
                "asymptotic": frame.assign(qsnr_thermal=frame["qsnr_asymptotic"]),
            },
            "T",
            "qsnr_thermal",
            title="Equilibrium QSNR",
        )
    logger.info("benchmark-thermal done  points=%d  peak=%.6g", len(frame), frame["qsnr_thermal"].max())


# ── compare-brme ────────────────────────────────────────────────────────────


def run_compare(ctx: RunContext) -> None:
    cfg = ctx.config
    lam, omega_c, T = require_single_point(cfg, "compare-brme")
    base = scenario_from_config(cfg, lam, omega_c)

    if isinstance(cfg.solver, HeomSolverConfig):
        heom_scenario = base
        brme_scenario = base.with_solver(RedfieldOptions(include_lamb_shift=True))
    else:
        heom_scenario = base.with_solver(solver_from_config(HeomSolverConfig()))
        brme_scenario = base

    t_grid = cfg.grid.times()
    heom = heom_scenario.propagate(T, t_grid)
    brme = brme_scenario.propagate(T, t_grid)

    frame = pd.DataFrame({"t": t_grid})
    for name in ("sx", "sy", "sz"):
        frame[f"{name}_heom"] = heom.observables[name]
    for name in ("sx", "sy", "sz"):
        frame[f"{name}_brme"] = brme.observables[name]
    deviation = np.linalg.norm(
        frame[["sx_heom", "sy_heom", "sz_heom"]].to_numpy() - frame[["sx_brme", "sy_brme", "sz_brme"]].to_numpy(),
        axis=1,
    )
    frame["deviation"] = deviation

    tag = point_tag(lam, omega_c, T)
    ctx.write(f"compare_brme_{tag}.csv", frame, "compare-brme", point_metadata(cfg, lam, omega_c, T))
    ctx.manifest.record(f"compare_brme_{tag}", {"max_deviation": float(deviation.max())})
    if ctx.plot:
        ctx.plot_overlay(
            f"compare_brme_{tag}",
            {
                "HEOM": frame.rename(columns={"sz_heom": "sz"}),
                "BRME": frame.rename(columns={"sz_brme": "sz"}),
            },
            "t",
            "sz",
            title="⟨σ_z⟩: HEOM vs Bloch–Redfield",
        )
    logger.info("compare-brme done  T=%g  lambda=%g  max_deviation=%.4g", T, lam, deviation.max())

