"""
Command-line entry point.

    qthermo <command> --config scenario.json --out results/ [--seed N] [--workers N] [--resume PATH] [--plot]

Exit codes: 0 success, 2 invalid configuration, 3 convergence failure,
4 resume mismatch or unreadable checkpoint.
"""

import argparse
import json
import logging
from collections.abc import Callable
from pathlib import Path

from pydantic import ValidationError

from qthermo.commands import benchmark, blp, dynamics, optimize, steady, sweep
from qthermo.commands.common import RunContext
from qthermo.config import get_settings
from qthermo.errors import ConfigError, QThermoError
from qthermo.schemas.scenario import ScenarioConfig
from qthermo.services.results_store import ManifestWriter

logger = logging.getLogger(__name__)

COMMANDS: dict[str, Callable[[RunContext], None]] = {
    "dynamics": dynamics.run,
    "steady": steady.run,
    "sweep": sweep.run,
    "blp": blp.run,
    "optimize": optimize.run,
    "benchmark-thermal": benchmark.run_thermal,
    "compare-brme": benchmark.run_compare,
}

# benchmark-thermal falls back to the default T grid without a scenario file
CONFIG_OPTIONAL = {"benchmark-thermal"}


# ── Logging ─────────────────────────────────────────────────────────────────


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
    )
    logging.captureWarnings(True)


# ── Arguments and config ────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qthermo", description="Non-Markovian quantum thermometry simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, required=name not in CONFIG_OPTIONAL, help="Scenario JSON file.")
        cmd.add_argument("--out", type=Path, default=Path("results"), help="Output directory.")
        cmd.add_argument("--seed", type=int, default=None, help="Overrides the scenario seed.")
        cmd.add_argument("--workers", type=int, default=None, help="Worker processes (default: all cores).")
        cmd.add_argument("--resume", type=Path, default=None, help="Checkpoint file or directory to resume from.")
        cmd.add_argument("--plot", action="store_true", help="Also render SVG overlays.")
    return parser


def format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{path}: {err['msg']}")
    return "; ".join(parts)


def load_config(path: Path) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {format_validation_error(exc)}") from exc


# ── Main ────────────────────────────────────────────────────────────────────


def main(argv: list[str] | None = None) -> int:
    settings = get_settings()
    configure_logging(settings.log_level)
    args = build_parser().parse_args(argv)

    try:
        cfg = load_config(args.config) if args.config is not None else None
        if args.workers is not None and args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
    except ConfigError as exc:
        logger.error("config rejected  command=%s  error=%s", args.command, exc)
        return exc.exit_code

    seed = args.seed if args.seed is not None else (cfg.seed if cfg is not None else 0)
    snapshot: dict = {}
    if cfg is not None:
        cfg = cfg.model_copy(update={"seed": seed})
        snapshot = cfg.model_dump(mode="json", by_alias=True)

    manifest = ManifestWriter(args.out, args.command, snapshot, seed)
    ctx = RunContext(
        config=cfg,
        out_dir=manifest.out_dir,
        seed=seed,
        workers=args.workers if args.workers is not None else settings.worker_count,
        manifest=manifest,
        settings=settings,
        resume=args.resume,
        plot=args.plot,
    )
    logger.info("run started  command=%s  out=%s  seed=%d  workers=%d", args.command, ctx.out_dir, seed, ctx.workers)

    try:
        COMMANDS[args.command](ctx)
    except QThermoError as exc:
        logger.error("run failed  command=%s  error=%s", args.command, exc)
        manifest.finish("failed", f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    except Exception as exc:
        logger.exception("unexpected error  command=%s", args.command)
        manifest.finish("failed", f"{type(exc).__name__}: {exc}")
        raise

    manifest.finish()
    return 0
