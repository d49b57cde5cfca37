"""Bootstrap helpers: environment, output directory, seeds and provenance."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Dict

from dotenv import load_dotenv

from bdsim import get_version
from bdsim.core.config import ExperimentConfig
from bdsim.core.provenance import ProvenanceEvent, ProvenanceLogger
from bdsim.core.validation import validation
from bdsim.estimators.replicates import default_threads
from bdsim.estimators.speed import CriticalSpeedCache
from bdsim.simulation.kernel import RandomSource

from .context import RunContext, RunPaths

ENV_OUTPUT_DIR = "BDSIM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = Path("outputs")
LOGGER = logging.getLogger("bdsim.pipeline")


def _capture_env(keys: tuple[str, ...]) -> Dict[str, str]:
    """Return a filtered snapshot of environment variables for provenance."""
    snapshot: Dict[str, str] = {}
    for key in keys:
        value = os.getenv(key)
        if value is not None:
            snapshot[key] = value
    return snapshot


def resolve_output_dir(config: ExperimentConfig, repo_root: Path, override: Path | None = None) -> Path:
    """``--output-dir`` > config ``output_dir`` > ``BDSIM_OUTPUT_DIR`` > ``outputs/<command>``."""
    if override is not None:
        return Path(override).expanduser().resolve()
    if config.output_dir is not None:
        return Path(config.output_dir).expanduser().resolve()
    env_dir = os.getenv(ENV_OUTPUT_DIR)
    if env_dir:
        return Path(env_dir).expanduser().resolve()
    return (repo_root / DEFAULT_OUTPUT_DIR / config.command).resolve()


def bootstrap_run(
    config: ExperimentConfig,
    *,
    repo_root: Path | None = None,
    output_dir: Path | None = None,
    quiet: bool = False,
    env_keys: tuple[str, ...] = (ENV_OUTPUT_DIR,),
) -> RunContext:
    """
    Load the environment, prepare the output directory and build the run context.

    Parameters
    ----------
    config:
        Fully resolved experiment configuration.
    repo_root:
        Directory holding the optional ``.env`` file. Defaults to ``Path.cwd()``.
    output_dir:
        Explicit output directory; wins over the environment and the config.
    quiet:
        Suppress terminal summaries and progress bars.
    """
    repo_root = (repo_root or Path.cwd()).resolve()
    load_dotenv(repo_root / ".env")
    target = resolve_output_dir(config, repo_root, output_dir)
    validation.validate_output_dir(target)

    paths = RunPaths(repo_root=repo_root, output_dir=target)
    paths.ensure_directories()
    # each run owns a fresh provenance log
    paths.provenance.unlink(missing_ok=True)
    provenance = ProvenanceLogger(paths.provenance)

    threads = config.threads or default_threads()
    src = RandomSource(config.seed)
    critical = CriticalSpeedCache(src, horizon=config.pilot_horizon, reps=config.pilot_reps, threads=threads, provenance=provenance)
    if config.critical_speed is not None and config.critical_speed_se is not None:
        critical.put(config.n, config.critical_speed, config.critical_speed_se)

    ctx = RunContext(
        config=config,
        paths=paths,
        env=_capture_env(env_keys),
        provenance=provenance,
        src=src,
        critical=critical,
        threads=threads,
        quiet=quiet,
    )
    ctx.provenance.log(
        ProvenanceEvent(
            stage="bootstrap",
            message="Run context initialized",
            payload={
                "command": config.command,
                "target": config.target,
                "seed": config.seed,
                "threads": threads,
                "output_dir": str(target),
                "version": get_version(),
                "env": ctx.env,
            },
        )
    )
    LOGGER.debug("bootstrapped %s into %s", config.command, target)
    return ctx


__all__ = ["DEFAULT_OUTPUT_DIR", "ENV_OUTPUT_DIR", "bootstrap_run", "resolve_output_dir"]
