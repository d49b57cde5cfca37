"""Deterministic replicate execution over a joblib worker pool."""

from __future__ import annotations

import logging
from typing import Callable, List, TypeVar

from joblib import Parallel, cpu_count, delayed
from tqdm import tqdm

from bdsim.core.errors import ConfigurationError
from bdsim.simulation.kernel import RandomSource

LOGGER = logging.getLogger("bdsim.replicates")
T = TypeVar("T")


def default_threads() -> int:
    return max(1, int(cpu_count()))


def run_replicates(
    task: Callable[[RandomSource], T],
    src: RandomSource,
    reps: int,
    *,
    threads: int = 1,
    progress: bool = False,
    desc: str = "replicates",
) -> List[T]:
    """Run ``task`` on the streams ``src.replicate(0..reps-1)``.

    Results come back in replicate order whatever the pool size, so
    ``threads`` never changes the output.
    """
    if reps < 1:
        raise ConfigurationError(f"reps must be >= 1 (got {reps})")
    if threads < 1:
        raise ConfigurationError(f"threads must be >= 1 (got {threads})")
    streams = [src.replicate(index) for index in range(int(reps))]
    iterator = tqdm(streams, desc=desc, disable=not progress, leave=False)
    if threads == 1:
        return [task(stream) for stream in iterator]
    LOGGER.debug("running %d replicates on %d threads", reps, threads)
    return Parallel(n_jobs=threads, prefer="threads")(delayed(task)(stream) for stream in iterator)


__all__ = ["default_threads", "run_replicates"]
