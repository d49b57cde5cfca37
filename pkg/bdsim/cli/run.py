"""CLI entry point: `bdsim <command> [flags]`.

Every subcommand maps its flags onto `ExperimentConfig` keys. Values resolve as
defaults < ``--config`` file < flags; flags left unset never override the file.
Failures print one machine-parsable line on stderr and exit with the error's code.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler

from bdsim.core.config import load_experiment_config
from bdsim.core.errors import BdsimError
from bdsim.pipeline import RunArtifacts, bootstrap_run, execute
from bdsim.utils.split_fields import parse_float_grid, split_fields

REPO_ROOT = Path(__file__).resolve().parents[2]

app = typer.Typer(help="Event-driven Monte Carlo for branching-selection particle systems.", no_args_is_help=True)
console = Console(stderr=True)
LOGGER = logging.getLogger("bdsim.cli")

CONFIG = typer.Option(None, "--config", help="JSON/YAML config file (or a manifest.json to replay).")
OUTPUT_DIR = typer.Option(None, "--output-dir", help="Output directory (default: config output_dir, then $BDSIM_OUTPUT_DIR, then outputs/<command>).")
SEED = typer.Option(None, "--seed", help="Master seed, 0 <= seed < 2^64.")
THREADS = typer.Option(None, "--threads", min=1, help="Replicate worker threads (default: machine parallelism).")
REPS = typer.Option(None, "--reps", min=1, help="Number of independent replicates.")
N = typer.Option(None, "--n", min=1, help="Population size N.")
MU = typer.Option(None, "--mu", help="Drift mu (length units per unit time); comma list for a vector drift in d>1.")
HORIZON = typer.Option(None, "--horizon", min=0.0, help="Simulated time horizon t (time units).")
RULE = typer.Option(None, "--rule", help="Score rule: kill-left, kill-right, bees or lbbm.")
CAP = typer.Option(None, "--cap", min=1, help="Population cap for variable-size systems.")
CROSSING_TOL = typer.Option(None, "--crossing-tol", help="Absolute tolerance for bridge first-crossing times (time units).")
CRITICAL_SPEED = typer.Option(None, "--critical-speed", help="Known v_N (skips the pilot run); needs --critical-speed-se.")
CRITICAL_SPEED_SE = typer.Option(None, "--critical-speed-se", help="Standard error of --critical-speed.")
INIT_A = typer.Option(None, "--init-a", help="Comma list of initial positions, first system.")
INIT_B = typer.Option(None, "--init-b", help="Comma list of initial positions, second system.")
DEBUG = typer.Option(None, "--debug/--no-debug", help="Write debug dumps (coupling permutations, Newick forest).")
QUIET = typer.Option(False, "--quiet", help="Suppress the summary table and progress bars.")
VERBOSE = typer.Option(False, "--verbose", help="DEBUG-level logging.")


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _points(value: Optional[str]) -> Optional[List[float]]:
    return parse_float_grid(value, name="positions") if value is not None else None


def _mu(value: Optional[str]) -> float | List[float] | None:
    if value is None:
        return None
    numbers = parse_float_grid(value, name="mu")
    return numbers[0] if len(numbers) == 1 else numbers


def _assignments(values: Optional[List[str]]) -> Dict[str, Any]:
    """``--set key=value`` pairs; values stay strings and are coerced by the config model."""
    extra: Dict[str, Any] = {}
    for item in values or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise typer.BadParameter(f"--set expects key=value (got {item!r})")
        extra[key.strip()] = value.strip()
    return extra


def report_error(exc: BdsimError) -> None:
    message = str(exc).replace('"', "'").replace("\n", " ")
    typer.echo(f'error={exc.kind} exit={exc.exit_code} message="{message}"', err=True)


def _launch(
    command: str,
    overrides: Dict[str, Any],
    *,
    config: Optional[Path],
    output_dir: Optional[Path],
    quiet: bool,
    verbose: bool,
) -> RunArtifacts:
    _setup_logging(verbose)
    try:
        cfg = load_experiment_config(config, {**overrides, "command": command})
        ctx = bootstrap_run(cfg, repo_root=REPO_ROOT, output_dir=output_dir, quiet=quiet)
        artifacts = execute(ctx)
    except BdsimError as exc:
        report_error(exc)
        raise typer.Exit(code=exc.exit_code) from exc
    if not quiet:
        console.print(f"[green]wrote[/green] {len(artifacts.outputs)} tables to {artifacts.output_dir}")
    return artifacts


@app.command()
def simulate(
    config: Optional[Path] = CONFIG,
    n: Optional[int] = N,
    dimension: Optional[int] = typer.Option(None, "--dimension", min=1, help="Spatial dimension d."),
    rule: Optional[str] = RULE,
    width: Optional[float] = typer.Option(None, "--width", help="L-BBM culling width L (length units)."),
    mu: Optional[str] = MU,
    horizon: Optional[float] = HORIZON,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    init: Optional[str] = typer.Option(None, "--init", help="Comma list of initial positions (d=1)."),
    trajectory: Optional[bool] = typer.Option(None, "--trajectory/--no-trajectory", help="Dump every event of replicate 0."),
    cap: Optional[int] = CAP,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Run a branching-selection system and report per-replicate summaries."""
    overrides = dict(n=n, dimension=dimension, rule=rule, width=width, mu=_mu(mu), horizon=horizon, reps=reps, seed=seed)
    overrides.update(threads=threads, init=_points(init), trajectory=trajectory, cap=cap)
    _launch("simulate", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command()
def speed(
    config: Optional[Path] = CONFIG,
    n: Optional[int] = N,
    rule: Optional[str] = RULE,
    width: Optional[float] = typer.Option(None, "--width", help="L-BBM culling width L (length units)."),
    mu: Optional[str] = MU,
    horizon: Optional[float] = HORIZON,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    cap: Optional[int] = CAP,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Estimate the speed X_1(t)/t (length per unit time) with a 95% CI."""
    overrides = dict(n=n, rule=rule, width=width, mu=_mu(mu), horizon=horizon, reps=reps, seed=seed, threads=threads, cap=cap)
    _launch("speed", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command()
def diameter(
    config: Optional[Path] = CONFIG,
    n: Optional[int] = N,
    rule: Optional[str] = RULE,
    horizon_grid: Optional[str] = typer.Option(None, "--horizon-grid", help="Increasing comma list of horizons (time units)."),
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """E[diameter(t)]/t across a grid of horizons."""
    overrides = dict(n=n, rule=rule, horizon_grid=horizon_grid, reps=reps, seed=seed, threads=threads)
    _launch("diameter", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command("renewal-n2")
def renewal_n2(
    config: Optional[Path] = CONFIG,
    mu: Optional[float] = typer.Option(None, "--mu", help="Drift mu (length per unit time)."),
    steps: Optional[int] = typer.Option(None, "--steps", min=1, help="Renewal cycles per replicate."),
    composition: Optional[str] = typer.Option(None, "--composition", help="shared_horizon or independent_laplace."),
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """N=2 renewal chain: direct increments versus increments extracted from simulation."""
    overrides = dict(mu=mu, steps=steps, composition=composition, reps=reps, seed=seed, threads=threads)
    _launch("renewal-n2", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command("random-sum")
def random_sum(
    config: Optional[Path] = CONFIG,
    law: Optional[str] = typer.Option(None, "--law", help="constant_one, normal_shift[:m] or n2_renewal[:mu]."),
    r_grid: Optional[str] = typer.Option(None, "--r-grid", help="Increasing comma list of levels R (length units)."),
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """First-passage counts of a random walk across levels R, with a linear fit."""
    overrides = dict(law=law, r_grid=r_grid, reps=reps, seed=seed, threads=threads)
    _launch("random-sum", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command()
def hitting(
    config: Optional[Path] = CONFIG,
    system_kind: Optional[str] = typer.Option(None, "--system-kind", help="nbbm_drift or bees_drift."),
    n: Optional[int] = N,
    mu: Optional[float] = typer.Option(None, "--mu", help="Drift mu (length per unit time)."),
    r_grid: Optional[str] = typer.Option(None, "--r-grid", help="Increasing comma list of levels R (length units)."),
    t_max: Optional[float] = typer.Option(None, "--t-max", help="Give up on a replicate after this time (time units)."),
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    crossing_tol: Optional[float] = CROSSING_TOL,
    critical_speed: Optional[float] = CRITICAL_SPEED,
    critical_speed_se: Optional[float] = CRITICAL_SPEED_SE,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Mean hitting times against R, with slope, intercept and R^2."""
    overrides = dict(system_kind=system_kind, n=n, mu=mu, r_grid=r_grid, t_max=t_max, reps=reps, seed=seed, threads=threads)
    overrides.update(crossing_tol=crossing_tol, critical_speed=critical_speed, critical_speed_se=critical_speed_se)
    _launch("hitting", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command()
def escape(
    config: Optional[Path] = CONFIG,
    n: Optional[int] = N,
    mu: Optional[float] = typer.Option(None, "--mu", help="Drift mu, |mu| above the critical speed."),
    horizon: Optional[float] = HORIZON,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    critical_speed: Optional[float] = CRITICAL_SPEED,
    critical_speed_se: Optional[float] = CRITICAL_SPEED_SE,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Escape velocity Y_1(t)/t of Brownian bees with supercritical drift."""
    overrides = dict(n=n, mu=mu, horizon=horizon, reps=reps, seed=seed, threads=threads)
    overrides.update(critical_speed=critical_speed, critical_speed_se=critical_speed_se)
    _launch("escape", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command()
def stationarity(
    config: Optional[Path] = CONFIG,
    n: Optional[int] = N,
    mu: Optional[float] = typer.Option(None, "--mu", help="Drift mu, |mu| below the critical speed."),
    burn_in: Optional[float] = typer.Option(None, "--burn-in", help="Time discarded before the first snapshot."),
    sample_gap: Optional[float] = typer.Option(None, "--sample-gap", help="Time between snapshots of one chain."),
    samples: Optional[int] = typer.Option(None, "--samples", help="Snapshots per initial condition."),
    chains: Optional[int] = typer.Option(None, "--chains", min=1, help="Independent chains per initial condition."),
    init_a: Optional[str] = INIT_A,
    init_b: Optional[str] = INIT_B,
    shared_randomness: Optional[bool] = typer.Option(None, "--shared-randomness/--independent", help="Drive both sides with one stream."),
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """KS distances of summary statistics from two initial conditions (a proxy, not total variation)."""
    overrides = dict(n=n, mu=mu, burn_in=burn_in, sample_gap=sample_gap, samples=samples, chains=chains)
    overrides.update(init_a=_points(init_a), init_b=_points(init_b), shared_randomness=shared_randomness, seed=seed, threads=threads)
    _launch("stationarity", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command()
def recurrence(
    config: Optional[Path] = CONFIG,
    n: Optional[int] = N,
    mu: Optional[float] = typer.Option(None, "--mu", help="Drift mu (length per unit time)."),
    horizon: Optional[float] = HORIZON,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    crossing_tol: Optional[float] = CROSSING_TOL,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Count returns of Brownian bees with drift to the origin."""
    overrides = dict(n=n, mu=mu, horizon=horizon, reps=reps, seed=seed, threads=threads, crossing_tol=crossing_tol)
    _launch("recurrence", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command("couple-monotone")
def couple_monotone(
    config: Optional[Path] = CONFIG,
    n: Optional[int] = N,
    n_prime: Optional[int] = typer.Option(None, "--n-prime", min=1, help="Larger population N' >= N."),
    events: Optional[int] = typer.Option(None, "--events", min=0, help="Coupled events per replicate."),
    pairing: Optional[str] = typer.Option(None, "--pairing", help="rank, or reversed as a negative control."),
    init_a: Optional[str] = INIT_A,
    init_b: Optional[str] = INIT_B,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    debug: Optional[bool] = DEBUG,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Check the N-BBM versus N'-BBM rank domination at every event."""
    overrides = dict(n=n, n_prime=n_prime, events=events, pairing=pairing, init_a=_points(init_a), init_b=_points(init_b))
    overrides.update(reps=reps, seed=seed, threads=threads, debug=debug)
    _launch("couple-monotone", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command("couple-killright")
def couple_killright(
    config: Optional[Path] = CONFIG,
    n: Optional[int] = N,
    mu: Optional[float] = typer.Option(None, "--mu", help="Drift mu of the bees system."),
    events: Optional[int] = typer.Option(None, "--events", min=0, help="Coupled events per replicate."),
    pairing: Optional[str] = typer.Option(None, "--pairing", help="rank, or reversed as a negative control."),
    init_a: Optional[str] = INIT_A,
    init_b: Optional[str] = INIT_B,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    debug: Optional[bool] = DEBUG,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Check kill-right N-BBM <= bees - mu t at every event."""
    overrides = dict(n=n, mu=mu, events=events, pairing=pairing, init_a=_points(init_a), init_b=_points(init_b))
    overrides.update(reps=reps, seed=seed, threads=threads, debug=debug)
    _launch("couple-killright", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command("bbm-many-to-one")
def bbm_many_to_one(
    config: Optional[Path] = CONFIG,
    functional: Optional[str] = typer.Option(
        None, "--functional", help="constant_one, terminal_exceeds:x or indicator_sup_exceeds:x."
    ),
    t: Optional[float] = typer.Option(None, "--t", help="Time t of the identity (time units)."),
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    cap: Optional[int] = CAP,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Compare a sum over free BBM particles with e^t times a Brownian expectation."""
    overrides = dict(functional=functional, t=t, reps=reps, seed=seed, threads=threads, cap=cap)
    _launch("bbm-many-to-one", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command("bbm-radius")
def bbm_radius(
    config: Optional[Path] = CONFIG,
    t_law: Optional[str] = typer.Option(None, "--t-law", help="fixed:t or exponential:rate horizon law."),
    x_grid: Optional[str] = typer.Option(None, "--x-grid", help="Increasing comma list of radii x used for the fit."),
    holdout_grid: Optional[str] = typer.Option(None, "--holdout-grid", help="Radii checked against the fitted envelope only."),
    t: Optional[float] = typer.Option(None, "--t", help="Horizon of the Newick debug forest."),
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    cap: Optional[int] = CAP,
    debug: Optional[bool] = DEBUG,
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Tail of the free BBM radius up to a random horizon, with a log-tail fit against sqrt(x)."""
    overrides = dict(t_law=t_law, x_grid=x_grid, holdout_grid=holdout_grid, t=t, reps=reps, seed=seed, threads=threads, cap=cap)
    overrides.update(debug=debug)
    _launch("bbm-radius", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


@app.command()
def sweep(
    target: Optional[str] = typer.Option(None, "--target", help="Command run at every grid point."),
    config: Optional[Path] = CONFIG,
    mu_grid: Optional[str] = typer.Option(None, "--mu-grid", help="Comma list of drifts."),
    n_grid: Optional[str] = typer.Option(None, "--n-grid", help="Comma list of population sizes."),
    r_grid: Optional[str] = typer.Option(None, "--r-grid", help="Comma list of levels R."),
    n: Optional[int] = N,
    rule: Optional[str] = RULE,
    mu: Optional[str] = MU,
    horizon: Optional[float] = HORIZON,
    reps: Optional[int] = REPS,
    seed: Optional[int] = SEED,
    threads: Optional[int] = THREADS,
    assignments: Optional[List[str]] = typer.Option(None, "--set", help="Extra target key=value, repeatable."),
    output_dir: Optional[Path] = OUTPUT_DIR,
    quiet: bool = QUIET,
    verbose: bool = VERBOSE,
) -> None:
    """Run a target command over exactly one grid axis; point j uses seed XOR splitmix64(j)."""
    n_values = [int(float(token)) for token in split_fields(n_grid)] if n_grid is not None else None
    overrides: Dict[str, Any] = _assignments(assignments)
    overrides.update(target=target, mu_grid=mu_grid, n_grid=n_values, r_grid=r_grid)
    overrides.update(n=n, rule=rule, mu=_mu(mu), horizon=horizon, reps=reps, seed=seed, threads=threads)
    _launch("sweep", overrides, config=config, output_dir=output_dir, quiet=quiet, verbose=verbose)


def main() -> None:
    app()


if __name__ == "__main__":
    sys.exit(main())
