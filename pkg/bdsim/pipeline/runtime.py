"""Runtime entry point: dispatch a command, write its tables, summary and manifest."""

from __future__ import annotations

import io
import logging
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

from rich.console import Console
from rich.table import Table

from bdsim import get_version
from bdsim.core.config import ExperimentConfig
from bdsim.core.manifest import SWEEP_RULE, RunManifest, SeedDerivation, write_manifest
from bdsim.core.provenance import ProvenanceEvent
from bdsim.estimators.bees import escape_velocity, recurrence_profile, stationarity_diagnostic, summarise_returns
from bdsim.estimators.hitting import hitting_time_linearity
from bdsim.estimators.renewal import n2_renewal_chain, random_sum_first_passage
from bdsim.estimators.replicates import run_replicates
from bdsim.estimators.speed import diameter_decay, estimate_speed
from bdsim.estimators.stats import LinearFit
from bdsim.simulation.couplings import CouplingReport, couple_bees_to_killright, couple_monotone, run_coupling
from bdsim.simulation.free_bbm import fit_radius_tail, many_to_one_check, radius_tail_profile, simulate_bbm
from bdsim.simulation.kernel import RandomSource, point_seed
from bdsim.simulation.observers import DiameterTracker, SupRadiusTracker, TrajectoryRecorder
from bdsim.simulation.particles import new_system, simulate_until
from bdsim.simulation.rules import ScoreRule
from bdsim.utils.tables import ResultTable, sha256_file

from .context import RunContext

LOGGER = logging.getLogger("bdsim.pipeline")
SWEEP_FIELDS = {"mu_grid": "mu", "n_grid": "n", "r_grid": "r"}


@dataclass(slots=True)
class CommandOutcome:
    """Tables, summary lines and extra text files produced by one command."""

    title: str
    tables: List[ResultTable] = field(default_factory=list)
    summary: List[Tuple[str, str]] = field(default_factory=list)
    files: Dict[str, str] = field(default_factory=dict)

    def note(self, metric: str, value: Any) -> None:
        self.summary.append((metric, _display(value)))


@dataclass(slots=True)
class RunArtifacts:
    output_dir: Path
    manifest: Path
    summary: Path
    provenance: Path
    outputs: Dict[str, Path]
    outcome: CommandOutcome


def _display(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, tuple):
        return "(" + ", ".join(_display(item) for item in value) + ")"
    return str(value)


def _rule(cfg: ExperimentConfig) -> ScoreRule:
    return ScoreRule.of(cfg.rule, cfg.width)


def _fit_table(name: str, fit: LinearFit, **extra: Any) -> ResultTable:
    lo, hi = fit.slope_ci95()
    table = ResultTable(name, ["slope", "intercept", "r_squared", "slope_stderr", "slope_ci_lo", "slope_ci_hi", *extra])
    table.append(fit.slope, fit.intercept, fit.r_squared, fit.slope_stderr, lo, hi, *extra.values())
    return table


def _note_fit(outcome: CommandOutcome, fit: LinearFit) -> None:
    outcome.note("fit slope", fit.slope)
    outcome.note("fit intercept", fit.intercept)
    outcome.note("fit R^2", fit.r_squared)


# ============== Commands ==============


def _simulate_replicate(cfg: ExperimentConfig, src: RandomSource) -> Dict[str, Any]:
    state = new_system(cfg.n, cfg.dimension, cfg.init, _rule(cfg), cfg.mu, cap=cfg.cap)
    diameters = DiameterTracker()
    radius = SupRadiusTracker(src.child("bridge"))
    summary = simulate_until(state, cfg.horizon, src, [diameters, radius])
    return {
        "final_time": summary.final_time,
        "population": int(summary.positions.shape[0]),
        "event_count": summary.event_count,
        "noop_count": summary.noop_count,
        "leftmost": summary.leftmost,
        "rightmost": summary.rightmost,
        "diameter": summary.diameter,
        "max_diameter": summary.diagnostics["max_diameter"],
        "sup_radius": summary.sup_radius,
    }


def run_simulate(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    outcome = CommandOutcome(title=f"simulate {cfg.rule} N={cfg.n} d={cfg.dimension}")
    rows = run_replicates(partial(_simulate_replicate, cfg), src, cfg.reps, threads=ctx.threads, progress=ctx.progress, desc="simulate")
    columns = list(rows[0])
    table = ResultTable("simulate", ["replicate", *columns])
    for index, row in enumerate(rows):
        table.append(index, *(row[name] for name in columns))
    outcome.tables.append(table)
    if cfg.trajectory:
        # replicate 0 again on a fresh stream, with the recorder attached
        recorder = TrajectoryRecorder()
        state = new_system(cfg.n, cfg.dimension, cfg.init, _rule(cfg), cfg.mu, cap=cfg.cap)
        simulate_until(state, cfg.horizon, src.replicate(0), [recorder])
        outcome.tables.append(ResultTable("trajectory", recorder.columns, recorder.rows))
    outcome.note("replicates", cfg.reps)
    outcome.note("mean events", sum(row["event_count"] for row in rows) / len(rows))
    outcome.note("mean final diameter", sum(row["diameter"] for row in rows) / len(rows))
    return outcome


def run_speed(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    report = estimate_speed(cfg.n, _rule(cfg), cfg.mu_scalar, cfg.horizon, cfg.reps, src, init=cfg.init, cap=cfg.cap, threads=ctx.threads, progress=ctx.progress)
    table = ResultTable(
        "speed",
        ["n", "rule", "mu", "horizon", "reps", "speed", "stderr", "ci_lo", "ci_hi", "rightmost_speed", "diameter_over_t"],
    )
    table.append(
        cfg.n,
        cfg.rule,
        cfg.mu_scalar,
        cfg.horizon,
        cfg.reps,
        report.point_estimate,
        report.standard_error,
        report.ci95[0],
        report.ci95[1],
        report.diagnostics["rightmost_speed"],
        report.diagnostics["diameter_over_t"],
    )
    outcome = CommandOutcome(title=f"speed {cfg.rule} N={cfg.n}", tables=[table])
    outcome.note("speed X_1(t)/t", report.point_estimate)
    outcome.note("standard error", report.standard_error)
    outcome.note("95% CI", report.ci95)
    outcome.note("diameter / t", report.diagnostics["diameter_over_t"])
    return outcome


def run_diameter(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    grid = cfg.horizon_grid or [250.0, 500.0, 1000.0, 2000.0]
    table = diameter_decay(cfg.n, grid, cfg.reps, src, rule=_rule(cfg), threads=ctx.threads, progress=ctx.progress)
    outcome = CommandOutcome(title=f"diameter decay N={cfg.n}", tables=[table])
    for horizon, mean, stderr in table.rows:
        outcome.note(f"E[diam]/t at t={horizon:g}", f"{mean:.6g} +/- {stderr:.2g}")
    return outcome


def run_renewal(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    result = n2_renewal_chain(cfg.mu_scalar, cfg.steps, cfg.reps, src, composition=cfg.composition, threads=ctx.threads, progress=ctx.progress)
    table = result.summary_table()
    outcome = CommandOutcome(title=f"N=2 renewal chain ({cfg.composition})", tables=[table])
    for row in table.as_dicts():
        outcome.note(f"{row['source']} mean L", f"{row['mean_increment']:.6g} +/- {row['stderr']:.2g}")
        outcome.note(f"{row['source']} ratio L/T", row["ratio"])
    if result.ks is not None:
        outcome.note("KS distance", result.ks.statistic)
    return outcome


def run_random_sum(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    grid = cfg.r_grid or [5.0, 10.0, 20.0, 40.0]
    result = random_sum_first_passage(cfg.law, grid, cfg.reps, src, threads=ctx.threads, progress=ctx.progress)
    outcome = CommandOutcome(title=f"random-sum first passage ({cfg.law})")
    outcome.tables += [result.table, _fit_table("random_sum_fit", result.fit, pilot_mean=result.pilot_mean)]
    outcome.note("pilot mean", result.pilot_mean)
    _note_fit(outcome, result.fit)
    return outcome


def run_hitting(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    grid = cfg.r_grid or [5.0, 10.0, 20.0, 40.0]
    result = hitting_time_linearity(
        cfg.system_kind,
        cfg.n,
        cfg.mu_scalar,
        grid,
        cfg.reps,
        src,
        critical=ctx.critical,
        t_max=cfg.t_max,
        tol=cfg.crossing_tol,
        threads=ctx.threads,
        progress=ctx.progress,
    )
    outcome = CommandOutcome(title=f"hitting times {cfg.system_kind} N={cfg.n} mu={cfg.mu_scalar:g}")
    outcome.tables += [result.table, _fit_table("hitting_fit", result.fit)]
    if result.critical is not None:
        outcome.note("critical speed", result.critical.speed)
    _note_fit(outcome, result.fit)
    return outcome


def run_escape(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    report = escape_velocity(cfg.n, cfg.mu_scalar, cfg.horizon, cfg.reps, src, critical=ctx.critical, threads=ctx.threads, progress=ctx.progress)
    table = ResultTable("escape", ["n", "mu", "horizon", "reps", "velocity", "stderr", "ci_lo", "ci_hi", "critical_speed", "predicted"])
    table.append(
        cfg.n,
        cfg.mu_scalar,
        cfg.horizon,
        cfg.reps,
        report.point_estimate,
        report.standard_error,
        report.ci95[0],
        report.ci95[1],
        report.diagnostics["critical_speed"],
        report.diagnostics["predicted"],
    )
    outcome = CommandOutcome(title=f"escape velocity N={cfg.n} mu={cfg.mu_scalar:g}", tables=[table])
    outcome.note("Y_1(t)/t", report.point_estimate)
    outcome.note("standard error", report.standard_error)
    outcome.note("predicted (1 - v/|mu|) mu", report.diagnostics["predicted"])
    return outcome


def run_stationarity(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    init_a = cfg.init_a or [0.0] * cfg.n
    init_b = cfg.init_b or [50.0] * cfg.n
    table = stationarity_diagnostic(
        cfg.n,
        cfg.mu_scalar,
        cfg.burn_in,
        cfg.sample_gap,
        cfg.samples,
        init_a,
        init_b,
        src,
        chains=cfg.chains,
        shared_randomness=cfg.shared_randomness,
        threads=ctx.threads,
        progress=ctx.progress,
    )
    outcome = CommandOutcome(title="stationarity proxy (KS on summary statistics, not total variation)", tables=[table])
    for name, distance, pvalue, _, _ in table.rows:
        outcome.note(f"KS {name}", f"{distance:.4g} (p={pvalue:.3g})")
    return outcome


def run_recurrence(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    table = recurrence_profile(cfg.n, cfg.mu_scalar, cfg.horizon, cfg.reps, src, tol=cfg.crossing_tol, threads=ctx.threads, progress=ctx.progress)
    outcome = CommandOutcome(title=f"returns to 0, bees N={cfg.n} mu={cfg.mu_scalar:g}", tables=[table])
    for metric, value in summarise_returns(table).items():
        outcome.note(metric, value)
    return outcome


def _coupling_table(name: str, reports: List[CouplingReport]) -> ResultTable:
    columns = ["replicate", "events", "violations", "alarms", "first_violation_event", "first_violation_time", "first_violation_rank"]
    table = ResultTable(name, columns)
    for index, report in enumerate(reports):
        first = report.first_violation
        if first is None:
            table.append(index, report.events, report.violations, report.alarms, None, None, None)
        else:
            table.append(index, report.events, report.violations, report.alarms, first.event_index, first.event_time, first.rank)
    return table


def _monotone_replicate(cfg: ExperimentConfig, src: RandomSource) -> CouplingReport:
    init_a = cfg.init_a or [0.0] * cfg.n
    init_b = cfg.init_b or [0.0] * cfg.n_prime
    return run_coupling(couple_monotone(cfg.n, cfg.n_prime, init_a, init_b, src, pairing=cfg.pairing), cfg.events)


def _killright_replicate(cfg: ExperimentConfig, src: RandomSource) -> CouplingReport:
    init = cfg.init_a or [0.0] * cfg.n
    return run_coupling(couple_bees_to_killright(cfg.n, cfg.mu_scalar, init, src, init_b=cfg.init_b, pairing=cfg.pairing), cfg.events)


def _run_coupling_command(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource, kind: str) -> CommandOutcome:
    task = partial(_monotone_replicate if kind == "monotone" else _killright_replicate, cfg)
    reports = run_replicates(task, src, cfg.reps, threads=ctx.threads, progress=ctx.progress, desc="couplings")
    outcome = CommandOutcome(title=f"{kind} coupling ({cfg.pairing} pairing)", tables=[_coupling_table(f"coupling_{kind}", reports)])
    if cfg.debug:
        if kind == "monotone":
            pair = couple_monotone(cfg.n, cfg.n_prime, cfg.init_a or [0.0] * cfg.n, cfg.init_b or [0.0] * cfg.n_prime, src.replicate(0), debug=True, pairing=cfg.pairing)
        else:
            pair = couple_bees_to_killright(cfg.n, cfg.mu_scalar, cfg.init_a or [0.0] * cfg.n, src.replicate(0), init_b=cfg.init_b, debug=True, pairing=cfg.pairing)
        run_coupling(pair, cfg.events)
        outcome.tables.append(pair.debug_table())
    outcome.note("replicates", len(reports))
    outcome.note("events per replicate", cfg.events)
    outcome.note("violations", sum(report.violations for report in reports))
    outcome.note("numerical alarms", sum(report.alarms for report in reports))
    return outcome


def run_couple_monotone(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    return _run_coupling_command(ctx, cfg, src, "monotone")


def run_couple_killright(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    return _run_coupling_command(ctx, cfg, src, "killright")


def run_many_to_one(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    result = many_to_one_check(cfg.functional, cfg.t, cfg.reps, src, cap=cfg.cap, threads=ctx.threads, progress=ctx.progress)
    table = ResultTable("many_to_one", ["functional", "t", "reps", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "z_score", "oracle"])
    table.append(
        result.functional, result.t, result.reps, result.lhs_estimate, result.lhs_stderr, result.rhs_estimate, result.rhs_stderr, result.z_score, result.oracle
    )
    outcome = CommandOutcome(title=f"many-to-one {result.functional} at t={cfg.t:g}", tables=[table])
    outcome.note("sum over BBM", f"{result.lhs_estimate:.6g} +/- {result.lhs_stderr:.2g}")
    outcome.note("e^t E[F(B)]", f"{result.rhs_estimate:.6g} +/- {result.rhs_stderr:.2g}")
    outcome.note("closed form", result.oracle)
    outcome.note("z score", result.z_score)
    return outcome


def run_radius(ctx: RunContext, cfg: ExperimentConfig, src: RandomSource) -> CommandOutcome:
    fit_grid = cfg.x_grid or [4.0, 9.0, 16.0, 25.0]
    grid = sorted(set(fit_grid) | set(cfg.holdout_grid))
    table = radius_tail_profile(cfg.t_law, grid, cfg.reps, src, cap=cfg.cap, threads=ctx.threads, progress=ctx.progress)
    outcome = CommandOutcome(title=f"free BBM radius tail ({cfg.t_law})", tables=[table])
    positive = [row for row in table.rows if float(row[0]) not in set(cfg.holdout_grid) and float(row[1]) > 0.0]
    if len(positive) >= 2:
        fit = fit_radius_tail(table, cfg.holdout_grid)
        lo, hi = fit.slope_ci95
        fit_table = ResultTable("radius_fit", ["slope", "slope_ci_lo", "slope_ci_hi", "intercept", "r_squared", "envelope_c", "holdout_ok"])
        fit_table.append(fit.slope, lo, hi, fit.fit.intercept, fit.fit.r_squared, fit.envelope_c, fit.holdout_ok)
        outcome.tables.append(fit_table)
        outcome.note("log-tail slope vs sqrt(x)", fit.slope)
        outcome.note("slope 95% CI", (lo, hi))
        outcome.note("slope CI entirely below 0", fit.slope_negative)
        outcome.note("envelope c", fit.envelope_c)
        outcome.note("held-out points within envelope", fit.holdout_ok)
    else:
        outcome.note("fit", "skipped: fewer than two grid points with a positive tail")
    if cfg.debug:
        forest = simulate_bbm(cfg.t, src.fork("newick"), cfg.cap)
        outcome.files["forest.nwk"] = forest.to_newick() + "\n"
    return outcome


HANDLERS: Dict[str, Callable[[RunContext, ExperimentConfig, RandomSource], CommandOutcome]] = {
    "simulate": run_simulate,
    "speed": run_speed,
    "diameter": run_diameter,
    "renewal-n2": run_renewal,
    "random-sum": run_random_sum,
    "hitting": run_hitting,
    "escape": run_escape,
    "stationarity": run_stationarity,
    "recurrence": run_recurrence,
    "couple-monotone": run_couple_monotone,
    "couple-killright": run_couple_killright,
    "bbm-many-to-one": run_many_to_one,
    "bbm-radius": run_radius,
}


# ============== Sweep ==============


def _point_config(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    update: Dict[str, Any] = {"command": cfg.target, axis: []}
    if axis == "mu_grid":
        update["mu"] = float(value)
    elif axis == "n_grid":
        update["n"] = int(value)
    else:
        update["r_grid"] = [float(value)]
    return cfg.model_copy(update=update)


def run_sweep(ctx: RunContext, cfg: ExperimentConfig) -> Tuple[CommandOutcome, List[int]]:
    """One target run per grid point; rows are tagged with the point index and value."""
    axis = cfg.sweep_axis
    grid = getattr(cfg, axis)
    label = SWEEP_FIELDS[axis]
    handler = HANDLERS[cfg.target]
    merged: Dict[str, ResultTable] = {}
    seeds: List[int] = []
    outcome = CommandOutcome(title=f"sweep {cfg.target} over {label}")
    for index, value in enumerate(grid):
        seed = point_seed(cfg.seed, index)
        seeds.append(seed)
        point = handler(ctx, _point_config(cfg, axis, value), RandomSource(seed))
        for table in point.tables:
            tagged = label not in table.columns
            target = merged.setdefault(table.name, ResultTable(f"sweep_{table.name}", ["point", *([label] if tagged else []), *table.columns]))
            for row in table.rows:
                target.append(index, *((value,) if tagged else ()), *row)
        for metric, text in point.summary:
            outcome.summary.append((f"[{label}={value:g}] {metric}", text))
        ctx.provenance.log(ProvenanceEvent(stage="sweep", message=f"point {index} finished", payload={label: value, "seed": seed}))
    outcome.tables = list(merged.values())
    return outcome, seeds


# ============== Output ==============


def render_summary(outcome: CommandOutcome, *, echo: bool) -> str:
    # quiet consoles skip recording, so silence goes through a sink instead
    console = Console(record=True, width=110, file=None if echo else io.StringIO())
    table = Table(title=outcome.title, show_header=True)
    table.add_column("Metric")
    table.add_column("Value", justify="right")
    for metric, value in outcome.summary:
        table.add_row(metric, value)
    console.print(table)
    return console.export_text()


def execute(ctx: RunContext) -> RunArtifacts:
    """Run the configured command and persist CSVs, ``summary.txt`` and ``manifest.json``."""
    cfg = ctx.config
    started = time.perf_counter()
    point_seeds: List[int] = []
    with ctx.provenance.stage("run", f"{cfg.command} run", command=cfg.command) as extra:
        if cfg.command == "sweep":
            outcome, point_seeds = run_sweep(ctx, cfg)
        else:
            outcome = HANDLERS[cfg.command](ctx, cfg, ctx.src)
        extra["tables"] = [table.name for table in outcome.tables]

    outputs: Dict[str, Path] = {}
    with ctx.provenance.stage("write", "writing outputs", output_dir=str(ctx.paths.output_dir)):
        for table in outcome.tables:
            outputs[f"{table.name}.csv"] = table.write_csv(ctx.paths.output_dir / f"{table.name}.csv")
        for name, text in outcome.files.items():
            path = ctx.paths.output_dir / name
            path.write_text(text, encoding="utf-8")
            outputs[name] = path
        ctx.paths.summary.write_text(render_summary(outcome, echo=not ctx.quiet), encoding="utf-8")

        manifest = RunManifest(
            version=get_version(),
            command=cfg.command,
            config=cfg.echo(),
            seeds=SeedDerivation(master_seed=cfg.seed, sweep_rule=SWEEP_RULE if point_seeds else None, point_seeds=point_seeds),
            wall_clock_seconds=time.perf_counter() - started,
            outputs={name: sha256_file(path) for name, path in sorted(outputs.items())},
            critical_speeds=ctx.critical.records(),
        )
        write_manifest(manifest, ctx.paths.manifest)
    LOGGER.info("wrote %d outputs to %s", len(outputs), ctx.paths.output_dir)
    return RunArtifacts(
        output_dir=ctx.paths.output_dir,
        manifest=ctx.paths.manifest,
        summary=ctx.paths.summary,
        provenance=ctx.paths.provenance,
        outputs=outputs,
        outcome=outcome,
    )


__all__ = ["CommandOutcome", "HANDLERS", "RunArtifacts", "execute", "render_summary", "run_sweep"]
