"""Re-run an experiment from its manifest and compare output checksums."""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Tuple

import typer
from rich.console import Console
from rich.table import Table

REPO_ROOT = Path(__file__).resolve().parents[1]
if str(REPO_ROOT) not in sys.path:
    sys.path.append(str(REPO_ROOT))

from bdsim.cli.run import report_error
from bdsim.core.config import validate_experiment_config
from bdsim.core.errors import BdsimError
from bdsim.core.manifest import load_manifest
from bdsim.pipeline import bootstrap_run, execute

app = typer.Typer(help="Replay a bdsim run from manifest.json and check that every output is byte-identical.")
console = Console()


def replay(manifest_path: Path, scratch: Path, *, threads: int | None = None) -> List[Tuple[str, str, str | None]]:
    """Return ``(file, recorded_sha, replayed_sha)`` for every output the manifest lists."""
    manifest = load_manifest(manifest_path)
    data = dict(manifest.config)
    if threads is not None:
        data["threads"] = threads
    cfg = validate_experiment_config(data)
    ctx = bootstrap_run(cfg, repo_root=REPO_ROOT, output_dir=scratch, quiet=True)
    execute(ctx)
    replayed = load_manifest(ctx.paths.manifest).outputs
    return [(name, digest, replayed.get(name)) for name, digest in sorted(manifest.outputs.items())]


def _mismatches(rows: List[Tuple[str, str, str | None]]) -> Dict[str, str]:
    return {name: "missing" if new is None else "changed" for name, old, new in rows if old != new}


@app.command()
def verify(
    manifest_path: Path = typer.Argument(..., exists=True, dir_okay=False, help="manifest.json of the run to replay."),
    threads: int | None = typer.Option(None, "--threads", min=1, help="Replay with a different worker count."),
    scratch_dir: Path | None = typer.Option(None, "--scratch-dir", help="Keep replay outputs here instead of a temp dir."),
) -> None:
    try:
        if scratch_dir is not None:
            rows = replay(manifest_path, scratch_dir, threads=threads)
        else:
            with tempfile.TemporaryDirectory(prefix="bdsim-replay-") as tmp:
                rows = replay(manifest_path, Path(tmp), threads=threads)
    except BdsimError as exc:
        report_error(exc)
        raise typer.Exit(code=exc.exit_code) from exc

    problems = _mismatches(rows)
    table = Table(title=f"Replay of {manifest_path}", show_header=True)
    table.add_column("File")
    table.add_column("Recorded sha256")
    table.add_column("Status", justify="center")
    for name, digest, _ in rows:
        status = problems.get(name, "ok")
        table.add_row(name, digest[:16], status, style="bold red" if name in problems else None)
    console.print(table)

    if problems:
        raise typer.Exit(code=1)
    console.print("[green]All outputs reproduced byte-for-byte.[/green]")


if __name__ == "__main__":
    app()
