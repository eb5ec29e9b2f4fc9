"""CLI entry point using Typer."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Annotated

import typer

from emslab.models.enums import VerifySuite

app = typer.Typer(
    name="emslab",
    help="Feedback-limited retransmission protocols over block-fading channels.",
    no_args_is_help=False,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _configure_logging(verbosity: int) -> None:
    from rich.console import Console  # noqa: PLC0415
    from rich.logging import RichHandler  # noqa: PLC0415

    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    logging.basicConfig(level=level, format="%(message)s", handlers=[handler], force=True)


@app.command()
def sweep(
    config: Annotated[
        Path, typer.Option("--config", "-c", help="Sweep configuration JSON")
    ],
    out: Annotated[
        Path | None,
        typer.Option("--out", "-o", help="Output directory (default: the config's output)"),
    ] = None,
    dump_traces: Annotated[
        bool, typer.Option("--dump-traces", help="Write episode traces per row")
    ] = False,
    dump_kernels: Annotated[
        bool, typer.Option("--dump-kernels", help="Write EMS renewal functions per row")
    ] = False,
    dump_policy: Annotated[
        bool, typer.Option("--dump-policy", help="Write power policies per row")
    ] = False,
    workers: Annotated[
        int, typer.Option("--workers", "-w", min=1, help="Worker processes for grid points")
    ] = 1,
    seed: Annotated[
        int | None,
        typer.Option("--seed", min=0, max=2**64 - 1, help="Monte Carlo master seed"),
    ] = None,
) -> None:
    """Reproduce a figure family as CSV, with optional Monte Carlo verdicts."""
    from emslab.config import load_config  # noqa: PLC0415
    from emslab.errors import EmslabError, SweepConfigError  # noqa: PLC0415
    from emslab.models.sweep import load_sweep_config  # noqa: PLC0415
    from emslab.pipeline.sweep import SweepDumps, run_sweep  # noqa: PLC0415

    try:
        sweep_config = load_sweep_config(config)
    except SweepConfigError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_CONFIG) from None

    dumps = SweepDumps(traces=dump_traces, kernels=dump_kernels, policy=dump_policy)
    try:
        result = run_sweep(
            sweep_config,
            out_dir=out,
            workers=workers,
            seed=seed,
            dumps=dumps,
            app_config=load_config(),
        )
    except EmslabError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_NUMERIC) from None

    typer.echo(f"Wrote {result.csv_path} ({len(result.rows)} rows)")
    typer.echo(f"Summary: {result.summary_path}")
    if result.verdicts_path is not None:
        typer.echo(f"Verdicts: {result.verdicts_path}")
    for row in result.failures:
        typer.echo(f"  ✗ {row.protocol} at T={row.target_t:g}", err=True)
    for row in result.errors:
        typer.echo(f"  ! {row.protocol} at T={row.target_t:g}: {row.error}", err=True)
    if result.failures:
        raise typer.Exit(EXIT_VERIFY_FAILED)
    if result.errors:
        raise typer.Exit(EXIT_NUMERIC)


@app.command()
def verify(
    suite: Annotated[
        VerifySuite, typer.Option("--suite", "-s", help="fast or full")
    ] = VerifySuite.FAST,
    workers: Annotated[
        int, typer.Option("--workers", "-w", min=1, help="Worker processes for simulation")
    ] = 1,
    out: Annotated[
        Path | None, typer.Option("--out", "-o", help="Directory for verify.jsonl")
    ] = None,
    check: Annotated[
        list[str] | None, typer.Option("--check", help="Run only the named check(s)")
    ] = None,
) -> None:
    """Run the acceptance suite and report each check."""
    from rich.console import Console  # noqa: PLC0415
    from rich.table import Table  # noqa: PLC0415

    from emslab.pipeline.verify import CHECKS  # noqa: PLC0415
    from emslab.pipeline.verify import verify as run_verify  # noqa: PLC0415

    if check:
        unknown = sorted(set(check) - set(CHECKS))
        if unknown:
            typer.echo(f"Error: unknown check(s): {', '.join(unknown)}", err=True)
            raise typer.Exit(EXIT_CONFIG)

    report = run_verify(suite, workers=workers, checks=check or None)

    table = Table(title=f"emslab verify ({suite.value})")
    table.add_column("check")
    table.add_column("result")
    table.add_column("time", justify="right")
    table.add_column("detail")
    for result in report.checks:
        status = "[green]pass[/green]" if result.passed else "[red]FAIL[/red]"
        table.add_row(result.name, status, f"{result.elapsed:.1f}s", result.detail)
    Console().print(table)

    if out is not None:
        path = report.write_jsonl(out / "verify.jsonl")
        typer.echo(f"Wrote {path}")
    typer.echo(f"{len(report.checks) - len(report.failures)}/{len(report.checks)} checks passed")
    if not report.passed:
        raise typer.Exit(EXIT_VERIFY_FAILED)


@app.command("init-config")
def init_config(
    force: Annotated[
        bool, typer.Option("--force", "-f", help="Overwrite an existing config file")
    ] = False,
) -> None:
    """Write the default settings to the user config file."""
    import tomli_w  # noqa: PLC0415

    from emslab.config import load_config  # noqa: PLC0415

    config = load_config()
    path = config.config_file
    if path.exists() and not force:
        typer.echo(f"Config already exists at {path} (use --force to overwrite)", err=True)
        raise typer.Exit(EXIT_CONFIG)
    path.write_text(tomli_w.dumps(config.to_toml_dict()), encoding="utf-8")
    typer.echo(f"Wrote {path}")


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    version: Annotated[bool, typer.Option("--version", help="Show version")] = False,
    verbose: Annotated[
        int, typer.Option("--verbose", "-v", count=True, help="More log output (-vv: debug)")
    ] = 0,
) -> None:
    """emslab - throughput versus decoding time of retransmission protocols."""
    if version:
        from emslab import __version__  # noqa: PLC0415

        typer.echo(f"emslab {__version__}")
        raise typer.Exit()
    _configure_logging(verbose)
    if ctx.invoked_subcommand is None:
        typer.echo(ctx.get_help())
