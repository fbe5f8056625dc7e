import logging
from pathlib import Path
from typing import List, Optional

import typer

from udsapprox.config import EXPERIMENT_KINDS, apply_overrides, load_batch, parse_config_dict, read_config
from udsapprox.exceptions import ComputationError, ConfigError, UdsApproxError
from udsapprox.runner import ExperimentRunner

app = typer.Typer(
    help="Discrepancy, ubiquity, limsup-measure and dimension experiments on sequences in [0,1]^n.",
    add_completion=False,
    no_args_is_help=True,
)

logger = logging.getLogger(__name__)

EXIT_IO = 4

HELP = {
    "gen": "Generate a sequence prefix and write it in the sequence text format.",
    "disc": "Exact star and extreme discrepancy, with optional diagnostic ratios and oracle check.",
    "dss-check": "Check the discrepancy-satisfying condition along a schedule (or propose one).",
    "ubiquity": "Block coverage fractions over balls and the prior-block excess check.",
    "measure": "Monte Carlo measure of truncated limsup sets over one or more windows.",
    "series": "Partial sums and trend of a divergence criterion.",
    "dimension": "Closed-form weighted dimension, ubiquity weights and the lower/upper exponents.",
    "box-dim": "Box-counting slope of a truncated limsup set.",
}


def _runner(out: Optional[Path], threads: Optional[int], verbose: bool, log_file: Optional[str]) -> ExperimentRunner:
    kwargs = {"verbose": verbose, "log_filename": log_file}
    if threads is not None:
        kwargs["threads"] = threads
    if out is not None:
        kwargs["out_dir"] = str(out)
    return ExperimentRunner(**kwargs)


def _fail(e: Exception) -> None:
    if isinstance(e, UdsApproxError):
        code = e.exit_code
    elif isinstance(e, OSError):
        code = EXIT_IO
    else:
        logger.exception("unexpected failure")
        code = ComputationError.exit_code
    typer.echo(f"error: {type(e).__name__}: {e}", err=True)
    raise typer.Exit(code=code)


def _execute(
    kind: str,
    config: Optional[Path],
    out: Optional[Path],
    threads: Optional[int],
    overrides: Optional[List[str]],
    verbose: bool,
    log_file: Optional[str],
) -> None:
    try:
        data = read_config(config) if config is not None else {"experiment": kind}
        data = apply_overrides(data, overrides or [])
        data.setdefault("experiment", kind)
        if data["experiment"] != kind:
            raise ConfigError([f"config is a {data['experiment']!r} experiment, not {kind!r}"])
        parsed = parse_config_dict(data)
        runner = _runner(out, threads, verbose, log_file)
        manifest = runner.run(parsed, out_dir=str(out) if out is not None else None)
    except Exception as e:
        _fail(e)
    typer.echo(f"{kind}: {manifest.status}; wrote {', '.join(manifest.outputs)}")


def _register(kind: str) -> None:
    def command(
        config: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON experiment config."),
        out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory (env UDSAPPROX_OUT_DIR)."),
        threads: Optional[int] = typer.Option(None, "--threads", "-t", help="Worker threads (env UDSAPPROX_THREADS)."),
        overrides: Optional[List[str]] = typer.Option(
            None, "--set", "-s", help="Override a config entry, e.g. params.N=1024 (value read as JSON)."
        ),
        verbose: bool = typer.Option(False, "--verbose", "-v", help="Write a debug log file."),
        log_file: Optional[str] = typer.Option(None, "--log-file", help="Debug log file name."),
    ) -> None:
        _execute(kind, config, out, threads, overrides, verbose, log_file)

    app.command(kind, help=HELP[kind])(command)


for _kind in EXPERIMENT_KINDS:
    _register(_kind)


@app.command("batch")
def batch(
    path: Path = typer.Argument(..., help="YAML batch file with `globals` and `experiments`."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Root output directory."),
    threads: Optional[int] = typer.Option(None, "--threads", "-t", help="Worker threads."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Write a debug log file."),
    log_file: Optional[str] = typer.Option(None, "--log-file", help="Debug log file name."),
) -> None:
    """Run a series of experiments sequentially, each defined in a YAML batch."""
    try:
        configs = load_batch(path)
        runner = _runner(out, threads, verbose, log_file)
        root = Path(runner.out_dir)
        for i, config in enumerate(configs):
            runner.logger.info(f"Starting experiment {i + 1} / {len(configs)}: {config.experiment}")
            target = config.out_dir or str(root / f"{i:02d}-{config.experiment}")
            manifest = runner.run(config, out_dir=target)
            typer.echo(f"[{i + 1}/{len(configs)}] {config.experiment}: {manifest.status} -> {target}")
    except Exception as e:
        _fail(e)


if __name__ == "__main__":
    app()
