"""``radhydro`` command-line harness.

Exit codes: 0 pass, 1 scientific target failed, 2 usage or config error,
3 runtime abort.
"""
from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click

from .config import ConfigError, config_hash, load_experiment
from .experiments import (
    ABORT,
    FAIL,
    RECORD_SUFFIX,
    collect_report,
    linear_decay,
    nonlinear_run,
    spectral_sweep,
)
from .fourier import set_fft_workers
from .output import write_csv, write_json, write_svg

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3

log = logging.getLogger("radhydro")


def common_options(func):
    @click.option("--config", "config_path", type=click.Path(dir_okay=False),
                  help="INI file; the section named after the subcommand is used.")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
                  show_default=True, help="Output directory.")
    @click.option("--strict", is_flag=True, help="Escalate warnings to failures.")
    @click.option("--seed", type=int, default=None, help="Random seed (overrides config).")
    @click.option("--threads", type=int, default=None, envvar="RADHYDRO_THREADS",
                  help="FFT worker threads [env: RADHYDRO_THREADS].")
    @click.option("--format", "fmt", type=click.Choice(["csv", "json", "svg"]), default="csv",
                  show_default=True, help="Format of the data file.")
    @functools.wraps(func)
    def wrapper(*args, threads=None, **kwargs):
        if threads is not None:
            if threads < 1:
                raise click.BadParameter("must be >= 1", param_hint="--threads")
            set_fft_workers(threads)
        return func(*args, **kwargs)
    return wrapper


def _load(kind, path, seed):
    if path is not None and not Path(path).is_file():
        click.echo(f"config error: no such file {path}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        return load_experiment(kind, path, seed if kind == "nonlinear-run" else None)
    except ConfigError as exc:
        for e in exc.errors:
            click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)


def _emit(result, out_dir, fmt):
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        stem = out / result.kind
        write_json(stem.with_name(result.kind + RECORD_SUFFIX), result.record(), result.config_hash)
        if fmt == "csv":
            write_csv(stem.with_suffix(".csv"), result.columns, result.rows, result.config_hash)
        elif fmt == "json":
            write_json(stem.with_suffix(".json"),
                       {"columns": result.columns, "rows": result.rows}, result.config_hash)
        else:
            write_svg(stem.with_suffix(".svg"), result.plot, result.kind, result.config_hash,
                      **result.plot_opts)
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _finish(result):
    for note in result.notes:
        click.echo(f"note: {note}", err=True)
    for t in result.targets:
        click.echo(f"{t.status():<13} {t.name} [{t.source}]")
    click.echo(f"verdict: {result.verdict}")
    if result.verdict == ABORT:
        sys.exit(EXIT_ABORT)
    sys.exit(EXIT_FAIL if result.verdict == FAIL else EXIT_PASS)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.version_option(package_name="artifact")
def main(verbose):
    """Spectral, linear-decay and nonlinear experiments for the linearised and
    full radiation hydrodynamics perturbation system."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("spectral-sweep")
@common_options
def spectral_sweep_cmd(config_path, out_dir, strict, seed, fmt):
    """Routh-Hurwitz table over a range of |xi|."""
    exp = _load("spectral-sweep", config_path, seed)
    result = spectral_sweep(exp.payload, exp.hash, seed)
    _emit(result, out_dir, fmt)
    _finish(result)


@main.command("linear-decay")
@common_options
def linear_decay_cmd(config_path, out_dir, strict, seed, fmt):
    """Whole-space linear decay by radial quadrature and exponent fits."""
    exp = _load("linear-decay", config_path, seed)
    result = linear_decay(exp.payload, exp.hash, strict=strict, seed=seed)
    _emit(result, out_dir, fmt)
    _finish(result)


@main.command("nonlinear-run")
@common_options
@click.option("--no-spot-checks", is_flag=True,
              help="Skip the linear-limit and convergence-order checks.")
def nonlinear_run_cmd(config_path, out_dir, strict, seed, fmt, no_spot_checks):
    """Pseudo-spectral run of the full system on a periodic box."""
    exp = _load("nonlinear-run", config_path, seed)
    result = nonlinear_run(exp.payload, exp.hash, spot_checks=not no_spot_checks)
    if strict and result.notes and result.verdict not in (ABORT,):
        result.targets.append(_strict_target(result.notes))
    _emit(result, out_dir, fmt)
    _finish(result)


def _strict_target(notes):
    from .experiments import Target
    return Target("no runtime warnings", "strict-mode", len(notes), "0", False)


@main.command("report")
@click.argument("directory", type=click.Path(file_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Where to write summary.json and summary.txt (default: DIRECTORY).")
def report_cmd(directory, out_dir):
    """Aggregate experiment records found in DIRECTORY."""
    if not Path(directory).is_dir():
        click.echo(f"error: {directory} is not a directory", err=True)
        sys.exit(EXIT_CONFIG)
    rep = collect_report(directory)
    if not rep.entries and not rep.problems:
        click.echo(f"error: no records (*{RECORD_SUFFIX}) in {directory}", err=True)
        sys.exit(EXIT_CONFIG)
    body = rep.to_dict()
    chash = config_hash("report", {"records": [e["config_hash"] for e in rep.entries]})
    out = Path(out_dir or directory)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "summary.json", body, chash)
    (out / "summary.txt").write_text(f"# config_hash: {chash}\n" + rep.text())
    click.echo(rep.text(), nl=False)
    if rep.problems:
        for p in rep.problems:
            click.echo(f"error: {p}", err=True)
        sys.exit(EXIT_CONFIG)
    sys.exit(EXIT_PASS if rep.verdict == "pass" else EXIT_FAIL)


if __name__ == "__main__":
    main()
