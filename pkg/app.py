"""Command-line entry point: ``python app.py <command>``.

Exit codes: 0 success, 1 verification or solver failure, 2 usage error.
"""
import functools
import math
import os
from pathlib import Path

import click
import numpy as np
from loguru import logger

from components import ground_state
from components.bounds import LEMMA_REGIME, run_sweep
from components.coupling import (
    IDENTITY_FUNCTIONS,
    build,
    expected_coupling_gap,
    sawtooth_expectation,
    zero_bias_identity_check,
)
from components.ground_state import PRECISIONS
from components.stein import GridSpec, SawtoothStein, g_h_quadrature, verify_gh_lemma41, verify_gz_properties
from databases.configuration_cache import ConfigurationCache, read_entry
from databases.report_writer import summary_frame, write_csv, write_json, write_plot_data
from utils.errors import MIWError
from utils.gaussians import mills_inequality_1, mills_inequality_2
from utils.log import configure_logging
from utils.settings import get_settings

GH_TOLERANCE = 1e-9
GH_POINTS = 100


# ------------------ Shared options ------------------ #
def common_options(func):
    @click.option(
        "--log-level",
        default=None,
        type=click.Choice(["TRACE", "DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
        help="Logging level (default from settings).",
    )
    @functools.wraps(func)
    def wrapper(*args, log_level=None, **kwargs):
        configure_logging(log_level or get_settings().log_level)
        try:
            return func(*args, **kwargs)
        except MIWError as exc:
            logger.error("{}", exc)
            click.echo(f"error: {exc}", err=True)
            raise click.exceptions.Exit(1)

    return wrapper


def solver_options(func):
    func = click.option("--tol", type=click.FloatRange(min=0.0, min_open=True), default=None)(func)
    func = click.option("--precision", type=click.Choice(PRECISIONS), default=None)(func)
    func = click.option("--cache-dir", type=click.Path(file_okay=False, path_type=Path), default=None)(func)
    return func


def sweep_options(func):
    func = click.option("--steps", type=click.IntRange(min=1), required=True, help="Geometric grid size.")(func)
    func = click.option("--n-max", type=click.IntRange(min=2), required=True)(func)
    func = click.option("--n-min", type=click.IntRange(min=2), required=True)(func)
    func = click.option("--workers", type=click.IntRange(min=1), default=None)(func)
    return func


def geometric_grid(n_min: int, n_max: int, steps: int) -> list:
    """Distinct integers of a geometric grid from n_min to n_max."""
    if n_min > n_max:
        raise click.UsageError(f"--n-min ({n_min}) must not exceed --n-max ({n_max})")
    return sorted({int(n) for n in np.rint(np.geomspace(n_min, n_max, steps))})


def _cache_for(cache_dir):
    if cache_dir is None and not os.environ.get("MIW_CACHE_DIR"):
        return None
    return ConfigurationCache(cache_dir)


def _configuration(n_worlds, tol, precision, cache_dir):
    cache = _cache_for(cache_dir)
    if cache is not None:
        return cache.get_or_solve(n_worlds, tol=tol, precision=precision)
    return ground_state.solve(n_worlds, tol=tol, precision=precision)


# ------------------ Commands ------------------ #
@click.group()
def cli():
    """MIW ground-state solver and normal-approximation verification toolkit."""


@cli.command()
@click.option("--n", "n_worlds", type=click.IntRange(min=2), required=True, help="Number of worlds N.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@solver_options
@common_options
def solve(n_worlds, out, tol, precision, cache_dir):
    """Solve (or load from cache) and print the residual summary."""
    cache = ConfigurationCache(cache_dir)
    cfg = cache.get_or_solve(n_worlds, tol=tol, precision=precision)
    if out is not None:
        cache.save(cfg, out)

    r = cfg.residuals
    click.echo(f"N = {cfg.n_worlds}")
    click.echo(f"x1 = {cfg.x1:.17g}")
    click.echo(f"precision = {cfg.precision}  tol = {cfg.tol:.3g}")
    click.echo(f"zero_mean_residual = {r.zero_mean_residual:.3e}")
    click.echo(f"variance_residual = {r.variance_residual:.3e}")
    click.echo(f"recursion_residual = {r.recursion_residual:.3e}")
    click.echo(f"median_residual = {r.median_residual:.3e}")


@cli.command()
@sweep_options
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@solver_options
@common_options
def verify(n_min, n_max, steps, workers, fmt, out, tol, precision, cache_dir):
    """Run the full check battery over a geometric grid of N."""
    n_values = geometric_grid(n_min, n_max, steps)
    sweep = run_sweep(n_values, tol=tol, precision=precision, workers=workers, cache=_cache_for(cache_dir))

    if out is not None:
        (write_json if fmt == "json" else write_csv)(sweep, out)
        logger.info("report written to {}", out)
    else:
        click.echo(summary_frame(sweep).to_csv(index=False, float_format="%.6g", lineterminator="\n"), nl=False)

    click.echo("worst margin per family:")
    for family, margin in sorted(sweep.worst_margins.items()):
        click.echo(f"  {family:<18} {margin: .3e}")
    skipped = sweep.checks[sweep.checks["status"] == "skipped"]
    if not skipped.empty:
        click.echo(f"skipped: {skipped['family'].nunique()} families ({skipped['reason'].iloc[0]})")
    click.echo(f"wasserstein constant C = {sweep.wasserstein_constant:.6g}")

    for n, message in sorted(sweep.failures.items()):
        click.echo(f"N={n} failed: {message}", err=True)
    failed = sweep.failed_checks
    for row in failed.itertuples(index=False):
        click.echo(f"FAILED N={row.N} {row.name} lhs={row.lhs:.17g} rhs={row.rhs:.17g}", err=True)
    if not sweep.passed:
        raise click.exceptions.Exit(1)


@cli.command()
@click.option("--n", "n_worlds", type=click.IntRange(min=2), default=None)
@click.option(
    "--config-file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Configuration saved by `solve --out`, used instead of solving for --n.",
)
@click.option(
    "--identity-functions",
    "names",
    multiple=True,
    type=click.Choice(sorted(IDENTITY_FUNCTIONS)),
    help="Test functions for the zero-bias identity (repeatable; default all).",
)
@solver_options
@common_options
def coupling(n_worlds, config_file, names, tol, precision, cache_dir):
    """Zero-bias identity residuals, sawtooth expectations and E|W - W*|."""
    if (n_worlds is None) == (config_file is None):
        raise click.UsageError("give exactly one of --n and --config-file")
    if config_file is not None:
        cfg = read_entry(config_file)
        logger.info("loaded N={} from {}", cfg.n_worlds, config_file)
    else:
        cfg = _configuration(n_worlds, tol, precision, cache_dir)
    c = build(cfg)
    limit = get_settings().identity_tolerance

    breached = []
    click.echo(f"{'f':<6} {'|E W f(W) - s2 E f(W*)|':>26}")
    for name in names or sorted(IDENTITY_FUNCTIONS):
        f, f_prime = IDENTITY_FUNCTIONS[name]
        residual = zero_bias_identity_check(c, f_prime, f)
        click.echo(f"{name:<6} {residual:>26.3e}")
        if residual > limit:
            breached.append(name)

    eh_w, eh_wstar = sawtooth_expectation(c)
    click.echo(f"E h(W) = {eh_w:.17g}")
    click.echo(f"E h(W*) = {eh_wstar:.17g}")
    click.echo(f"E|W-W*| = {expected_coupling_gap(c):.17g}")
    if breached:
        click.echo(f"identity tolerance {limit:g} exceeded for: {', '.join(breached)}", err=True)
        raise click.exceptions.Exit(1)


@cli.command()
@sweep_options
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@solver_options
@common_options
def plotdata(n_min, n_max, steps, workers, out, tol, precision, cache_dir):
    """Write the convergence series as a whitespace table."""
    n_values = geometric_grid(n_min, n_max, steps)
    sweep = run_sweep(n_values, tol=tol, precision=precision, workers=workers, cache=_cache_for(cache_dir))
    write_plot_data(sweep, out)
    click.echo(f"{len(sweep.reports)} rows written to {out}")
    if sweep.failures:
        raise click.exceptions.Exit(1)


@cli.command("stein-check")
@click.option("--z-count", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--z-min", type=click.FloatRange(min=0.0, min_open=True), default=1e-3, show_default=True)
@click.option("--z-max", type=click.FloatRange(min=0.0, min_open=True), default=10.0, show_default=True)
@click.option("--points", type=click.IntRange(min=2), default=10_000, show_default=True)
@click.option("--gh-n", "gh_values", type=click.IntRange(min=2), multiple=True, default=(3, 10, 101), show_default=True)
@click.option("--gh-points", type=click.IntRange(min=1), default=GH_POINTS, show_default=True)
@solver_options
@common_options
def stein_check(z_count, z_min, z_max, points, gh_values, gh_points, tol, precision, cache_dir):
    """Stein envelopes for g_z, the Mills inequalities, and g_h against quadrature."""
    if z_min > z_max:
        raise click.UsageError("--z-min must not exceed --z-max")
    settings = get_settings()
    grid = GridSpec(lo=-settings.grid_limit, hi=settings.grid_limit, points=points)
    failed = False

    envelope_failures = 0
    for z in np.geomspace(z_min, z_max, z_count):
        result = verify_gz_properties(float(z), grid)
        if not result.passed:
            envelope_failures += 1
            first = result.violations[0]
            click.echo(
                f"g_z z={z:.6g}: {len(result.violations)} violations, first {first.name} at w={first.w:.6g}",
                err=True,
            )
    click.echo(f"g_z envelopes: {z_count - envelope_failures}/{z_count} values of z clean")
    failed |= envelope_failures > 0

    w = np.linspace(settings.grid_limit / points, settings.grid_limit, points)
    for check in (mills_inequality_1, mills_inequality_2):
        results = [check(float(v)) for v in w]
        bad = [r for r in results if not r.passed]
        worst = min(r.margin for r in results)
        click.echo(f"{results[0].name}: {len(results) - len(bad)}/{len(results)} passed, worst margin {worst:.3e}")
        failed |= bool(bad)

    for n_worlds in gh_values:
        cfg = _configuration(n_worlds, tol, precision, cache_dir)
        closed = SawtoothStein(cfg)
        span = cfg.x1 + 1.0
        sample = np.linspace(-span, span, gh_points)
        gaps = []
        for v in sample:
            oracle = g_h_quadrature(cfg, float(v))
            gaps.append(abs(closed(float(v)) - oracle) / max(1.0, abs(oracle)))
        worst = max(gaps)
        click.echo(f"g_h N={n_worlds}: max gap to quadrature {worst:.3e}")
        failed |= worst > GH_TOLERANCE
        if n_worlds > LEMMA_REGIME:
            constant = verify_gh_lemma41(cfg).best_constant
            click.echo(f"g_h N={n_worlds}: empirical envelope constant {constant:.6g}")
            failed |= not math.isfinite(constant)

    if failed:
        raise click.exceptions.Exit(1)


if __name__ == "__main__":
    cli()
