"""``svi-guard`` command line.

Exit codes: 0 clean, 2 arbitrage detected (the report is still written),
1 usage or input error.
"""

from __future__ import annotations

import functools
import os
import sys

import click

from svi_guard._version import __version__
from svi_guard.bounds import SlopeBoundConfig, practical_slope_exact, practical_slope_quadratic
from svi_guard.calibration import CalibrationConfig, calibrate
from svi_guard.errors import NoSolutionError, SviGuardError
from svi_guard.pricing import ForwardContext
from svi_guard.scan import ScanGrid, full_report, grid_profile
from svi_guard.smile_io import (
    build_document,
    context_to_dict,
    dumps_document,
    params_to_dict,
    read_smile_csv,
    smile_digest,
    sample_smile_path,
    write_atomic,
)
from svi_guard.svi import SviParams, TotalVarianceCurve

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_ARBITRAGE = 2
THREADS_ENV = "SVI_GUARD_THREADS"


class _ExitCodeGroup(click.Group):
    """Routes click usage errors to exit code 1; code 2 is reserved for detected arbitrage."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_INPUT_ERROR)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_INPUT_ERROR)
        sys.exit(rv or EXIT_OK)


def _threads() -> int | None:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise click.BadParameter(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return None if n <= 0 else n


def _context(forward: float, discount: float, maturity: float) -> ForwardContext:
    return ForwardContext(forward=forward, maturity=maturity, discount_factor=discount)


def _bound_config(ctx: ForwardContext, k_max: float | None, c_max: float | None) -> SlopeBoundConfig:
    return SlopeBoundConfig(
        k_max=1e6 * ctx.forward if k_max is None else k_max,
        c_max=1e-4 * ctx.forward if c_max is None else c_max,
        ctx=ctx,
    )


def _emit(doc: dict, out: str | None) -> None:
    text = dumps_document(doc)
    if out:
        write_atomic(out, text)
    else:
        click.echo(text, nl=False)


def _write_plot_data(path: str, curve: TotalVarianceCurve, ctx: ForwardContext, grid: ScanGrid) -> None:
    cols = grid_profile(curve, ctx, grid)
    names = ("moneyness", "implied_vol", "call_price", "g")
    lines = [",".join(names)]
    for row in zip(*(cols[n] for n in names)):
        lines.append(",".join(format(float(v), ".17g") for v in row))
    write_atomic(path, "\n".join(lines) + "\n")


def _grid_options(f):
    f = click.option("--points-per-decade", type=int, default=64, show_default=True)(f)
    f = click.option("--max-moneyness", type=float, default=1e7, show_default=True, help="Largest K/F scanned.")(f)
    f = click.option("--min-moneyness", type=float, default=1e-2, show_default=True, help="Smallest K/F scanned.")(f)
    return f


def _market_options(f):
    f = click.option("--k-max", type=float, default=None, help="Extreme strike for the practical bound [1e6*F].")(f)
    f = click.option("--c-max", type=float, default=None, help="Price tolerance at --k-max [1e-4*F].")(f)
    f = click.option("--T", "--maturity", "maturity", type=float, default=1.0, show_default=True)(f)
    f = click.option("--discount", type=float, default=1.0, show_default=True)(f)
    f = click.option("--forward", type=float, default=1.0, show_default=True)(f)
    return f


def _guard(fn):
    """Turn library errors into click errors (exit code 1)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SviGuardError, ValueError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@click.group(cls=_ExitCodeGroup)
@click.version_option(__version__, prog_name="svi-guard")
def cli() -> None:
    """Arbitrage diagnostics for SVI volatility smiles."""


@cli.command("calibrate")
@click.argument("smile_file", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--slope-cap", type=float, default=None, help="Cap on b(1+|rho|) [4/T]. Accepts 'inf'.")
@click.option("--restarts", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--weights", type=click.Choice(["uniform", "vega"]), default="uniform", show_default=True)
@click.option("--objective", type=click.Choice(["variance", "vol"]), default="variance", show_default=True)
@_market_options
@_grid_options
@click.option("--plot-data", type=click.Path(dir_okay=False), default=None, help="Write per-grid-point CSV here.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="JSON report path [stdout].")
@click.version_option(__version__, prog_name="svi-guard calibrate")
@_guard
def cmd_calibrate(
    smile_file, slope_cap, restarts, seed, weights, objective, forward, discount, maturity, c_max, k_max,
    min_moneyness, max_moneyness, points_per_decade, plot_data, out,
):
    """Calibrate SVI to SMILE_FILE (default: the bundled one-year example) and scan it."""
    ctx = _context(forward, discount, maturity)
    path = smile_file or str(sample_smile_path())
    smile = read_smile_csv(path, ctx)
    cap = 4.0 / maturity if slope_cap is None else slope_cap
    cfg = CalibrationConfig(
        slope_cap=cap, restarts=restarts, weights=weights, seed=seed, objective=objective, workers=_threads()
    )
    grid = ScanGrid(min_moneyness, max_moneyness, points_per_decade)
    bound_cfg = _bound_config(ctx, k_max, c_max)

    result = calibrate(smile, cfg)
    report = full_report(result.params, ctx, grid, bound_cfg)
    inputs = {
        "smile_sha256": smile_digest(smile),
        "quote_count": len(smile.quotes),
        "context": context_to_dict(ctx),
        "calibration_config": {
            "slope_cap": cfg.slope_cap,
            "restarts": cfg.restarts,
            "weights": cfg.weights,
            "seed": cfg.seed,
            "objective": cfg.objective,
            "max_iterations": cfg.max_iterations,
            "tolerance": cfg.tolerance,
        },
        "slope_bound": {"k_max": bound_cfg.k_max, "c_max": bound_cfg.c_max},
    }
    _emit(build_document("calibrate", inputs, report=report, calibration=result), out)
    if plot_data:
        _write_plot_data(plot_data, TotalVarianceCurve(result.params, maturity), ctx, grid)
    click.echo(
        f"slope {result.params.max_wing_slope:.6g} (cap {cap:.6g}), rmse {result.rmse:.6g}, "
        f"arbitrage {'detected' if report.arbitrage_detected else 'not detected'}",
        err=True,
    )
    return EXIT_ARBITRAGE if report.arbitrage_detected else EXIT_OK


@cli.command("scan")
@click.option("--a", "a", type=float, required=True)
@click.option("--b", "b", type=float, required=True)
@click.option("--s", "s", type=float, required=True)
@click.option("--rho", type=float, required=True)
@click.option("--m", "m", type=float, required=True)
@_market_options
@_grid_options
@click.option("--plot-data", type=click.Path(dir_okay=False), default=None, help="Write per-grid-point CSV here.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="JSON report path [stdout].")
@click.version_option(__version__, prog_name="svi-guard scan")
@_guard
def cmd_scan(
    a, b, s, rho, m, forward, discount, maturity, c_max, k_max, min_moneyness, max_moneyness, points_per_decade,
    plot_data, out,
):
    """Scan explicit SVI parameters for wing and butterfly arbitrage."""
    params = SviParams(a=a, b=b, s=s, rho=rho, m=m)
    ctx = _context(forward, discount, maturity)
    grid = ScanGrid(min_moneyness, max_moneyness, points_per_decade)
    bound_cfg = _bound_config(ctx, k_max, c_max)
    report = full_report(params, ctx, grid, bound_cfg)
    inputs = {
        "params": params_to_dict(params),
        "context": context_to_dict(ctx),
        "slope_bound": {"k_max": bound_cfg.k_max, "c_max": bound_cfg.c_max},
    }
    _emit(build_document("scan", inputs, report=report), out)
    if plot_data:
        _write_plot_data(plot_data, TotalVarianceCurve(params, maturity), ctx, grid)
    return EXIT_ARBITRAGE if report.arbitrage_detected else EXIT_OK


@cli.command("bound")
@click.option("--k-max", type=float, required=True, help="Extreme strike K_max.")
@click.option("--c-max", type=float, required=True, help="Largest acceptable call price at K_max.")
@click.option("--forward", type=float, default=1.0, show_default=True)
@click.option("--discount", type=float, default=1.0, show_default=True)
@click.option("--T", "--maturity", "maturity", type=float, default=1.0, show_default=True)
@click.option("--exact", is_flag=True, help="Also solve with the full Black price.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Also write a JSON document here.")
@click.version_option(__version__, prog_name="svi-guard bound")
@_guard
def cmd_bound(k_max, c_max, forward, discount, maturity, exact, out):
    """Practical upper limit on the asymptotic implied-variance slope."""
    ctx = _context(forward, discount, maturity)
    cfg = SlopeBoundConfig(k_max=k_max, c_max=c_max, ctx=ctx)
    quadratic = practical_slope_quadratic(cfg)
    result = {
        "practical_slope_quadratic": quadratic,
        "practical_slope_exact": None,
        "lee_limit": 2.0 / maturity,
        "gatheral_limit": 4.0 / maturity,
    }
    click.echo(f"practical_slope_quadratic {quadratic!r}")
    if exact:
        try:
            result["practical_slope_exact"] = practical_slope_exact(cfg)
        except NoSolutionError as exc:
            raise click.ClickException(str(exc)) from exc
        click.echo(f"practical_slope_exact {result['practical_slope_exact']!r}")
        if result["practical_slope_exact"] >= 2.0 / maturity:
            click.echo("warning: exact slope is not below the Lee limit 2/T", err=True)
    if out:
        inputs = {"k_max": k_max, "c_max": c_max, "context": context_to_dict(ctx), "exact": exact}
        write_atomic(out, dumps_document(build_document("bound", inputs, extra={"bound": result})))
    return EXIT_OK


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
