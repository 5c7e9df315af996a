"""Command-line interface: ``eqpower {mse,optimize,sweep,lemmas}``.

Exit codes: 0 success, 1 usage/config/I-O error, 2 numerical failure
(including infeasible allocations), 3 lemma probe failure.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import sys

import click
import numpy as np

from .errors import ConstraintViolationError, NumericalError
from .estimation import FORMS, check_allocation, equal_allocation, mse
from .experiments import (
    ACF_KINDS,
    ConfigError,
    SweepConfig,
    build_problem,
    config_metadata,
    converged_at,
    geometric_schedule,
    load_config,
    open_output,
    parse_schedule,
    run_sweep,
    write_csv,
    write_json,
)
from .lab import run_lemma_suite
from .optimizer import mse_gradient, optimize

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_PROBE = 0, 1, 2, 3

log = logging.getLogger("eqpower")


def shared_options(f):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="YAML file of settings; flags override it."),
        click.option("--acf", type=click.Choice(ACF_KINDS)),
        click.option("--decay", type=float, help="Exponential decay a (1/s)."),
        click.option("--doppler", type=float, help="Jakes maximum Doppler f_D (Hz)."),
        click.option("--bandwidth", type=float, help="Sinc bandwidth W (Hz)."),
        click.option("--table", "table_path", type=click.Path(exists=True, dir_okay=False),
                     help="File of tabulated ACF values R(k * period)."),
        click.option("--table-period", type=float),
        click.option("--coverage", type=float, help="Spectrum fraction for non-band-limited ACFs."),
        click.option("--sigma2", type=float, help="Noise variance."),
        click.option("--rho", type=float, help="Power per sample; P_T(n) = rho * n."),
        click.option("--pmax", type=float, help="Absolute peak power."),
        click.option("--pmax-mult", type=float, help="Peak power as a multiple of rho."),
        click.option("--n", "n_spec", help="Sample counts, e.g. 84 or 1..128 or 84,96,128."),
        click.option("--n-range", help="Geometric schedule lo:hi:factor."),
        click.option("--tol", type=float, help="rel_gap threshold for the converged-at summary."),
        click.option("--gtol", type=float, help="Optimizer projected-gradient tolerance."),
        click.option("--ftol", type=float, help="Optimizer objective-stall tolerance."),
        click.option("--max-iters", type=int),
        click.option("--seed", type=int),
        click.option("--out", type=click.Path(dir_okay=False)),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"])),
        click.option("--workers", type=int),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


def _read_vector(path):
    with open(path) as fh:
        text = fh.read().strip()
    try:
        if text.startswith("["):
            return np.asarray(json.loads(text), dtype=float)
        return np.asarray([float(t) for t in text.replace(",", " ").split()], dtype=float)
    except ValueError:
        raise ConfigError(f"{path}: expected a list of numbers") from None


def resolve_config(config_path=None, table_path=None, n_spec=None, n_range=None, fmt=None, **flags):
    config = load_config(config_path) if config_path else SweepConfig()
    if table_path:
        flags["table"] = _read_vector(table_path).tolist()
    if n_spec is not None:
        flags["n"] = parse_schedule(n_spec)
    if n_range is not None:
        flags["n"] = geometric_schedule(n_range)
    flags["format"] = fmt
    return config.updated(**flags).validate()


def _emit(config, write):
    fh = open_output(config.out)
    if fh is None:
        write(sys.stdout)
        return
    with fh:
        write(fh)


def _single_n(config):
    if len(config.n) != 1:
        raise click.UsageError("this command needs a single --n")
    return config.n[0]


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Wiener-filter MSE and power allocation for sampled WSS processes."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command("mse")
@shared_options
@click.option("--alloc", type=click.Path(exists=True, dir_okay=False),
              help="Power allocation file (numbers or a JSON list); default equal power.")
@click.option("--form", type=click.Choice(FORMS), default="direct", show_default=True)
def mse_cmd(alloc, form, **kw):
    """Windowed MSE of one allocation."""
    config = resolve_config(**kw)
    problem = build_problem(config, _single_n(config))
    p = equal_allocation(problem) if alloc is None else check_allocation(problem, _read_vector(alloc))
    report = mse(problem, p, form)
    row = {"n": problem.n, "mse": report.mse, "normalized_mse": report.normalized_mse,
           "which_form": report.which_form}

    def write(fh):
        if config.format == "json":
            json.dump({**row, "per_sample_mse": report.per_sample_mse.tolist()}, fh, indent=2)
            fh.write("\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(row)
            w.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])

    _emit(config, write)
    return EXIT_OK


@cli.command("optimize")
@shared_options
def optimize_cmd(**kw):
    """Optimal allocation for one n, compared with equal power."""
    config = resolve_config(**kw)
    problem = build_problem(config, _single_n(config))
    e_eq = mse(problem, equal_allocation(problem)).mse
    res = optimize(problem, config.optimizer_config())
    summary = {"n": problem.n, "mse_eq": e_eq, "mse_opt": res.mse_opt, "gap": e_eq - res.mse_opt,
               "rel_gap": (e_eq - res.mse_opt) / e_eq, "iters": res.iterations,
               "converged": res.converged, "pg_norm": res.pg_norm, "peak_power": problem.peak_power}

    def write(fh):
        if config.format == "json":
            json.dump({**summary, "p_opt": res.p_opt.tolist()}, fh, indent=2)
            fh.write("\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "p_opt"])
            for i, v in enumerate(res.p_opt):
                w.writerow([i, repr(float(v))])

    _emit(config, write)
    click.echo(
        f"n={problem.n} mse_eq={e_eq:.12g} mse_opt={res.mse_opt:.12g} "
        f"rel_gap={summary['rel_gap']:.3g} converged={res.converged}", err=True)
    return EXIT_OK if res.converged else EXIT_NUMERICAL


@cli.command("sweep")
@shared_options
@click.option("--timing/--no-timing", default=None,
              help="Fill the ms column (makes output run-dependent).")
def sweep_cmd(timing, **kw):
    """Equal vs optimal MSE over a schedule of n."""
    config = resolve_config(timing=timing, **kw)
    records = run_sweep(config)

    def write(fh):
        if config.format == "json":
            meta = config_metadata(config)
            meta["converged_at"] = converged_at(records, config.tol)
            write_json(records, fh, meta)
        else:
            write_csv(records, fh)

    _emit(config, write)
    at = converged_at(records, config.tol)
    click.echo(f"rel_gap <= {config.tol:g} from n = {at}" if at is not None
               else f"rel_gap <= {config.tol:g} not reached at the last n", err=True)
    return EXIT_OK


def _scaled_gradient(scale):
    @functools.wraps(mse_gradient)
    def gradient(problem, p, form="direct"):
        return scale * mse_gradient(problem, p, form)
    return gradient


@cli.command("lemmas")
@shared_options
@click.option("--trials", type=int, help="Random instances per probe (default 100).")
@click.option("--fault-gradient-scale", type=float, default=None, hidden=True)
def lemmas_cmd(trials, fault_gradient_scale, **kw):
    """Run the randomized probe suite; exit 3 if any probe fails."""
    if trials is not None and trials < 1:
        raise click.UsageError("--trials must be >= 1")
    config = resolve_config(trials=trials, **kw)
    gradient = None if fault_gradient_scale is None else _scaled_gradient(fault_gradient_scale)
    results = run_lemma_suite(config.trials, config.seed, gradient=gradient)
    rows = [{"probe": r.name, "trials": r.trials, "failures": r.failures,
             "max_deviation": r.max_deviation, "passed": r.passed} for r in results]

    def write(fh):
        if config.format == "json":
            json.dump({"seed": config.seed, "probes": rows}, fh, indent=2)
            fh.write("\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(rows[0])
            for row in rows:
                w.writerow([("true" if v else "false") if isinstance(v, bool) else
                            repr(v) if isinstance(v, float) else v for v in row.values()])

    _emit(config, write)
    for r in results:
        if not r.passed:
            click.echo(f"FAIL {r.name}: {r.failures}/{r.trials} {r.notes}", err=True)
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROBE


def main(argv=None):
    try:
        code = cli.main(args=argv, prog_name="eqpower", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        code = EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        code = EXIT_USAGE
    except (ConfigError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        code = EXIT_USAGE
    except (ConstraintViolationError, NumericalError) as exc:
        click.echo(f"numerical error: {exc}", err=True)
        code = EXIT_NUMERICAL
    sys.exit(code or 0)
