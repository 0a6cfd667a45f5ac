"""``opwlab`` command line.

Exit codes: 0 converged, 2 not converged, 1 error.
"""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from .config import load_config
from .errors import OpwlabError
from .experiment import execute, write_outcome
from .operators import (
    Dense,
    densify,
    hs_norm,
    load_operator,
    save_spreading,
    spreading_to_symbol,
    support_box,
    symbol_sup_norm,
    symbol_to_spreading,
)

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2

SWEEP_PARAMS = ("B", "lambda", "alpha", "delta", "epsilon")
SWEEP_COLUMNS = ("value", "residual", "achieved_error", "energy_ratio", "hs_norm",
                 "symbol_sup", "converged")


def _fail(msg) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_ERROR)


class _Group(click.Group):
    """Usage errors exit with 1 so that 2 stays reserved for non-convergence."""

    def main(self, args=None, prog_name=None, **kwargs):
        kwargs.pop("standalone_mode", None)
        try:
            rv = super().main(args, prog_name, standalone_mode=False, **kwargs)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_ERROR)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_ERROR)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def main():
    """Operator Paley-Wiener experiments: synthesis, theorem pipelines, diagnostics."""


@main.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: output.dir from the config).")
def run(config_path, out_dir):
    """Run the experiment described by CONFIG_PATH."""
    try:
        cfg = load_config(config_path)
        outcome = execute(cfg)
        report = write_outcome(outcome, out_dir or cfg.out_path)
    except (OpwlabError, ValueError, OSError) as exc:
        _fail(exc)
    click.echo(outcome.summary())
    click.echo(f"report: {report}")
    sys.exit(EXIT_OK if outcome.converged else EXIT_NOT_CONVERGED)


def _sweep_config(cfg, param, value):
    if param == "B":
        return cfg.with_values(fixed_B=value, synth_B=value)
    if param == "lambda":
        return cfg.with_values(lambdas=(value,))
    if param == "alpha":
        return cfg.with_values(alpha=value)
    if param == "delta":
        return cfg.with_values(fixed_delta=value)
    return cfg.with_values(epsilon=value, epsilon_rel=None)


def _sweep_point(args):
    cfg, param, value = args
    rec = execute(_sweep_config(cfg, param, value))
    return rec.record, rec.converged


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    return f"{float(v):.17g}"


@main.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--param", type=click.Choice(SWEEP_PARAMS), required=True)
@click.option("--values", "values", required=True, help="Comma-separated values.")
@click.option("--out", "out_file", type=click.Path(dir_okay=False), default=None,
              help="CSV path (default: <output.dir>/sweep_<param>.csv).")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker processes; rows are always written in value order.")
def sweep(config_path, param, values, out_file, jobs):
    """Run the pipeline once per value of PARAM and tabulate the results."""
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        _fail(f"cannot parse --values {values!r}")
    if not vals:
        _fail("--values is empty")
    try:
        cfg = load_config(config_path)
        tasks = [(cfg, param, v) for v in vals]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_sweep_point, tasks))
        else:
            results = [_sweep_point(t) for t in tasks]
    except (OpwlabError, ValueError, OSError) as exc:
        _fail(exc)
    path = Path(out_file) if out_file else cfg.out_path / f"sweep_{param}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(SWEEP_COLUMNS)]
    for v, (rec, ok) in zip(vals, results):
        row = [_cell(v)] + [_cell(rec.get(k)) for k in SWEEP_COLUMNS[1:-1]] + [_cell(bool(ok))]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    n_ok = sum(ok for _, ok in results)
    click.echo(f"sweep {param}: {n_ok}/{len(vals)} converged -> {path}")
    sys.exit(EXIT_OK if n_ok == len(vals) else EXIT_NOT_CONVERGED)


@main.command()
@click.argument("operator_path", type=click.Path(dir_okay=False))
@click.option("--symbol", is_flag=True, help="Write the Kohn-Nirenberg symbol grid.")
@click.option("--spreading", is_flag=True, help="Write the sampled spreading function.")
@click.option("--hs-norm", "want_hs", is_flag=True, help="Print the Hilbert-Schmidt norm.")
@click.option("--check-involution", is_flag=True,
              help="Apply the symplectic transform twice and print the relative error.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory for grid files (default: next to the operator).")
def inspect(operator_path, symbol, spreading, want_hs, check_involution, out_dir):
    """Print norms and support of a saved operator; optionally export its grids."""
    try:
        op = load_operator(operator_path)
        path = Path(operator_path)
        stem = path.name[: -len(path.suffix)] if path.suffix else path.name
        dest = Path(out_dir) if out_dir else path.parent
        click.echo(f"kind: {type(op).__name__}")
        click.echo(f"support_box: {support_box(op).as_dict()}")
        click.echo(f"symbol_sup: {symbol_sup_norm(op):.17g}")
        if want_hs:
            click.echo(f"hs_norm: {hs_norm(op):.17g}")
        if symbol or spreading or check_involution:
            eta = op.eta if isinstance(op, Dense) else densify(op)
        if spreading or symbol:
            dest.mkdir(parents=True, exist_ok=True)
        if spreading:
            f = dest / f"{stem}.spreading.txt"
            save_spreading(f, eta)
            click.echo(f"spreading: {f}")
        if symbol:
            f = dest / f"{stem}.symbol.txt"
            save_spreading(f, spreading_to_symbol(eta))
            click.echo(f"symbol: {f}")
        if check_involution:
            back = symbol_to_spreading(spreading_to_symbol(eta))
            err = np.linalg.norm(back.values - eta.values) / max(np.linalg.norm(eta.values), 1e-300)
            click.echo(f"involution_relative_error: {err:.3e}")
    except (OpwlabError, ValueError, OSError, KeyError) as exc:
        _fail(exc)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
