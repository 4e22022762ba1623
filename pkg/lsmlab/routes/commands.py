from pathlib import Path

import click
from flask import Blueprint, current_app

from lsmlab.decorators import exit_codes
from lsmlab.harness import (check_oracle, emit_csv, emit_metadata, oracle_summary, price_once,
                            run_experiment1, run_experiment2)
from lsmlab.settings import ExperimentConfig
from lsmlab.utils import format_key

commands = Blueprint('commands', __name__)

CASES = click.Choice(['put', 'bestof', 'basket'])
SCALES = click.Choice(['desk', 'full', 'paper'])


def app_defaults():
    """Experiment keys taken from the application settings; files and flags override them."""
    cfg = current_app.config
    return {
        'BASE_SEED': cfg['LSM_BASE_SEED'],
        'THREADS': cfg['LSM_THREADS'],
        'SCALE': cfg['LSM_SCALE'],
        'REFERENCE_TABLE': cfg['LSM_REFERENCE_TABLE'],
    }


def load_experiment(config_file, case, scale, **overrides):
    if config_file:
        base = {**app_defaults(), **({'CASE': case} if case else {})}
        return ExperimentConfig.from_file(config_file, scale=scale, base=base, **overrides)
    if not case:
        raise click.UsageError('pass --config FILE or --case')
    return ExperimentConfig.from_mapping({'CASE': case}, scale=scale, base=app_defaults(), **overrides)


def _output_path(config, out, name):
    if out:
        return Path(out)
    if config.out:
        return Path(config.out)
    return Path(current_app.config['LSM_OUTPUT_DIR']) / f'{name}_{config.case}.csv'


def _write_report(report, path):
    emit_csv(report, path)
    emit_metadata(report, path.with_suffix('.json'))
    click.echo(f'Wrote {len(report.records)} records to {path}')


@commands.cli.command('price')
@click.option('--case', required=True, type=CASES)
@click.option('--mode', default='LOOLSM', show_default=True, help='LSM, LOOLSM, LSM2 or EUROPEAN')
@click.option('--strike', type=float, help='Strike (put, basket); defaults to the case strike')
@click.option('--spot', type=float, help='Common initial spot (bestof)')
@click.option('--paths', 'n_paths', type=int, default=40_000, show_default=True)
@click.option('--basis-m', type=int, help='Number of basis functions M')
@click.option('--seed', type=int, help='Path seed; defaults to LSM_BASE_SEED')
@click.option('--threads', type=int)
@exit_codes
def price(case, mode, strike, spot, n_paths, basis_m, seed, threads):
    """Price one Bermudan option on one simulated path set."""
    config = load_experiment(None, case, None)
    if case == 'bestof':
        key = spot if spot is not None else config.exp2_key
    else:
        key = strike if strike is not None else config.strike
    result = price_once(config, key, mode, n_paths, basis_m=basis_m, seed=seed,
                        threads=threads or config.threads,
                        eps_h=current_app.config['LSM_LEVERAGE_EPS'],
                        flip_diagnostics=current_app.config['LSM_FLIP_DIAGNOSTICS'])
    click.echo(f"{result['mode']} {case} {format_key(key)}: {result['price']:.6f} "
               f"(se {result['std_error']:.6f}, N={result['N']}, M={result['M']}, seed={result['seed']})")
    if result['flip_counts']:
        click.echo(f"  ranks {result['ranks']}  flips {result['flip_counts']}  "
                   f"fallbacks {result['fallback_count']}")


@commands.cli.command('experiment1')
@click.option('--config', 'config_file', type=click.Path(dir_okay=False))
@click.option('--case', type=CASES)
@click.option('--out', type=click.Path(dir_okay=False))
@click.option('--scale', type=SCALES)
@click.option('--threads', type=int)
@click.option('--control-variate/--no-control-variate', default=None)
@exit_codes
def experiment1(config_file, case, out, scale, threads, control_variate):
    """LSM, LSM-2 and LOOLSM on shared paths across the case grid."""
    config = load_experiment(config_file, case, scale, threads=threads,
                             control_variate=control_variate)
    report = run_experiment1(config, eps_h=current_app.config['LSM_LEVERAGE_EPS'],
                             flip_diagnostics=current_app.config['LSM_FLIP_DIAGNOSTICS'])
    _write_report(report, _output_path(config, out, 'experiment1'))


@commands.cli.command('experiment2')
@click.option('--config', 'config_file', type=click.Path(dir_okay=False))
@click.option('--case', type=CASES)
@click.option('--out', type=click.Path(dir_okay=False))
@click.option('--scale', type=SCALES)
@click.option('--threads', type=int)
@click.option('--control-variate/--no-control-variate', default=None)
@exit_codes
def experiment2(config_file, case, out, scale, threads, control_variate):
    """Look-ahead bias against M/N on one shared path pool."""
    config = load_experiment(config_file, case, scale, threads=threads,
                             control_variate=control_variate)
    report = run_experiment2(config, eps_h=current_app.config['LSM_LEVERAGE_EPS'])
    _write_report(report, _output_path(config, out, 'experiment2'))
    for name, fit in report.slope_fits.items():
        click.echo(f'{name}: slope {fit.slope:.4g} +- {fit.slope_se:.2g}, '
                   f'intercept {fit.intercept:.3g} +- {fit.intercept_se:.2g}, r2 {fit.r2:.3f}')


@commands.cli.command('oracle')
@click.option('--case', required=True, type=CASES)
@click.option('--key', required=True, type=float, help='Strike (put, basket) or spot (bestof)')
@click.option('--steps', type=int, help='Binomial steps for the put; 0 skips the lattice')
@exit_codes
def oracle(case, key, steps):
    """Published exact prices, with recomputed oracle values where available."""
    config = load_experiment(None, case, None)
    steps = current_app.config['LSM_BINOMIAL_STEPS'] if steps is None else steps
    summary = check_oracle(oracle_summary(config, key, steps))
    click.echo(f"{summary['case']} {format_key(summary['key'])}: "
               f"bermudan {summary['bermudan']:.3f}, european {summary['european']:.3f} "
               f"[{summary['source']}]")
    for name in ('bermudan_computed', 'european_computed'):
        if name in summary:
            click.echo(f'  {name}: {summary[name]:.6f}')
