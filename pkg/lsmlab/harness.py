"""Experiment orchestration: the estimator comparison and the bias-vs-M/N study."""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from lsmlab.contracts import basis_family
from lsmlab.engine import (apply_control_variate, european_mc_price, lookahead_bias, price_backward,
                           price_two_pass)
from lsmlab.exceptions import ConfigurationError, NumericalError, ValidationError
from lsmlab.market import dump_paths, generate_paths, load_paths, split_pool
from lsmlab.models import (CSV_COLUMNS, EstimatorMode, ExperimentRecord, ExperimentReport,
                           SlopeFit)
from lsmlab.oracles import (binomial_bermudan_put, bestof2_european_call, bs_european_put,
                            european_reference, reference_price)
from lsmlab.regression import LEVERAGE_EPS
from lsmlab.utils import derive_seed, format_key, log_timing

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-3
HIGH_SE_RATIO = 0.01  # se of the mean offset relative to the exact price
BASKET_M10_NOTE = ('basket M=10 keeps 1, Z, S1..S4 and S1^2..S4^2; cross terms enter only at M=16')


def _map(fn, items, threads):
    """Ordered map; cells are independent so worker count never changes results."""
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _spread(samples):
    """(mean, std with n/(n-1) correction, std error of mean); spread is NaN for one sample."""
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    if samples.size < 2:
        return mean, float('nan'), float('nan')
    std = float(samples.std(ddof=1))
    return mean, std, std / np.sqrt(samples.size)


def _min_rank(result):
    ranks = result.ranks[:-1]
    return min(ranks) if ranks else 0


def _record(case, key, mode, M, N, offsets, biases=None, flips=0, min_rank=0, wall_ms=0.0):
    mean, std, se = _spread(offsets)
    record = ExperimentRecord(case=case, key=float(key), estimator=mode.value, M=int(M), N=int(N),
                              n_mc=len(offsets), mean_offset=mean, std=std, se_mean=se,
                              flips_total=int(flips), min_rank=int(min_rank), wall_ms=float(wall_ms))
    if biases is not None:
        record.mean_bias, _, record.bias_se = _spread(biases)
    return record


def run_experiment1(config, threads=None, eps_h=LEVERAGE_EPS, flip_diagnostics=True):
    """Prices n_mc independent sets per grid key with every requested estimator on shared paths."""
    threads = threads or config.threads
    use_cv = bool(config.control_variate)
    modes = [m for m in (EstimatorMode.LSM, EstimatorMode.LSM2, EstimatorMode.LOOLSM)
             if m in config.estimators or m is EstimatorMode.LSM]
    basis = basis_family(config.case, config.basis_m)
    schedule = config.schedule
    report = ExperimentReport(metadata={
        'experiment': 1, **config.as_metadata(), 'n_paths': config.n_paths, 'n_mc': config.n_mc,
        'M': basis.M, 'basis': basis.labels, 'control_variate': use_cv,
        'seed_rule': 'base_seed XOR blake2b(case/k), policy sets blake2b(case/k/policy)',
    })
    if config.case == 'basket' and basis.M == 10:
        report.metadata['basis_note'] = BASKET_M10_NOTE

    for key in config.keys:
        reference = reference_price(config.case, key, config.reference_table)
        model, payoff = config.model_for(key), config.payoff_for(key)
        exact_euro = european_reference(payoff, model, schedule, config.reference_table) if use_cv else None

        def run_set(k):
            seed = derive_seed(config.base_seed, config.case, k)
            paths = generate_paths(model, schedule, config.n_paths, seed, config.antithetic)
            euro = european_mc_price(paths, payoff)
            out = {'euro': euro, 'ms': {}}
            for mode in modes:
                with log_timing(logger, f'{config.case} {format_key(key)} set {k} {mode.value}') as timer:
                    if mode is EstimatorMode.LSM2:
                        policy_paths = generate_paths(
                            model, schedule, config.n_paths,
                            derive_seed(config.base_seed, config.case, k, 'policy'), config.antithetic)
                        result = price_two_pass(policy_paths, paths, payoff, basis, eps_h=eps_h)
                    else:
                        result, _ = price_backward(paths, payoff, basis, mode, eps_h=eps_h,
                                                   flip_diagnostics=flip_diagnostics)
                if use_cv:
                    result = apply_control_variate(result, exact_euro, euro)
                out[mode] = result
                out['ms'][mode] = timer['ms']
            if use_cv:
                out['euro'] = apply_control_variate(euro, exact_euro, euro)
            return out

        with log_timing(logger, f'experiment 1 {config.case} {format_key(key)}', logging.INFO):
            sets = _map(run_set, range(config.n_mc), threads)

        lsm_prices = np.array([s[EstimatorMode.LSM].price for s in sets])
        for mode in modes:
            prices = np.array([s[mode].price for s in sets])
            report.records.append(_record(
                config.case, key, mode, basis.M, config.n_paths, prices - reference.bermudan,
                biases=None if mode is EstimatorMode.LSM else lsm_prices - prices,
                flips=sum(sum(s[mode].flip_counts) for s in sets),
                min_rank=min(_min_rank(s[mode]) for s in sets),
                wall_ms=sum(s['ms'][mode] for s in sets) if config.record_wall_time else 0.0))
            ratio = report.records[-1].se_mean / reference.bermudan
            if ratio > HIGH_SE_RATIO:
                logger.warning('%s %s %s: standard error is %.1f%% of the price; raise N_PATHS or N_MC',
                               config.case, format_key(key), mode.value, 100 * ratio)
        euro_prices = np.array([s['euro'].price for s in sets])
        report.records.append(_record(config.case, key, EstimatorMode.EUROPEAN, basis.M,
                                      config.n_paths, euro_prices - reference.european))
        logger.info('%s %s: LSM offset %.4f over %d sets', config.case, format_key(key),
                    report.records[-1 - len(modes)].mean_offset, config.n_mc)
    return report


def _load_or_make_pool(config, model, schedule, threads):
    pool_file = config.pool_file
    if pool_file and Path(pool_file).is_file():
        pool = load_paths(pool_file, model)
        if pool.n_paths != config.pool_size or not pool.schedule.matches(schedule):
            raise ConfigurationError(
                f'{pool_file}: pool has N={pool.n_paths} on {pool.schedule.n_dates} dates, '
                f'config needs N={config.pool_size} on {schedule.n_dates}')
        logger.info('loaded pool of %d paths from %s', pool.n_paths, pool_file)
        return pool
    seed = derive_seed(config.base_seed, config.case, 'pool')
    with log_timing(logger, f'pool of {config.pool_size} paths', logging.INFO):
        pool = generate_paths(model, schedule, config.pool_size, seed, config.antithetic,
                              threads=threads)
    if pool_file:
        dump_paths(pool, pool_file)
    return pool


def run_experiment2(config, threads=None, eps_h=LEVERAGE_EPS):
    """LSM and LOOLSM on nested splits of one pool, for every (M, n_mc) cell."""
    threads = threads or config.threads
    use_cv = True if config.control_variate is None else bool(config.control_variate)
    key = config.exp2_key
    model, payoff, schedule = config.model_for(key), config.payoff_for(key), config.schedule
    reference = reference_price(config.case, key, config.reference_table)
    exact_euro = european_reference(payoff, model, schedule, config.reference_table)
    pool = _load_or_make_pool(config, model, schedule, threads)

    report = ExperimentReport(metadata={
        'experiment': 2, **config.as_metadata(), 'key': key, 'pool_size': pool.n_paths,
        'pool_seed': pool.seed, 'm_list': config.m_list, 'n_mc_list': config.n_mc_list,
        'control_variate': use_cv, 'exact_european': exact_euro,
        'shared_pool': 'every M and n_mc reuses the same pool; sets are contiguous pool slices',
    })
    if config.case == 'basket' and 10 in config.m_list:
        report.metadata['basis_note'] = BASKET_M10_NOTE

    points = []
    for M in config.m_list:
        basis = basis_family(config.case, M)
        for n_mc in config.n_mc_list:
            sets = split_pool(pool, n_mc)
            n_paths = sets[0].n_paths

            def run_set(paths):
                with log_timing(logger, f'M={M} N={paths.n_paths} offset {paths.pool_offset}') as timer:
                    lsm, _ = price_backward(paths, payoff, basis, EstimatorMode.LSM, eps_h=eps_h,
                                            flip_diagnostics=False)
                    loo, _ = price_backward(paths, payoff, basis, EstimatorMode.LOOLSM, eps_h=eps_h)
                if use_cv:
                    euro = european_mc_price(paths, payoff)
                    lsm = apply_control_variate(lsm, exact_euro, euro)
                    loo = apply_control_variate(loo, exact_euro, euro)
                return lsm, loo, lookahead_bias(lsm, loo).mean, timer['ms']

            with log_timing(logger, f'experiment 2 {config.case} M={M} n_mc={n_mc}', logging.INFO):
                results = _map(run_set, sets, threads)
            wall = sum(r[3] for r in results) if config.record_wall_time else 0.0
            biases = np.array([r[2] for r in results])
            lsm_rec = _record(config.case, key, EstimatorMode.LSM, M, n_paths,
                              [r[0].price - reference.bermudan for r in results],
                              min_rank=min(_min_rank(r[0]) for r in results), wall_ms=wall)
            loo_rec = _record(config.case, key, EstimatorMode.LOOLSM, M, n_paths,
                              [r[1].price - reference.bermudan for r in results], biases=biases,
                              flips=sum(sum(r[1].flip_counts) for r in results),
                              min_rank=min(_min_rank(r[1]) for r in results))
            report.records += [lsm_rec, loo_rec]
            if np.isfinite(loo_rec.bias_se) and loo_rec.bias_se > 0:
                points.append({'x': loo_rec.m_over_n, 'y': loo_rec.mean_bias, 'w': loo_rec.bias_se ** -2})
            logger.info('M=%d N=%d: bias %.5f +- %.5f', M, n_paths, loo_rec.mean_bias, loo_rec.bias_se)

    if len(points) >= 3:
        report.slope_fits[f'{config.case}:{format_key(key)}'] = fit_bias_slope(points)
    else:
        logger.warning('only %d weighted bias points; no slope fit', len(points))
    return report


def fit_bias_slope(points):
    """Weighted line through {x, y, w} points (w = 1 / variance of y)."""
    x = np.array([p['x'] for p in points], dtype=float)
    y = np.array([p['y'] for p in points], dtype=float)
    w = np.array([p['w'] for p in points], dtype=float)
    if x.size < 3:
        raise ValidationError(f'slope fit needs at least 3 points, got {x.size}')
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValidationError('slope fit weights must be positive and finite')
    if np.ptp(x) == 0:
        raise ValidationError('slope fit needs at least two distinct x values')

    (slope, intercept), cov = np.polyfit(x, y, 1, w=np.sqrt(w), cov='unscaled')
    fitted = slope * x + intercept
    y_bar = np.average(y, weights=w)
    ss_tot = float(np.sum(w * (y - y_bar) ** 2))
    ss_res = float(np.sum(w * (y - fitted) ** 2))
    if ss_tot == 0:
        r2 = 1.0 if np.isclose(ss_res, 0.0, atol=1e-24) else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return SlopeFit(slope=float(slope), intercept=float(intercept), r2=r2,
                    slope_se=float(np.sqrt(cov[0, 0])), intercept_se=float(np.sqrt(cov[1, 1])),
                    n_points=int(x.size))


def _decimal(value):
    if math.isnan(value):
        return ''
    return np.format_float_positional(value, precision=10, unique=False, fractional=False, trim='-')


def _positional(df):
    """Float columns as 10 significant digits in plain decimal notation."""
    df = df.copy()
    for column in df.select_dtypes('float').columns:
        df[column] = df[column].map(_decimal)
    return df


def emit_csv(report, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        _positional(report.to_frame()).to_csv(path, index=False, na_rep='', lineterminator='\n',
                                              encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f'cannot write report {path}: {e}') from e
    logger.info('wrote %d records to %s', len(report.records), path)
    return path


def emit_metadata(report, path):
    """JSON sidecar with run metadata and slope fits."""
    path = Path(path)
    payload = {
        'metadata': report.metadata,
        'slope_fits': {name: vars(fit) for name, fit in report.slope_fits.items()},
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + '\n',
                        encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f'cannot write metadata {path}: {e}') from e
    return path


def read_report_csv(path):
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise ConfigurationError(f'cannot read report {path}: {e}') from e
    if list(df.columns) != CSV_COLUMNS:
        raise ConfigurationError(f'{path}: unexpected columns {list(df.columns)}')
    return df


def price_once(config, key, mode, n_paths, basis_m=None, seed=None, threads=1,
               eps_h=LEVERAGE_EPS, flip_diagnostics=True):
    """One valuation on one path set, as reported by the price command and the API."""
    mode = EstimatorMode.parse(mode)
    model, payoff, schedule = config.model_for(key), config.payoff_for(key), config.schedule
    seed = config.base_seed if seed is None else int(seed)
    paths = generate_paths(model, schedule, n_paths, seed, config.antithetic, threads=threads)
    basis = basis_family(config.case, basis_m or config.basis_m)
    if mode is EstimatorMode.EUROPEAN:
        result = european_mc_price(paths, payoff)
    elif mode is EstimatorMode.LSM2:
        policy_paths = generate_paths(model, schedule, n_paths, derive_seed(seed, 'policy'),
                                      config.antithetic, threads=threads)
        result = price_two_pass(policy_paths, paths, payoff, basis, eps_h=eps_h)
    else:
        result, _ = price_backward(paths, payoff, basis, mode, eps_h=eps_h,
                                   flip_diagnostics=flip_diagnostics)
    return {
        'case': config.case, 'key': float(key), 'mode': result.mode.value, 'M': basis.M,
        'N': paths.n_paths, 'seed': seed, 'price': result.price, 'std_error': result.std_error,
        'ranks': list(result.ranks), 'flip_counts': list(result.flip_counts),
        'fallback_count': result.fallback_count,
    }


def oracle_summary(config, key, steps=None):
    """Published exact values for (case, key) next to what the oracles recompute."""
    entry = reference_price(config.case, key, config.reference_table)
    model, payoff, schedule = config.model_for(key), config.payoff_for(key), config.schedule
    summary = {'case': entry.case, 'key': entry.key, 'bermudan': entry.bermudan,
               'european': entry.european, 'source': entry.source}
    T = schedule.maturity
    if config.case == 'put':
        summary['european_computed'] = bs_european_put(config.spot, config.vol, config.rate,
                                                       config.dividend, key, T)
        if steps:
            summary['bermudan_computed'] = binomial_bermudan_put(model, schedule, key, steps)
    elif config.case == 'bestof':
        summary['european_computed'] = bestof2_european_call(model, payoff.strike, T)
    return summary


def check_oracle(summary, tolerance=ORACLE_TOLERANCE):
    """Raises NumericalError when a recomputed price leaves the published value by more than tolerance."""
    for computed, published in (('bermudan_computed', 'bermudan'), ('european_computed', 'european')):
        if computed in summary and abs(summary[computed] - summary[published]) > tolerance:
            raise NumericalError(
                f"{summary['case']} {format_key(summary['key'])}: {computed} {summary[computed]:.6f} "
                f"diverges from published {summary[published]:.3f}")
    return summary
