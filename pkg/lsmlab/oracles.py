"""Reference prices the Monte Carlo estimators are measured against."""
import logging
import math
from functools import lru_cache
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import special

from lsmlab.exceptions import ConfigurationError, NumericalError, ValidationError
from lsmlab.models import PayoffKind, ReferenceEntry
from lsmlab.utils import format_key

logger = logging.getLogger(__name__)

DEFAULT_TABLE = Path(__file__).resolve().parent / 'data' / 'reference_prices.csv'
MIN_STEPS = 100


def binomial_bermudan_put(model, schedule, strike, steps):
    """CRR lattice; early exercise only on the levels that carry an exercise date."""
    if model.n_assets != 1:
        raise ValidationError(f'binomial put needs a single-asset model, got J={model.n_assets}')
    steps = int(steps)
    if steps < MIN_STEPS or steps % schedule.n_dates:
        raise ValidationError(
            f'steps must be a multiple of I={schedule.n_dates} and at least {MIN_STEPS}, got {steps}')
    vol = float(model.vol[0])
    if vol <= 0:
        raise ValidationError('binomial lattice needs a positive volatility')
    spot, rate, dividend = float(model.spot[0]), model.rate, float(model.dividend[0])

    dt = schedule.maturity / steps
    levels = np.rint(schedule.times / dt).astype(int)
    if not np.allclose(levels * dt, schedule.times, rtol=0.0, atol=1e-9 * schedule.maturity):
        raise ValidationError('exercise dates do not fall on lattice levels; use a uniform schedule')
    exercise_levels = set(int(n) for n in levels)

    log_up = vol * math.sqrt(dt)
    up, down = math.exp(log_up), math.exp(-log_up)
    p = (math.exp((rate - dividend) * dt) - down) / (up - down)
    if not 0.0 < p < 1.0:
        raise NumericalError(f'risk-neutral probability {p:.6f} outside (0, 1); increase steps')
    disc_up, disc_down = math.exp(-rate * dt) * p, math.exp(-rate * dt) * (1.0 - p)

    # index j counts up moves
    values = np.maximum(strike - spot * np.exp(log_up * (2 * np.arange(steps + 1) - steps)), 0.0)
    for n in range(steps - 1, -1, -1):
        values = disc_up * values[1:] + disc_down * values[:-1]
        if n in exercise_levels:
            intrinsic = strike - spot * np.exp(log_up * (2 * np.arange(n + 1) - n))
            np.maximum(values, intrinsic, out=values)
    return float(values[0])


def _d1_d2(spot, vol, rate, dividend, strike, expiry):
    sd = vol * math.sqrt(expiry)
    d1 = (math.log(spot / strike) + (rate - dividend + 0.5 * vol * vol) * expiry) / sd
    return d1, d1 - sd


def bs_european_put(spot, vol, rate, dividend, strike, expiry):
    df_spot = spot * math.exp(-dividend * expiry)
    df_strike = strike * math.exp(-rate * expiry)
    if vol * math.sqrt(expiry) == 0:
        return max(df_strike - df_spot, 0.0)
    d1, d2 = _d1_d2(spot, vol, rate, dividend, strike, expiry)
    return float(df_strike * special.ndtr(-d2) - df_spot * special.ndtr(-d1))


def bs_european_call(spot, vol, rate, dividend, strike, expiry):
    df_spot = spot * math.exp(-dividend * expiry)
    df_strike = strike * math.exp(-rate * expiry)
    if vol * math.sqrt(expiry) == 0:
        return max(df_spot - df_strike, 0.0)
    d1, d2 = _d1_d2(spot, vol, rate, dividend, strike, expiry)
    return float(df_spot * special.ndtr(d1) - df_strike * special.ndtr(d2))


@lru_cache(maxsize=None)
def _half_nodes(n):
    # positive Gauss-Legendre nodes mapped onto [0, 2], weights duplicated
    x, w = np.polynomial.legendre.leggauss(n)
    keep = x > 0
    x, w = x[keep], w[keep]
    return np.concatenate([1.0 - x, 1.0 + x]), np.concatenate([w, w])


def _bvnu(dh, dk, r):
    """P[X > dh, Y > dk] for a standard bivariate normal with correlation r (Genz)."""
    if dh == math.inf or dk == math.inf:
        return 0.0
    if dh == -math.inf:
        return 1.0 if dk == -math.inf else float(special.ndtr(-dk))
    if dk == -math.inf:
        return float(special.ndtr(-dh))
    if r == 0:
        return float(special.ndtr(-dh) * special.ndtr(-dk))

    two_pi = 2.0 * math.pi
    h, k = dh, dk
    hk = h * k
    if abs(r) < 0.3:
        x, w = _half_nodes(6)
    elif abs(r) < 0.75:
        x, w = _half_nodes(12)
    else:
        x, w = _half_nodes(20)

    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r) / 2.0
        sn = np.sin(asr * x)
        bvn = float(np.exp((sn * hk - hs) / (1.0 - sn * sn)) @ w)
        return min(1.0, max(0.0, bvn * asr / two_pi + special.ndtr(-h) * special.ndtr(-k)))

    if r < 0:
        k, hk = -k, -hk
    bvn = 0.0
    if abs(r) < 1:
        a2 = 1.0 - r * r
        a = math.sqrt(a2)
        bs = (h - k) ** 2
        asr = -(bs / a2 + hk) / 2.0
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        if asr > -100:
            bvn = a * math.exp(asr) * (1 - c * (bs - a2) * (1 - d * bs) / 3 + c * d * a2 * a2)
        if hk > -100:
            b = math.sqrt(bs)
            sp = math.sqrt(two_pi) * special.ndtr(-b / a)
            bvn -= math.exp(-hk / 2) * sp * b * (1 - c * bs * (1 - d * bs) / 3)
        a /= 2.0
        xs = (a * x) ** 2
        asr = -(bs / xs + hk) / 2.0
        ok = asr > -100
        xs, asr, wk = xs[ok], asr[ok], w[ok]
        sp = 1 + c * xs * (1 + 5 * d * xs)
        rs = np.sqrt(1 - xs)
        ep = np.exp(-(hk / 2) * xs / (1 + rs) ** 2) / rs
        bvn = (a * float((np.exp(asr) * (sp - ep)) @ wk) - bvn) / two_pi
    if r > 0:
        bvn += special.ndtr(-max(h, k))
    elif h >= k:
        bvn = -bvn
    else:
        edge = special.ndtr(k) - special.ndtr(h) if h < 0 else special.ndtr(-h) - special.ndtr(-k)
        bvn = edge - bvn
    return float(min(1.0, max(0.0, bvn)))


def bivariate_normal_cdf(a, b, rho):
    """P[X <= a, Y <= b] for standard normals with correlation rho."""
    rho = float(rho)
    if not -1.0 <= rho <= 1.0 or math.isnan(a) or math.isnan(b):
        raise ValidationError(f'bivariate normal needs |rho| <= 1 and numeric limits, got {a}, {b}, {rho}')
    return _bvnu(-float(a), -float(b), rho)


def bestof2_european_call(model, strike, expiry):
    """Call on the maximum of two assets, closed form in the bivariate normal CDF."""
    if model.n_assets != 2:
        raise ValidationError(f'max-of-two call needs J=2, got {model.n_assets}')
    s1, s2 = (float(s) for s in model.spot)
    v1, v2 = (float(v) for v in model.vol)
    q1, q2 = (float(q) for q in model.dividend)
    rho, r, T = float(model.correlation[0, 1]), model.rate, float(expiry)
    sigma = math.sqrt(max(v1 * v1 + v2 * v2 - 2 * rho * v1 * v2, 0.0))
    if min(v1, v2, sigma) <= 0 or T <= 0:
        raise ValidationError('max-of-two call needs positive vols, a positive spread vol and expiry')

    root_t = math.sqrt(T)
    d = (math.log(s1 / s2) + (q2 - q1 + 0.5 * sigma * sigma) * T) / (sigma * root_t)
    y1 = (math.log(s1 / strike) + (r - q1 + 0.5 * v1 * v1) * T) / (v1 * root_t)
    y2 = (math.log(s2 / strike) + (r - q2 + 0.5 * v2 * v2) * T) / (v2 * root_t)
    rho1 = (v1 - rho * v2) / sigma
    rho2 = (v2 - rho * v1) / sigma
    return float(
        s1 * math.exp(-q1 * T) * bivariate_normal_cdf(y1, d, rho1)
        + s2 * math.exp(-q2 * T) * bivariate_normal_cdf(y2, -d + sigma * root_t, rho2)
        - strike * math.exp(-r * T) * (1 - bivariate_normal_cdf(-y1 + v1 * root_t, -y2 + v2 * root_t, rho)))


@lru_cache(maxsize=8)
def load_reference_table(path=None):
    """Reads the published exact prices into {(case, key): ReferenceEntry}."""
    path = Path(path) if path else DEFAULT_TABLE
    try:
        df = pd.read_csv(path, comment='#', skipinitialspace=True)
    except (OSError, pd.errors.ParserError) as e:
        raise ConfigurationError(f'cannot read reference table {path}: {e}') from e
    missing = {'case', 'key', 'bermudan', 'european', 'source'} - set(df.columns)
    if missing:
        raise ConfigurationError(f'{path}: missing columns {sorted(missing)}')

    table = {}
    for row in df.itertuples(index=False):
        if not str(row.source).strip() or row.bermudan <= 0 or row.european <= 0:
            raise ConfigurationError(f'{path}: bad entry for {row.case} {row.key}')
        case = PayoffKind.parse(row.case).case
        table[(case, float(row.key))] = ReferenceEntry(case=case, key=float(row.key),
                                                       bermudan=float(row.bermudan),
                                                       european=float(row.european),
                                                       source=str(row.source).strip())
    logger.debug('loaded %d reference prices from %s', len(table), path)
    return table


def reference_price(case, key, table=None):
    case = PayoffKind.parse(case).case
    entries = load_reference_table(table)
    try:
        return entries[(case, float(key))]
    except KeyError:
        known = ', '.join(format_key(k) for c, k in sorted(entries) if c == case)
        raise ValidationError(f'no reference price for {case} {format_key(key)}; known: {known}') from None


def european_reference(payoff, model, schedule, table=None):
    """Exact European value used as the control variate for the payoff."""
    T = schedule.maturity
    if payoff.kind is PayoffKind.PUT_SINGLE:
        return bs_european_put(float(model.spot[0]), float(model.vol[0]), model.rate,
                               float(model.dividend[0]), payoff.strike, T)
    if payoff.kind is PayoffKind.BESTOF_CALL:
        return bestof2_european_call(model, payoff.strike, T)
    # basket: no closed form; the tabulated value is keyed by strike
    return reference_price('basket', payoff.strike, table).european
