import dataclasses
import logging

import numpy as np

from lsmlab.contracts import design_matrix, n_assets, undiscounted_payout
from lsmlab.exceptions import NumericalError, ValidationError
from lsmlab.models import BiasStatistics, EstimatorMode, ExercisePolicy, PricingResult
from lsmlab.regression import LEVERAGE_EPS, fit_least_squares, loo_predictions, singular_leverage
from lsmlab.utils import standard_error

logger = logging.getLogger(__name__)


def decide_continue(z, c, nonnegative=True):
    """I[C >= Z], overridden to continue where a nonnegative payout is zero."""
    z = np.asarray(z)
    cont = np.asarray(c) >= z
    if nonnegative:
        cont = cont | (z == 0)
    return cont


def payout_matrix(paths, payoff):
    """Discounted payouts Z for every path and exercise date, shape (N, I)."""
    _check_assets(paths, payoff)
    discount = np.exp(-paths.model.rate * paths.schedule.times)
    return undiscounted_payout(payoff, paths.values) * discount


def _check_assets(paths, payoff):
    if paths.model.n_assets != n_assets(payoff.kind):
        raise ValidationError(
            f'{payoff.kind.case} payoff needs {n_assets(payoff.kind)} assets, paths have {paths.model.n_assets}')


def backward_induction(payouts, design_at, mode, nonnegative=True, eps_h=LEVERAGE_EPS,
                       flip_diagnostics=True):
    """Path-wise backward induction over payouts (N, I) with design_at(i) giving X at date i+1.

    Returns the date-0 path values and a dict of per-date diagnostics (index i is date i+1;
    the last date carries no regression).
    """
    mode = EstimatorMode.parse(mode)
    if mode not in (EstimatorMode.LSM, EstimatorMode.LOOLSM):
        raise ValidationError(f'backward induction runs in LSM or LOOLSM mode, not {mode.value}')
    n_paths, n_dates = payouts.shape
    trace = {
        'ranks': [0] * n_dates,
        'flips': [0] * n_dates,
        'mean_leverage': [float('nan')] * n_dates,
        'betas': [None] * (n_dates - 1),
        'fallbacks': 0,
    }
    values = payouts[:, -1].copy()
    use_loo = mode is EstimatorMode.LOOLSM

    for i in range(n_dates - 2, -1, -1):
        X = design_at(i)
        fit = fit_least_squares(X, values)
        if fit.rank == 0:
            raise NumericalError(f'rank-0 regression at exercise date {i + 1}')
        z = payouts[:, i]
        cont_full = decide_continue(z, fit.fitted, nonnegative)
        if use_loo or flip_diagnostics:
            flagged = singular_leverage(fit, eps_h)
            cont_loo = decide_continue(z, loo_predictions(fit, eps_h), nonnegative)
            trace['flips'][i] = int(np.count_nonzero(cont_full != cont_loo))
            trace['fallbacks'] += int(flagged.sum())
        cont = cont_loo if use_loo else cont_full
        values = np.where(cont, values, z)

        trace['ranks'][i] = fit.rank
        trace['mean_leverage'][i] = float(fit.leverage.mean())
        trace['betas'][i] = fit.beta
        if fit.rank < X.shape[1]:
            logger.warning('date %d: design rank %d < M=%d', i + 1, fit.rank, X.shape[1])
        logger.debug('date %d: rank %d, cond %.3g, mean h %.3g, flips %d',
                     i + 1, fit.rank, fit.condition, trace['mean_leverage'][i], trace['flips'][i])
    return values, trace


def price_backward(paths, payoff, basis, mode, eps_h=LEVERAGE_EPS, flip_diagnostics=True):
    mode = EstimatorMode.parse(mode)
    if basis.case is not payoff.kind:
        raise ValidationError(f'basis for {basis.case.case} used with a {payoff.kind.case} payoff')
    if paths.n_paths <= basis.M:
        logger.warning('N=%d paths for M=%d basis functions; regressions are underdetermined',
                       paths.n_paths, basis.M)
    payouts = payout_matrix(paths, payoff)

    def design_at(i):
        return design_matrix(basis, paths.values[:, i, :], payouts[:, i])

    values, trace = backward_induction(payouts, design_at, mode, payoff.nonnegative, eps_h,
                                       flip_diagnostics)
    if trace['fallbacks']:
        logger.warning('%s: %d leverage fallback(s) across dates', mode.value, trace['fallbacks'])
    result = PricingResult(
        price=float(values.mean()),
        per_path_value=values,
        std_error=standard_error(values, paths.antithetic),
        mode=mode,
        ranks=tuple(trace['ranks']),
        fallback_count=trace['fallbacks'],
        flip_counts=tuple(trace['flips']),
        mean_leverage=tuple(trace['mean_leverage']),
        provenance=paths.provenance,
    )
    return result, ExercisePolicy(coefficients=tuple(trace['betas']), basis=basis)


def apply_policy(policy, paths, payoff, mode=EstimatorMode.LSM2, ranks=()):
    """Values paths under a fixed exercise policy: continue where X beta >= Z."""
    payouts = payout_matrix(paths, payoff)
    n_dates = payouts.shape[1]
    if len(policy.coefficients) != n_dates - 1:
        raise ValidationError(
            f'policy has {len(policy.coefficients)} dates, paths need {n_dates - 1}')
    values = payouts[:, -1].copy()
    for i in range(n_dates - 2, -1, -1):
        X = design_matrix(policy.basis, paths.values[:, i, :], payouts[:, i])
        cont = decide_continue(payouts[:, i], X @ policy.coefficients[i], payoff.nonnegative)
        values = np.where(cont, values, payouts[:, i])
    return PricingResult(price=float(values.mean()), per_path_value=values,
                         std_error=standard_error(values, paths.antithetic), mode=mode,
                         ranks=tuple(ranks), provenance=paths.provenance)


def price_two_pass(policy_paths, valuation_paths, payoff, basis, eps_h=LEVERAGE_EPS):
    if not policy_paths.schedule.matches(valuation_paths.schedule):
        raise ValidationError('policy and valuation paths use different exercise schedules')
    if policy_paths.model.rate != valuation_paths.model.rate:
        raise ValidationError('policy and valuation paths use different rates')
    if policy_paths is valuation_paths:
        logger.debug('two-pass pricing on a single path set; this reproduces LSM')
    policy_result, policy = price_backward(policy_paths, payoff, basis, EstimatorMode.LSM,
                                           eps_h=eps_h, flip_diagnostics=False)
    return apply_policy(policy, valuation_paths, payoff, ranks=policy_result.ranks)


def european_mc_price(paths, payoff):
    _check_assets(paths, payoff)
    discount = np.exp(-paths.model.rate * paths.schedule.times)[-1]
    values = undiscounted_payout(payoff, paths.values[:, -1, :]) * discount
    return PricingResult(price=float(values.mean()), per_path_value=values,
                         std_error=standard_error(values, paths.antithetic),
                         mode=EstimatorMode.EUROPEAN, provenance=paths.provenance)


def _same_paths(a, b, what):
    if a.provenance != b.provenance:
        raise ValidationError(f'{what}: results come from different path sets '
                              f'({a.provenance} vs {b.provenance})')


def apply_control_variate(result, exact_euro, mc_euro):
    """Shifts every path value by exact_euro - mc_euro.price."""
    _same_paths(result, mc_euro, 'control variate')
    shift = float(exact_euro) - mc_euro.price
    return dataclasses.replace(result, price=result.price + shift,
                               per_path_value=result.per_path_value + shift)


def lookahead_bias(lsm, loolsm):
    _same_paths(lsm, loolsm, 'look-ahead bias')
    per_path = lsm.per_path_value - loolsm.per_path_value
    antithetic = bool(lsm.provenance[3]) if lsm.provenance else False
    return BiasStatistics(mean=lsm.price - loolsm.price, per_path=per_path,
                          std_error=standard_error(per_path, antithetic))
