"""Full-scale runs against the published tables. Run with --runslow."""
import pytest

from lsmlab.harness import run_experiment1, run_experiment2
from lsmlab.models import EstimatorMode
from lsmlab.settings import ExperimentConfig

pytestmark = pytest.mark.slow


def one_key(case, key, **keys):
    values = {'CASE': case, 'KEYS': str(key), 'ESTIMATORS': 'LSM,LOOLSM'}
    values.update({k: str(v) for k, v in keys.items()})
    return ExperimentConfig.from_mapping(values, scale='full')


def test_put_at_the_money():
    report = run_experiment1(one_key('put', 100, ESTIMATORS='LSM,LSM2,LOOLSM'))
    loo = report.select(EstimatorMode.LOOLSM)[0]
    lsm2 = report.select(EstimatorMode.LSM2)[0]
    assert (loo.N, loo.M, loo.n_mc) == (40_000, 5, 100)
    assert abs(loo.mean_offset + 0.003) <= 0.010
    assert 0.0005 <= loo.mean_bias <= 0.006
    assert loo.mean_bias / loo.bias_se >= 3
    assert lsm2.bias_se > loo.bias_se


def test_basket_lsm_overprices():
    report = run_experiment1(one_key('basket', 100))
    lsm = report.select(EstimatorMode.LSM)[0]
    loo = report.select(EstimatorMode.LOOLSM)[0]
    assert lsm.M == 16
    assert 0.14 <= lsm.mean_offset <= 0.33
    assert -0.21 <= loo.mean_offset <= -0.01
    assert loo.mean_bias / loo.bias_se >= 3


def test_bestof_loolsm_is_low():
    loo = run_experiment1(one_key('bestof', 100)).select(EstimatorMode.LOOLSM)[0]
    assert loo.mean_offset < 0
    assert loo.mean_bias / loo.bias_se >= 3
    assert abs(loo.mean_offset + 0.054) <= 4 * loo.se_mean


def test_bias_shrinks_with_m_over_n(tmp_path):
    config = ExperimentConfig.from_mapping({
        'CASE': 'put', 'EXP2_KEY': '100', 'M_LIST': '4,8,12', 'N_MC_LIST': '10,40,120',
        'POOL_SIZE': '144000', 'POOL_FILE': str(tmp_path / 'pool.bin'),
    }, scale='desk')
    report = run_experiment2(config)
    fit = report.slope_fits['put:100']
    assert fit.r2 >= 0.90
    assert abs(fit.intercept) <= 2 * fit.intercept_se
    assert fit.slope > 0
    for record in report.select(EstimatorMode.LOOLSM):
        if record.M / record.N >= 1e-3:
            assert record.mean_bias > 0
