import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from lsmlab.contracts import make_payoff
from lsmlab.engine import european_mc_price
from lsmlab.exceptions import ConfigurationError, ValidationError
from lsmlab.market import generate_paths
from lsmlab.models import ExerciseSchedule, GbmModel
from lsmlab.oracles import (binomial_bermudan_put, bestof2_european_call, bivariate_normal_cdf,
                            bs_european_call, bs_european_put, european_reference,
                            load_reference_table, reference_price)

TEST_STEPS = 20_000

PUT_EXACT = {80.0: (0.856, 0.843), 90.0: (2.786, 2.714), 100.0: (6.585, 6.330),
             110.0: (12.486, 11.804), 120.0: (20.278, 18.839)}


def bestof_model(spot):
    return GbmModel.uniform(2, spot, 0.05, 0.1, 0.2, 0.0)


def quad_cdf(a, b, rho):
    """Conditional-normal integral of the bivariate CDF, for cross-checking."""
    s = math.sqrt(1 - rho * rho)
    lower = -12.0
    points = [b / rho] if rho and lower < b / rho < a else None
    value, _ = integrate.quad(lambda x: stats.norm.pdf(x) * stats.norm.cdf((b - rho * x) / s),
                              lower, a, points=points, epsabs=1e-13, epsrel=1e-12, limit=200)
    return value


@pytest.mark.parametrize('strike', sorted(PUT_EXACT))
def test_black_scholes_put_matches_table(strike):
    value = bs_european_put(100.0, 0.2, 0.05, 0.02, strike, 1.0)
    assert value == pytest.approx(PUT_EXACT[strike][1], abs=1e-3)


@pytest.mark.parametrize('strike', sorted(PUT_EXACT))
def test_binomial_put_matches_table(put_model, put_schedule, strike):
    value = binomial_bermudan_put(put_model, put_schedule, strike, TEST_STEPS)
    assert value == pytest.approx(PUT_EXACT[strike][0], abs=1e-3)
    assert value >= bs_european_put(100.0, 0.2, 0.05, 0.02, strike, 1.0)


@pytest.mark.slow
def test_binomial_settled_beyond_50000_steps(put_model, put_schedule):
    coarse = binomial_bermudan_put(put_model, put_schedule, 100.0, 50_000)
    fine = binomial_bermudan_put(put_model, put_schedule, 100.0, 100_000)
    assert abs(fine - coarse) <= 5e-4


def test_binomial_worthless_put(put_model, put_schedule):
    assert binomial_bermudan_put(put_model, put_schedule, 1e-3, 1000) < 1e-12


def test_binomial_step_validation(put_model, put_schedule):
    with pytest.raises(ValidationError, match='multiple'):
        binomial_bermudan_put(put_model, put_schedule, 100.0, 1001)
    with pytest.raises(ValidationError):
        binomial_bermudan_put(put_model, put_schedule, 100.0, 50)


def test_zero_vol_put_out_of_the_money():
    assert bs_european_put(100.0, 0.0, 0.05, 0.02, 80.0, 1.0) == 0.0


def test_put_call_parity():
    call = bs_european_call(100.0, 0.25, 0.05, 0.02, 95.0, 2.0)
    put = bs_european_put(100.0, 0.25, 0.05, 0.02, 95.0, 2.0)
    assert call - put == pytest.approx(100 * math.exp(-0.04) - 95 * math.exp(-0.1), abs=1e-12)


def test_bivariate_independence():
    assert bivariate_normal_cdf(0.3, -1.2, 0.0) == pytest.approx(
        stats.norm.cdf(0.3) * stats.norm.cdf(-1.2), abs=1e-15)


def test_bivariate_orthant():
    assert bivariate_normal_cdf(0.0, 0.0, 0.5) == pytest.approx(1 / 3, abs=1e-12)


def test_bivariate_infinite_limits():
    assert bivariate_normal_cdf(math.inf, 0.7, 0.4) == pytest.approx(stats.norm.cdf(0.7))
    assert bivariate_normal_cdf(-math.inf, 0.7, 0.4) == 0.0
    assert bivariate_normal_cdf(math.inf, math.inf, -0.9) == 1.0


def test_bivariate_perfect_correlation():
    assert bivariate_normal_cdf(0.4, -0.2, 1.0) == pytest.approx(stats.norm.cdf(-0.2), abs=1e-12)
    expected = stats.norm.cdf(0.4) + stats.norm.cdf(0.2) - 1
    assert bivariate_normal_cdf(0.4, 0.2, -1.0) == pytest.approx(expected, abs=1e-12)
    assert bivariate_normal_cdf(-0.4, 0.2, -1.0) == 0.0


def test_bivariate_rejects_bad_rho():
    with pytest.raises(ValidationError):
        bivariate_normal_cdf(0.0, 0.0, 1.5)


@settings(max_examples=80, deadline=None)
@given(a=st.floats(-4, 4), b=st.floats(-4, 4), rho=st.floats(-0.98, 0.98))
def test_bivariate_matches_quadrature(a, b, rho):
    assert bivariate_normal_cdf(a, b, rho) == pytest.approx(quad_cdf(a, b, rho), abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), rho=st.floats(-1, 1))
def test_bivariate_symmetric(a, b, rho):
    assert bivariate_normal_cdf(a, b, rho) == pytest.approx(bivariate_normal_cdf(b, a, rho), abs=1e-12)


def test_bivariate_monotone_on_grid():
    grid = np.linspace(-3, 3, 13)
    for rho in (-0.95, -0.5, 0.0, 0.5, 0.95):
        values = [bivariate_normal_cdf(a, 0.5, rho) for a in grid]
        assert np.all(np.diff(values) >= -1e-14)
    values = [bivariate_normal_cdf(0.2, -0.3, rho) for rho in np.linspace(-0.99, 0.99, 41)]
    assert np.all(np.diff(values) >= -1e-14)


@pytest.mark.parametrize('spot, expected', [(90.0, 6.655), (100.0, 11.196), (110.0, 16.929)])
def test_bestof_european_matches_table(spot, expected):
    assert bestof2_european_call(bestof_model(spot), 100.0, 3.0) == pytest.approx(expected, abs=1e-3)


def test_bestof_worthless_second_asset_is_vanilla_call():
    model = GbmModel(spot=[100.0, 100.0], rate=0.05, dividend=[0.1, 10.0], vol=[0.2, 0.05],
                     correlation=np.eye(2))
    vanilla = bs_european_call(100.0, 0.2, 0.05, 0.1, 100.0, 3.0)
    assert bestof2_european_call(model, 100.0, 3.0) == pytest.approx(vanilla, abs=1e-6)


def test_bestof_rejects_single_asset(put_model):
    with pytest.raises(ValidationError, match='J=2'):
        bestof2_european_call(put_model, 100.0, 1.0)


def test_reference_lookups():
    assert reference_price('bestof', 100).bermudan == 13.902
    basket = reference_price('basket', 100)
    assert basket.bermudan == basket.european == 28.007
    assert reference_price('basket', 60).european == 47.481
    assert all(entry.source for entry in load_reference_table().values())


def test_unknown_reference_lists_keys():
    with pytest.raises(ValidationError, match='known: 80, 90, 100, 110, 120'):
        reference_price('put', 95)


def test_missing_reference_table(tmp_path):
    with pytest.raises(ConfigurationError, match='cannot read'):
        load_reference_table(tmp_path / 'none.csv')


def test_european_reference_per_case(put_model, put_schedule):
    put = european_reference(make_payoff('put', 100), put_model, put_schedule)
    assert put == pytest.approx(6.330, abs=1e-3)
    bestof = european_reference(make_payoff('bestof', 100), bestof_model(100.0),
                                ExerciseSchedule.uniform(9, 3.0))
    assert bestof == pytest.approx(11.196, abs=1e-3)
    basket_model = GbmModel.uniform(4, 100.0, 0.0, 0.0, 0.4, 0.5)
    basket = european_reference(make_payoff('basket', 80), basket_model,
                                ExerciseSchedule.uniform(10, 5.0))
    assert basket == 36.352


@pytest.mark.parametrize('case, model, strike, exact', [
    ('put', GbmModel.uniform(1, 100.0, 0.05, 0.02, 0.2), 100.0, 6.330),
    ('bestof', bestof_model(100.0), 100.0, 11.196),
])
def test_european_monte_carlo_agrees(case, model, strike, exact):
    schedule = ExerciseSchedule.uniform(1, 1.0 if case == 'put' else 3.0)
    paths = generate_paths(model, schedule, 200_000, seed=31)
    euro = european_mc_price(paths, make_payoff(case, strike))
    assert abs(euro.price - exact) < 4 * euro.std_error + 1e-3
