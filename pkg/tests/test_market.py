import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from lsmlab.contracts import make_payoff
from lsmlab.engine import european_mc_price
from lsmlab.exceptions import ConfigurationError, NumericalError, ValidationError
from lsmlab.market import (correlation_factor, dump_paths, generate_paths, load_paths,
                           split_pool, standard_normals)
from lsmlab.models import ExerciseSchedule, GbmModel


@pytest.fixture
def basket_model():
    return GbmModel.uniform(4, 100.0, 0.0, 0.0, 0.4, 0.5)


def test_same_seed_same_paths(put_model, put_schedule):
    a = generate_paths(put_model, put_schedule, 100, seed=5)
    b = generate_paths(put_model, put_schedule, 100, seed=5)
    c = generate_paths(put_model, put_schedule, 100, seed=6)
    assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_offset_slice_matches_pool(put_model, put_schedule):
    pool = generate_paths(put_model, put_schedule, 40, seed=3)
    part = generate_paths(put_model, put_schedule, 10, seed=3, path_offset=20)
    assert_array_equal(part.values, pool.values[20:30])
    assert part.pool_offset == 20


def test_threads_do_not_change_paths(put_model, put_schedule):
    n = 2 * ((1 << 15) + 2)
    single = generate_paths(put_model, put_schedule, n, seed=8)
    threaded = generate_paths(put_model, put_schedule, n, seed=8, threads=3)
    assert_array_equal(single.values, threaded.values)


def test_antithetic_pairs_mirror(put_model, put_schedule):
    paths = generate_paths(put_model, put_schedule, 200, seed=2)
    t = put_schedule.times
    centre = np.log(100.0) + (0.05 - 0.02 - 0.5 * 0.2 ** 2) * t
    log_s = np.log(paths.values[..., 0])
    assert_allclose(log_s[0::2] + log_s[1::2], 2 * centre, atol=1e-10)


def test_zero_vol_is_deterministic(put_schedule):
    model = GbmModel.uniform(1, 100.0, 0.05, 0.02, 0.0)
    paths = generate_paths(model, put_schedule, 6, seed=1)
    expected = 100.0 * np.exp(0.03 * put_schedule.times)
    assert_allclose(paths.values[..., 0], np.tile(expected, (6, 1)), rtol=1e-13)


def test_terminal_mean_is_forward(put_model, put_schedule):
    paths = generate_paths(put_model, put_schedule, 100_000, seed=21)
    s_t = paths.values[:, -1, 0]
    forward = float(put_model.forward(1.0)[0])
    assert abs(s_t.mean() - forward) < 4 * s_t.std() / np.sqrt(s_t.size)


def test_log_returns_are_correlated(basket_model):
    schedule = ExerciseSchedule.uniform(2, 1.0)
    paths = generate_paths(basket_model, schedule, 20_000, seed=4, antithetic=False)
    returns = np.log(paths.values[:, 0, :])
    corr = np.corrcoef(returns.T)
    off_diagonal = corr[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off_diagonal - 0.5) < 0.03)


def test_standard_normals_moments():
    z = standard_normals(99, np.arange(200_000, dtype=np.uint64))
    assert np.all(np.isfinite(z))
    assert abs(z.mean()) < 0.01
    assert z.std() == pytest.approx(1.0, abs=0.01)


def test_semidefinite_correlation_factor():
    rho = np.ones((3, 3))
    factor = correlation_factor(rho)
    assert_allclose(factor @ factor.T, rho, atol=1e-12)


def test_indefinite_correlation_rejected():
    with pytest.raises(NumericalError, match='semidefinite'):
        correlation_factor(np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]]))


def test_odd_antithetic_count_rejected(put_model, put_schedule):
    with pytest.raises(ValidationError, match='even'):
        generate_paths(put_model, put_schedule, 7, seed=1)


def test_split_pool_views(put_model, put_schedule):
    pool = generate_paths(put_model, put_schedule, 120, seed=9)
    sets = split_pool(pool, 3)
    assert [s.pool_offset for s in sets] == [0, 40, 80]
    assert_array_equal(np.concatenate([s.values for s in sets]), pool.values)
    assert len({s.provenance for s in sets}) == 3
    assert split_pool(pool, 1)[0] is pool


def test_split_pool_rejects_uneven(put_model, put_schedule):
    pool = generate_paths(put_model, put_schedule, 120, seed=9)
    with pytest.raises(ValidationError):
        split_pool(pool, 7)
    with pytest.raises(ValidationError, match='antithetic'):
        split_pool(pool, 40)


def test_dump_and_load(tmp_path, basket_model):
    schedule = ExerciseSchedule.uniform(10, 5.0)
    paths = generate_paths(basket_model, schedule, 64, seed=17, path_offset=32)
    target = tmp_path / 'pools' / 'basket.bin'
    dump_paths(paths, target)
    loaded = load_paths(target, basket_model)
    assert_array_equal(loaded.values, paths.values)
    assert loaded.provenance == paths.provenance
    assert loaded.schedule.matches(schedule)


def test_load_rejects_asset_mismatch(tmp_path, basket_model, put_model):
    schedule = ExerciseSchedule.uniform(3, 1.0)
    target = tmp_path / 'basket.bin'
    dump_paths(generate_paths(basket_model, schedule, 8, seed=1), target)
    with pytest.raises(ConfigurationError, match='assets'):
        load_paths(target, put_model)


def test_load_rejects_truncated_file(tmp_path, put_model, put_schedule):
    target = tmp_path / 'put.bin'
    dump_paths(generate_paths(put_model, put_schedule, 8, seed=1), target)
    target.write_bytes(target.read_bytes()[:-8])
    with pytest.raises(ConfigurationError, match='expected'):
        load_paths(target, put_model)


def test_load_missing_file(tmp_path, put_model):
    with pytest.raises(ConfigurationError, match='cannot read'):
        load_paths(tmp_path / 'missing.bin', put_model)


def test_antithetic_pairs_reduce_european_variance(put_model):
    schedule = ExerciseSchedule.uniform(1, 1.0)
    payoff = make_payoff('put', 100)
    paired = european_mc_price(generate_paths(put_model, schedule, 20_000, seed=8, antithetic=True), payoff)
    plain = european_mc_price(generate_paths(put_model, schedule, 20_000, seed=8, antithetic=False), payoff)
    assert paired.std_error ** 2 <= plain.std_error ** 2
    assert abs(paired.price - plain.price) < 4 * plain.std_error
