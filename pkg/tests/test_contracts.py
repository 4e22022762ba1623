import numpy as np
import pytest
from numpy.testing import assert_allclose

from lsmlab.contracts import (basis_family, basis_row, design_matrix, discounted_payout,
                              make_payoff, undiscounted_payout)
from lsmlab.exceptions import ValidationError
from lsmlab.models import PayoffKind, PayoffSpec


def test_payoffs():
    assert undiscounted_payout(make_payoff('put', 100), [[90.0]])[0] == 10.0
    assert undiscounted_payout(make_payoff('put', 100), [[110.0]])[0] == 0.0
    assert undiscounted_payout(make_payoff('bestof', 100), [[110.0, 95.0]])[0] == 10.0
    assert undiscounted_payout(make_payoff('basket', 100), [[120.0, 100.0, 80.0, 140.0]])[0] == 10.0


def test_discounting():
    value = discounted_payout(make_payoff('put', 100), [[90.0]], 0.5, 0.05)
    assert value[0] == pytest.approx(10.0 * np.exp(-0.025))


def test_basket_weights_must_sum_to_one():
    with pytest.raises(ValidationError, match='sum to 1'):
        PayoffSpec(PayoffKind.BASKET_CALL, 100.0, weights=(0.5, 0.5, 0.5, 0.5))


def test_put_basis_ordering():
    assert basis_family('put', 5).labels == ['1', 'Z', 'S1', 'S1^2', 'S1^3']
    assert basis_family('put', 2).labels == ['1', 'Z']


def test_bestof_basis_ordering():
    assert basis_family('bestof', 4).labels == ['1', 'Z', 'S1', 'S2']
    assert basis_family('bestof', 7).labels[4:] == ['S1^2', 'S1*S2', 'S2^2']
    assert basis_family('bestof', 11).labels[7:] == ['S1^3', 'S1^2*S2', 'S1*S2^2', 'S2^3']


def test_basket_basis_ordering():
    assert basis_family('basket', 6).labels == ['1', 'Z', 'S1', 'S2', 'S3', 'S4']
    assert basis_family('basket', 10).labels[6:] == ['S1^2', 'S2^2', 'S3^2', 'S4^2']
    assert basis_family('basket', 16).labels[10:] == ['S1*S2', 'S1*S3', 'S1*S4', 'S2*S3',
                                                      'S2*S4', 'S3*S4']


@pytest.mark.parametrize('case, M', [('bestof', 5), ('basket', 12), ('put', 1)])
def test_unsupported_basis_size(case, M):
    with pytest.raises(ValidationError):
        basis_family(case, M)


def test_unsupported_size_lists_supported():
    with pytest.raises(ValidationError, match='4, 7, 11'):
        basis_family('bestof', 9)


def test_design_matrix_columns():
    states = np.array([[90.0], [100.0], [110.0]])
    spec = basis_family('put', 4)
    z = undiscounted_payout(make_payoff('put', 100), states)
    X = design_matrix(spec, states, z)
    assert X.shape == (3, 4)
    assert_allclose(X[:, 0], 1.0)
    assert_allclose(X[:, 1], z)
    assert_allclose(X[:, 3], states[:, 0] ** 2)


def test_basis_row_matches_design():
    spec = basis_family('basket', 16)
    states = np.array([[90.0, 110.0, 95.0, 105.0], [80.0, 70.0, 60.0, 50.0]])
    z = np.array([1.5, 0.0])
    X = design_matrix(spec, states, z)
    assert_allclose(basis_row(spec, states[0], z[0]), X[0])
    assert X[0, -1] == pytest.approx(95.0 * 105.0)
