import itertools

import numpy as np

from lsmlab.exceptions import ValidationError
from lsmlab.models import BasisSpec, BasisTerm, PayoffKind, PayoffSpec

SUPPORTED_M = {
    PayoffKind.BESTOF_CALL: (4, 7, 11),
    PayoffKind.BASKET_CALL: (6, 10, 16),
}
MIN_PUT_M = 2

_ASSETS = {PayoffKind.PUT_SINGLE: 1, PayoffKind.BESTOF_CALL: 2, PayoffKind.BASKET_CALL: 4}


def n_assets(kind):
    return _ASSETS[PayoffKind.parse(kind)]


def undiscounted_payout(spec, state):
    """Payoff on states of shape (..., J)."""
    state = np.asarray(state, dtype=float)
    if spec.kind is PayoffKind.PUT_SINGLE:
        return np.maximum(spec.strike - state[..., 0], 0.0)
    if spec.kind is PayoffKind.BESTOF_CALL:
        return np.maximum(state.max(axis=-1) - spec.strike, 0.0)
    if spec.kind is PayoffKind.BASKET_CALL:
        return np.maximum(state @ np.asarray(spec.weights) - spec.strike, 0.0)
    raise ValidationError(f'unknown payoff kind {spec.kind!r}')


def discounted_payout(spec, state, t, rate):
    """e^{-rt} times the payoff, discounted to t0 = 0."""
    return np.exp(-rate * t) * undiscounted_payout(spec, state)


def _monomials(n_vars, degree):
    # degree-graded; within a degree the first asset's exponent decreases
    terms = []
    for exponents in itertools.product(range(degree, -1, -1), repeat=n_vars):
        if sum(exponents) == degree:
            terms.append(BasisTerm('monomial', tuple(exponents)))
    return terms


def _family(kind, M):
    head = [BasisTerm('constant'), BasisTerm('payoff')]
    if kind is PayoffKind.PUT_SINGLE:
        return head + [BasisTerm('monomial', (p,)) for p in range(1, M - 1)]
    if kind is PayoffKind.BESTOF_CALL:
        return head + [t for d in (1, 2, 3) for t in _monomials(2, d)]
    # basket: linear, pure squares, then cross terms S_j S_k (j < k)
    linear = [BasisTerm('monomial', tuple(int(k == j) for k in range(4))) for j in range(4)]
    squares = [BasisTerm('monomial', tuple(2 * int(k == j) for k in range(4))) for j in range(4)]
    cross = [BasisTerm('monomial', tuple(int(k in (a, b)) for k in range(4)))
             for a, b in itertools.combinations(range(4), 2)]
    return head + linear + squares + cross


def basis_family(case, M):
    """First M terms of the fixed ordering for the case."""
    kind = PayoffKind.parse(case)
    M = int(M)
    if kind is PayoffKind.PUT_SINGLE:
        if M < MIN_PUT_M:
            raise ValidationError(f'put basis needs M >= {MIN_PUT_M}, got {M}')
    elif M not in SUPPORTED_M[kind]:
        supported = ', '.join(str(m) for m in SUPPORTED_M[kind])
        raise ValidationError(f'unsupported M={M} for {kind.case}; supported: {supported}')
    return BasisSpec(case=kind, terms=tuple(_family(kind, M)[:M]))


def design_matrix(spec, states, z):
    """Rows X(S_n) for states (N, J) and payouts z (N,)."""
    states = np.asarray(states, dtype=float)
    z = np.asarray(z, dtype=float)
    columns = []
    for term in spec.terms:
        if term.kind == 'constant':
            columns.append(np.ones(states.shape[0]))
        elif term.kind == 'payoff':
            columns.append(z)
        else:
            col = np.ones(states.shape[0])
            for j, power in enumerate(term.exponents):
                if power:
                    col = col * states[:, j] ** power
            columns.append(col)
    return np.column_stack(columns)


def basis_row(spec, state, z):
    state = np.asarray(state, dtype=float).reshape(1, -1)
    return design_matrix(spec, state, np.array([z], dtype=float))[0]


def make_payoff(case, strike):
    return PayoffSpec(kind=PayoffKind.parse(case), strike=strike)
