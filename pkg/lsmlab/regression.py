"""Least squares with leverage scores and closed-form leave-one-out predictions.

The solver equilibrates the columns of X (unit Euclidean norm), takes a thin
SVD and truncates singular values below ``max(N, M) * eps * s_max``. Column
scaling leaves the column space, and therefore the fitted values, the hat
matrix diagonal and every leave-one-out quantity, unchanged. For a
rank-deficient X the coefficients are then moved to the minimum-norm solution
in the original coordinates. The N x N hat matrix is never formed: h_n is the
squared row norm of the retained left singular vectors.
"""
import logging

import numpy as np
from scipy import linalg

from lsmlab.exceptions import ValidationError
from lsmlab.models import RegressionFit

logger = logging.getLogger(__name__)

LEVERAGE_EPS = 1e-10


def _validate(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValidationError(f'design matrix must be N x M with N, M >= 1, got shape {X.shape}')
    if y.shape != (X.shape[0],):
        raise ValidationError(f'response must have shape ({X.shape[0]},), got {y.shape}')
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        row, col = bad[0]
        raise ValidationError(f'design matrix has a non-finite entry at row {row}, column {col}')
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise ValidationError(f'response has a non-finite entry at row {bad[0]}')
    if not np.all(X[:, 0] == 1.0):
        row = int(np.flatnonzero(X[:, 0] != 1.0)[0])
        raise ValidationError(f'first design column must be the constant 1 (row {row} differs)')
    return X, y


def fit_least_squares(X, y):
    X, y = _validate(X, y)
    n, m = X.shape

    scale = np.sqrt(np.einsum('ij,ij->j', X, X))
    scale[scale == 0.0] = 1.0
    u, s, vt = linalg.svd(X / scale, full_matrices=False, lapack_driver='gesdd', check_finite=False)

    cutoff = max(n, m) * np.finfo(float).eps * s[0]
    rank = int(np.count_nonzero(s > cutoff))
    if rank == 0:
        zeros = np.zeros(n)
        return RegressionFit(beta=np.zeros(m), fitted=zeros, residuals=y.copy(),
                             leverage=zeros.copy(), rank=0)

    u_r = u[:, :rank]
    beta = (vt[:rank].T @ ((u_r.T @ y) / s[:rank])) / scale
    if rank < m:
        beta = _minimum_norm(beta, vt[:rank], scale)
    fitted = X @ beta
    leverage = np.clip(np.einsum('ij,ij->i', u_r, u_r), 0.0, 1.0)
    condition = float(s[0] / s[rank - 1])
    if rank < m:
        logger.debug('rank-deficient design: rank %d of %d columns', rank, m)
    return RegressionFit(beta=beta, fitted=fitted, residuals=y - fitted,
                         leverage=leverage, rank=rank, condition=condition)


def _minimum_norm(beta, kept_rows, scale):
    """Projects a solution off the null space of X; kept_rows span the row space of X / scale."""
    null = linalg.null_space(kept_rows) / scale[:, None]
    coef, *_ = linalg.lstsq(null, beta, check_finite=False)
    return beta - null @ coef


def singular_leverage(fit, eps_h=LEVERAGE_EPS):
    """Mask of paths whose leave-one-out correction is undefined (1 - h_n < eps_h)."""
    return (1.0 - fit.leverage) < eps_h


def loo_predictions(fit, eps_h=LEVERAGE_EPS):
    """C' = C - h e / (1 - h); flagged paths keep C."""
    flagged = singular_leverage(fit, eps_h)
    one_minus_h = np.where(flagged, 1.0, 1.0 - fit.leverage)
    correction = np.where(flagged, 0.0, fit.leverage * fit.residuals / one_minus_h)
    if flagged.any():
        logger.warning('%d path(s) with leverage within %.0e of 1; kept full-fit prediction',
                       int(flagged.sum()), eps_h)
    return fit.fitted - correction


def loo_residuals(fit, eps_h=LEVERAGE_EPS):
    """e' = e / (1 - h); flagged paths keep e."""
    flagged = singular_leverage(fit, eps_h)
    one_minus_h = np.where(flagged, 1.0, 1.0 - fit.leverage)
    return fit.residuals / one_minus_h
