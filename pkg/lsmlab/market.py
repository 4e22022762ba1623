"""Exact correlated GBM simulation on the exercise schedule.

Random numbers come from SplitMix64 used as a counter-based generator: the
draw for (row, date, asset) is the SplitMix64 output at stream position
``(row * I + date) * J + asset`` of the stream keyed by the mixed seed, where
``row`` is the absolute path index (or the antithetic pair index). A path is
therefore reproducible on its own, in any order, on any number of threads.
Uniforms use the top 53 bits at cell midpoints and are mapped to normals by
the inverse normal CDF, so an antithetic partner is the exact negation.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy import linalg, special

from lsmlab.exceptions import ConfigurationError, NumericalError, ValidationError
from lsmlab.models import ExerciseSchedule, PathSet

logger = logging.getLogger(__name__)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_CHUNK_ROWS = 1 << 15
_PSD_TOL = 1e-10
_DIAG_FLOOR = 1e-12


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _stream_key(seed):
    with np.errstate(over='ignore'):
        return _mix64(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)


def standard_normals(seed, counters):
    """Standard normal draws at the given stream positions (uint64 array)."""
    with np.errstate(over='ignore'):
        z = _mix64(_stream_key(seed) + (counters + np.uint64(1)) * _GOLDEN)
    uniforms = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return special.ndtri(uniforms)


def correlation_factor(correlation):
    """Lower-triangular L with L @ L.T == correlation."""
    rho = np.asarray(correlation, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f'correlation must be square, got shape {rho.shape}')
    if not np.allclose(rho, rho.T, atol=1e-12) or not np.allclose(np.diag(rho), 1.0, atol=1e-12):
        raise ValidationError('correlation must be symmetric with a unit diagonal')
    try:
        return linalg.cholesky(rho, lower=True)
    except linalg.LinAlgError:
        pass

    # semidefinite case: zero out columns whose pivot falls under the floor
    n = rho.shape[0]
    factor = np.zeros_like(rho)
    for j in range(n):
        pivot = rho[j, j] - factor[j, :j] @ factor[j, :j]
        if pivot < -_PSD_TOL:
            raise NumericalError(f'correlation matrix is not positive semidefinite (pivot {pivot:.3e} at {j})')
        if pivot <= _DIAG_FLOOR:
            continue
        factor[j, j] = np.sqrt(pivot)
        factor[j + 1:, j] = (rho[j + 1:, j] - factor[j + 1:, :j] @ factor[j, :j]) / factor[j, j]
    if not np.allclose(factor @ factor.T, rho, atol=1e-8):
        raise NumericalError('correlation matrix is not positive semidefinite')
    logger.debug('correlation is singular; used semidefinite factorization')
    return factor


def generate_paths(model, schedule, n_paths, seed, antithetic=True, path_offset=0, threads=1):
    """Simulate n_paths paths; path_offset places them inside a larger pool."""
    n_paths, path_offset = int(n_paths), int(path_offset)
    if n_paths < 1:
        raise ValidationError(f'n_paths must be positive, got {n_paths}')
    if antithetic and (n_paths % 2 or path_offset % 2):
        raise ValidationError('antithetic sampling needs an even n_paths and path_offset')

    factor = correlation_factor(model.correlation)
    n_dates, n_assets = schedule.n_dates, model.n_assets
    dt = np.diff(np.concatenate([[0.0], schedule.times]))
    drift = np.outer(dt, model.rate - model.dividend - 0.5 * model.vol ** 2)
    shock = np.outer(np.sqrt(dt), model.vol)
    log_spot = np.log(model.spot)

    n_rows = n_paths // 2 if antithetic else n_paths
    first_row = path_offset // 2 if antithetic else path_offset
    values = np.empty((n_paths, n_dates, n_assets))
    cell = (np.arange(n_dates, dtype=np.uint64)[:, None] * np.uint64(n_assets)
            + np.arange(n_assets, dtype=np.uint64)[None, :])

    def fill(start):
        stop = min(start + _CHUNK_ROWS, n_rows)
        rows = np.arange(first_row + start, first_row + stop, dtype=np.uint64)
        counters = rows[:, None, None] * np.uint64(n_dates * n_assets) + cell[None]
        z = standard_normals(seed, counters) @ factor.T
        plus = log_spot + np.cumsum(drift + shock * z, axis=1)
        if antithetic:
            minus = log_spot + np.cumsum(drift - shock * z, axis=1)
            values[2 * start:2 * stop:2] = np.exp(plus)
            values[2 * start + 1:2 * stop:2] = np.exp(minus)
        else:
            values[start:stop] = np.exp(plus)

    starts = range(0, n_rows, _CHUNK_ROWS)
    if threads > 1 and n_rows > _CHUNK_ROWS:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)

    logger.debug('generated %d paths (offset %d, seed %d, antithetic=%s)',
                 n_paths, path_offset, seed, antithetic)
    return PathSet(values=values, model=model, schedule=schedule, seed=int(seed),
                   antithetic=bool(antithetic), pool_offset=path_offset)


def split_pool(pool, n_sets):
    """Contiguous, disjoint blocks of the pool, in pool order."""
    n_sets = int(n_sets)
    if n_sets < 1 or pool.n_paths % n_sets:
        raise ValidationError(f'{n_sets} sets do not divide a pool of {pool.n_paths} paths')
    if n_sets == 1:
        return [pool]
    size = pool.n_paths // n_sets
    if pool.antithetic and size % 2:
        raise ValidationError(f'sets of {size} paths would split antithetic pairs')
    return [PathSet(values=pool.values[k * size:(k + 1) * size], model=pool.model,
                    schedule=pool.schedule, seed=pool.seed, antithetic=pool.antithetic,
                    pool_offset=pool.pool_offset + k * size)
            for k in range(n_sets)]


# Dump layout (little-endian): uint64 {N, I, J, seed, antithetic, pool_offset},
# float64 times[I], float64 values[N, I, J] row-major.
_HEADER = np.dtype('<u8')
_FLOAT = np.dtype('<f8')


def dump_paths(paths, path):
    path = Path(path)
    n, i, j = paths.values.shape
    header = np.array([n, i, j, paths.seed, int(paths.antithetic), paths.pool_offset], dtype=_HEADER)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('wb') as f:
            f.write(header.tobytes())
            f.write(paths.schedule.times.astype(_FLOAT).tobytes())
            f.write(np.ascontiguousarray(paths.values, dtype=_FLOAT).tobytes())
    except OSError as e:
        raise ConfigurationError(f'cannot write path dump {path}: {e}') from e
    logger.info('dumped %d paths to %s', n, path)


def load_paths(path, model):
    """Reads a dump; the model is not stored and must match the dumped asset count."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigurationError(f'cannot read path dump {path}: {e}') from e
    if len(raw) < 6 * _HEADER.itemsize:
        raise ConfigurationError(f'{path}: truncated header')
    n, i, j, seed, antithetic, offset = (int(v) for v in np.frombuffer(raw, _HEADER, count=6))
    expected = 6 * _HEADER.itemsize + (i + n * i * j) * _FLOAT.itemsize
    if len(raw) != expected:
        raise ConfigurationError(f'{path}: expected {expected} bytes for N={n}, I={i}, J={j}, got {len(raw)}')
    if j != model.n_assets:
        raise ConfigurationError(f'{path}: dump has {j} assets, model has {model.n_assets}')
    times = np.frombuffer(raw, _FLOAT, count=i, offset=6 * _HEADER.itemsize)
    values = np.frombuffer(raw, _FLOAT, count=n * i * j,
                           offset=6 * _HEADER.itemsize + i * _FLOAT.itemsize).reshape(n, i, j)
    return PathSet(values=values.astype(float), model=model, schedule=ExerciseSchedule(times.copy()),
                   seed=seed, antithetic=bool(antithetic), pool_offset=offset)
