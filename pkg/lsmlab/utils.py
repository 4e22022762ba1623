import hashlib
import logging
import time
from contextlib import contextmanager

import numpy as np

from lsmlab.exceptions import ConfigurationError


@contextmanager
def log_timing(logger, label, level=logging.DEBUG):
    """Logs the wall time of the block; the yielded dict holds it in 'ms' afterwards."""
    timer = {'ms': 0.0}
    start = time.perf_counter()
    try:
        yield timer
    finally:
        timer['ms'] = (time.perf_counter() - start) * 1e3
        logger.log(level, '%s took %.1f ms', label, timer['ms'])


def derive_seed(base_seed, *parts):
    """base_seed XOR a stable 64-bit hash of parts, e.g. derive_seed(7, 'put', 3, 'policy')."""
    text = '/'.join(str(p) for p in parts).encode()
    digest = hashlib.blake2b(text, digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, 'little')) & 0xFFFFFFFFFFFFFFFF


def parse_list(text, cast=float, name='value'):
    """Parses '80, 90,100' into [80.0, 90.0, 100.0]. Returns None if empty."""
    if text is None:
        return None
    items = [item.strip() for item in str(text).split(',') if item.strip()]
    if not items:
        return None
    try:
        return [cast(item) for item in items]
    except ValueError:
        raise ConfigurationError(f"{name}: cannot parse '{text}' as a list of {cast.__name__}") from None


def parse_bool(text, name='value'):
    clean = str(text).strip().lower()
    if clean in ('1', 'true', 'yes', 'on'):
        return True
    if clean in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigurationError(f"{name}: expected true/false, got '{text}'")


def format_key(key):
    """Formats 100.0 as '100' and 0.5 as '0.5'."""
    return f'{float(key):g}'


def pair_means(values, antithetic):
    values = np.asarray(values, dtype=float)
    if antithetic:
        return 0.5 * (values[0::2] + values[1::2])
    return values


def standard_error(values, antithetic=False):
    """Sample std / sqrt(count), over antithetic pair means when paired."""
    samples = pair_means(values, antithetic)
    if samples.size < 2:
        return float('nan')
    return float(np.std(samples, ddof=1) / np.sqrt(samples.size))
