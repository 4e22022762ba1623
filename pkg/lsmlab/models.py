from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from lsmlab.exceptions import ValidationError


def _frozen_array(values, dtype=float, ndim=None, name='array'):
    arr = np.array(values, dtype=dtype)  # always a private copy
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f'{name} must be finite')
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f'{name} must be {ndim}-dimensional, got shape {arr.shape}')
    arr.setflags(write=False)
    return arr


# --- Regression Models ---
@dataclass(frozen=True, eq=False)
class RegressionFit:
    beta: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    leverage: np.ndarray
    rank: int
    condition: float = float('nan')  # of the column-equilibrated design

    @property
    def n_samples(self):
        return self.fitted.shape[0]

    @property
    def n_basis(self):
        return self.beta.shape[0]

    def __repr__(self):
        return f"RegressionFit(N={self.n_samples}, M={self.n_basis}, rank={self.rank})"


# --- Market Models ---
@dataclass(frozen=True, eq=False)
class GbmModel:
    spot: np.ndarray
    rate: float
    dividend: np.ndarray
    vol: np.ndarray
    correlation: np.ndarray

    def __post_init__(self):
        spot = _frozen_array(np.atleast_1d(self.spot), ndim=1, name='spot')
        n = spot.shape[0]
        dividend = _frozen_array(np.broadcast_to(self.dividend, (n,)), name='dividend')
        vol = _frozen_array(np.broadcast_to(self.vol, (n,)), name='vol')
        correlation = _frozen_array(np.atleast_2d(self.correlation), ndim=2, name='correlation')
        if np.any(spot <= 0) or not np.all(np.isfinite(spot)):
            raise ValidationError(f'spot must be positive and finite, got {spot}')
        if np.any(vol < 0):
            raise ValidationError(f'vol must be nonnegative, got {vol}')
        if correlation.shape != (n, n):
            raise ValidationError(f'correlation must be {n}x{n}, got {correlation.shape}')
        if not np.allclose(correlation, correlation.T, atol=1e-12):
            raise ValidationError('correlation must be symmetric')
        if not np.allclose(np.diag(correlation), 1.0, atol=1e-12):
            raise ValidationError('correlation must have a unit diagonal')
        object.__setattr__(self, 'spot', spot)
        object.__setattr__(self, 'rate', float(self.rate))
        object.__setattr__(self, 'dividend', dividend)
        object.__setattr__(self, 'vol', vol)
        object.__setattr__(self, 'correlation', correlation)

    @classmethod
    def uniform(cls, n_assets, spot, rate, dividend, vol, rho=0.0):
        """All assets share spot, dividend, vol; every off-diagonal correlation equals rho."""
        correlation = np.full((n_assets, n_assets), float(rho))
        np.fill_diagonal(correlation, 1.0)
        return cls(spot=np.full(n_assets, float(spot)), rate=rate,
                   dividend=dividend, vol=vol, correlation=correlation)

    @property
    def n_assets(self):
        return self.spot.shape[0]

    def forward(self, t):
        return self.spot * np.exp((self.rate - self.dividend) * t)

    def __repr__(self):
        return f"GbmModel(J={self.n_assets}, r={self.rate}, spot={self.spot.tolist()})"


@dataclass(frozen=True, eq=False)
class ExerciseSchedule:
    times: np.ndarray

    def __post_init__(self):
        times = _frozen_array(np.atleast_1d(self.times), ndim=1, name='times')
        if times.size == 0:
            raise ValidationError('schedule needs at least one exercise date')
        if times[0] <= 0:
            raise ValidationError('t0 = 0 is not an exercise time; first date must be positive')
        if np.any(np.diff(times) <= 0):
            raise ValidationError(f'exercise times must be strictly increasing, got {times}')
        object.__setattr__(self, 'times', times)

    @classmethod
    def uniform(cls, n_dates, maturity):
        return cls(maturity * np.arange(1, n_dates + 1) / n_dates)

    @property
    def n_dates(self):
        return self.times.shape[0]

    @property
    def maturity(self):
        return float(self.times[-1])

    def matches(self, other):
        return self.times.shape == other.times.shape and np.array_equal(self.times, other.times)


@dataclass(frozen=True, eq=False)
class PathSet:
    values: np.ndarray  # (N, I, J)
    model: GbmModel
    schedule: ExerciseSchedule
    seed: int
    antithetic: bool
    pool_offset: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise ValidationError(f'path values must be N x I x J, got shape {values.shape}')
        if values.shape[1] != self.schedule.n_dates or values.shape[2] != self.model.n_assets:
            raise ValidationError(
                f'path shape {values.shape} does not match schedule ({self.schedule.n_dates} dates) '
                f'and model ({self.model.n_assets} assets)')
        if self.antithetic and values.shape[0] % 2:
            raise ValidationError('antithetic path sets need an even number of paths')
        if values.flags.writeable:
            values = values.view()
            values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def n_paths(self):
        return self.values.shape[0]

    @property
    def provenance(self):
        return (int(self.seed), int(self.pool_offset), self.n_paths, bool(self.antithetic))

    def __repr__(self):
        n, i, j = self.values.shape
        return f"PathSet(N={n}, I={i}, J={j}, seed={self.seed}, offset={self.pool_offset})"


# --- Contract Models ---
class PayoffKind(str, Enum):
    PUT_SINGLE = 'put_single'
    BESTOF_CALL = 'bestof_call'
    BASKET_CALL = 'basket_call'

    @property
    def case(self):
        return _CASE_NAMES[self]

    @classmethod
    def parse(cls, name):
        """Accepts 'put', 'bestof', 'basket' or the full kind name."""
        key = str(name).strip().lower()
        for kind, short in _CASE_NAMES.items():
            if key in (kind.value, short):
                return kind
        raise ValidationError(f"unknown payoff kind '{name}'; known: put, bestof, basket")


_CASE_NAMES = {
    PayoffKind.PUT_SINGLE: 'put',
    PayoffKind.BESTOF_CALL: 'bestof',
    PayoffKind.BASKET_CALL: 'basket',
}


@dataclass(frozen=True)
class PayoffSpec:
    kind: PayoffKind
    strike: float
    weights: tuple = None  # basket only
    nonnegative: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'kind', PayoffKind.parse(self.kind))
        if not self.strike > 0:
            raise ValidationError(f'strike must be positive, got {self.strike}')
        if self.kind is PayoffKind.BASKET_CALL:
            weights = (0.25,) * 4 if self.weights is None else tuple(float(w) for w in self.weights)
            if abs(sum(weights) - 1.0) > 1e-12:
                raise ValidationError(f'basket weights must sum to 1, got {sum(weights)}')
            object.__setattr__(self, 'weights', weights)


@dataclass(frozen=True)
class BasisTerm:
    kind: str  # constant | payoff | monomial
    exponents: tuple = ()

    @property
    def label(self):
        if self.kind == 'constant':
            return '1'
        if self.kind == 'payoff':
            return 'Z'
        parts = []
        for j, power in enumerate(self.exponents):
            if power == 1:
                parts.append(f'S{j + 1}')
            elif power > 1:
                parts.append(f'S{j + 1}^{power}')
        return '*'.join(parts)


@dataclass(frozen=True)
class BasisSpec:
    case: PayoffKind
    terms: tuple

    @property
    def M(self):
        return len(self.terms)

    @property
    def labels(self):
        return [t.label for t in self.terms]


# --- Engine Models ---
class EstimatorMode(str, Enum):
    LSM = 'LSM'
    LOOLSM = 'LOOLSM'
    LSM2 = 'LSM2'
    EUROPEAN = 'EUROPEAN'

    @classmethod
    def parse(cls, name):
        key = str(name).strip().upper().replace('-', '')
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(
                f"unknown estimator '{name}'; known: {', '.join(m.value for m in cls)}") from None


@dataclass(frozen=True, eq=False)
class PricingResult:
    price: float
    per_path_value: np.ndarray
    std_error: float
    mode: EstimatorMode
    ranks: tuple = ()
    fallback_count: int = 0
    flip_counts: tuple = ()
    mean_leverage: tuple = ()
    provenance: tuple = ()

    def __repr__(self):
        return f"PricingResult({self.mode.value}, price={self.price:.6f}, se={self.std_error:.6f})"


@dataclass(frozen=True, eq=False)
class ExercisePolicy:
    coefficients: tuple  # beta for dates 1..I-1, index 0 is date 1
    basis: BasisSpec


@dataclass(frozen=True, eq=False)
class BiasStatistics:
    mean: float
    per_path: np.ndarray
    std_error: float


# --- Oracle Models ---
@dataclass(frozen=True)
class ReferenceEntry:
    case: str
    key: float
    bermudan: float
    european: float
    source: str


# --- Harness Models ---
CSV_COLUMNS = ['case', 'key', 'estimator', 'M', 'N', 'n_mc', 'mean_offset', 'std', 'se_mean',
               'mean_bias', 'bias_se', 'flips_total', 'min_rank', 'wall_ms']


@dataclass
class ExperimentRecord:
    case: str
    key: float
    estimator: str
    M: int
    N: int
    n_mc: int
    mean_offset: float
    std: float
    se_mean: float
    mean_bias: float = float('nan')
    bias_se: float = float('nan')
    flips_total: int = 0
    min_rank: int = 0
    wall_ms: float = 0.0

    @property
    def m_over_n(self):
        return self.M / self.N


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    slope_se: float = float('nan')
    intercept_se: float = float('nan')
    n_points: int = 0


@dataclass
class ExperimentReport:
    records: list = field(default_factory=list)
    slope_fits: dict = field(default_factory=dict)  # 'case:key' -> SlopeFit
    metadata: dict = field(default_factory=dict)

    def to_frame(self):
        rows = [{col: getattr(rec, col) for col in CSV_COLUMNS} for rec in self.records]
        return pd.DataFrame(rows, columns=CSV_COLUMNS)

    def select(self, estimator=None, key=None, M=None):
        return [r for r in self.records
                if (estimator is None or r.estimator == estimator)
                and (key is None or r.key == key)
                and (M is None or r.M == M)]

    def __repr__(self):
        return f"ExperimentReport({len(self.records)} records, {len(self.slope_fits)} slope fits)"
