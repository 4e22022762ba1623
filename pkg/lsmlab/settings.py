"""Experiment configuration: per-case defaults, scale presets and KEY=VALUE files."""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from dotenv import dotenv_values

from lsmlab.contracts import basis_family, make_payoff, n_assets
from lsmlab.exceptions import ConfigurationError, LsmLabError
from lsmlab.models import EstimatorMode, ExerciseSchedule, GbmModel, PayoffKind
from lsmlab.utils import parse_bool, parse_list

logger = logging.getLogger(__name__)

DEFAULT_BASE_SEED = 20240601

# key is the strike for put and basket, the common initial spot for bestof
CASE_DEFAULTS = {
    'put': dict(keys=[80.0, 90.0, 100.0, 110.0, 120.0], spot=100.0, strike=100.0, rate=0.05,
                dividend=0.02, vol=0.2, correlation=0.0, n_dates=5, maturity=1.0,
                basis_m=5, m_list=[4, 8, 12], exp2_key=80.0),
    'bestof': dict(keys=[90.0, 100.0, 110.0], spot=100.0, strike=100.0, rate=0.05,
                   dividend=0.1, vol=0.2, correlation=0.0, n_dates=9, maturity=3.0,
                   basis_m=11, m_list=[4, 7, 11], exp2_key=100.0),
    'basket': dict(keys=[60.0, 80.0, 100.0, 120.0, 140.0], spot=100.0, strike=100.0, rate=0.0,
                   dividend=0.0, vol=0.4, correlation=0.5, n_dates=10, maturity=5.0,
                   basis_m=16, m_list=[6, 10, 16], exp2_key=100.0),
}

SCALES = {
    'desk': dict(n_paths=40_000, n_mc=20, pool_size=144_000, n_mc_list=[10, 40, 120]),
    'full': dict(n_paths=40_000, n_mc=100, pool_size=1_440_000,
                 n_mc_list=[10, 20, 30, 40, 60, 120, 240, 720]),
}
SCALE_ALIASES = {'paper': 'full'}

# file key -> (field, parser)
_FILE_KEYS = {
    'CASE': ('case', str),
    'SCALE': ('scale', str),
    'KEYS': ('keys', lambda v: parse_list(v, float, 'KEYS')),
    'ESTIMATORS': ('estimators', lambda v: [EstimatorMode.parse(m) for m in parse_list(v, str, 'ESTIMATORS')]),
    'N_PATHS': ('n_paths', int),
    'N_MC': ('n_mc', int),
    'BASIS_M': ('basis_m', int),
    'M_LIST': ('m_list', lambda v: parse_list(v, int, 'M_LIST')),
    'N_MC_LIST': ('n_mc_list', lambda v: parse_list(v, int, 'N_MC_LIST')),
    'POOL_SIZE': ('pool_size', int),
    'POOL_FILE': ('pool_file', Path),
    'BASE_SEED': ('base_seed', int),
    'CONTROL_VARIATE': ('control_variate', lambda v: parse_bool(v, 'CONTROL_VARIATE')),
    'ANTITHETIC': ('antithetic', lambda v: parse_bool(v, 'ANTITHETIC')),
    'RECORD_WALL_TIME': ('record_wall_time', lambda v: parse_bool(v, 'RECORD_WALL_TIME')),
    'THREADS': ('threads', int),
    'SPOT': ('spot', float),
    'STRIKE': ('strike', float),
    'RATE': ('rate', float),
    'DIVIDEND': ('dividend', float),
    'VOL': ('vol', float),
    'CORRELATION': ('correlation', float),
    'N_DATES': ('n_dates', int),
    'MATURITY': ('maturity', float),
    'EXP2_KEY': ('exp2_key', float),
    'OUT': ('out', Path),
    'REFERENCE_TABLE': ('reference_table', Path),
}


@dataclass
class ExperimentConfig:
    case: str
    keys: list
    spot: float
    strike: float
    rate: float
    dividend: float
    vol: float
    correlation: float
    n_dates: int
    maturity: float
    basis_m: int
    m_list: list
    exp2_key: float
    n_paths: int
    n_mc: int
    pool_size: int
    n_mc_list: list
    scale: str = 'desk'
    estimators: list = field(default_factory=lambda: [EstimatorMode.LSM, EstimatorMode.LSM2,
                                                      EstimatorMode.LOOLSM])
    base_seed: int = DEFAULT_BASE_SEED
    control_variate: bool = None  # None: off for experiment 1, on for experiment 2
    antithetic: bool = True
    record_wall_time: bool = False
    threads: int = 1
    pool_file: Path = None
    out: Path = None
    reference_table: Path = None  # None: packaged table

    @classmethod
    def defaults(cls, case, scale='desk'):
        case = PayoffKind.parse(case).case
        scale = SCALE_ALIASES.get(scale, scale)
        if scale not in SCALES:
            known = ', '.join([*SCALES, *SCALE_ALIASES])
            raise ConfigurationError(f"unknown scale '{scale}'; known: {known}")
        params = {k: (list(v) if isinstance(v, list) else v) for k, v in CASE_DEFAULTS[case].items()}
        return cls(case=case, scale=scale, **params, **SCALES[scale]).validate()

    @classmethod
    def from_mapping(cls, values, scale=None, base=None, **overrides):
        """Builds a config from file-style keys layered over base; explicit keys win over the scale preset."""
        values = {**(base or {}), **values}
        values = {str(k).strip().upper(): v for k, v in values.items() if v is not None}
        unknown = sorted(set(values) - set(_FILE_KEYS))
        if unknown:
            raise ConfigurationError(f"unknown experiment key(s): {', '.join(unknown)}")
        if 'CASE' not in values:
            raise ConfigurationError('experiment config needs CASE (put, bestof or basket)')
        try:
            case = PayoffKind.parse(values['CASE']).case
        except LsmLabError as e:
            raise ConfigurationError(f'CASE: {e}') from None

        config = cls.defaults(case, scale or values.get('SCALE', 'desk'))
        changes = {}
        for key, raw in values.items():
            if key in ('CASE', 'SCALE'):
                continue
            name, parse = _FILE_KEYS[key]
            try:
                parsed = parse(raw)
            except (ValueError, LsmLabError) as e:
                raise ConfigurationError(f"{key}: cannot parse '{raw}' ({e})") from None
            if parsed is not None:
                changes[name] = parsed
        changes.update({k: v for k, v in overrides.items() if v is not None})
        return replace(config, **changes).validate()

    @classmethod
    def from_file(cls, path, scale=None, base=None, **overrides):
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f'experiment config {path} does not exist')
        values = dotenv_values(path)
        logger.info('loaded experiment config %s (%d keys)', path, len(values))
        return cls.from_mapping(values, scale=scale, base=base, **overrides)

    def validate(self):
        """Checks cross-field constraints; returns self."""
        def fail(message):
            raise ConfigurationError(f'{self.case}: {message}')

        if not self.keys:
            fail('KEYS is empty')
        if self.n_paths < 2 or self.n_mc < 1 or self.pool_size < 2 or self.threads < 1:
            fail('N_PATHS, POOL_SIZE must be >= 2 and N_MC, THREADS >= 1')
        if self.antithetic and self.n_paths % 2:
            fail(f'N_PATHS={self.n_paths} must be even with antithetic sampling')
        for n_mc in self.n_mc_list:
            if n_mc < 1 or self.pool_size % n_mc:
                fail(f'POOL_SIZE={self.pool_size} is not divisible by n_mc={n_mc}')
            if self.antithetic and (self.pool_size // n_mc) % 2:
                fail(f'sets of {self.pool_size // n_mc} paths would split antithetic pairs')
        for M in [self.basis_m, *self.m_list]:
            try:
                basis_family(self.case, M)
            except LsmLabError as e:
                fail(str(e))
        for mode in self.estimators:
            if mode is EstimatorMode.EUROPEAN:
                fail('ESTIMATORS lists LSM, LSM2 and LOOLSM; the European price is always reported')
        if self.n_dates < 1 or self.maturity <= 0:
            fail('N_DATES must be >= 1 and MATURITY positive')
        if abs(self.correlation) > 1:
            fail(f'CORRELATION={self.correlation} outside [-1, 1]')
        return self

    @property
    def schedule(self):
        return ExerciseSchedule.uniform(self.n_dates, self.maturity)

    def model_for(self, key):
        spot = key if self.case == 'bestof' else self.spot
        return GbmModel.uniform(n_assets(self.case), spot, self.rate, self.dividend,
                                self.vol, self.correlation)

    def payoff_for(self, key):
        strike = self.strike if self.case == 'bestof' else key
        return make_payoff(self.case, strike)

    def as_metadata(self):
        return {
            'case': self.case, 'scale': self.scale, 'keys': self.keys, 'spot': self.spot,
            'strike': self.strike, 'rate': self.rate, 'dividend': self.dividend, 'vol': self.vol,
            'correlation': self.correlation, 'n_dates': self.n_dates, 'maturity': self.maturity,
            'estimators': [m.value for m in self.estimators], 'base_seed': self.base_seed,
            'antithetic': self.antithetic,
        }
