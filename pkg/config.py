import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent


class Config:
    LSM_LOG_LEVEL = os.environ.get('LSM_LOG_LEVEL') or 'INFO'
    LSM_BASE_SEED = int(os.environ.get('LSM_BASE_SEED') or 20240601)
    LSM_THREADS = int(os.environ.get('LSM_THREADS') or 1)
    LSM_SCALE = os.environ.get('LSM_SCALE') or 'desk'  # desk | full
    LSM_FLIP_DIAGNOSTICS = (os.environ.get('LSM_FLIP_DIAGNOSTICS') or 'true').lower() in ('1', 'true', 'yes', 'on')
    LSM_LEVERAGE_EPS = float(os.environ.get('LSM_LEVERAGE_EPS') or 1e-10)
    LSM_BINOMIAL_STEPS = int(os.environ.get('LSM_BINOMIAL_STEPS') or 50_000)
    LSM_OUTPUT_DIR = os.environ.get('LSM_OUTPUT_DIR') or str(BASE_DIR / 'output')
    LSM_REFERENCE_TABLE = os.environ.get('LSM_REFERENCE_TABLE')  # None: packaged table


class TestConfig(Config):
    TESTING = True
    LSM_LOG_LEVEL = 'WARNING'
    LSM_THREADS = 1
    LSM_SCALE = 'desk'
    LSM_BINOMIAL_STEPS = 20_000
