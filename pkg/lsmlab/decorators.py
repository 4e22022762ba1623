import sys
from functools import wraps

import click

from lsmlab.exceptions import ConfigurationError, NumericalError, ValidationError

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def exit_codes(f):
    """Maps library errors on CLI commands to exit codes: 2 for bad input, 3 for numerical failure."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (ConfigurationError, ValidationError) as e:
            click.echo(f'error: {e}', err=True)
            sys.exit(EXIT_CONFIG)
        except NumericalError as e:
            click.echo(f'numerical failure: {e}', err=True)
            sys.exit(EXIT_NUMERICAL)
    return decorated_function
