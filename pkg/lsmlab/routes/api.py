from flask import Blueprint, current_app, jsonify, request
from werkzeug.exceptions import HTTPException

from lsmlab.exceptions import ConfigurationError, NumericalError, ValidationError
from lsmlab.harness import oracle_summary, price_once
from lsmlab.routes.commands import app_defaults
from lsmlab.settings import ExperimentConfig

api = Blueprint('api', __name__)

MAX_API_PATHS = 200_000


@api.app_errorhandler(HTTPException)
def http_error(e):
    return jsonify({'error': e.description}), e.code


def _config(case):
    return ExperimentConfig.from_mapping({'CASE': case}, base=app_defaults())


@api.route('/api/oracle/<case>/<key>')
def get_oracle(case, key):
    try:
        config = _config(case)
        summary = oracle_summary(config, float(key))
    except (ConfigurationError, ValidationError, ValueError) as e:
        return jsonify({'error': str(e)}), 404
    return jsonify(summary)


@api.route('/api/price', methods=['POST'])
def price():
    data = request.get_json(silent=True)
    if not data or 'case' not in data:
        return jsonify({'error': 'case is required'}), 400
    try:
        config = _config(data['case'])
        key = data.get('key', config.exp2_key if config.case == 'bestof' else config.strike)
        n_paths = int(data.get('paths', 10_000))
        if n_paths > MAX_API_PATHS:
            return jsonify({'error': f'paths is limited to {MAX_API_PATHS}'}), 400
        result = price_once(config, float(key), data.get('mode', 'LOOLSM'), n_paths,
                            basis_m=data.get('basis_m'), seed=data.get('seed'),
                            eps_h=current_app.config['LSM_LEVERAGE_EPS'])
    except (ConfigurationError, ValidationError, ValueError, TypeError) as e:
        return jsonify({'error': str(e)}), 400
    except NumericalError as e:
        return jsonify({'error': str(e)}), 422
    return jsonify(result)
