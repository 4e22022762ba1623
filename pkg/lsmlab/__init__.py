import logging

from flask import Flask

from config import Config


def create_app(config_class=Config):
    app = Flask(__name__)
    app.config.from_object(config_class)

    # module loggers live under 'lsmlab', which Flask's app.logger owns
    app.logger.setLevel(app.config['LSM_LOG_LEVEL'].upper())
    if not app.logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
        app.logger.addHandler(handler)

    # Import and register blueprints
    from lsmlab.routes.api import api
    from lsmlab.routes.commands import commands

    app.register_blueprint(api)
    app.register_blueprint(commands, cli_group=None)

    return app
