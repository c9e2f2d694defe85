import logging

from flask import Flask

__version__ = "0.1.0"


def create_app(config_class="config.DevelopmentConfig"):
    app = Flask(__name__)
    app.config.from_object(config_class)

    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger("app").setLevel(app.config["LOG_LEVEL"])
    app.logger.setLevel(app.config["LOG_LEVEL"])

    # register blueprints
    from app.clouds import bp as clouds_bp
    app.register_blueprint(clouds_bp)

    from app.analysis import bp as analysis_bp
    app.register_blueprint(analysis_bp)

    from app.main import bp as main_bp
    app.register_blueprint(main_bp)

    return app
