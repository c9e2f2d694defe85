from dotenv import load_dotenv
import os

# Load variables from .env into environment
load_dotenv()


def _env(name, default, cast=str):
    value = os.environ.get(name)
    return cast(value) if value not in (None, "") else default


class Config:
    LOG_LEVEL = _env("EMBLOWUP_LOG_LEVEL", "INFO").upper()
    OUTPUT_DIR = _env("EMBLOWUP_OUTPUT_DIR", "runs")
    THREADS = _env("EMBLOWUP_THREADS", 1, int)

    # analysis defaults, overridable per command
    EPSILON = _env("EMBLOWUP_EPSILON", 1.0, float)
    V_MIN = _env("EMBLOWUP_V_MIN", 50, int)
    GRID_SIZE = _env("EMBLOWUP_GRID_SIZE", 32, int)
    MERGE_ANGLE_DEG = _env("EMBLOWUP_MERGE_ANGLE_DEG", 20.0, float)
    K_MAX = _env("EMBLOWUP_K_MAX", 8, int)


class DevelopmentConfig(Config):
    DEBUG = True


class TestingConfig(Config):
    TESTING = True
    LOG_LEVEL = "WARNING"
    THREADS = 1


class ProductionConfig(Config):
    DEBUG = False
    TESTING = False
