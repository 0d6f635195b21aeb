"""
Supply chain auction simulator - configuration
Environment-driven defaults for runs, analysis and experiments.
SIM_ENV picks the profile (development, production, testing).
"""

import os

from dotenv import load_dotenv

load_dotenv()


class BaseConfig:
    """Shared defaults"""

    PROJECT_NAME = "supplychain-sim"
    PROJECT_VERSION = "1.0.0"

    # Logging
    LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")
    LOG_DIR = os.getenv("LOG_DIR", "")

    # Protocol runs
    EVENT_CAP = int(os.getenv("EVENT_CAP", 10_000_000))
    DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", 0))
    DELTA_BUY = os.getenv("DELTA_BUY", "0.01")
    DELTA_SELL = os.getenv("DELTA_SELL", "0.01")
    DEFAULT_DELAY = os.getenv("DEFAULT_DELAY", "uniform:1,5")

    # Analysis
    EXHAUSTIVE_LIMIT = int(os.getenv("EXHAUSTIVE_LIMIT", 16))
    MAX_OPTIMA = int(os.getenv("MAX_OPTIMA", 64))

    # Experiments
    CALIBRATION_SAMPLES = int(os.getenv("CALIBRATION_SAMPLES", 10_000))
    CALIBRATION_QUANTILE = float(os.getenv("CALIBRATION_QUANTILE", 0.9))
    MAX_DRAWS_PER_INSTANCE = int(os.getenv("MAX_DRAWS_PER_INSTANCE", 1000))
    WORKERS = int(os.getenv("WORKERS", 1))

    # Tests
    FULL_FLEETS = os.getenv("FULL_FLEETS", "0") == "1"


class DevelopmentConfig(BaseConfig):
    """Interactive use"""

    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")


class ProductionConfig(BaseConfig):
    """Long batch studies"""

    WORKERS = int(os.getenv("WORKERS", os.cpu_count() or 1))


class TestingConfig(BaseConfig):
    """Fast defaults for test runs"""

    CALIBRATION_SAMPLES = int(os.getenv("CALIBRATION_SAMPLES", 500))
    EVENT_CAP = int(os.getenv("EVENT_CAP", 1_000_000))


def get_config(env=None):
    """Return the configuration class for an environment"""
    env = env or os.getenv("SIM_ENV", "development")

    configs = {
        "development": DevelopmentConfig,
        "production": ProductionConfig,
        "testing": TestingConfig,
    }

    return configs.get(env, DevelopmentConfig)


Config = get_config()
