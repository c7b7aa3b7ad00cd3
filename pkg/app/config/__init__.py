# Configuration package

from app.config.settings import settings
from app.config.run_config import RunConfig, load_run_config, parse_run_config

__all__ = ['settings', 'RunConfig', 'load_run_config', 'parse_run_config']
