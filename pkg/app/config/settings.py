import os
from typing import Optional
from dotenv import load_dotenv

# Загружаем переменные окружения из .env файла
load_dotenv('config.env')


def _env_bool(name: str, default: str = 'false') -> bool:
    return os.getenv(name, default).lower() == 'true'


class Settings:
    """Process-level settings configuration"""

    # Base directory
    BASE_DIR: str = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    CONFIG_DIR: str = os.path.join(BASE_DIR, 'app', 'config')

    # Logging
    LOG_LEVEL: str = os.getenv('PGGTRACK_LOG_LEVEL', 'INFO')
    QUIET: bool = _env_bool('PGGTRACK_QUIET')

    # Fan-out width for multi-sequence evaluation
    WORKERS: int = int(os.getenv('PGGTRACK_WORKERS', '1'))

    # Paths
    CONFIG_PATH: Optional[str] = os.getenv('PGGTRACK_CONFIG_PATH')
    SKELETON_PATH: str = os.getenv('PGGTRACK_SKELETON_PATH', os.path.join(CONFIG_DIR, 'skeleton.yml'))
    PRESETS_PATH: str = os.getenv('PGGTRACK_PRESETS_PATH', os.path.join(CONFIG_DIR, 'presets.yml'))

    # Container format
    CONTAINER_VERSION: int = 1

settings = Settings()
