
from app.config.settings import settings

__version__ = "0.1.0"
__description__ = "Pose-guided grouping and articulated multi-person tracking"

__all__ = [
    'settings'
]
