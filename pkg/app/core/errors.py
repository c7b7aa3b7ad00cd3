"""
Иерархия исключений движка группировки и трекинга поз
"""
from typing import Optional


class PggTrackError(Exception):
    """Base error of the package"""


class InvalidInputError(PggTrackError, ValueError):
    """Некорректные входные данные: формы, индексы, конфигурация"""


class FormatError(PggTrackError):
    """Ошибка разбора контейнера или манифеста"""

    def __init__(self, message: str, offset: int = 0, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        location = f"{path}: " if path else ""
        super().__init__(f"{location}{message} (offset {offset})")


class TrainingDivergedError(PggTrackError):
    """Loss became NaN/inf during toy training"""

    def __init__(self, step: int, last_finite_loss: Optional[float]):
        self.step = step
        self.last_finite_loss = last_finite_loss
        super().__init__(
            f"training diverged at step {step}; last finite loss = {last_finite_loss}"
        )


# Коды выхода CLI
EXIT_OK = 0
EXIT_INVALID_INPUT = 1
EXIT_FORMAT_ERROR = 2
EXIT_DIVERGED = 3


def exit_code_for(error: BaseException) -> int:
    """Maps an exception to the CLI exit code"""
    if isinstance(error, FormatError):
        return EXIT_FORMAT_ERROR
    if isinstance(error, TrainingDivergedError):
        return EXIT_DIVERGED
    return EXIT_INVALID_INPUT
