"""
Проверка градиентов центральными конечными разностями
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from ..core.errors import InvalidInputError
from .tape import DualValue, Tape

logger = logging.getLogger(__name__)

LossBuilder = Callable[[Tape, DualValue], DualValue]


@dataclass
class GradCheckReport:
    """Результат проверки одного лосса"""
    max_relative_error: float
    analytic: np.ndarray
    numeric: np.ndarray
    excluded: List[int] = field(default_factory=list)

    @property
    def checked(self) -> int:
        return self.analytic.size - len(self.excluded)

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance

    def to_dict(self):
        return {
            'max_relative_error': self.max_relative_error,
            'checked': self.checked,
            'excluded': len(self.excluded),
        }


def _evaluate(f: LossBuilder, x: np.ndarray) -> float:
    tape = Tape()
    value = f(tape, tape.leaf(x))
    return float(np.asarray(value.value).reshape(-1)[0])


def analytic_gradient(f: LossBuilder, x: np.ndarray) -> np.ndarray:
    tape = Tape()
    leaf = tape.leaf(x)
    root = f(tape, leaf)
    tape.backward(root)
    return leaf.grad


def finite_difference_check(f: LossBuilder, x: np.ndarray, step: float = 1e-4,
                            kink_tol: float = 1e-2, floor: float = 1e-6) -> GradCheckReport:
    """
    Compares backward() against central differences coordinate by coordinate.

    A coordinate is excluded as a kink when the one-sided slopes disagree by
    more than kink_tol relative to their magnitude.
    """
    if step <= 0:
        raise InvalidInputError("finite difference step must be positive")
    x = np.array(x, dtype=np.float64)
    analytic = analytic_gradient(f, x)
    numeric = np.zeros_like(x)
    f0 = _evaluate(f, x)
    excluded: List[int] = []
    worst = 0.0

    shifted = x.copy()
    flat = shifted.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        f_plus = _evaluate(f, shifted)
        flat[i] = original - step
        f_minus = _evaluate(f, shifted)
        flat[i] = original

        central = (f_plus - f_minus) / (2 * step)
        numeric.reshape(-1)[i] = central
        slope_fwd = (f_plus - f0) / step
        slope_bwd = (f0 - f_minus) / step
        if abs(slope_fwd - slope_bwd) > kink_tol * max(abs(slope_fwd), abs(slope_bwd), 1.0):
            excluded.append(i)
            continue

        a = analytic.reshape(-1)[i]
        error = abs(a - central) / max(abs(a), abs(central), floor)
        worst = max(worst, error)

    logger.debug(f"[GRADCHECK] {flat.size} coords, {len(excluded)} kinks, max rel err {worst:.3e}")
    return GradCheckReport(worst, analytic, numeric, excluded)
