"""
Венгерский алгоритм (Munkres) с потенциалами для прямоугольных матриц
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..core.errors import InvalidInputError

INCOMPARABLE_COST = 1e9


@dataclass(frozen=True)
class Assignment:
    """Partial matching rows → columns; every row and column used at most once"""
    pairs: Tuple[Tuple[int, int], ...]
    shape: Tuple[int, int]
    total_cost: float = 0.0

    def __post_init__(self):
        rows = [r for r, _ in self.pairs]
        cols = [c for _, c in self.pairs]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise InvalidInputError("assignment uses a row or column twice")

    def as_matrix(self) -> np.ndarray:
        """Binary z with row and column sums ≤ 1"""
        z = np.zeros(self.shape, dtype=np.uint8)
        for r, c in self.pairs:
            z[r, c] = 1
        return z

    def row_to_col(self) -> Dict[int, int]:
        return dict(self.pairs)

    def __len__(self):
        return len(self.pairs)


def _sanitize(cost: np.ndarray) -> np.ndarray:
    if np.any(np.isnan(cost)):
        raise InvalidInputError("cost matrix contains NaN")
    finite = np.isfinite(cost)
    if np.all(finite):
        return cost
    scale = float(np.abs(cost[finite]).max()) if finite.any() else 1.0
    big = max(INCOMPARABLE_COST, 1e3 * (scale + 1.0) * max(cost.shape))
    return np.where(finite, cost, big)


def _solve_rows_le_cols(a: np.ndarray) -> List[int]:
    """Row i → column, n ≤ m; potentials u, v over 1-based indices"""
    n, m = a.shape
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [math.inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = math.inf
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        # разворачиваем чередующуюся цепочку
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    result = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            result[p[j] - 1] = j - 1
    return result


def munkres_solve(cost) -> Assignment:
    """
    Minimum-cost assignment, complete on the smaller side.

    Non-finite entries stand for incomparable pairs and are replaced by a
    large constant before solving; total_cost is reported on that basis.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise InvalidInputError(f"cost matrix must be 2-D, got shape {cost.shape}")
    rows, cols = cost.shape
    if rows == 0 or cols == 0:
        return Assignment((), (rows, cols), 0.0)
    a = _sanitize(cost)
    if rows <= cols:
        match = _solve_rows_le_cols(a)
        pairs = tuple((r, c) for r, c in enumerate(match))
    else:
        match = _solve_rows_le_cols(a.T)
        pairs = tuple(sorted((r, c) for c, r in enumerate(match)))
    total = float(sum(a[r, c] for r, c in pairs))
    return Assignment(pairs, (rows, cols), total)
