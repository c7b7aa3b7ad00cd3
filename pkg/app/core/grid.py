"""
Плотные 2-D поля на сетке изображения

Row-major layout, origin at the top-left corner, x grows rightwards and
y grows downwards. Fields are sampled at integer pixel centers; keypoints
with continuous coordinates are read through nearest-pixel lookup
(bilinear sampling is available behind a flag).
"""
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import InvalidInputError

PointArray = Union[np.ndarray, Sequence[Tuple[float, float]]]


@dataclass(frozen=True)
class GridShape:
    """Размер плоскости изображения W×H"""
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise InvalidInputError(f"grid shape must be at least 1x1, got {self.width}x{self.height}")
        object.__setattr__(self, 'width', int(self.width))
        object.__setattr__(self, 'height', int(self.height))

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def array_shape(self) -> Tuple[int, int]:
        """numpy shape (rows, cols)"""
        return (self.height, self.width)

    def contains(self, x: float, y: float) -> bool:
        return 0 <= x <= self.width - 1 and 0 <= y <= self.height - 1

    @classmethod
    def parse(cls, text: str) -> 'GridShape':
        """Parses 'WxH'"""
        try:
            w, h = text.lower().split('x')
            return cls(int(w), int(h))
        except ValueError as e:
            raise InvalidInputError(f"bad grid shape '{text}', expected WxH") from e

    def to_dict(self):
        return {'width': self.width, 'height': self.height}


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=np.float64, copy=True)
    values.setflags(write=False)
    return values


def nearest_pixels(points: PointArray, shape: GridShape) -> Tuple[np.ndarray, np.ndarray]:
    """Индексы ближайших пикселей (col, row) для непрерывных координат"""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    cols = np.floor(pts[:, 0] + 0.5).astype(np.int64)
    rows = np.floor(pts[:, 1] + 0.5).astype(np.int64)
    np.clip(cols, 0, shape.width - 1, out=cols)
    np.clip(rows, 0, shape.height - 1, out=rows)
    return cols, rows


def flat_indices(points: PointArray, shape: GridShape) -> np.ndarray:
    """Row-major flat index of the nearest pixel of every point"""
    cols, rows = nearest_pixels(points, shape)
    return rows * shape.width + cols


def _bilinear(values: np.ndarray, points: PointArray, shape: GridShape) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    x = np.clip(pts[:, 0], 0, shape.width - 1)
    y = np.clip(pts[:, 1], 0, shape.height - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, shape.width - 1)
    y1 = np.minimum(y0 + 1, shape.height - 1)
    fx = x - x0
    fy = y - y0
    if values.ndim == 3:
        fx = fx[:, None]
        fy = fy[:, None]
    top = values[y0, x0] * (1 - fx) + values[y0, x1] * fx
    bottom = values[y1, x0] * (1 - fx) + values[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Одно значение на пиксель, массив (H, W)"""
    shape: GridShape
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != self.shape.array_shape:
            raise InvalidInputError(
                f"scalar field values {values.shape} do not match grid {self.shape.array_shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("scalar field contains non-finite values")
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, shape: GridShape) -> 'ScalarField':
        return cls(shape, np.zeros(shape.array_shape))

    def at(self, x: int, y: int) -> float:
        return float(self.values[y, x])

    def with_value(self, x: int, y: int, value: float) -> 'ScalarField':
        values = self.values.copy()
        values[y, x] = value
        return ScalarField(self.shape, values)

    def sample(self, points: PointArray, bilinear: bool = False) -> np.ndarray:
        if bilinear:
            return _bilinear(self.values, points, self.shape)
        cols, rows = nearest_pixels(points, self.shape)
        return self.values[rows, cols]

    def __eq__(self, other):
        return (isinstance(other, ScalarField) and self.shape == other.shape
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class VectorField2:
    """Поле 2-D векторов (dx, dy) в пикселях, массив (H, W, 2)"""
    shape: GridShape
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != self.shape.array_shape + (2,):
            raise InvalidInputError(
                f"vector field values {values.shape} do not match grid {self.shape.array_shape + (2,)}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("vector field contains non-finite values")
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, shape: GridShape) -> 'VectorField2':
        return cls(shape, np.zeros(shape.array_shape + (2,)))

    def at(self, x: int, y: int) -> Tuple[float, float]:
        dx, dy = self.values[y, x]
        return float(dx), float(dy)

    def with_value(self, x: int, y: int, value: Tuple[float, float]) -> 'VectorField2':
        values = self.values.copy()
        values[y, x] = value
        return VectorField2(self.shape, values)

    def sample(self, points: PointArray, bilinear: bool = False) -> np.ndarray:
        """Returns an (n, 2) array"""
        if bilinear:
            return _bilinear(self.values, points, self.shape)
        cols, rows = nearest_pixels(points, self.shape)
        return self.values[rows, cols]

    def __eq__(self, other):
        return (isinstance(other, VectorField2) and self.shape == other.shape
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class HeatmapStack:
    """J карт уверенности по суставам, массив (J, H, W)"""
    shape: GridShape
    channels: np.ndarray

    def __post_init__(self):
        channels = _frozen(self.channels)
        if channels.ndim != 3 or channels.shape[1:] != self.shape.array_shape:
            raise InvalidInputError(
                f"heatmap stack {channels.shape} does not match grid {self.shape.array_shape}"
            )
        if channels.shape[0] < 1:
            raise InvalidInputError("heatmap stack needs at least one channel")
        if not np.all(np.isfinite(channels)):
            raise InvalidInputError("heatmap stack contains non-finite values")
        object.__setattr__(self, 'channels', channels)

    @property
    def joint_count(self) -> int:
        return self.channels.shape[0]

    def channel(self, j: int) -> ScalarField:
        return ScalarField(self.shape, self.channels[j])

    @classmethod
    def zeros(cls, shape: GridShape, joint_count: int) -> 'HeatmapStack':
        return cls(shape, np.zeros((joint_count,) + shape.array_shape))


def coordinate_grid(shape: GridShape) -> VectorField2:
    """Value at pixel (x, y) equals (x, y)"""
    ys, xs = np.mgrid[0:shape.height, 0:shape.width]
    return VectorField2(shape, np.stack([xs, ys], axis=-1).astype(np.float64))


def max_over_channels(stack: HeatmapStack) -> ScalarField:
    """C̄(p) = max_j C_j(p)"""
    return ScalarField(stack.shape, stack.channels.max(axis=0))


def require_same_shape(*items) -> GridShape:
    """Все поля должны жить на одной сетке"""
    shapes = {item.shape for item in items if item is not None}
    if len(shapes) != 1:
        raise InvalidInputError(f"fields live on different grids: {sorted(map(str, shapes))}")
    return shapes.pop()
