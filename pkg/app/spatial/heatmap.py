"""
Тепловые карты суставов: рендер, лосс детекции, пики, маска позы
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import maximum_filter

from ..autodiff import DualValue, Tape, ensure_dual, reduce_sum, square
from ..core.errors import InvalidInputError
from ..core.grid import GridShape, HeatmapStack
from ..core.pose import Keypoint, Pose

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 2.0
DEFAULT_TAU = 0.2
DEFAULT_PEAK_THRESHOLD = 0.1
DEFAULT_NMS_RADIUS = 3

# 8-связная окрестность без центра
_RING = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=bool)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Instance-agnostic pose mask M"""
    shape: GridShape
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True)
        if bits.shape != self.shape.array_shape:
            raise InvalidInputError(f"mask {bits.shape} does not match grid {self.shape.array_shape}")
        bits.setflags(write=False)
        object.__setattr__(self, 'bits', bits)

    @property
    def occupancy(self) -> int:
        """N = число единичных битов"""
        return int(self.bits.sum())

    @property
    def ratio(self) -> float:
        return self.occupancy / self.shape.size

    def flat_indices(self) -> np.ndarray:
        """Row-major flat indices of the set bits, strictly increasing"""
        return np.flatnonzero(self.bits.reshape(-1))

    @classmethod
    def full(cls, shape: GridShape) -> 'BinaryMask':
        return cls(shape, np.ones(shape.array_shape, dtype=bool))

    @classmethod
    def empty(cls, shape: GridShape) -> 'BinaryMask':
        return cls(shape, np.zeros(shape.array_shape, dtype=bool))


def render_confidence(poses: Sequence[Pose], shape: GridShape, sigma: float = DEFAULT_SIGMA,
                      joint_count: Optional[int] = None) -> HeatmapStack:
    """C*_j(p) = max_k exp(−‖p − p_{j,k}‖² / σ²)"""
    if sigma <= 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    if joint_count is None:
        if not poses:
            raise InvalidInputError("joint_count is required when rendering an empty pose list")
        joint_count = poses[0].joint_count
    channels = np.zeros((joint_count,) + shape.array_shape)
    ys, xs = np.mgrid[0:shape.height, 0:shape.width].astype(np.float64)
    for pose in poses:
        if pose.joint_count != joint_count:
            raise InvalidInputError("all poses must use the same skeleton")
        for kp in pose.keypoints:
            if kp is None:
                continue
            d2 = (xs - kp.x) ** 2 + (ys - kp.y) ** 2
            np.maximum(channels[kp.joint], np.exp(-d2 / sigma ** 2), out=channels[kp.joint])
    return HeatmapStack(shape, channels)


def detection_loss(pred, gt: HeatmapStack, weights: Optional[np.ndarray] = None,
                   tape: Optional[Tape] = None) -> DualValue:
    """
    L = Σ_j Σ_p ‖C*_j(p) − C_j(p)‖², differentiable in pred.

    pred is a HeatmapStack or a (J, H, W) DualValue; weights, when given,
    is a per-pixel (H, W) or per-entry (J, H, W) factor.
    """
    target = gt.channels
    if isinstance(pred, HeatmapStack) and pred.shape != gt.shape:
        raise InvalidInputError(f"prediction grid {pred.shape} differs from ground truth {gt.shape}")
    pred = ensure_dual(pred, tape)
    if pred.shape != target.shape:
        raise InvalidInputError(f"prediction {pred.shape} differs from ground truth {target.shape}")
    sq = square(pred - target)
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape not in (target.shape, target.shape[1:]):
            raise InvalidInputError(f"weight field {weights.shape} does not match {target.shape}")
        sq = sq * weights
    return reduce_sum(sq)


def _refine_subpixel(values: np.ndarray, x: int, y: int) -> Tuple[float, float]:
    """Четверть пикселя в сторону большего соседа по каждой оси"""
    h, w = values.shape
    fx, fy = float(x), float(y)
    if 0 < x < w - 1:
        diff = values[y, x + 1] - values[y, x - 1]
        fx += 0.25 * np.sign(diff)
    if 0 < y < h - 1:
        diff = values[y + 1, x] - values[y - 1, x]
        fy += 0.25 * np.sign(diff)
    return fx, fy


def extract_channel_peaks(values: np.ndarray, joint: int, nms_radius: int,
                          threshold: float, subpixel: bool = False) -> List[Keypoint]:
    neighbours = maximum_filter(values, footprint=_RING, mode='constant', cval=-np.inf)
    strict = (values > neighbours) & (values >= threshold)
    rows, cols = np.nonzero(strict)
    scores = values[rows, cols]
    # убывание уверенности, при равенстве row-major
    order = np.lexsort((cols, rows, -scores))

    kept: List[Tuple[int, int]] = []
    peaks: List[Keypoint] = []
    r2 = float(nms_radius) ** 2
    for i in order:
        y, x = int(rows[i]), int(cols[i])
        if any((x - kx) ** 2 + (y - ky) ** 2 <= r2 for kx, ky in kept):
            continue
        kept.append((x, y))
        px, py = _refine_subpixel(values, x, y) if subpixel else (float(x), float(y))
        peaks.append(Keypoint(px, py, float(min(max(values[y, x], 0.0), 1.0)), joint))
    return peaks


def extract_peaks(stack: HeatmapStack, nms_radius: int = DEFAULT_NMS_RADIUS,
                  threshold: float = DEFAULT_PEAK_THRESHOLD, subpixel: bool = False) -> List[List[Keypoint]]:
    """Strict 8-neighbourhood maxima, radius suppression, sorted by confidence"""
    if nms_radius < 1:
        raise InvalidInputError(f"nms_radius must be ≥ 1, got {nms_radius}")
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"peak threshold must lie in (0, 1), got {threshold}")
    peaks = [
        extract_channel_peaks(stack.channels[j], j, nms_radius, threshold, subpixel)
        for j in range(stack.joint_count)
    ]
    logger.debug(f"[HEATMAP] {sum(len(p) for p in peaks)} peaks over {stack.joint_count} channels")
    return peaks


def pose_mask(stack: HeatmapStack, tau: float = DEFAULT_TAU) -> BinaryMask:
    """M(p) = 1 если max_j C_j(p) > τ"""
    if not 0.0 < tau < 1.0:
        raise InvalidInputError(f"tau must lie in (0, 1), got {tau}")
    return BinaryMask(stack.shape, stack.channels.max(axis=0) > tau)
