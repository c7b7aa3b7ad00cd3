"""
Жадное декодирование поз по уточнённым KE и SIE
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import InvalidInputError
from ..core.grid import ScalarField, VectorField2, require_same_shape
from ..core.pose import Keypoint, Pose
from ..core.skeleton import Skeleton

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecodeConfig:
    """Пороги и порядок обхода суставов"""
    joint_order: Tuple[int, ...] = ()
    theta_ke: float = 1.0
    theta_sie: float = 10.0
    omega: float = 0.5
    max_people: int = 30

    def __post_init__(self):
        if self.theta_ke <= 0 or self.theta_sie <= 0:
            raise InvalidInputError("decode thresholds must be positive")
        if not 0.0 <= self.omega <= 1.0:
            raise InvalidInputError(f"omega must lie in [0, 1], got {self.omega}")
        if self.max_people < 1:
            raise InvalidInputError("max_people must be at least 1")

    def order_for(self, joint_count: int) -> Tuple[int, ...]:
        order = self.joint_order or tuple(range(joint_count))
        if sorted(order) != list(range(joint_count)):
            raise InvalidInputError(f"joint order {order} is not a permutation of {joint_count} joints")
        return tuple(order)

    @classmethod
    def for_skeleton(cls, skeleton: Skeleton, **overrides) -> 'DecodeConfig':
        overrides.setdefault('joint_order', skeleton.decode_order)
        return cls(**overrides)


@dataclass
class PersonHypothesis:
    """Running KE reference and center vote of one person in progress"""
    keypoints: Dict[int, Keypoint] = field(default_factory=dict)
    ke_sum: float = 0.0
    center_sum: np.ndarray = field(default_factory=lambda: np.zeros(2))
    confidence_sum: float = 0.0

    @property
    def size(self) -> int:
        return len(self.keypoints)

    @property
    def ref_ke(self) -> float:
        return self.ke_sum / self.size

    @property
    def ref_center(self) -> np.ndarray:
        return self.center_sum / self.size

    def add(self, kp: Keypoint, ke_value: float, center: np.ndarray):
        if kp.joint in self.keypoints:
            raise InvalidInputError(f"joint {kp.joint} already assigned to this hypothesis")
        self.keypoints[kp.joint] = kp
        self.ke_sum += ke_value
        self.center_sum = self.center_sum + center
        self.confidence_sum += kp.confidence

    def to_pose(self, joint_count: int) -> Pose:
        return Pose(tuple(self.keypoints.get(j) for j in range(joint_count)))


def _cost(hyp: PersonHypothesis, ke_value: float, center: np.ndarray, cfg: DecodeConfig) -> Optional[float]:
    """None when the peak is gated away from the hypothesis"""
    d_ke = abs(ke_value - hyp.ref_ke)
    if cfg.omega > 0 and d_ke > cfg.theta_ke:
        return None
    cost = cfg.omega * d_ke
    if cfg.omega < 1:
        cost += (1.0 - cfg.omega) * float(np.linalg.norm(center - hyp.ref_center)) / cfg.theta_sie
    return cost if cost <= 1.0 else None


def greedy_decode(peaks: Sequence[Sequence[Keypoint]], ke: ScalarField, sie: VectorField2,
                  cfg: DecodeConfig = DecodeConfig()) -> List[Pose]:
    """
    Groups per-joint peaks into persons.

    Joints are visited in cfg order, peaks by descending confidence. A peak
    joins the cheapest hypothesis still missing its joint (lowest index on
    ties) or spawns a new one while fewer than max_people exist.
    """
    require_same_shape(ke, sie)
    joint_count = len(peaks)
    hypotheses: List[PersonHypothesis] = []
    dropped = 0
    for j in cfg.order_for(joint_count):
        for kp in sorted(peaks[j], key=lambda p: -p.confidence):
            point = np.array([[kp.x, kp.y]])
            ke_value = float(ke.sample(point)[0])
            center = sie.sample(point)[0]
            best, best_cost = None, None
            for i, hyp in enumerate(hypotheses):
                if j in hyp.keypoints:
                    continue
                cost = _cost(hyp, ke_value, center, cfg)
                if cost is not None and (best_cost is None or cost < best_cost):
                    best, best_cost = i, cost
            if best is not None:
                hypotheses[best].add(kp, ke_value, center)
            elif len(hypotheses) < cfg.max_people:
                hyp = PersonHypothesis()
                hyp.add(kp, ke_value, center)
                hypotheses.append(hyp)
            else:
                dropped += 1
    if dropped:
        logger.debug(f"[DECODE] {dropped} peaks dropped at max_people={cfg.max_people}")
    return [h.to_pose(joint_count) for h in hypotheses]


def pose_score(pose: Pose) -> float:
    """Средняя уверенность ключевых точек"""
    return float(pose.confidences().mean())
