"""
Записи ключевых точек, поз и кадров
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError
from .grid import GridShape, HeatmapStack, ScalarField, VectorField2, require_same_shape
from .skeleton import Skeleton

# Канонический порядок шести ординальных карт
AUX_ORDER: Tuple[str, ...] = ('l2r', 'r2l', 't2b', 'b2t', 'f2n', 'n2f')


@dataclass(frozen=True)
class Keypoint:
    """Body part location p_{j,k} with its detection confidence"""
    x: float
    y: float
    confidence: float
    joint: int

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInputError(f"keypoint confidence {self.confidence} outside [0, 1]")
        if self.joint < 0:
            raise InvalidInputError(f"negative joint index {self.joint}")

    @property
    def position(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Pose:
    """J optional keypoints of one person"""
    keypoints: Tuple[Optional[Keypoint], ...]
    person_id: Optional[int] = None

    def __post_init__(self):
        keypoints = tuple(self.keypoints)
        object.__setattr__(self, 'keypoints', keypoints)
        if not any(kp is not None for kp in keypoints):
            raise InvalidInputError("a pose needs at least one keypoint")
        for j, kp in enumerate(keypoints):
            if kp is not None and kp.joint != j:
                raise InvalidInputError(f"keypoint for joint {kp.joint} stored in slot {j}")

    @property
    def joint_count(self) -> int:
        return len(self.keypoints)

    def present(self) -> List[int]:
        return [j for j, kp in enumerate(self.keypoints) if kp is not None]

    def has(self, joint: int) -> bool:
        return 0 <= joint < len(self.keypoints) and self.keypoints[joint] is not None

    def positions(self) -> np.ndarray:
        """(J, 2) array, NaN for missing joints"""
        out = np.full((len(self.keypoints), 2), np.nan)
        for j, kp in enumerate(self.keypoints):
            if kp is not None:
                out[j] = (kp.x, kp.y)
        return out

    def present_positions(self) -> np.ndarray:
        return np.array([[kp.x, kp.y] for kp in self.keypoints if kp is not None], dtype=np.float64)

    def center(self) -> np.ndarray:
        """p_{·,k}: mean of the present joints"""
        return self.present_positions().mean(axis=0)

    def confidences(self) -> np.ndarray:
        return np.array([kp.confidence for kp in self.keypoints if kp is not None], dtype=np.float64)

    def bbox(self) -> Tuple[float, float, float, float]:
        pts = self.present_positions()
        x0, y0 = pts.min(axis=0)
        x1, y1 = pts.max(axis=0)
        return float(x0), float(y0), float(x1), float(y1)

    def head_size(self, skeleton: Skeleton) -> Optional[float]:
        """‖p_headtop − p_neck‖, None when either joint is missing"""
        if not (self.has(skeleton.head_top_index) and self.has(skeleton.neck_index)):
            return None
        top = self.keypoints[skeleton.head_top_index]
        neck = self.keypoints[skeleton.neck_index]
        return float(np.hypot(top.x - neck.x, top.y - neck.y))

    def with_person_id(self, person_id: Optional[int]) -> 'Pose':
        return Pose(self.keypoints, person_id)

    @classmethod
    def from_arrays(cls, xy: np.ndarray, visible: Optional[np.ndarray] = None,
                    confidence: Optional[np.ndarray] = None,
                    person_id: Optional[int] = None) -> 'Pose':
        xy = np.asarray(xy, dtype=np.float64)
        count = xy.shape[0]
        visible = np.ones(count, dtype=bool) if visible is None else np.asarray(visible, dtype=bool)
        confidence = np.ones(count) if confidence is None else np.asarray(confidence, dtype=np.float64)
        keypoints = tuple(
            Keypoint(float(xy[j, 0]), float(xy[j, 1]), float(confidence[j]), j) if visible[j] else None
            for j in range(count)
        )
        return cls(keypoints, person_id)

    def to_dict(self, skeleton: Skeleton) -> Dict:
        return {
            'person_id': self.person_id,
            'keypoints': {
                skeleton.joint_names[j]: [kp.x, kp.y, kp.confidence]
                for j, kp in enumerate(self.keypoints) if kp is not None
            },
        }

    @classmethod
    def from_dict(cls, data: Dict, skeleton: Skeleton) -> 'Pose':
        slots: List[Optional[Keypoint]] = [None] * skeleton.joint_count
        for name, (x, y, conf) in data.get('keypoints', {}).items():
            j = skeleton.index_of(name)
            slots[j] = Keypoint(float(x), float(y), float(conf), j)
        return cls(tuple(slots), data.get('person_id'))


@dataclass(frozen=True)
class HumanEmbedding:
    """Per-person appearance vector H (length E)"""
    vector: np.ndarray
    person_id: Optional[int] = None

    def __post_init__(self):
        vector = np.array(self.vector, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(vector)):
            raise InvalidInputError("human embedding contains non-finite values")
        vector.setflags(write=False)
        object.__setattr__(self, 'vector', vector)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True, eq=False)
class FrameBundle:
    """Все поля одного кадра плюс опциональная разметка"""
    time_index: int
    heatmaps: HeatmapStack
    ke: ScalarField
    aux_maps: Tuple[ScalarField, ...]
    svf: VectorField2
    tvf_forward: Optional[VectorField2] = None
    tvf_backward: Optional[VectorField2] = None
    he_vectors: Tuple[HumanEmbedding, ...] = ()
    ground_truth: Optional[Tuple[Pose, ...]] = None

    def __post_init__(self):
        if len(self.aux_maps) != len(AUX_ORDER):
            raise InvalidInputError(f"expected {len(AUX_ORDER)} aux maps, got {len(self.aux_maps)}")
        require_same_shape(self.heatmaps, self.ke, self.svf, *self.aux_maps,
                           self.tvf_forward, self.tvf_backward)
        if (self.tvf_forward is None) != (self.tvf_backward is None):
            raise InvalidInputError("forward and backward TVF must be present together")
        object.__setattr__(self, 'aux_maps', tuple(self.aux_maps))
        object.__setattr__(self, 'he_vectors', tuple(self.he_vectors))
        if self.ground_truth is not None:
            object.__setattr__(self, 'ground_truth', tuple(self.ground_truth))

    @property
    def shape(self) -> GridShape:
        return self.ke.shape

    @property
    def has_predecessor(self) -> bool:
        return self.tvf_forward is not None

    def aux(self, relation: str) -> ScalarField:
        return self.aux_maps[AUX_ORDER.index(relation)]

    def he_for(self, person_id: int) -> Optional[HumanEmbedding]:
        for he in self.he_vectors:
            if he.person_id == person_id:
                return he
        return None


def poses_by_id(poses: Sequence[Pose]) -> Dict[int, Pose]:
    return {p.person_id: p for p in poses if p.person_id is not None}
