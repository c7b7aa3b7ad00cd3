"""
Онлайн трекинг: двудольное сопоставление поз между кадрами
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import InvalidInputError
from ..core.grid import ScalarField, VectorField2
from ..core.pose import FrameBundle, Pose
from ..core.skeleton import Skeleton, default_skeleton
from .embedding import DEFAULT_LAMBDA_HE, DEFAULT_LAMBDA_TIE, combined_cost, psi_he, psi_ke_sie, psi_tie
from .munkres import munkres_solve

logger = logging.getLogger(__name__)

DEFAULT_GATE_MARGIN = 25.0
DEFAULT_SIMILARITY_FLOOR = 0.1


class MetricMode(str, Enum):
    """Стоимость сопоставления: строки абляции"""
    COMBINED = 'combined'
    HE_ONLY = 'he_only'
    TIE_ONLY = 'tie_only'
    KE_SIE = 'ke_sie'
    OKS = 'oks'
    IOU = 'iou'


@dataclass(frozen=True)
class TrackerConfig:
    """
    Association settings.

    gate_he and gate_tie bound the weighted HE and TIE cues one by one.
    theta_gate bounds the cost of every kept match. OKS/IoU modes sever
    pairs below similarity_floor.
    """
    gate_he: float = 250.0
    gate_tie: float = 50.0
    max_age: int = 1
    lambda_he: float = DEFAULT_LAMBDA_HE
    lambda_tie: float = DEFAULT_LAMBDA_TIE
    mode: MetricMode = MetricMode.COMBINED
    similarity_floor: float = DEFAULT_SIMILARITY_FLOOR
    sever_gate: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'mode', MetricMode(self.mode))
        if self.gate_he <= 0 or self.gate_tie <= 0:
            raise InvalidInputError("association gates must be positive")
        if self.sever_gate is not None and self.sever_gate <= 0:
            raise InvalidInputError("theta_gate must be positive")
        if self.max_age < 1:
            raise InvalidInputError("max_age must be at least 1")
        if self.lambda_he < 0 or self.lambda_tie < 0:
            raise InvalidInputError("cost weights must be non-negative")

    @property
    def theta_gate(self) -> float:
        """
        Binding sever threshold: a match whose cost exceeds it starts a new
        track. gate_he and gate_tie only pre-filter single cues; without an
        explicit value θ_gate is their sum.
        """
        if self.sever_gate is not None:
            return self.sever_gate
        return self.gate_he + self.gate_tie

    @classmethod
    def with_gate(cls, theta_gate: float, **overrides) -> 'TrackerConfig':
        """Один порог на оба признака и на суммарную стоимость"""
        return cls(gate_he=theta_gate, gate_tie=theta_gate, sever_gate=theta_gate, **overrides)

    @classmethod
    def calibrated(cls, noise, margin: float = DEFAULT_GATE_MARGIN, **overrides) -> 'TrackerConfig':
        """
        Gates from the expected within-track cue values of a noise model.

        HE: per-dimension variance s² = drift² + 2·jitter² over E dims gives
        mean E·s² and std s²·√(2E). TIE: per-component field jitter v gives
        mean 4v² and std ≈ 2.83v². Each gate is λ·(mean + 4·std) + margin.
        """
        lambda_he = overrides.get('lambda_he', DEFAULT_LAMBDA_HE)
        lambda_tie = overrides.get('lambda_tie', DEFAULT_LAMBDA_TIE)
        s2 = noise.he_drift ** 2 + 2.0 * noise.he_jitter ** 2
        he_mean = noise.he_dim * s2
        he_std = s2 * math.sqrt(2.0 * noise.he_dim)
        v2 = noise.vector_jitter ** 2
        tie_mean = 4.0 * v2
        tie_std = 2.83 * v2
        gate_he = lambda_he * (he_mean + 4.0 * he_std) + margin
        gate_tie = lambda_tie * (tie_mean + 4.0 * tie_std) + margin
        return cls(gate_he=gate_he, gate_tie=gate_tie, **overrides)

    def to_dict(self) -> Dict:
        return {
            'gate_he': self.gate_he,
            'gate_tie': self.gate_tie,
            'theta_gate': self.theta_gate,
            'max_age': self.max_age,
            'lambda_he': self.lambda_he,
            'lambda_tie': self.lambda_tie,
            'mode': self.mode.value,
            'similarity_floor': self.similarity_floor,
        }


@dataclass
class Trajectory:
    """Track id with its time-indexed poses"""
    track_id: int
    poses: Dict[int, Pose] = field(default_factory=dict)
    last_seen: int = -1
    last_he: Optional[np.ndarray] = None

    def add(self, t: int, pose: Pose, he: Optional[np.ndarray] = None):
        if self.poses and t <= self.last_seen:
            raise InvalidInputError(f"track {self.track_id}: time {t} not after {self.last_seen}")
        self.poses[t] = pose.with_person_id(self.track_id)
        self.last_seen = t
        if he is not None:
            self.last_he = he

    @property
    def last_pose(self) -> Pose:
        return self.poses[self.last_seen]

    @property
    def times(self) -> List[int]:
        return list(self.poses)

    def alive_at(self, t: int, max_age: int) -> bool:
        return t - self.last_seen <= max_age

    def to_dict(self, skeleton: Skeleton) -> Dict:
        return {
            'track_id': self.track_id,
            'frames': [{'t': t, **pose.to_dict(skeleton)} for t, pose in self.poses.items()],
        }


@dataclass
class Detection:
    """Decoded pose plus its HE vector, if any"""
    pose: Pose
    he: Optional[np.ndarray] = None


@dataclass
class FrameObservation:
    """Everything association needs from one frame"""
    time_index: int
    detections: List[Detection]
    sie: Optional[VectorField2] = None
    tie_forward: Optional[VectorField2] = None   # T, на кадре t
    tie_backward: Optional[VectorField2] = None  # T′, на кадре t−1
    ke: Optional[ScalarField] = None


def oks_similarity(a: Pose, b: Pose, scale: float, kappas: Sequence[float]) -> float:
    """Mean over shared joints of exp(−d²/(2·s²·κ_j²)); 0 without shared joints"""
    shared = [j for j in a.present() if b.has(j)]
    if not shared or scale <= 0:
        return 0.0
    pa = a.positions()[shared]
    pb = b.positions()[shared]
    d2 = np.sum((pa - pb) ** 2, axis=1)
    k = np.asarray(kappas, dtype=np.float64)[shared]
    return float(np.mean(np.exp(-d2 / (2.0 * scale ** 2 * k ** 2))))


def _box(pose: Pose) -> Tuple[float, float, float, float]:
    x0, y0, x1, y1 = pose.bbox()
    if x1 - x0 <= 0:
        x1 = x0 + 1.0
    if y1 - y0 <= 0:
        y1 = y0 + 1.0
    return x0, y0, x1, y1


def box_iou(a: Tuple[float, float, float, float], b: Tuple[float, float, float, float]) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return float(inter / union) if union > 0 else 0.0


def iou_similarity(a: Pose, b: Pose) -> float:
    """IoU плотных рамок по ключевым точкам"""
    return box_iou(_box(a), _box(b))


def pose_scale(pose: Pose) -> float:
    x0, y0, x1, y1 = _box(pose)
    return max(1.0, math.sqrt((x1 - x0) * (y1 - y0)))


def _pair_cost(det: Detection, track: Trajectory, obs: FrameObservation,
               prev_sie: Optional[VectorField2], prev_ke: Optional[ScalarField],
               cfg: TrackerConfig, skeleton: Skeleton) -> Tuple[float, bool]:
    """(cost, admitted); prev_sie/prev_ke are None when the track missed frame t−1"""
    prev = track.last_pose
    if cfg.mode is MetricMode.OKS:
        sim = oks_similarity(det.pose, prev, pose_scale(prev), skeleton.kappas)
        return 1.0 - sim, sim >= cfg.similarity_floor
    if cfg.mode is MetricMode.IOU:
        sim = iou_similarity(det.pose, prev)
        return 1.0 - sim, sim >= cfg.similarity_floor
    if cfg.mode is MetricMode.KE_SIE:
        if prev_sie is None or prev_ke is None:
            return math.inf, False
        cost = psi_ke_sie(det.pose, prev, obs.ke, prev_ke, obs.sie, prev_sie)
        return cost, cost <= cfg.theta_gate

    d_he = math.inf
    if det.he is not None and track.last_he is not None:
        d_he = psi_he(det.he, track.last_he)
    d_tie = math.inf
    if prev_sie is not None and obs.tie_forward is not None and obs.tie_backward is not None:
        d_tie = psi_tie(det.pose, prev, obs.sie, prev_sie, obs.tie_forward, obs.tie_backward)
    he_w = cfg.lambda_he * d_he if cfg.lambda_he > 0 else d_he
    tie_w = cfg.lambda_tie * d_tie if cfg.lambda_tie > 0 else d_tie

    if cfg.mode is MetricMode.HE_ONLY:
        return he_w, he_w <= min(cfg.gate_he, cfg.theta_gate)
    if cfg.mode is MetricMode.TIE_ONLY:
        return tie_w, tie_w <= min(cfg.gate_tie, cfg.theta_gate)

    use_he = cfg.lambda_he > 0 and not math.isinf(d_he)
    use_tie = cfg.lambda_tie > 0 and not math.isinf(d_tie)
    if not (use_he or use_tie):
        return math.inf, False
    if use_he and use_tie:
        cost = combined_cost(d_he, d_tie, cfg.lambda_he, cfg.lambda_tie)
    else:
        # один признак недоступен: стоимость по второму
        cost = he_w if use_he else tie_w
    admitted = cost <= cfg.theta_gate
    if use_he and he_w > cfg.gate_he:
        admitted = False
    if use_tie and tie_w > cfg.gate_tie:
        admitted = False
    return cost, admitted


def associate(current: Sequence[Detection], tracks: List[Trajectory], obs: FrameObservation,
              cfg: TrackerConfig, next_id: int, skeleton: Optional[Skeleton] = None,
              prev_sie: Optional[VectorField2] = None,
              prev_ke: Optional[ScalarField] = None) -> Tuple[List[Trajectory], List[int], int]:
    """
    One online association step at time obs.time_index.

    Returns (tracks, track id per current detection, next free id). A
    Munkres match that is not admitted (cost above θ_gate, a cue above its
    own gate, or a similarity below the floor) is severed and the detection
    starts a new track. Tracks older than max_age are dropped from the
    returned list.
    """
    skeleton = skeleton or default_skeleton()
    t = obs.time_index
    active = [tr for tr in tracks if tr.alive_at(t, cfg.max_age)]
    sie_ready = obs.sie is not None and prev_sie is not None
    ke_ready = obs.ke is not None and prev_ke is not None

    cost = np.full((len(current), len(active)), math.inf)
    admitted = np.zeros(cost.shape, dtype=bool)
    for i, det in enumerate(current):
        for k, track in enumerate(active):
            adjacent = track.last_seen == t - 1
            c, ok = _pair_cost(det, track, obs,
                               prev_sie if sie_ready and adjacent else None,
                               prev_ke if ke_ready and adjacent else None,
                               cfg, skeleton)
            cost[i, k] = c
            admitted[i, k] = ok

    assignment = munkres_solve(cost)
    ids = [-1] * len(current)
    severed = 0
    for i, k in assignment.pairs:
        if not admitted[i, k]:
            severed += 1
            continue
        track = active[k]
        track.add(t, current[i].pose, current[i].he)
        ids[i] = track.track_id
    born = 0
    for i, det in enumerate(current):
        if ids[i] >= 0:
            continue
        track = Trajectory(next_id)
        track.add(t, det.pose, det.he)
        tracks.append(track)
        ids[i] = next_id
        next_id += 1
        born += 1
    survivors = [tr for tr in tracks if tr.alive_at(t + 1, cfg.max_age)]
    died = len(tracks) - len(survivors)
    if severed or born or died:
        logger.debug(f"[TRACKER] t={t}: {severed} gated, {born} born, {died} died")
    return survivors, ids, next_id


class OnlineTracker:
    """Состояние трекера между кадрами"""

    def __init__(self, cfg: TrackerConfig = TrackerConfig(), skeleton: Optional[Skeleton] = None):
        self.cfg = cfg
        self.skeleton = skeleton or default_skeleton()
        self.active: List[Trajectory] = []
        self.finished: Dict[int, Trajectory] = {}
        self.next_id = 0
        self._prev_sie: Optional[VectorField2] = None
        self._prev_ke: Optional[ScalarField] = None

    def step(self, obs: FrameObservation) -> List[int]:
        before = {tr.track_id: tr for tr in self.active}
        self.active, ids, self.next_id = associate(
            obs.detections, self.active, obs, self.cfg, self.next_id, self.skeleton,
            self._prev_sie, self._prev_ke,
        )
        alive = {tr.track_id for tr in self.active}
        for track_id, tr in before.items():
            if track_id not in alive:
                self.finished[track_id] = tr
        self._prev_sie = obs.sie
        self._prev_ke = obs.ke
        return ids

    def trajectories(self) -> List[Trajectory]:
        everything = dict(self.finished)
        everything.update({tr.track_id: tr for tr in self.active})
        return [everything[k] for k in sorted(everything)]


Observer = Callable[[FrameBundle], FrameObservation]


def track_sequence(frames: Sequence[FrameBundle], cfg: TrackerConfig = TrackerConfig(),
                   observe: Optional[Observer] = None, skeleton: Optional[Skeleton] = None) -> List[Trajectory]:
    """Decode each frame, then associate online; no lookahead"""
    if not frames:
        return []
    if observe is None:
        from ..graph.pipeline import FramePipeline
        observe = FramePipeline(skeleton=skeleton).observe
    tracker = OnlineTracker(cfg, skeleton)
    last_t = None
    for bundle in frames:
        if last_t is not None and bundle.time_index <= last_t:
            raise InvalidInputError("frames must be time-ordered")
        last_t = bundle.time_index
        tracker.step(observe(bundle))
    result = tracker.trajectories()
    logger.info(f"[TRACKER] {len(frames)} frames → {len(result)} trajectories")
    return result
