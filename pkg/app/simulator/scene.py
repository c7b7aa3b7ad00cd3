"""
Синтетические сцены: траектории людей, артикуляция, камера, окклюзии
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import InvalidInputError
from ..core.grid import GridShape
from ..core.pose import Pose
from ..core.skeleton import Skeleton, default_skeleton, load_skeleton

logger = logging.getLogger(__name__)

# Потоки генератора: default_rng([seed, ..., stream])
STREAM_MOTION = 1
STREAM_HE_LATENT = 2
STREAM_HE_DRIFT = 3
STREAM_FRAME = 4

LANE_MARGIN = 12.0
ROW_FACTOR = 1.2


@dataclass(frozen=True)
class OcclusionWindow:
    """Person invisible during [start, start + length)"""
    person: int
    start: int
    length: int

    def __post_init__(self):
        if self.length < 1 or self.start < 0:
            raise InvalidInputError(f"bad occlusion window {self}")

    def covers(self, t: int) -> bool:
        return self.start <= t < self.start + self.length


@dataclass(frozen=True)
class PersonSpan:
    """Кадры [enter, leave) в которых человек присутствует в сцене"""
    person: int
    enter: int = 0
    leave: Optional[int] = None

    def covers(self, t: int) -> bool:
        return t >= self.enter and (self.leave is None or t < self.leave)


@dataclass(frozen=True)
class PersonMotion:
    """Motion model of one person in world pixels"""
    start: np.ndarray
    velocity: np.ndarray
    amplitude: float
    phase: float


def _pairs(values) -> Tuple[Tuple[float, float], ...]:
    return tuple((float(a), float(b)) for a, b in values)


@dataclass(frozen=True)
class SceneConfig:
    """
    Scene layout and motion.

    Without explicit starts people are placed on a lane grid; a person
    count above its capacity is rejected. Velocities default to uniform
    draws within ±speed px/frame (a quarter of that vertically).
    """
    person_count: int = 2
    frame_count: int = 30
    grid: GridShape = GridShape(160, 120)
    person_height: float = 40.0
    speed: float = 0.2
    articulation: float = 0.5
    articulation_period: float = 8.0
    starts: Tuple[Tuple[float, float], ...] = ()
    velocities: Tuple[Tuple[float, float], ...] = ()
    zoom: float = 1.0
    pan: Tuple[float, float] = (0.0, 0.0)
    occlusions: Tuple[OcclusionWindow, ...] = ()
    spans: Tuple[PersonSpan, ...] = ()
    seed: int = 0
    round_keypoints: bool = True
    skeleton_path: Optional[str] = None

    def __post_init__(self):
        if self.frame_count < 1:
            raise InvalidInputError(f"frame_count must be at least 1, got {self.frame_count}")
        if self.person_count < 0:
            raise InvalidInputError("person_count must be non-negative")
        if self.person_height <= 0 or self.zoom <= 0:
            raise InvalidInputError("person_height and zoom must be positive")
        if self.speed < 0 or self.articulation < 0 or self.articulation_period <= 0:
            raise InvalidInputError("motion parameters must be non-negative")
        for name in ('starts', 'velocities'):
            values = _pairs(getattr(self, name))
            if values and len(values) != self.person_count:
                raise InvalidInputError(f"{len(values)} {name} for {self.person_count} persons")
            object.__setattr__(self, name, values)
        object.__setattr__(self, 'pan', tuple(float(v) for v in self.pan))
        object.__setattr__(self, 'occlusions', tuple(self.occlusions))
        object.__setattr__(self, 'spans', tuple(self.spans))
        for item in self.occlusions + self.spans:
            if not 0 <= item.person < self.person_count:
                raise InvalidInputError(f"window refers to unknown person {item.person}")

    def skeleton(self) -> Skeleton:
        return load_skeleton(self.skeleton_path) if self.skeleton_path else default_skeleton()

    def lane_capacity(self) -> Tuple[int, int]:
        """(columns, rows) of the lane grid"""
        slot = 0.6 * self.person_height + LANE_MARGIN
        cols = int(self.grid.width // slot)
        rows = int(self.grid.height // (ROW_FACTOR * self.person_height))
        return cols, rows

    def lane_centers(self) -> np.ndarray:
        cols, rows = self.lane_capacity()
        if self.person_count > cols * rows:
            raise InvalidInputError(
                f"{self.person_count} persons do not fit a {self.grid.width}x{self.grid.height} grid "
                f"({cols}x{rows} lanes of height {self.person_height})"
            )
        slot_w = self.grid.width / max(cols, 1)
        row_h = ROW_FACTOR * self.person_height
        top = (self.grid.height - rows * row_h) / 2.0
        centers = []
        for k in range(self.person_count):
            c, r = k % cols, k // cols
            centers.append(((c + 0.5) * slot_w, top + (r + 0.5) * row_h))
        return np.array(centers, dtype=np.float64).reshape(-1, 2)

    def motion_for(self, k: int) -> PersonMotion:
        rng = np.random.default_rng([self.seed, k, STREAM_MOTION])
        start = np.array(self.starts[k]) if self.starts else self.lane_centers()[k]
        if self.velocities:
            velocity = np.array(self.velocities[k])
        else:
            draw = rng.uniform(-1.0, 1.0, size=2)
            velocity = self.speed * draw * np.array([1.0, 0.25])
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        return PersonMotion(start, velocity, self.articulation, phase)

    def visible(self, k: int, t: int) -> bool:
        for span in self.spans:
            if span.person == k and not span.covers(t):
                return False
        return not any(w.person == k and w.covers(t) for w in self.occlusions)

    def to_dict(self) -> Dict:
        return {
            'person_count': self.person_count,
            'frame_count': self.frame_count,
            'grid': self.grid.to_dict(),
            'person_height': self.person_height,
            'speed': self.speed,
            'articulation': self.articulation,
            'articulation_period': self.articulation_period,
            'starts': [list(s) for s in self.starts],
            'velocities': [list(v) for v in self.velocities],
            'zoom': self.zoom,
            'pan': list(self.pan),
            'occlusions': [vars(w).copy() for w in self.occlusions],
            'spans': [vars(s).copy() for s in self.spans],
            'seed': self.seed,
            'round_keypoints': self.round_keypoints,
            'skeleton_path': self.skeleton_path,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SceneConfig':
        data = dict(data)
        grid = data.pop('grid', None)
        if isinstance(grid, dict):
            data['grid'] = GridShape(grid['width'], grid['height'])
        elif isinstance(grid, str):
            data['grid'] = GridShape.parse(grid)
        elif grid is not None:
            data['grid'] = GridShape(*grid)
        data['occlusions'] = tuple(OcclusionWindow(**w) for w in data.get('occlusions', ()))
        data['spans'] = tuple(PersonSpan(**s) for s in data.get('spans', ()))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown scene keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class CameraModel:
    """Zoom about the image center, then pan"""
    grid: GridShape
    zoom: float = 1.0
    pan: Tuple[float, float] = (0.0, 0.0)

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.grid.width - 1) / 2.0, (self.grid.height - 1) / 2.0])

    def scale(self, t: int) -> float:
        return self.zoom ** t

    def project(self, world: np.ndarray, t: int) -> np.ndarray:
        return self.center + self.scale(t) * (np.asarray(world) - self.center) + np.asarray(self.pan) * t


@dataclass
class GeneratedScene:
    """
    Ground-truth poses per frame with persistent ids.

    camera_shift[t][k] is the displacement of person k's center caused by
    the camera alone between t−1 and t (zero at t = 0).
    """
    config: SceneConfig
    skeleton: Skeleton
    frames: List[Tuple[Pose, ...]]
    camera_shift: List[Dict[int, np.ndarray]] = field(default_factory=list)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, t: int) -> Tuple[Pose, ...]:
        return self.frames[t]

    def __iter__(self):
        return iter(self.frames)

    def person_ids(self) -> List[int]:
        return sorted({p.person_id for frame in self.frames for p in frame})


def _articulated(skeleton: Skeleton, motion: PersonMotion, height: float,
                 period: float, t: int) -> np.ndarray:
    """World joint positions (J, 2) at frame t"""
    if skeleton.template is None:
        raise InvalidInputError("skeleton has no template; the simulator needs joint offsets")
    swing = math.sin(2.0 * math.pi * t / period + motion.phase)
    offsets = skeleton.template + motion.amplitude * swing * skeleton.articulation
    center = motion.start + motion.velocity * t
    return center + height * offsets


def _to_pose(xy: np.ndarray, skeleton: Skeleton, grid: GridShape, person_id: int,
             round_keypoints: bool) -> Optional[Pose]:
    if round_keypoints:
        xy = np.floor(xy + 0.5)
    inside = np.array([grid.contains(x, y) for x, y in xy])
    if not (inside[skeleton.head_top_index] and inside[skeleton.neck_index]):
        return None
    return Pose.from_arrays(xy, visible=inside, person_id=person_id)


def generate_scene(scene: SceneConfig) -> GeneratedScene:
    """
    Deterministic trajectories for every person.

    A person whose head segment leaves the grid counts as absent in that
    frame, so every listed pose has a head size.
    """
    skeleton = scene.skeleton()
    camera = CameraModel(scene.grid, scene.zoom, scene.pan)
    motions = [scene.motion_for(k) for k in range(scene.person_count)]
    frames: List[Tuple[Pose, ...]] = []
    shifts: List[Dict[int, np.ndarray]] = []
    dropped = 0
    for t in range(scene.frame_count):
        poses, shift = [], {}
        for k, motion in enumerate(motions):
            if not scene.visible(k, t):
                continue
            world = _articulated(skeleton, motion, scene.person_height, scene.articulation_period, t)
            pose = _to_pose(camera.project(world, t), skeleton, scene.grid, k, scene.round_keypoints)
            if pose is None:
                dropped += 1
                continue
            poses.append(pose)
            center = world.mean(axis=0)
            shift[k] = camera.project(center, t) - camera.project(center, t - 1) if t > 0 else np.zeros(2)
        frames.append(tuple(poses))
        shifts.append(shift)
    if dropped:
        logger.debug(f"[SIM] {dropped} person-frames left the grid")
    logger.info(f"[SIM] scene: {scene.person_count} persons, {scene.frame_count} frames, "
                f"grid {scene.grid.width}x{scene.grid.height}, seed {scene.seed}")
    return GeneratedScene(scene, skeleton, frames, shifts)


def random_scene(seed: int, person_range: Sequence[int] = (2, 5), frame_count: int = 30,
                 **overrides) -> SceneConfig:
    """Seeded scene with a person count drawn from person_range (inclusive)"""
    lo, hi = person_range
    rng = np.random.default_rng([seed, STREAM_MOTION])
    count = int(rng.integers(lo, hi + 1))
    return SceneConfig(person_count=count, frame_count=frame_count, seed=seed, **overrides)
