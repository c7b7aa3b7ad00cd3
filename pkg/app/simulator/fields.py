"""
Синтез полей кадра по разметке: тепловые карты, KE, aux, SVF/TVF и HE
"""
import logging
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..core.errors import InvalidInputError
from ..core.grid import GridShape, HeatmapStack, ScalarField, VectorField2, coordinate_grid
from ..core.pose import AUX_ORDER, FrameBundle, HumanEmbedding, Pose
from ..core.skeleton import Skeleton, default_skeleton
from ..spatial.embedding import OrderRelation, order_ranks
from ..spatial.heatmap import DEFAULT_SIGMA, render_confidence
from .scene import STREAM_FRAME, STREAM_HE_DRIFT, STREAM_HE_LATENT, GeneratedScene, SceneConfig, generate_scene

logger = logging.getLogger(__name__)

DEFAULT_HE_DIM = 3072

# Подпотоки кадрового генератора
_HEATMAP, _KE, _AUX, _SVF, _TVF_FORWARD, _TVF_BACKWARD, _HE, _CONFUSION = range(8)


@dataclass(frozen=True)
class NoiseConfig:
    """
    Difficulty knobs of the synthetic predictor.

    he_spike adds a fresh Gaussian perturbation to every HE vector inside
    [spike_start, spike_start + spike_length). tvf_camera_gain scales the
    part of the camera displacement the TVF fails to explain.
    """
    heatmap_noise: float = 0.01
    ke_spacing: float = 2.0
    ke_jitter: float = 0.05
    ke_background: float = 0.3
    aux_spacing: float = 1.0
    vector_jitter: float = 0.3
    he_dim: int = DEFAULT_HE_DIM
    he_jitter: float = 0.05
    he_drift: float = 0.0
    confusion: float = 0.0
    tvf_camera_gain: float = 0.0
    he_spike: float = 0.0
    spike_start: int = 0
    spike_length: int = 0
    paint_sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise InvalidInputError(f"noise parameter {name} must be non-negative, got {value}")
        if self.he_dim < 1:
            raise InvalidInputError("he_dim must be at least 1")
        if self.confusion > 1:
            raise InvalidInputError(f"confusion is a probability, got {self.confusion}")
        if self.paint_sigma <= 0:
            raise InvalidInputError("paint_sigma must be positive")

    @classmethod
    def zero(cls, **overrides) -> 'NoiseConfig':
        """Exact targets everywhere"""
        values = dict(heatmap_noise=0.0, ke_jitter=0.0, ke_background=0.0, vector_jitter=0.0,
                      he_jitter=0.0, he_drift=0.0, confusion=0.0, tvf_camera_gain=0.0, he_spike=0.0)
        values.update(overrides)
        return cls(**values)

    def spiking(self, t: int) -> bool:
        return self.he_spike > 0 and self.spike_start <= t < self.spike_start + self.spike_length

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'NoiseConfig':
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown noise keys: {sorted(unknown)}")
        return cls(**data)


def _frame_rng(seed: int, t: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, t, STREAM_FRAME, stream])


@lru_cache(maxsize=256)
def _he_basis(seed: int, person_id: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """(latent, drift direction), both N(0, 1)^E"""
    latent = np.random.default_rng([seed, person_id, STREAM_HE_LATENT]).standard_normal(dim)
    drift = np.random.default_rng([seed, person_id, STREAM_HE_DRIFT]).standard_normal(dim)
    latent.setflags(write=False)
    drift.setflags(write=False)
    return latent, drift


def he_vector(seed: int, person_id: int, t: int, noise: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """latent + drift·t·u + jitter·ε, plus the spike inside its window"""
    latent, direction = _he_basis(seed, person_id, noise.he_dim)
    vector = latent + noise.he_drift * t * direction
    if noise.he_jitter > 0:
        vector = vector + noise.he_jitter * rng.standard_normal(noise.he_dim)
    if noise.spiking(t):
        vector = vector + noise.he_spike * rng.standard_normal(noise.he_dim)
    return vector


@dataclass(frozen=True, eq=False)
class PaintRegion:
    """Pixels within the paint radius of some joint, with the owning person slot"""
    pixels: np.ndarray   # (n, 2) координаты x, y
    rows: np.ndarray
    cols: np.ndarray
    owners: np.ndarray   # (n,) слот в списке поз

    @property
    def size(self) -> int:
        return len(self.owners)


def paint_region(poses: Sequence[Pose], shape: GridShape, radius: float) -> PaintRegion:
    """Nearest-joint ownership of every pixel closer than radius to a joint"""
    points, owners = [], []
    for k, pose in enumerate(poses):
        for kp in pose.keypoints:
            if kp is not None:
                points.append((kp.x, kp.y))
                owners.append(k)
    empty = np.zeros(0, dtype=np.int64)
    if not points:
        return PaintRegion(np.zeros((0, 2)), empty, empty, empty)
    grid = coordinate_grid(shape).values.reshape(-1, 2)
    distance, nearest = cKDTree(np.asarray(points)).query(grid, distance_upper_bound=radius)
    inside = np.isfinite(distance)
    flat = np.flatnonzero(inside)
    rows, cols = np.divmod(flat, shape.width)
    return PaintRegion(grid[inside], rows, cols, np.asarray(owners)[nearest[inside]])


def _noise(rng: np.random.Generator, scale: float, size) -> np.ndarray:
    if scale <= 0:
        return np.zeros(size)
    return scale * rng.standard_normal(size)


def _paint_ke(poses: Sequence[Pose], region: PaintRegion, shape: GridShape, noise: NoiseConfig,
              seed: int, t: int) -> ScalarField:
    rng = _frame_rng(seed, t, _KE)
    values = _noise(rng, noise.ke_background, shape.array_shape)
    if region.size:
        latents = np.array([noise.ke_spacing * p.person_id for p in poses], dtype=np.float64)
        owners = region.owners.copy()
        if noise.confusion > 0 and len(poses) > 1:
            swap_rng = _frame_rng(seed, t, _CONFUSION)
            confused = swap_rng.random(region.size) < noise.confusion
            shift = swap_rng.integers(1, len(poses), size=region.size)
            owners[confused] = (owners[confused] + shift[confused]) % len(poses)
        values[region.rows, region.cols] = latents[owners] + _noise(rng, noise.ke_jitter, region.size)
    return ScalarField(shape, values)


def _paint_aux(poses: Sequence[Pose], region: PaintRegion, shape: GridShape, noise: NoiseConfig,
               skeleton: Skeleton, seed: int, t: int) -> Tuple[ScalarField, ...]:
    rng = _frame_rng(seed, t, _AUX)
    maps = []
    for name in AUX_ORDER:
        values = _noise(rng, noise.ke_background, shape.array_shape)
        if region.size:
            ranks = order_ranks(poses, OrderRelation(name), skeleton).astype(np.float64)
            values[region.rows, region.cols] = (noise.aux_spacing * ranks[region.owners]
                                                + _noise(rng, noise.ke_jitter, region.size))
        maps.append(ScalarField(shape, values))
    return tuple(maps)


def _paint_offsets(region: PaintRegion, shape: GridShape, centers: np.ndarray, include: np.ndarray,
                   jitter: float, rng: np.random.Generator) -> VectorField2:
    """pixel − centers[owner] on the region of included persons, jitter everywhere"""
    values = _noise(rng, jitter, shape.array_shape + (2,))
    if region.size:
        keep = include[region.owners]
        rows, cols = region.rows[keep], region.cols[keep]
        target = region.pixels[keep] - centers[region.owners[keep]]
        values[rows, cols] = target + _noise(rng, jitter, (int(keep.sum()), 2))
    return VectorField2(shape, values)


def _centers(poses: Sequence[Pose]) -> np.ndarray:
    return np.array([p.center() for p in poses], dtype=np.float64).reshape(-1, 2)


def _temporal_fields(poses: Sequence[Pose], poses_prev: Sequence[Pose], region: PaintRegion,
                     shape: GridShape, noise: NoiseConfig, radius: float, seed: int, t: int,
                     camera_shift: Optional[Dict[int, np.ndarray]]) -> Tuple[VectorField2, VectorField2]:
    """(forward on frame t, backward on frame t−1)"""
    prev_index = {p.person_id: i for i, p in enumerate(poses_prev)}
    cur_index = {p.person_id: i for i, p in enumerate(poses)}
    shift = camera_shift or {}

    def bias(pid: int) -> np.ndarray:
        return noise.tvf_camera_gain * np.asarray(shift.get(pid, np.zeros(2)), dtype=np.float64)

    prev_centers = _centers(poses_prev)
    cur_centers = _centers(poses)

    # forward: p^t − c^{t−1} − bias
    targets = np.zeros((len(poses), 2))
    include = np.zeros(len(poses), dtype=bool)
    for i, pose in enumerate(poses):
        j = prev_index.get(pose.person_id)
        if j is not None:
            targets[i] = prev_centers[j] + bias(pose.person_id)
            include[i] = True
    forward = _paint_offsets(region, shape, targets, include, noise.vector_jitter,
                             _frame_rng(seed, t, _TVF_FORWARD))

    # backward: p^{t−1} − c^t + bias
    prev_region = paint_region(poses_prev, shape, radius)
    targets = np.zeros((len(poses_prev), 2))
    include = np.zeros(len(poses_prev), dtype=bool)
    for j, pose in enumerate(poses_prev):
        i = cur_index.get(pose.person_id)
        if i is not None:
            targets[j] = cur_centers[i] - bias(pose.person_id)
            include[j] = True
    backward = _paint_offsets(prev_region, shape, targets, include, noise.vector_jitter,
                              _frame_rng(seed, t, _TVF_BACKWARD))
    return forward, backward


def synth_frame(poses: Sequence[Pose], t: int, noise: NoiseConfig, shape: GridShape,
                skeleton: Optional[Skeleton] = None, seed: int = 0,
                poses_prev: Optional[Sequence[Pose]] = None,
                camera_shift: Optional[Dict[int, np.ndarray]] = None) -> FrameBundle:
    """
    Fields of one frame from its ground truth.

    With poses_prev the bundle also carries forward and backward TVF; every
    pose needs a person_id.
    """
    skeleton = skeleton or default_skeleton()
    poses = tuple(poses)
    if any(p.person_id is None for p in poses):
        raise InvalidInputError("synthetic frames need ground truth with person ids")
    radius = 2.0 * noise.paint_sigma
    region = paint_region(poses, shape, radius)

    heat = render_confidence(poses, shape, DEFAULT_SIGMA, skeleton.joint_count).channels
    heat = np.clip(heat + _noise(_frame_rng(seed, t, _HEATMAP), noise.heatmap_noise, heat.shape), 0.0, 1.0)
    heatmaps = HeatmapStack(shape, heat)

    ke = _paint_ke(poses, region, shape, noise, seed, t)
    aux = _paint_aux(poses, region, shape, noise, skeleton, seed, t)
    include = np.ones(len(poses), dtype=bool)
    svf = _paint_offsets(region, shape, _centers(poses), include, noise.vector_jitter,
                         _frame_rng(seed, t, _SVF))

    tvf_forward = tvf_backward = None
    if poses_prev is not None:
        tvf_forward, tvf_backward = _temporal_fields(poses, tuple(poses_prev), region, shape, noise,
                                                     radius, seed, t, camera_shift)

    he_rng = _frame_rng(seed, t, _HE)
    he = tuple(HumanEmbedding(he_vector(seed, p.person_id, t, noise, he_rng), p.person_id) for p in poses)
    return FrameBundle(t, heatmaps, ke, aux, svf, tvf_forward, tvf_backward, he, poses)


def synth_fields(poses_prev: Sequence[Pose], poses_t: Sequence[Pose], noise: NoiseConfig,
                 shape: GridShape, skeleton: Optional[Skeleton] = None, seed: int = 0, t: int = 1,
                 camera_shift: Optional[Dict[int, np.ndarray]] = None) -> Tuple[FrameBundle, FrameBundle]:
    """
    Bundle pair for frames (t′, t), t′ < t.

    The previous frame need not be adjacent; the second bundle carries the
    TVF pair linking the two.
    """
    if t < 1:
        raise InvalidInputError("the current frame index must be at least 1")
    previous = synth_frame(poses_prev, t - 1, noise, shape, skeleton, seed)
    current = synth_frame(poses_t, t, noise, shape, skeleton, seed, poses_prev, camera_shift)
    return previous, current


def simulate(scene: SceneConfig, noise: NoiseConfig) -> Tuple[GeneratedScene, List[FrameBundle]]:
    """Scene plus one bundle per frame; frame t > 0 links to t − 1"""
    generated = generate_scene(scene)
    bundles = []
    for t, poses in enumerate(generated.frames):
        prev = generated.frames[t - 1] if t > 0 else None
        shift = generated.camera_shift[t] if t > 0 else None
        bundles.append(synth_frame(poses, t, noise, scene.grid, generated.skeleton, scene.seed, prev, shift))
    logger.debug(f"[SIM] synthesized {len(bundles)} bundles")
    return generated, bundles


def sample_training_pairs(frame_count: int, window: int = 5, seed: int = 0,
                          count: Optional[int] = None) -> List[Tuple[int, int]]:
    """
    (t, t′) pairs with 1 ≤ t − t′ ≤ window, shuffled deterministically.

    count truncates the shuffled list.
    """
    if frame_count < 2:
        raise InvalidInputError("training pairs need at least two frames")
    if window < 1:
        raise InvalidInputError(f"window must be at least 1, got {window}")
    pairs = [(t, t - d) for t in range(1, frame_count) for d in range(1, window + 1) if t - d >= 0]
    order = np.random.default_rng([seed, frame_count, window]).permutation(len(pairs))
    shuffled = [pairs[i] for i in order]
    return shuffled[:count] if count is not None else shuffled
