"""
Каталог последовательности: manifest.json, кадры PGGT, разметка и треки в JSON
"""
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..config.settings import settings
from ..core.errors import FormatError, InvalidInputError
from ..core.grid import GridShape, HeatmapStack, ScalarField, VectorField2
from ..core.pose import AUX_ORDER, FrameBundle, HumanEmbedding, Pose
from ..core.skeleton import Skeleton
from .container import read_container, write_container
from .files import read_json, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
GROUND_TRUTH_NAME = 'ground_truth.json'
FRAME_PATTERN = 'frame_{:04d}.pggt'


class GridModel(BaseModel):
    model_config = ConfigDict(extra='forbid')
    width: int = Field(ge=1)
    height: int = Field(ge=1)


class FrameEntry(BaseModel):
    model_config = ConfigDict(extra='forbid')
    t: int = Field(ge=0)
    file: str


class SequenceManifest(BaseModel):
    """JSON-описание последовательности; эхо конфигов достаточно для регенерации"""
    model_config = ConfigDict(extra='forbid')

    format: str = 'pggtrack-sequence'
    version: int = settings.CONTAINER_VERSION
    sequence_id: str
    frame_count: int = Field(ge=1)
    grid: GridModel
    skeleton: Dict[str, Any]
    frames: List[FrameEntry]
    ground_truth: Optional[str] = GROUND_TRUTH_NAME
    preset: Optional[str] = None
    scene: Dict[str, Any] = Field(default_factory=dict)
    noise: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0

    @model_validator(mode='after')
    def _frames_match(self):
        if len(self.frames) != self.frame_count:
            raise ValueError(f"{len(self.frames)} frame entries for frame_count {self.frame_count}")
        times = [f.t for f in self.frames]
        if times != sorted(set(times)):
            raise ValueError("frame entries must be strictly time-ordered")
        return self

    @property
    def shape(self) -> GridShape:
        return GridShape(self.grid.width, self.grid.height)


def _f32(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float32)


def bundle_to_tensors(bundle: FrameBundle) -> Dict[str, np.ndarray]:
    tensors = {
        'heatmaps': _f32(bundle.heatmaps.channels),
        'ke': _f32(bundle.ke.values),
        'aux': _f32(np.stack([m.values for m in bundle.aux_maps])),
        'svf': _f32(bundle.svf.values),
    }
    if bundle.has_predecessor:
        tensors['tvf_forward'] = _f32(bundle.tvf_forward.values)
        tensors['tvf_backward'] = _f32(bundle.tvf_backward.values)
    if bundle.he_vectors:
        tensors['he'] = _f32(np.stack([he.vector for he in bundle.he_vectors]))
        tensors['he_ids'] = _f32([he.person_id for he in bundle.he_vectors])
    return tensors


def tensors_to_bundle(tensors: Dict[str, np.ndarray], t: int, shape: GridShape,
                      ground_truth: Optional[Sequence[Pose]] = None, path: Optional[str] = None) -> FrameBundle:
    missing = [name for name in ('heatmaps', 'ke', 'aux', 'svf') if name not in tensors]
    if missing:
        raise FormatError(f"frame container lacks {missing}", 0, path)
    as64 = {name: np.asarray(values, dtype=np.float64) for name, values in tensors.items()}
    aux = as64['aux']
    if aux.shape[0] != len(AUX_ORDER):
        raise FormatError(f"expected {len(AUX_ORDER)} aux maps, got {aux.shape[0]}", 0, path)
    he = ()
    if 'he' in as64:
        ids = as64.get('he_ids', np.arange(as64['he'].shape[0]))
        he = tuple(HumanEmbedding(v, int(pid)) for v, pid in zip(as64['he'], ids))
    try:
        return _assemble(as64, t, shape, he, ground_truth)
    except InvalidInputError as e:
        raise FormatError(f"frame tensors do not form a valid bundle: {e}", 0, path) from e


def _assemble(as64: Dict[str, np.ndarray], t: int, shape: GridShape, he, ground_truth) -> FrameBundle:
    tvf_f = VectorField2(shape, as64['tvf_forward']) if 'tvf_forward' in as64 else None
    tvf_b = VectorField2(shape, as64['tvf_backward']) if 'tvf_backward' in as64 else None
    return FrameBundle(
        time_index=t,
        heatmaps=HeatmapStack(shape, as64['heatmaps']),
        ke=ScalarField(shape, as64['ke']),
        aux_maps=tuple(ScalarField(shape, m) for m in as64['aux']),
        svf=VectorField2(shape, as64['svf']),
        tvf_forward=tvf_f,
        tvf_backward=tvf_b,
        he_vectors=he,
        ground_truth=ground_truth,
    )


def poses_document(frames: Sequence[Tuple[int, Sequence[Pose]]], skeleton: Skeleton,
                   **extra) -> Dict[str, Any]:
    """Per-frame poses with joint names"""
    return {
        'joints': list(skeleton.joint_names),
        **extra,
        'frames': [{'t': t, 'poses': [p.to_dict(skeleton) for p in poses]} for t, poses in frames],
    }


def write_poses(path: str, frames: Sequence[Tuple[int, Sequence[Pose]]], skeleton: Skeleton, **extra):
    write_json(path, poses_document(frames, skeleton, **extra))
    logger.info(f"[IO] wrote poses of {len(frames)} frames to {path}")


def _check_joints(document: Dict, skeleton: Skeleton, path: str):
    joints = document.get('joints')
    if joints is not None and list(joints) != list(skeleton.joint_names):
        raise FormatError(f"joint names {joints} do not match the skeleton", 0, path)


def read_poses(path: str, skeleton: Skeleton) -> Dict[int, List[Pose]]:
    document = read_json(path)
    _check_joints(document, skeleton, path)
    try:
        return {int(f['t']): [Pose.from_dict(p, skeleton) for p in f['poses']]
                for f in document['frames']}
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed poses document: {e}", 0, path) from e


def write_tracks(path: str, trajectories, skeleton: Skeleton, **extra):
    write_json(path, {
        'joints': list(skeleton.joint_names),
        **extra,
        'tracks': [tr.to_dict(skeleton) for tr in trajectories],
    })
    logger.info(f"[IO] wrote {len(trajectories)} tracks to {path}")


def read_tracks(path: str, skeleton: Skeleton) -> Dict[int, List[Pose]]:
    """Tracks regrouped per frame; person_id carries the track id"""
    document = read_json(path)
    _check_joints(document, skeleton, path)
    frames: Dict[int, List[Pose]] = {}
    try:
        for track in document['tracks']:
            track_id = int(track['track_id'])
            for entry in track['frames']:
                pose = Pose.from_dict(entry, skeleton).with_person_id(track_id)
                frames.setdefault(int(entry['t']), []).append(pose)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed tracks document: {e}", 0, path) from e
    return frames


@dataclass
class LoadedSequence:
    directory: str
    manifest: SequenceManifest
    skeleton: Skeleton
    bundles: List[FrameBundle]

    @property
    def ground_truth(self) -> List[Tuple[Pose, ...]]:
        return [b.ground_truth or () for b in self.bundles]


def save_sequence(directory: str, bundles: Sequence[FrameBundle], skeleton: Skeleton,
                  sequence_id: str, scene: Optional[Dict] = None, noise: Optional[Dict] = None,
                  preset: Optional[str] = None, seed: int = 0) -> SequenceManifest:
    """Frames first, manifest last"""
    if not bundles:
        raise InvalidInputError("cannot save an empty sequence")
    os.makedirs(directory, exist_ok=True)
    entries = []
    for bundle in bundles:
        name = FRAME_PATTERN.format(bundle.time_index)
        write_container(os.path.join(directory, name), bundle_to_tensors(bundle))
        entries.append(FrameEntry(t=bundle.time_index, file=name))
    gt_frames = [(b.time_index, b.ground_truth or ()) for b in bundles]
    write_poses(os.path.join(directory, GROUND_TRUTH_NAME), gt_frames, skeleton)
    shape = bundles[0].shape
    manifest = SequenceManifest(
        sequence_id=sequence_id,
        frame_count=len(bundles),
        grid=GridModel(width=shape.width, height=shape.height),
        skeleton=skeleton.to_dict(),
        frames=entries,
        preset=preset,
        scene=scene or {},
        noise=noise or {},
        seed=seed,
    )
    write_json(os.path.join(directory, MANIFEST_NAME), manifest.model_dump())
    logger.info(f"[IO] saved sequence '{sequence_id}' ({len(bundles)} frames) to {directory}")
    return manifest


def load_manifest(directory: str) -> SequenceManifest:
    path = os.path.join(directory, MANIFEST_NAME)
    document = read_json(path)
    try:
        return SequenceManifest.model_validate(document)
    except ValidationError as e:
        raise FormatError(f"invalid manifest: {e.errors()[0]['msg']} at {e.errors()[0]['loc']}", 0, path) from e


def load_sequence(directory: str) -> LoadedSequence:
    """Reads and validates every referenced file"""
    manifest = load_manifest(directory)
    skeleton = Skeleton.from_dict(manifest.skeleton)
    gt: Dict[int, List[Pose]] = {}
    if manifest.ground_truth:
        gt = read_poses(os.path.join(directory, manifest.ground_truth), skeleton)
    shape = manifest.shape
    bundles = []
    for entry in manifest.frames:
        path = os.path.join(directory, entry.file)
        if not os.path.exists(path):
            raise FormatError(f"referenced frame file {entry.file} is missing", 0, path)
        tensors = read_container(path)
        bundles.append(tensors_to_bundle(tensors, entry.t, shape, gt.get(entry.t, []), path))
    logger.info(f"[IO] loaded sequence '{manifest.sequence_id}' ({len(bundles)} frames) from {directory}")
    return LoadedSequence(directory, manifest, skeleton, bundles)


def read_predictions(path: str, skeleton: Skeleton) -> Dict[int, List[Pose]]:
    """Tracks or plain per-frame poses, whichever the document holds"""
    document = read_json(path)
    if 'tracks' in document:
        return read_tracks(path, skeleton)
    if 'frames' in document:
        return read_poses(path, skeleton)
    raise FormatError("document holds neither 'tracks' nor 'frames'", 0, path)


def load_ground_truth(directory: str) -> Tuple[SequenceManifest, Skeleton, List[List[Pose]]]:
    """Manifest and per-frame ground truth in manifest order, without reading frame containers"""
    manifest = load_manifest(directory)
    skeleton = Skeleton.from_dict(manifest.skeleton)
    if not manifest.ground_truth:
        raise FormatError("manifest references no ground truth", 0, os.path.join(directory, MANIFEST_NAME))
    gt = read_poses(os.path.join(directory, manifest.ground_truth), skeleton)
    return manifest, skeleton, [gt.get(entry.t, []) for entry in manifest.frames]
