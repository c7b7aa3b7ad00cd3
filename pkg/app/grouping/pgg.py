"""
Pose-Guided Grouping: рекуррентный mean-shift по маске позы

Embeddings are gathered at the masked pixels into a D×N matrix and refined
with Gaussian-blurring mean-shift steps X′ = X·W·D⁻¹. The whole recurrence
runs on the autodiff tape so grouping losses over all iterates reach x0.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ..autodiff import DualValue, Tape, concatenate, ensure_dual, exp, gather, reduce_sum, square, transpose
from ..core.errors import InvalidInputError
from ..core.grid import GridShape, ScalarField, VectorField2, require_same_shape
from ..core.pose import Pose
from ..spatial.embedding import grouping_terms
from ..spatial.heatmap import BinaryMask

logger = logging.getLogger(__name__)

KERNELS = ('scaled', 'inverse')
DEFAULT_DELTA = 5.0
DEFAULT_ITERATIONS = 1

Field = Union[ScalarField, VectorField2]


@dataclass(frozen=True)
class PggConfig:
    """Параметры группировки"""
    delta: float = DEFAULT_DELTA
    iterations: int = DEFAULT_ITERATIONS
    kernel: str = 'scaled'
    channel_scales: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidInputError(f"PGG bandwidth must be positive, got {self.delta}")
        if self.iterations < 1:
            raise InvalidInputError(f"PGG needs at least one iteration, got {self.iterations}")
        if self.kernel not in KERNELS:
            raise InvalidInputError(f"unknown PGG kernel '{self.kernel}', expected one of {KERNELS}")

    def scales_for(self, dims: int) -> np.ndarray:
        if not self.channel_scales:
            return np.ones(dims)
        if len(self.channel_scales) != dims:
            raise InvalidInputError(f"{len(self.channel_scales)} channel scales for {dims} embedding channels")
        return np.asarray(self.channel_scales, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """X ∈ R^{D×N}"""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise InvalidInputError(f"embedding matrix must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("embedding matrix contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def dims(self) -> int:
        return self.values.shape[0]

    @property
    def count(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]


@dataclass(frozen=True, eq=False)
class MaskIndex:
    """Row-major flat pixel indices of the masked pixels"""
    shape: GridShape
    flat: np.ndarray

    def __post_init__(self):
        flat = np.array(self.flat, dtype=np.int64).reshape(-1)
        if flat.size and np.any(np.diff(flat) <= 0):
            raise InvalidInputError("mask index must be strictly increasing")
        flat.setflags(write=False)
        object.__setattr__(self, 'flat', flat)

    def __len__(self):
        return int(self.flat.size)

    def coordinates(self) -> np.ndarray:
        """(N, 2) pixel coordinates (x, y)"""
        rows, cols = np.divmod(self.flat, self.shape.width)
        return np.stack([cols, rows], axis=1).astype(np.float64)


@dataclass
class PggTrace:
    """Iterates [X^(1), …, X^(R+1)] on one tape"""
    iterates: List[DualValue]
    delta: float
    iterations: int
    kernel: str = 'scaled'

    def __post_init__(self):
        if self.iterates and len(self.iterates) != self.iterations + 1:
            raise InvalidInputError(
                f"trace holds {len(self.iterates)} iterates for {self.iterations} iterations"
            )

    @property
    def x0(self) -> DualValue:
        return self.iterates[0]

    @property
    def tape(self) -> Tape:
        return self.iterates[0].tape

    def matrix(self, r: int = -1) -> EmbeddingMatrix:
        return EmbeddingMatrix(self.iterates[r].value)

    def final(self) -> EmbeddingMatrix:
        return self.matrix(-1)


def _channels(f: Field) -> np.ndarray:
    """(H, W, C) view of a field"""
    values = f.values
    return values[:, :, None] if values.ndim == 2 else values


def gather_masked(fields: Sequence[Field], mask: BinaryMask,
                  scales: Optional[Sequence[float]] = None) -> Tuple[EmbeddingMatrix, MaskIndex]:
    """Column i = concatenated channels at the i-th masked pixel; KE gives 1, SIE 2"""
    if not fields:
        raise InvalidInputError("gather_masked needs at least one field")
    require_same_shape(mask, *fields)
    index = MaskIndex(mask.shape, mask.flat_indices())
    stacked = np.concatenate([_channels(f) for f in fields], axis=2)
    dims = stacked.shape[2]
    x = stacked.reshape(-1, dims)[index.flat].T
    if scales is not None:
        x = x * np.asarray(scales, dtype=np.float64).reshape(dims, 1)
    return EmbeddingMatrix(x), index


def gather_masked_dual(fields: Sequence[DualValue], index: MaskIndex,
                       scales: Optional[Sequence[float]] = None) -> DualValue:
    """Tape-side gather of (H, W) / (H, W, C) fields into a D×N DualValue"""
    h, w = index.shape.array_shape
    columns = []
    for f in fields:
        channels = f.value.size // (h * w)
        columns.append(gather(f.reshape((h * w, channels)), index.flat, axis=0))
    x = transpose(concatenate(columns, axis=1))
    if scales is not None:
        x = x * np.asarray(scales, dtype=np.float64).reshape(-1, 1)
    return x


def _kernel_coefficient(delta: float, kernel: str) -> float:
    if kernel == 'scaled':
        return -0.5 * delta ** 2
    if kernel == 'inverse':
        return -0.5 / delta ** 2
    raise InvalidInputError(f"unknown PGG kernel '{kernel}'")


def _gbms_numpy(x: np.ndarray, delta: float, kernel: str) -> np.ndarray:
    d, n = x.shape
    diff = x.reshape(d, n, 1) - x.reshape(d, 1, n)
    d2 = np.sum(diff * diff, axis=0)
    affinity = np.exp(d2 * _kernel_coefficient(delta, kernel))
    degree = np.sum(affinity, axis=1).reshape(1, n)
    return (x @ affinity) / degree


def _gbms_dual(x: DualValue, delta: float, kernel: str) -> DualValue:
    d, n = x.shape
    diff = x.reshape((d, n, 1)) - x.reshape((d, 1, n))
    d2 = reduce_sum(square(diff), axis=0)
    affinity = exp(d2 * _kernel_coefficient(delta, kernel))
    degree = reduce_sum(affinity, axis=1).reshape((1, n))
    return (x @ affinity) / degree


def gbms_iterate(x, delta: float = DEFAULT_DELTA, kernel: str = 'scaled'):
    """
    One Gaussian-blurring mean-shift step.

    W(i,j) = exp(−δ²/2·‖x_i − x_j‖²) for kernel 'scaled' (exp(−‖·‖²/(2δ²)) for
    'inverse'); output column j is Σ_i x_i W(i,j) / D(j,j). Accepts an
    EmbeddingMatrix (returns one) or a DualValue (stays on its tape).
    """
    if delta <= 0:
        raise InvalidInputError(f"PGG bandwidth must be positive, got {delta}")
    if isinstance(x, DualValue):
        if x.shape[1] == 0:
            return x
        return _gbms_dual(x, delta, kernel)
    if x.count == 0:
        return x
    return EmbeddingMatrix(_gbms_numpy(x.values, delta, kernel))


def pgg_forward(x0, delta: float = DEFAULT_DELTA, r: int = DEFAULT_ITERATIONS,
                kernel: str = 'scaled', tape: Optional[Tape] = None) -> PggTrace:
    """Trace of length r+1; an EmbeddingMatrix becomes the leaf of a tape"""
    if r < 1:
        raise InvalidInputError(f"PGG needs at least one iteration, got {r}")
    if isinstance(x0, EmbeddingMatrix):
        x0 = ensure_dual(x0.values, tape)
    iterates = [x0]
    for _ in range(r):
        iterates.append(gbms_iterate(iterates[-1], delta, kernel))
    logger.debug(f"[PGG] {r} iteration(s) over {x0.shape[1]} columns, delta={delta}")
    return PggTrace(iterates, delta, r, kernel)


def pgg_refine(x: EmbeddingMatrix, cfg: PggConfig = PggConfig()) -> EmbeddingMatrix:
    """Forward-only recurrence without a tape"""
    values = x.values
    if x.count == 0:
        return x
    for _ in range(cfg.iterations):
        values = _gbms_numpy(values, cfg.delta, cfg.kernel)
    return EmbeddingMatrix(values)


def pgg_grouping_loss(trace: PggTrace, labels: Sequence[int]) -> DualValue:
    """Σ over iterates of pull + push; label −1 excludes a column"""
    if not trace.iterates:
        raise InvalidInputError("grouping loss needs a non-empty PGG trace")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n = trace.x0.shape[1]
    if labels.size != n:
        raise InvalidInputError(f"{labels.size} labels for {n} columns")
    included = np.flatnonzero(labels >= 0)
    tape = trace.tape
    if included.size == 0:
        return tape.constant(0.0)
    _, compact = np.unique(labels[included], return_inverse=True)
    total = None
    for x in trace.iterates:
        rows = gather(transpose(x), included, axis=0)
        pull, push, _ = grouping_terms(rows, compact)
        term = pull + push
        total = term if total is None else total + term
    return total


def assign_grouping_labels(index: MaskIndex, poses: Sequence[Pose], sigma: float = 2.0) -> np.ndarray:
    """Person slot of the nearest ground-truth keypoint within 2σ, else −1"""
    labels = np.full(len(index), -1, dtype=np.int64)
    if not poses or len(index) == 0:
        return labels
    points, owners = [], []
    for k, pose in enumerate(poses):
        for kp in pose.keypoints:
            if kp is not None:
                points.append((kp.x, kp.y))
                owners.append(k)
    owners = np.asarray(owners, dtype=np.int64)
    distance, nearest = cKDTree(np.asarray(points, dtype=np.float64)).query(
        index.coordinates(), distance_upper_bound=2.0 * sigma * (1.0 + 1e-12))
    within = np.isfinite(distance)
    labels[within] = owners[nearest[within]]
    return labels


@dataclass(frozen=True, eq=False)
class ScatteredEmbedding:
    """Refined embeddings back on the grid; NaN marks absent pixels"""
    shape: GridShape
    values: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values[:, :, 0])

    def fill_absent(self, originals: Sequence[Field]) -> List[Field]:
        """Splits channels back into fields, unmasked pixels keep the original values"""
        out: List[Field] = []
        start = 0
        present = self.present
        for original in originals:
            channels = _channels(original)
            width = channels.shape[2]
            merged = np.where(present[:, :, None], self.values[:, :, start:start + width], channels)
            start += width
            if isinstance(original, ScalarField):
                out.append(ScalarField(self.shape, merged[:, :, 0]))
            else:
                out.append(VectorField2(self.shape, merged))
        if start != self.values.shape[2]:
            raise InvalidInputError(f"fields provide {start} channels, embedding has {self.values.shape[2]}")
        return out


def scatter_back(x: EmbeddingMatrix, index: MaskIndex, shape: GridShape) -> ScatteredEmbedding:
    """Inverse of gather_masked on the masked pixels"""
    if len(index) != x.count:
        raise InvalidInputError(f"index of length {len(index)} for {x.count} columns")
    if len(index) and (index.flat.min() < 0 or index.flat.max() >= shape.size):
        raise InvalidInputError(f"mask index out of bounds for a {shape.width}x{shape.height} grid")
    values = np.full((shape.size, x.dims), np.nan)
    values[index.flat] = x.values.T
    return ScatteredEmbedding(shape, values.reshape(shape.height, shape.width, x.dims))


def affinity_memory_ratio(mask: BinaryMask) -> float:
    """(N / (W·H))²"""
    return (mask.occupancy / mask.shape.size) ** 2


def refine_fields(fields: Sequence[Field], mask: BinaryMask, cfg: PggConfig = PggConfig()) -> List[Field]:
    """gather → PGG → scatter, unmasked pixels left untouched"""
    dims = sum(_channels(f).shape[2] for f in fields)
    scales = cfg.scales_for(dims)
    x, index = gather_masked(fields, mask, scales)
    refined = pgg_refine(x, cfg)
    unscaled = EmbeddingMatrix(refined.values / scales.reshape(-1, 1))
    scattered = scatter_back(unscaled, index, mask.shape)
    logger.debug(f"[PGG] refined {x.count} masked pixels ({x.dims} channels)")
    return scattered.fill_absent(fields)


def refine_tie(tie: VectorField2, mask: BinaryMask, cfg: PggConfig = PggConfig()) -> VectorField2:
    """PGG over a temporal instance embedding, selected by the frame's own mask"""
    return refine_fields([tie], mask, cfg)[0]


def tie_grouping_loss(tie, mask: BinaryMask, poses: Sequence[Pose], cfg: PggConfig = PggConfig(),
                      sigma: float = 2.0, tape: Optional[Tape] = None) -> DualValue:
    """Grouping loss of a TIE trace; labels come from the frame's ground truth"""
    tie = ensure_dual(tie, tape)
    index = MaskIndex(mask.shape, mask.flat_indices())
    x0 = gather_masked_dual([tie], index, cfg.scales_for(2))
    trace = pgg_forward(x0, cfg.delta, cfg.iterations, cfg.kernel)
    return pgg_grouping_loss(trace, assign_grouping_labels(index, poses, sigma))
