"""
Пространственные эмбеддинги: KE (pull/push), ординальные задачи, SVF/SIE
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import DualValue, Tape, absolute, ensure_dual, exp, gather, reduce_sum, softplus, square
from ..core.errors import InvalidInputError
from ..core.grid import GridShape, VectorField2, coordinate_grid, flat_indices
from ..core.pose import AUX_ORDER, Pose
from ..core.skeleton import Skeleton

logger = logging.getLogger(__name__)


class OrderRelation(Enum):
    """Шесть вспомогательных порядковых задач"""
    L2R = 'l2r'
    R2L = 'r2l'
    T2B = 't2b'
    B2T = 'b2t'
    F2N = 'f2n'
    N2F = 'n2f'


@dataclass(frozen=True)
class SpatialLossWeights:
    """Веса L_det : L_KE : L_aux : L_SIE"""
    det: float = 1.0
    ke: float = 1e-3
    aux: float = 1e-4
    sie: float = 1e-4


@dataclass(frozen=True, eq=False)
class PersonSamples:
    """Keypoint sample sites grouped by person, in pose order"""
    indices: np.ndarray      # (n,) row-major pixel index
    labels: np.ndarray       # (n,) person slot 0..K-1
    positions: np.ndarray    # (n, 2) continuous keypoint positions
    counts: np.ndarray       # (K,) present joints per person
    centers: np.ndarray      # (K, 2) p_{·,k}

    @property
    def person_count(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return len(self.indices)

    @classmethod
    def from_poses(cls, poses: Sequence[Pose], shape: GridShape) -> 'PersonSamples':
        positions: List[Tuple[float, float]] = []
        labels: List[int] = []
        for k, pose in enumerate(poses):
            for kp in pose.keypoints:
                if kp is None:
                    continue
                if not shape.contains(kp.x, kp.y):
                    raise InvalidInputError(
                        f"keypoint ({kp.x}, {kp.y}) of person {k} lies outside the {shape.width}x{shape.height} grid"
                    )
                positions.append((kp.x, kp.y))
                labels.append(k)
        pos = np.array(positions, dtype=np.float64).reshape(-1, 2)
        lab = np.array(labels, dtype=np.int64)
        counts = np.bincount(lab, minlength=len(poses)).astype(np.float64)
        centers = np.array([p.center() for p in poses], dtype=np.float64).reshape(-1, 2)
        return cls(flat_indices(pos, shape), lab, pos, counts, centers)

    def person_weights(self) -> np.ndarray:
        """1 / (K · J_k) per sample; equals 1/(J·K) when every joint is present"""
        return 1.0 / (self.person_count * self.counts[self.labels])


def _grid_of(value) -> GridShape:
    if isinstance(value, DualValue):
        h, w = value.shape[:2]
        return GridShape(w, h)
    return value.shape


def _sample_rows(field: DualValue, samples: PersonSamples) -> DualValue:
    """(n, C) values of an (H, W[, C]) field at the sample sites"""
    h, w = field.shape[:2]
    channels = field.value.size // (h * w)
    flat = field.reshape((h * w, channels))
    return gather(flat, samples.indices, axis=0)


def grouping_terms(values: DualValue, labels: np.ndarray,
                   person_count: Optional[int] = None) -> Tuple[DualValue, DualValue, DualValue]:
    """
    Pull and push over labelled columns.

    values is (n, D); labels map rows to persons 0..K-1. Returns
    (pull, push, references) with references of shape (K, D). Pull uses
    1/(K·n_k) per row, push keeps the k = k′ terms.
    """
    tape = values.tape
    labels = np.asarray(labels, dtype=np.int64)
    k = int(person_count if person_count is not None else (labels.max() + 1 if labels.size else 0))
    if k == 0 or labels.size == 0:
        zero = tape.constant(0.0)
        return zero, zero, tape.constant(np.zeros((0, values.shape[1])))
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    present = counts > 0
    if not np.all(present):
        raise InvalidInputError("every person slot needs at least one sample")
    averaging = np.zeros((k, labels.size))
    averaging[labels, np.arange(labels.size)] = 1.0 / counts[labels]
    refs = tape.constant(averaging) @ values

    residual = values - gather(refs, labels, axis=0)
    weights = 1.0 / (k * counts[labels])
    pull = reduce_sum(reduce_sum(square(residual), axis=1) * weights)

    d = refs.shape[1]
    diff = refs.reshape((k, 1, d)) - refs.reshape((1, k, d))
    push = reduce_sum(exp(reduce_sum(square(diff), axis=2) * -0.5)) * (1.0 / k ** 2)
    return pull, push, refs


def _ke_terms(ke, poses: Sequence[Pose], tape: Optional[Tape]):
    field = ensure_dual(ke, tape)
    samples = PersonSamples.from_poses(poses, _grid_of(field))
    values = _sample_rows(field, samples)
    return grouping_terms(values, samples.labels, samples.person_count)


def pull_loss(ke, poses: Sequence[Pose], tape: Optional[Tape] = None) -> DualValue:
    """L = (1/(J·K)) Σ_k Σ_j ‖m(p_{j,k}) − m̄_{·,k}‖²"""
    pull, _, _ = _ke_terms(ke, poses, tape)
    return pull


def push_loss(ke, poses: Sequence[Pose], tape: Optional[Tape] = None) -> DualValue:
    """L = (1/K²) Σ_k Σ_k′ exp(−½(m̄_k − m̄_k′)²), diagonal included"""
    _, push, _ = _ke_terms(ke, poses, tape)
    return push


def reference_embeddings(ke, poses: Sequence[Pose]) -> np.ndarray:
    """m̄_{·,k} per person"""
    _, _, refs = _ke_terms(ke, poses, None)
    return refs.value.reshape(-1)


def _order_key(pose: Pose, relation: OrderRelation, skeleton: Skeleton) -> float:
    if relation in (OrderRelation.L2R, OrderRelation.R2L):
        return float(pose.center()[0])
    if relation in (OrderRelation.T2B, OrderRelation.B2T):
        return float(pose.center()[1])
    size = pose.head_size(skeleton)
    if size is None:
        raise InvalidInputError(f"{relation.value} ordering needs head_top and neck on every person")
    return size ** 2


def order_ranks(poses: Sequence[Pose], relation: OrderRelation, skeleton: Skeleton) -> np.ndarray:
    """Position of every person under the relation, ties by ascending index"""
    relation = OrderRelation(relation)
    keys = np.array([_order_key(p, relation, skeleton) for p in poses], dtype=np.float64)
    if relation in (OrderRelation.R2L, OrderRelation.B2T, OrderRelation.N2F):
        keys = -keys
    order = np.lexsort((np.arange(len(keys)), keys))
    rank = np.empty(len(keys), dtype=np.int64)
    rank[order] = np.arange(len(keys))
    return rank


def ground_truth_order(poses: Sequence[Pose], relation: OrderRelation, skeleton: Skeleton) -> np.ndarray:
    """
    Ord(k, k′) = +1 when k precedes k′ under the relation, −1 otherwise.

    Diagonal is 0. Ties are broken by ascending person index.
    """
    rank = order_ranks(poses, relation, skeleton)
    ord_matrix = np.where(rank[:, None] < rank[None, :], 1, -1)
    np.fill_diagonal(ord_matrix, 0)
    return ord_matrix


def aux_ordinal_loss(aux_map, poses: Sequence[Pose], ord_matrix: np.ndarray,
                     tape: Optional[Tape] = None) -> DualValue:
    """(1/K²) Σ_{k≠k′} log(1 + exp(Ord·(m̄_k − m̄_k′))) + pull on the aux map"""
    pull, _, refs = _ke_terms(aux_map, poses, tape)
    k = refs.shape[0]
    ord_matrix = np.asarray(ord_matrix, dtype=np.float64)
    if ord_matrix.shape != (k, k):
        raise InvalidInputError(f"order matrix {ord_matrix.shape} does not match {k} persons")
    if k < 2:
        return pull
    diff = refs.reshape((k, 1)) - refs.reshape((1, k))
    off_diagonal = 1.0 - np.eye(k)
    ordinal = reduce_sum(softplus(diff * ord_matrix) * off_diagonal) * (1.0 / k ** 2)
    return ordinal + pull


def aux_total_loss(aux_maps: Sequence, poses: Sequence[Pose], skeleton: Skeleton,
                   tape: Optional[Tape] = None) -> DualValue:
    """Unweighted sum over the six relations, maps in canonical order"""
    if len(aux_maps) != len(AUX_ORDER):
        raise InvalidInputError(f"expected {len(AUX_ORDER)} aux maps, got {len(aux_maps)}")
    total = None
    for name, aux_map in zip(AUX_ORDER, aux_maps):
        relation = OrderRelation(name)
        ord_matrix = ground_truth_order(poses, relation, skeleton) if len(poses) >= 2 \
            else np.zeros((len(poses), len(poses)), dtype=np.int64)
        term = aux_ordinal_loss(aux_map, poses, ord_matrix, tape)
        tape = term.tape
        total = term if total is None else total + term
    return total


def center_offset_loss(field, poses: Sequence[Pose], centers: np.ndarray,
                       tape: Optional[Tape] = None) -> DualValue:
    """(1/(J·K)) Σ ‖F(p_{j,k}) − (p_{j,k} − c_k)‖₁ for arbitrary per-person centers"""
    field = ensure_dual(field, tape)
    samples = PersonSamples.from_poses(poses, _grid_of(field))
    if samples.person_count == 0:
        return field.tape.constant(0.0)
    predicted = _sample_rows(field, samples)
    targets = samples.positions - np.asarray(centers, dtype=np.float64)[samples.labels]
    per_row = reduce_sum(absolute(predicted - targets), axis=1)
    return reduce_sum(per_row * samples.person_weights())


def svf_loss(svf, poses: Sequence[Pose], tape: Optional[Tape] = None) -> DualValue:
    """ℓ1 against the displacement from the person center; subgradient 0 at 0"""
    centers = np.array([p.center() for p in poses], dtype=np.float64).reshape(-1, 2)
    return center_offset_loss(svf, poses, centers, tape)


def decode_sie(svf: VectorField2) -> VectorField2:
    """S(p) = p − Ŝ(p)"""
    return VectorField2(svf.shape, coordinate_grid(svf.shape).values - svf.values)


def decode_sie_dual(svf: DualValue) -> DualValue:
    """decode_sie on a tape, for training through PGG"""
    shape = _grid_of(svf)
    return coordinate_grid(shape).values - svf


def spatial_total_loss(det: DualValue, ke: DualValue, aux: DualValue, sie: DualValue,
                       weights: SpatialLossWeights = SpatialLossWeights()) -> DualValue:
    """Взвешенная сумма пространственных лоссов"""
    return det * weights.det + ke * weights.ke + aux * weights.aux + sie * weights.sie
