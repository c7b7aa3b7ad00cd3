"""
Временные эмбеддинги: HE triplet loss, TVF/TIE и потенциалы Ψ
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import DualValue, Tape, ensure_dual, reduce_sum, relu, square
from ..core.errors import InvalidInputError
from ..core.grid import ScalarField, VectorField2, require_same_shape
from ..core.pose import HumanEmbedding, Pose
from ..spatial.embedding import center_offset_loss, decode_sie

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.3
DEFAULT_LAMBDA_HE = 3.0
DEFAULT_LAMBDA_TIE = 1.0

EmbeddingLike = Union[HumanEmbedding, np.ndarray, Sequence[float]]


@dataclass(frozen=True, eq=False)
class TemporalFields:
    """TVF T̂ (на кадре t) и T̂′ (на кадре t−1)"""
    forward: VectorField2
    backward: VectorField2

    def __post_init__(self):
        require_same_shape(self.forward, self.backward)

    def decoded(self) -> Tuple[VectorField2, VectorField2]:
        """(T, T′)"""
        return decode_tie(self.forward), decode_tie(self.backward)


def _stack(items, tape: Optional[Tape]) -> DualValue:
    if isinstance(items, DualValue):
        return ensure_dual(items, tape)
    rows = [it.vector if isinstance(it, HumanEmbedding) else np.asarray(it, dtype=np.float64) for it in items]
    return ensure_dual(np.stack(rows), tape)


def he_triplet_loss(anchors, positives, negatives, alpha: float = DEFAULT_ALPHA,
                    tape: Optional[Tape] = None) -> DualValue:
    """Σ max(0, ‖H_a − H_p‖² − ‖H_a − H_n‖² + α)"""
    sizes = {len(anchors), len(positives), len(negatives)}
    if len(sizes) != 1:
        raise InvalidInputError(f"triplet lists are not aligned: {sorted(sizes)}")
    if len(anchors) == 0:
        return (tape or Tape()).constant(0.0)
    a = _stack(anchors, tape)
    p = _stack(positives, a.tape)
    n = _stack(negatives, a.tape)
    if not (a.shape == p.shape == n.shape):
        raise InvalidInputError("triplet embeddings have different lengths")
    d_pos = reduce_sum(square(a - p), axis=1)
    d_neg = reduce_sum(square(a - n), axis=1)
    return reduce_sum(relu(d_pos - d_neg + alpha))


def _shared_persons(poses_t: Sequence[Pose], poses_prev: Sequence[Pose]):
    prev = {p.person_id: p for p in poses_prev if p.person_id is not None}
    pairs = [(p, prev[p.person_id]) for p in poses_t if p.person_id is not None and p.person_id in prev]
    dropped = len(poses_t) + len(poses_prev) - 2 * len(pairs)
    if dropped:
        logger.debug(f"[TVF] {dropped} person(s) present in one frame only, excluded")
    return pairs


def tvf_loss_terms(fields, poses_t: Sequence[Pose], poses_prev: Sequence[Pose],
                   tape: Optional[Tape] = None) -> Tuple[DualValue, DualValue]:
    """
    (forward, backward) ℓ1 terms.

    forward: T̂(p^t_{j,k}) against p^t_{j,k} − p^{t−1}_{·,k};
    backward: T̂′(p^{t−1}_{j,k}) against p^{t−1}_{j,k} − p^t_{·,k}.
    fields is TemporalFields or a (forward, backward) pair of DualValues.
    """
    forward, backward = (fields.forward, fields.backward) if isinstance(fields, TemporalFields) else fields
    forward = ensure_dual(forward, tape)
    backward = ensure_dual(backward, forward.tape)
    pairs = _shared_persons(poses_t, poses_prev)
    if not pairs:
        zero = forward.tape.constant(0.0)
        return zero, zero
    cur = [c for c, _ in pairs]
    prev = [p for _, p in pairs]
    prev_centers = np.array([p.center() for p in prev])
    cur_centers = np.array([c.center() for c in cur])
    fwd = center_offset_loss(forward, cur, prev_centers)
    bwd = center_offset_loss(backward, prev, cur_centers)
    return fwd, bwd


def tvf_loss(fields, poses_t: Sequence[Pose], poses_prev: Sequence[Pose],
             tape: Optional[Tape] = None) -> DualValue:
    fwd, bwd = tvf_loss_terms(fields, poses_t, poses_prev, tape)
    return fwd + bwd


def decode_tie(tvf: VectorField2) -> VectorField2:
    """T(p) = p − T̂(p)"""
    return decode_sie(tvf)


def _vector(item: EmbeddingLike) -> np.ndarray:
    if isinstance(item, HumanEmbedding):
        return item.vector
    return np.asarray(item, dtype=np.float64).reshape(-1)


def psi_he(a: EmbeddingLike, b: EmbeddingLike) -> float:
    """‖H_a − H_b‖²"""
    va, vb = _vector(a), _vector(b)
    if va.shape != vb.shape:
        raise InvalidInputError(f"human embeddings differ in length: {va.size} vs {vb.size}")
    diff = va - vb
    return float(diff @ diff)


def psi_tie(pose_t: Pose, pose_prev: Pose, sie_t: VectorField2, sie_prev: VectorField2,
            tie_fwd: VectorField2, tie_bwd: VectorField2) -> float:
    """
    (1/2J′) Σ_j ‖T′(p^{t−1}_j) − S^t(p^t_j)‖² + ‖T(p^t_j) − S^{t−1}(p^{t−1}_j)‖²

    J′ is the number of joints present in both poses; with none shared the
    pair is incomparable and the result is math.inf.
    """
    shared = [j for j in pose_t.present() if pose_prev.has(j)]
    if not shared:
        return math.inf
    pts_t = pose_t.positions()[shared]
    pts_prev = pose_prev.positions()[shared]
    backward_term = tie_bwd.sample(pts_prev) - sie_t.sample(pts_t)
    forward_term = tie_fwd.sample(pts_t) - sie_prev.sample(pts_prev)
    total = np.sum(backward_term ** 2) + np.sum(forward_term ** 2)
    return float(total / (2 * len(shared)))


def psi_ke_sie(pose_t: Pose, pose_prev: Pose, ke_t: ScalarField, ke_prev: ScalarField,
               sie_t: VectorField2, sie_prev: VectorField2) -> float:
    """
    (1/J′) Σ_j (K^t(p^t_j) − K^{t−1}(p^{t−1}_j))² + ‖S^t(p^t_j) − S^{t−1}(p^{t−1}_j)‖²

    Baseline cue: KE and SIE of one person change smoothly between frames.
    math.inf without shared joints.
    """
    shared = [j for j in pose_t.present() if pose_prev.has(j)]
    if not shared:
        return math.inf
    pts_t = pose_t.positions()[shared]
    pts_prev = pose_prev.positions()[shared]
    ke_term = ke_t.sample(pts_t) - ke_prev.sample(pts_prev)
    sie_term = sie_t.sample(pts_t) - sie_prev.sample(pts_prev)
    return float((np.sum(ke_term ** 2) + np.sum(sie_term ** 2)) / len(shared))


def combined_cost(d_he: float, d_tie: float, lambda_he: float = DEFAULT_LAMBDA_HE,
                  lambda_tie: float = DEFAULT_LAMBDA_TIE) -> float:
    """Ψ = λ_HE·Ψ_HE + λ_TIE·Ψ_TIE как стоимость; нулевой вес отключает слагаемое"""
    if lambda_he < 0 or lambda_tie < 0:
        raise InvalidInputError("cost weights must be non-negative")
    total = 0.0
    if lambda_he > 0:
        total += lambda_he * d_he
    if lambda_tie > 0:
        total += lambda_tie * d_tie
    return total
