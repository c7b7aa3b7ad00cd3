"""
Набор проверок градиентов: каждый лосс на случайных экземплярах 8×8
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ..autodiff import DualValue, Tape, finite_difference_check
from ..core.errors import InvalidInputError
from ..core.grid import GridShape
from ..core.pose import AUX_ORDER, Pose
from ..core.skeleton import simple_skeleton
from ..grouping.pgg import pgg_forward, pgg_grouping_loss
from ..spatial.embedding import aux_total_loss, pull_loss, push_loss, svf_loss
from ..spatial.heatmap import detection_loss, render_confidence
from ..temporal.embedding import he_triplet_loss, tvf_loss

logger = logging.getLogger(__name__)

LOSS_NAMES = ('det', 'pull', 'push', 'aux', 'svf', 'tvf', 'triplet', 'pgg')
INSTANCE_GRID = GridShape(8, 8)
INSTANCE_JOINTS = ('head_top', 'neck', 'pelvis')
TRIPLET_DIM = 8
PGG_COLUMNS = 12
PGG_ITERATIONS = 2

LossBuilder = Callable[[Tape, DualValue], DualValue]


def random_poses(rng: np.random.Generator, shape: GridShape = INSTANCE_GRID,
                 joints: int = len(INSTANCE_JOINTS), max_people: int = 3) -> List[Pose]:
    """1..max_people poses with integer keypoints and ids 0..K−1"""
    count = int(rng.integers(1, max_people + 1))
    poses = []
    for k in range(count):
        xy = np.stack([rng.integers(0, shape.width, joints), rng.integers(0, shape.height, joints)], axis=1)
        poses.append(Pose.from_arrays(xy.astype(np.float64), person_id=k))
    return poses


def _instance(name: str, rng: np.random.Generator) -> Tuple[LossBuilder, np.ndarray]:
    """(loss builder, point at which to check it)"""
    h, w = INSTANCE_GRID.array_shape
    poses = random_poses(rng)
    if name == 'det':
        gt = render_confidence(poses, INSTANCE_GRID)
        return (lambda tape, x: detection_loss(x, gt, tape=tape)), rng.uniform(0, 1, (len(INSTANCE_JOINTS), h, w))
    if name == 'pull':
        return (lambda tape, x: pull_loss(x, poses)), rng.normal(0, 1, (h, w))
    if name == 'push':
        return (lambda tape, x: push_loss(x, poses)), rng.normal(0, 1, (h, w))
    if name == 'aux':
        skeleton = simple_skeleton(INSTANCE_JOINTS)
        return ((lambda tape, x: aux_total_loss([x[i] for i in range(len(AUX_ORDER))], poses, skeleton)),
                rng.normal(0, 1, (len(AUX_ORDER), h, w)))
    if name == 'svf':
        return (lambda tape, x: svf_loss(x, poses)), rng.normal(0, 3, (h, w, 2))
    if name == 'tvf':
        previous = random_poses(rng)
        return (lambda tape, x: tvf_loss((x[0], x[1]), poses, previous)), rng.normal(0, 3, (2, h, w, 2))
    if name == 'triplet':
        n = int(rng.integers(1, 4))
        return (lambda tape, x: he_triplet_loss(x[0], x[1], x[2])), rng.normal(0, 1, (3, n, TRIPLET_DIM))
    if name == 'pgg':
        labels = rng.integers(0, 3, PGG_COLUMNS)
        centers = rng.normal(0, 1, (3, 3))
        x0 = (centers[labels] + rng.normal(0, 0.2, (PGG_COLUMNS, 3))).T

        def pgg_loss(tape: Tape, x: DualValue) -> DualValue:
            return pgg_grouping_loss(pgg_forward(x, r=PGG_ITERATIONS), labels)
        return pgg_loss, x0
    raise InvalidInputError(f"unknown loss '{name}', expected one of {', '.join(LOSS_NAMES)}")


@dataclass
class LossCheck:
    """Worst case over the instances of one loss"""
    loss: str
    instances: int
    max_relative_error: float
    checked: int
    excluded: int
    errors: List[float] = field(default_factory=list, repr=False)

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance

    def to_dict(self) -> Dict:
        return {
            'loss': self.loss,
            'instances': self.instances,
            'max_relative_error': self.max_relative_error,
            'checked': self.checked,
            'excluded': self.excluded,
        }


def check_loss(name: str, instances: int = 20, seed: int = 0, step: float = 1e-4) -> LossCheck:
    if instances < 1:
        raise InvalidInputError("at least one instance is required")
    rng = np.random.default_rng([seed, LOSS_NAMES.index(name) if name in LOSS_NAMES else 99])
    errors, checked, excluded = [], 0, 0
    for _ in range(instances):
        builder, x = _instance(name, rng)
        report = finite_difference_check(builder, x, step)
        errors.append(report.max_relative_error)
        checked += report.checked
        excluded += len(report.excluded)
    result = LossCheck(name, instances, max(errors), checked, excluded, errors)
    logger.info(f"[GRADCHECK] {name}: max rel err {result.max_relative_error:.3e} "
                f"({checked} coords, {excluded} kinks excluded)")
    return result


def resolve_losses(selection: str) -> Sequence[str]:
    if selection == 'all':
        return LOSS_NAMES
    if selection not in LOSS_NAMES:
        raise InvalidInputError(f"unknown loss '{selection}', expected all or one of {', '.join(LOSS_NAMES)}")
    return (selection,)


def run_grad_checks(selection: str = 'all', instances: int = 20, seed: int = 0) -> List[LossCheck]:
    return [check_loss(name, instances, seed) for name in resolve_losses(selection)]
