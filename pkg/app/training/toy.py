"""
Игрушечное обучение: линейный попиксельный предиктор KE+SVF через PGG
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..autodiff import DualValue, Tape, matmul, reshape
from ..config.run_config import RunConfig
from ..config.settings import settings
from ..core.errors import InvalidInputError, TrainingDivergedError
from ..core.grid import GridShape, ScalarField, VectorField2, coordinate_grid
from ..core.pose import FrameBundle, Pose
from ..core.skeleton import Skeleton
from ..evaluation.metrics import TOTAL_COLUMN, EvaluationReport, evaluate_frames
from ..graph.pipeline import FramePipeline
from ..grouping.pgg import MaskIndex, assign_grouping_labels, gather_masked_dual, pgg_forward, pgg_grouping_loss
from ..simulator.fields import NoiseConfig, simulate
from ..simulator.scene import SceneConfig
from ..spatial.embedding import decode_sie_dual, pull_loss, push_loss, svf_loss
from ..spatial.heatmap import pose_mask

logger = logging.getLogger(__name__)

FEATURES = ('ke', 'svf_x', 'svf_y', 'x', 'y')
OUTPUTS = ('ke', 'svf_x', 'svf_y')
HELD_OUT_OFFSET = 1000


def toy_noise() -> NoiseConfig:
    """Стандартный шумный набор: джиттер и путаница KE"""
    return NoiseConfig(ke_spacing=2.0, ke_jitter=0.3, ke_background=0.3, vector_jitter=0.5,
                       confusion=0.1, he_dim=8)


@dataclass(frozen=True)
class TrainConfig:
    """
    Paired-run settings. Scenes are seeded from seed (training) and
    seed + 1000 (held-out); the schedule halves the rate at 50% and 75%
    of the steps.
    """
    learning_rate: float = 0.02
    steps: int = 200
    scenes: int = 4
    frames_per_scene: int = 2
    held_out_scenes: int = 4
    with_pgg: bool = True
    seed: int = 0
    grid: GridShape = GridShape(80, 60)
    person_count: int = 2
    person_height: float = 30.0
    ke_weight: float = 1.0
    sie_weight: float = 0.1
    grouping_weight: float = 1.0
    train_mask_tau: float = 0.6
    pgg_delta: float = 5.0
    pgg_iterations: int = 1
    pgg_kernel: str = 'inverse'
    init_scale: float = 0.1
    noise: NoiseConfig = field(default_factory=toy_noise)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidInputError(f"learning rate must be positive, got {self.learning_rate}")
        if self.steps < 0 or self.scenes < 1 or self.frames_per_scene < 1 or self.held_out_scenes < 1:
            raise InvalidInputError("steps must be non-negative and scene counts positive")
        if not 0.0 < self.train_mask_tau < 1.0:
            raise InvalidInputError("train_mask_tau must lie in (0, 1)")

    def rate_at(self, step: int) -> float:
        factor = 1.0
        if step >= self.steps * 0.5:
            factor *= 0.5
        if step >= self.steps * 0.75:
            factor *= 0.5
        return self.learning_rate * factor

    def scene(self, seed: int) -> SceneConfig:
        return SceneConfig(person_count=self.person_count, frame_count=self.frames_per_scene,
                           grid=self.grid, person_height=self.person_height, seed=seed)

    def run_config(self) -> RunConfig:
        return RunConfig().with_overrides(pgg={'delta': self.pgg_delta, 'iterations': self.pgg_iterations,
                                               'kernel': self.pgg_kernel})

    def to_dict(self) -> Dict:
        return {
            'learning_rate': self.learning_rate, 'steps': self.steps, 'scenes': self.scenes,
            'frames_per_scene': self.frames_per_scene, 'held_out_scenes': self.held_out_scenes,
            'with_pgg': self.with_pgg, 'seed': self.seed, 'grid': self.grid.to_dict(),
            'person_count': self.person_count, 'person_height': self.person_height,
            'ke_weight': self.ke_weight, 'sie_weight': self.sie_weight,
            'grouping_weight': self.grouping_weight, 'train_mask_tau': self.train_mask_tau,
            'pgg_delta': self.pgg_delta, 'pgg_iterations': self.pgg_iterations,
            'pgg_kernel': self.pgg_kernel, 'noise': self.noise.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class ToyPredictor:
    """
    Per-pixel linear map from input features to (KE, SVF).

    Coordinate and vector features are divided by feature_scale; the SVF
    outputs are multiplied back by it.
    """
    weights: np.ndarray   # (F, 3)
    bias: np.ndarray      # (3,)
    feature_scale: float = 30.0

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if weights.shape != (len(FEATURES), len(OUTPUTS)) or bias.shape != (len(OUTPUTS),):
            raise InvalidInputError(f"predictor expects weights {(len(FEATURES), len(OUTPUTS))} and bias (3,)")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise InvalidInputError("predictor parameters must be finite")
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'bias', bias)

    @classmethod
    def initial(cls, seed: int, scale: float = 0.1, feature_scale: float = 30.0) -> 'ToyPredictor':
        rng = np.random.default_rng([seed, 7])
        return cls(rng.normal(0.0, scale, size=(len(FEATURES), len(OUTPUTS))),
                   np.zeros(len(OUTPUTS)), feature_scale)

    def features(self, bundle: FrameBundle) -> np.ndarray:
        """(H·W, F) input matrix"""
        coords = coordinate_grid(bundle.shape).values
        stacked = np.concatenate([
            bundle.ke.values[:, :, None],
            bundle.svf.values / self.feature_scale,
            coords / self.feature_scale,
        ], axis=2)
        return stacked.reshape(-1, len(FEATURES))

    def _output_scale(self) -> np.ndarray:
        return np.array([1.0, self.feature_scale, self.feature_scale])

    def forward_dual(self, bundle: FrameBundle, weights: DualValue, bias: DualValue) -> Tuple[DualValue, DualValue]:
        """(KE (H, W), SVF (H, W, 2)) on the parameters' tape"""
        tape = weights.tape
        h, w = bundle.shape.array_shape
        out = (matmul(tape.constant(self.features(bundle)), weights) + bias) * self._output_scale()
        out = reshape(out, (h, w, len(OUTPUTS)))
        return out[:, :, 0], out[:, :, 1:3]

    def predict(self, bundle: FrameBundle) -> FrameBundle:
        """Bundle with KE and SVF replaced by the predictor output"""
        h, w = bundle.shape.array_shape
        out = (self.features(bundle) @ self.weights + self.bias) * self._output_scale()
        out = out.reshape(h, w, len(OUTPUTS))
        return replace(bundle, ke=ScalarField(bundle.shape, out[:, :, 0]),
                       svf=VectorField2(bundle.shape, out[:, :, 1:3]))

    def to_dict(self) -> Dict:
        return {'weights': self.weights.tolist(), 'bias': self.bias.tolist(),
                'feature_scale': self.feature_scale}


@dataclass
class TrainResult:
    config: TrainConfig
    predictor: ToyPredictor
    losses: List[float]

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    def loss_curve(self) -> pd.DataFrame:
        frame = pd.DataFrame({'step': np.arange(len(self.losses)), 'loss': self.losses})
        return frame.set_index('step')


def training_frames(cfg: TrainConfig, held_out: bool = False) -> List[FrameBundle]:
    offset = HELD_OUT_OFFSET if held_out else 0
    count = cfg.held_out_scenes if held_out else cfg.scenes
    frames: List[FrameBundle] = []
    for i in range(count):
        _, bundles = simulate(cfg.scene(cfg.seed + offset + i), cfg.noise)
        frames.extend(bundles)
    return frames


def frame_loss(predictor: ToyPredictor, bundle: FrameBundle, weights: DualValue, bias: DualValue,
               cfg: TrainConfig) -> DualValue:
    """Weighted KE + SIE losses, plus the PGG grouping loss when enabled"""
    poses = list(bundle.ground_truth or ())
    ke, svf = predictor.forward_dual(bundle, weights, bias)
    loss = (pull_loss(ke, poses) + push_loss(ke, poses)) * cfg.ke_weight + svf_loss(svf, poses) * cfg.sie_weight
    if cfg.with_pgg:
        mask = pose_mask(bundle.heatmaps, cfg.train_mask_tau)
        if mask.occupancy:
            index = MaskIndex(mask.shape, mask.flat_indices())
            x0 = gather_masked_dual([ke, decode_sie_dual(svf)], index)
            trace = pgg_forward(x0, cfg.pgg_delta, cfg.pgg_iterations, cfg.pgg_kernel)
            labels = assign_grouping_labels(index, poses, cfg.noise.paint_sigma)
            loss = loss + pgg_grouping_loss(trace, labels) * cfg.grouping_weight
    return loss


def _batch_loss(predictor: ToyPredictor, frames: Sequence[FrameBundle],
                cfg: TrainConfig) -> Tuple[float, np.ndarray, np.ndarray]:
    tape = Tape()
    weights = tape.leaf(predictor.weights)
    bias = tape.leaf(predictor.bias)
    total = None
    for bundle in frames:
        term = frame_loss(predictor, bundle, weights, bias, cfg)
        total = term if total is None else total + term
    total = total * (1.0 / len(frames))
    tape.backward(total)
    return float(total.item()), weights.grad, bias.grad


def train(cfg: TrainConfig, frames: Optional[Sequence[FrameBundle]] = None,
          progress: bool = True) -> TrainResult:
    """
    Plain gradient descent on the fixed dataset.

    losses[s] is the loss before step s; the last entry is the loss of the
    final predictor, so zero steps return one value and the initial predictor.
    """
    frames = list(frames) if frames is not None else training_frames(cfg)
    predictor = ToyPredictor.initial(cfg.seed, cfg.init_scale, cfg.person_height)
    losses: List[float] = []
    last_finite: Optional[float] = None
    mode = 'with PGG' if cfg.with_pgg else 'without PGG'
    logger.info(f"[TRAIN] {cfg.steps} steps on {len(frames)} frames ({mode})")
    steps = tqdm(range(cfg.steps), desc=f"train-toy ({mode})", disable=not progress or settings.QUIET)
    for step in steps:
        loss, g_w, g_b = _batch_loss(predictor, frames, cfg)
        if not math.isfinite(loss) or not (np.all(np.isfinite(g_w)) and np.all(np.isfinite(g_b))):
            raise TrainingDivergedError(step, last_finite)
        losses.append(loss)
        last_finite = loss
        rate = cfg.rate_at(step)
        try:
            predictor = replace(predictor, weights=predictor.weights - rate * g_w,
                                bias=predictor.bias - rate * g_b)
        except InvalidInputError:
            raise TrainingDivergedError(step, last_finite)
        steps.set_postfix(loss=f"{loss:.4f}")
    final, _, _ = _batch_loss(predictor, frames, cfg)
    if not math.isfinite(final):
        raise TrainingDivergedError(cfg.steps, last_finite)
    losses.append(final)
    logger.info(f"[TRAIN] loss {losses[0]:.4f} → {final:.4f}")
    return TrainResult(cfg, predictor, losses)


def decode_report(result: TrainResult, frames: Sequence[FrameBundle], skeleton: Skeleton,
                  workers: Optional[int] = None) -> EvaluationReport:
    """AP of the trained predictor on frames; PGG at decode follows the training flag"""
    cfg = result.config

    def one(bundle: FrameBundle) -> List[Pose]:
        pipeline = FramePipeline(cfg.run_config(), skeleton, use_pgg=cfg.with_pgg)
        return pipeline.decode(result.predictor.predict(bundle))

    workers = max(1, workers or settings.WORKERS)
    if workers == 1:
        decoded = [one(b) for b in frames]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            decoded = list(pool.map(one, frames))
    return evaluate_frames(decoded, [b.ground_truth or () for b in frames], skeleton)


@dataclass
class AblationReport:
    with_pgg: EvaluationReport
    without_pgg: EvaluationReport

    def table(self) -> pd.DataFrame:
        """AP rows of both runs and their delta; columns as in metrics.csv"""
        ap_with = self.with_pgg.table().loc['AP']
        ap_without = self.without_pgg.table().loc['AP']
        frame = pd.DataFrame([ap_with, ap_without, ap_with - ap_without],
                             index=['AP_with_pgg', 'AP_without_pgg', 'AP_delta'])
        frame.index.name = 'metric'
        return frame

    @property
    def total_delta(self) -> float:
        return float(self.table().loc['AP_delta', TOTAL_COLUMN])


def evaluate_ablation(with_run: TrainResult, without_run: TrainResult,
                      frames: Optional[Sequence[FrameBundle]] = None) -> AblationReport:
    """Decodes the held-out scenes with both predictors"""
    frames = list(frames) if frames is not None else training_frames(with_run.config, held_out=True)
    if not frames:
        raise InvalidInputError("ablation needs at least one held-out frame")
    skeleton = with_run.config.scene(0).skeleton()
    report = AblationReport(decode_report(with_run, frames, skeleton), decode_report(without_run, frames, skeleton))
    logger.info(f"[TRAIN] held-out Total AP delta {report.total_delta:+.4f}")
    return report


def paired_training(cfg: TrainConfig, progress: bool = True) -> Tuple[TrainResult, TrainResult, AblationReport]:
    """Both arms on the same frames and seed"""
    frames = training_frames(cfg)
    with_run = train(replace(cfg, with_pgg=True), frames, progress)
    without_run = train(replace(cfg, with_pgg=False), frames, progress)
    return with_run, without_run, evaluate_ablation(with_run, without_run)
