"""
Прогон decode → track → метрики по нескольким последовательностям
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

from ..config.run_config import RunConfig
from ..config.settings import settings
from ..core.errors import InvalidInputError
from ..graph.pipeline import SequencePipeline
from ..simulator.fields import NoiseConfig
from ..storage.sequence import LoadedSequence, load_sequence
from .metrics import EvaluationReport, evaluate_frames, merge_reports

logger = logging.getLogger(__name__)


@dataclass
class SequenceResult:
    sequence_id: str
    report: EvaluationReport
    trajectories: list


def run_sequence(loaded: LoadedSequence, config: RunConfig, use_pgg: Optional[bool] = None) -> SequenceResult:
    """Decode and track one loaded sequence, then score it against its ground truth"""
    manifest = loaded.manifest
    noise = NoiseConfig.from_dict(manifest.noise) if manifest.noise else None
    pipeline = SequencePipeline(manifest.sequence_id, config, loaded.skeleton, noise, use_pgg)
    trajectories = pipeline.run(loaded.bundles)
    tracked = dict(pipeline.tracked_frames())
    pred = [tracked.get(b.time_index, []) for b in loaded.bundles]
    report = evaluate_frames(pred, loaded.ground_truth, loaded.skeleton, config.eval.pckh_factor)
    return SequenceResult(manifest.sequence_id, report, trajectories)


def evaluate_sequence(directory: str, config: RunConfig, use_pgg: Optional[bool] = None) -> SequenceResult:
    return run_sequence(load_sequence(directory), config, use_pgg)


def evaluate_sequences(directories: Sequence[str], config: Optional[RunConfig] = None,
                       workers: Optional[int] = None, use_pgg: Optional[bool] = None,
                       mode: Optional[str] = None):
    """
    Evaluates every sequence directory and pools the counts.

    mode overrides tracker.mode, e.g. "ke_sie" for the KE/SIE baseline.

    Results are merged in input order, so the report does not depend on
    the worker count. Returns (merged report, per-sequence results).
    """
    config = config or RunConfig()
    if mode:
        config = config.with_overrides(tracker={'mode': mode})
    if not directories:
        raise InvalidInputError("no sequences to evaluate")
    workers = max(1, workers or settings.WORKERS)
    logger.info(f"[EVAL] {len(directories)} sequences, {workers} workers")
    if workers == 1:
        results: List[SequenceResult] = [evaluate_sequence(d, config, use_pgg) for d in directories]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda d: evaluate_sequence(d, config, use_pgg), directories))
    skeleton = results[0].report.skeleton
    merged = merge_reports([r.report for r in results], skeleton)
    logger.info(f"[EVAL] pooled AP={merged.total_ap():.4f} MOTA={merged.total_mota():.4f}")
    return merged, results
