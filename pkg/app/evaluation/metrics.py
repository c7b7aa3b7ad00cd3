"""
Метрики: PCKh-сопоставление, AP по суставам и MOTA (CLEAR-MOT)
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.errors import InvalidInputError
from ..core.pose import Pose
from ..core.skeleton import Skeleton, default_skeleton
from ..grouping.decoder import pose_score

logger = logging.getLogger(__name__)

DEFAULT_PCKH_FACTOR = 0.5
TOTAL_COLUMN = 'Total'
COUNT_ROWS = ('GT', 'TP', 'FP', 'FN', 'IDSW')


@dataclass(frozen=True)
class JointMatch:
    """Один сопоставленный сустав: тип, id gt-персоны, id предсказания"""
    joint: int
    gt_id: int
    pred_id: Optional[int]


@dataclass(frozen=True)
class MatchResult:
    """
    Per-frame, per-joint counts.

    scored holds (joint, score, is_true_positive) for every predicted joint,
    which is what average_precision sweeps over.
    """
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    idsw: np.ndarray
    scored: Tuple[Tuple[int, float, bool], ...] = ()
    matches: Tuple[JointMatch, ...] = ()
    skipped_gt: int = 0

    def __post_init__(self):
        for name in ('tp', 'fp', 'fn', 'idsw'):
            values = np.asarray(getattr(self, name), dtype=np.int64)
            if np.any(values < 0):
                raise InvalidInputError(f"negative {name} count")
            object.__setattr__(self, name, values)

    @property
    def gt(self) -> np.ndarray:
        return self.tp + self.fn

    @property
    def joint_count(self) -> int:
        return self.tp.shape[0]

    @classmethod
    def empty(cls, joint_count: int) -> 'MatchResult':
        zeros = np.zeros(joint_count, dtype=np.int64)
        return cls(zeros, zeros, zeros, zeros)


@dataclass
class CountTotals:
    """Суммы счётчиков по последовательности (или нескольким)"""
    gt: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    idsw: np.ndarray
    skipped_gt: int = 0

    @classmethod
    def zeros(cls, joint_count: int) -> 'CountTotals':
        return cls(*(np.zeros(joint_count, dtype=np.int64) for _ in range(5)))

    def add(self, result: MatchResult):
        self.gt = self.gt + result.gt
        self.tp = self.tp + result.tp
        self.fp = self.fp + result.fp
        self.fn = self.fn + result.fn
        self.idsw = self.idsw + result.idsw
        self.skipped_gt += result.skipped_gt

    def merge(self, other: 'CountTotals') -> 'CountTotals':
        return CountTotals(self.gt + other.gt, self.tp + other.tp, self.fp + other.fp,
                           self.fn + other.fn, self.idsw + other.idsw,
                           self.skipped_gt + other.skipped_gt)


def _person_hits(pred: Pose, gt: Pose, threshold: float) -> List[int]:
    hits = []
    for j in pred.present():
        if not gt.has(j):
            continue
        a, b = pred.keypoints[j], gt.keypoints[j]
        if np.hypot(a.x - b.x, a.y - b.y) <= threshold:
            hits.append(j)
    return hits


def match_pckh(pred: Sequence[Pose], gt: Sequence[Pose], factor: float = DEFAULT_PCKH_FACTOR,
               skeleton: Optional[Skeleton] = None) -> MatchResult:
    """
    PCKh matching of one frame.

    Predicted persons are taken by descending pose_score and each claims the
    unmatched gt person with the most joints within factor·head_size (lower
    gt index on ties). Ground-truth persons without a head segment are
    skipped and counted in skipped_gt.
    """
    if factor <= 0:
        raise InvalidInputError(f"PCKh factor must be positive, got {factor}")
    skeleton = skeleton or default_skeleton()
    joints = skeleton.joint_count
    tp = np.zeros(joints, dtype=np.int64)
    fp = np.zeros(joints, dtype=np.int64)
    fn = np.zeros(joints, dtype=np.int64)

    usable: List[Tuple[int, Pose, float]] = []
    skipped = 0
    for g, pose in enumerate(gt):
        head = pose.head_size(skeleton)
        if head is None:
            skipped += 1
            continue
        usable.append((g, pose, factor * head))
    if skipped:
        logger.warning(f"[EVAL] {skipped} ground-truth person(s) without head segment skipped")

    order = sorted(range(len(pred)), key=lambda i: (-pose_score(pred[i]), i))
    taken = set()
    pairs: Dict[int, int] = {}
    for i in order:
        best, best_hits = None, 0
        for slot, (_, pose, thr) in enumerate(usable):
            if slot in taken:
                continue
            hits = len(_person_hits(pred[i], pose, thr))
            if hits > best_hits:
                best, best_hits = slot, hits
        if best is not None:
            taken.add(best)
            pairs[i] = best

    scored: List[Tuple[int, float, bool]] = []
    matches: List[JointMatch] = []
    for i, pose in enumerate(pred):
        score = pose_score(pose)
        hits = set()
        if i in pairs:
            g, gt_pose, thr = usable[pairs[i]]
            hits = set(_person_hits(pose, gt_pose, thr))
            gt_id = gt_pose.person_id if gt_pose.person_id is not None else g
            matches.extend(JointMatch(j, gt_id, pose.person_id) for j in sorted(hits))
        for j in pose.present():
            if j in hits:
                tp[j] += 1
            else:
                fp[j] += 1
            scored.append((j, score, j in hits))

    matched_gt = {slot: set(_person_hits(pred[i], usable[slot][1], usable[slot][2]))
                  for i, slot in pairs.items()}
    for slot, (_, pose, _) in enumerate(usable):
        hit = matched_gt.get(slot, set())
        for j in pose.present():
            if j not in hit:
                fn[j] += 1

    return MatchResult(tp, fp, fn, np.zeros(joints, dtype=np.int64),
                       tuple(scored), tuple(matches), skipped)


def count_id_switches(results: Sequence[MatchResult]) -> List[MatchResult]:
    """
    Per-joint id switches over a frame-ordered sequence.

    A switch is counted when a gt person's joint is matched to a different
    track id than the last time that joint was matched.
    """
    last: Dict[Tuple[int, int], Optional[int]] = {}
    out = []
    for result in results:
        idsw = np.zeros(result.joint_count, dtype=np.int64)
        for m in result.matches:
            key = (m.gt_id, m.joint)
            if key in last and last[key] != m.pred_id:
                idsw[m.joint] += 1
            last[key] = m.pred_id
        out.append(replace(result, idsw=idsw))
    return out


def match_sequence(pred_frames: Sequence[Sequence[Pose]], gt_frames: Sequence[Sequence[Pose]],
                   factor: float = DEFAULT_PCKH_FACTOR, skeleton: Optional[Skeleton] = None) -> List[MatchResult]:
    """Frame-aligned matching plus id switches"""
    if len(pred_frames) != len(gt_frames):
        raise InvalidInputError(f"{len(pred_frames)} predicted frames for {len(gt_frames)} ground-truth frames")
    return count_id_switches([match_pckh(p, g, factor, skeleton) for p, g in zip(pred_frames, gt_frames)])


def _interpolated_ap(scores: np.ndarray, hits: np.ndarray, gt_count: int) -> float:
    if scores.size == 0:
        return 0.0
    order = np.argsort(-scores, kind='mergesort')
    scores, hits = scores[order], hits[order]
    # PR-точки только на границах групп одинаковых score
    boundary = np.r_[scores[1:] != scores[:-1], True]
    cum_tp = np.cumsum(hits)[boundary]
    cum_all = np.arange(1, scores.size + 1)[boundary]
    recall = cum_tp / gt_count
    precision = cum_tp / cum_all
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    previous = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - previous) * envelope))


def average_precision(results: Sequence[MatchResult]) -> Dict[int, float]:
    """
    Per-joint AP from a precision-recall sweep over pose scores.

    Joints without ground truth are missing from the result.
    """
    if not results:
        return {}
    joints = results[0].joint_count
    gt = np.zeros(joints, dtype=np.int64)
    per_joint: Dict[int, List[Tuple[float, bool]]] = {j: [] for j in range(joints)}
    for result in results:
        gt += result.gt
        for j, score, hit in result.scored:
            per_joint[j].append((score, hit))
    ap = {}
    for j in range(joints):
        if gt[j] == 0:
            continue
        entries = per_joint[j]
        scores = np.array([s for s, _ in entries], dtype=np.float64)
        hits = np.array([h for _, h in entries], dtype=np.float64)
        ap[j] = _interpolated_ap(scores, hits, int(gt[j]))
    return ap


def mean_defined(values: Dict[int, float], members: Sequence[int]) -> float:
    defined = [values[j] for j in members if j in values]
    return float(np.mean(defined)) if defined else float('nan')


def total_counts(results: Sequence[MatchResult], joint_count: Optional[int] = None) -> CountTotals:
    if not results and joint_count is None:
        raise InvalidInputError("cannot aggregate an empty result list without a joint count")
    totals = CountTotals.zeros(joint_count or results[0].joint_count)
    for result in results:
        totals.add(result)
    return totals


def _mota_of(gt: int, fn: int, fp: int, idsw: int) -> float:
    if gt == 0:
        return float('nan')
    return 1.0 - (fn + fp + idsw) / gt


def mota(results: Sequence[MatchResult]) -> Dict[str, object]:
    """
    {'per_joint': {j: MOTA_j}, 'total': MOTA}

    Counts are summed over joints before the ratio for the total; joints
    with no ground truth are left out.
    """
    totals = total_counts(results)
    return mota_from_counts(totals)


def mota_from_counts(totals: CountTotals) -> Dict[str, object]:
    per_joint = {}
    for j in range(totals.gt.shape[0]):
        value = _mota_of(int(totals.gt[j]), int(totals.fn[j]), int(totals.fp[j]), int(totals.idsw[j]))
        if not np.isnan(value):
            per_joint[j] = value
    total = _mota_of(int(totals.gt.sum()), int(totals.fn.sum()), int(totals.fp.sum()), int(totals.idsw.sum()))
    return {'per_joint': per_joint, 'total': total}


@dataclass
class EvaluationReport:
    """AP и MOTA по группам колонок скелета"""
    ap: Dict[int, float]
    counts: CountTotals
    skeleton: Skeleton
    results: List[MatchResult] = field(default_factory=list, repr=False)

    def columns(self) -> List[str]:
        return self.skeleton.columns() + [TOTAL_COLUMN]

    def _groups(self) -> List[Tuple[str, Tuple[int, ...]]]:
        everything = tuple(range(self.skeleton.joint_count))
        return list(self.skeleton.column_groups) + [(TOTAL_COLUMN, everything)]

    def table(self) -> pd.DataFrame:
        """Rows AP, MOTA and the raw counts; one column per joint group plus Total"""
        rows: Dict[str, Dict[str, float]] = {'AP': {}, 'MOTA': {}}
        for name in COUNT_ROWS:
            rows[name] = {}
        counts = {
            'GT': self.counts.gt, 'TP': self.counts.tp, 'FP': self.counts.fp,
            'FN': self.counts.fn, 'IDSW': self.counts.idsw,
        }
        for column, members in self._groups():
            rows['AP'][column] = mean_defined(self.ap, members)
            idx = list(members)
            summed = {name: int(values[idx].sum()) for name, values in counts.items()}
            rows['MOTA'][column] = _mota_of(summed['GT'], summed['FN'], summed['FP'], summed['IDSW'])
            for name in COUNT_ROWS:
                rows[name][column] = float(summed[name])
        frame = pd.DataFrame.from_dict(rows, orient='index', columns=self.columns())
        frame.index.name = 'metric'
        return frame

    def total_ap(self) -> float:
        return mean_defined(self.ap, range(self.skeleton.joint_count))

    def total_mota(self) -> float:
        return float(mota_from_counts(self.counts)['total'])

    def to_dict(self) -> Dict:
        frame = self.table()
        return {
            'columns': list(frame.columns),
            'rows': {metric: [None if np.isnan(v) else float(v) for v in frame.loc[metric]]
                     for metric in frame.index},
            'skipped_gt': self.counts.skipped_gt,
        }


def evaluate_frames(pred_frames: Sequence[Sequence[Pose]], gt_frames: Sequence[Sequence[Pose]],
                    skeleton: Skeleton, factor: float = DEFAULT_PCKH_FACTOR) -> EvaluationReport:
    results = match_sequence(pred_frames, gt_frames, factor, skeleton)
    totals = total_counts(results, skeleton.joint_count)
    report = EvaluationReport(average_precision(results), totals, skeleton, results)
    logger.info(f"[EVAL] {len(gt_frames)} frames: AP={report.total_ap():.4f} MOTA={report.total_mota():.4f}")
    return report


def merge_reports(reports: Sequence[EvaluationReport], skeleton: Skeleton) -> EvaluationReport:
    """Counts are added; AP is recomputed from the pooled per-frame results"""
    pooled: List[MatchResult] = []
    totals = CountTotals.zeros(skeleton.joint_count)
    for report in reports:
        pooled.extend(report.results)
        totals = totals.merge(report.counts)
    return EvaluationReport(average_precision(pooled), totals, skeleton, pooled)
