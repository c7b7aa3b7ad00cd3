"""
Оценка: AP/MOTA и прогон по последовательностям
"""
from .metrics import (
    COUNT_ROWS,
    DEFAULT_PCKH_FACTOR,
    TOTAL_COLUMN,
    CountTotals,
    EvaluationReport,
    JointMatch,
    MatchResult,
    average_precision,
    count_id_switches,
    evaluate_frames,
    match_pckh,
    match_sequence,
    merge_reports,
    mota,
    mota_from_counts,
    total_counts,
)
from .runner import SequenceResult, evaluate_sequence, evaluate_sequences, run_sequence

__all__ = [
    'COUNT_ROWS', 'DEFAULT_PCKH_FACTOR', 'TOTAL_COLUMN', 'CountTotals', 'EvaluationReport', 'JointMatch',
    'MatchResult', 'average_precision', 'count_id_switches', 'evaluate_frames', 'match_pckh',
    'match_sequence', 'merge_reports', 'mota', 'mota_from_counts', 'total_counts',
    'SequenceResult', 'evaluate_sequence', 'evaluate_sequences', 'run_sequence',
]
