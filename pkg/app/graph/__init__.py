# Пайплайн кадра и последовательности

from app.graph.pipeline import FramePipeline, FrameState, SequencePipeline, match_ground_truth

__all__ = [
    'FramePipeline',
    'FrameState',
    'SequencePipeline',
    'match_ground_truth',
]
