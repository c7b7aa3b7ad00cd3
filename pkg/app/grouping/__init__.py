from .decoder import DecodeConfig, PersonHypothesis, greedy_decode, pose_score
from .pgg import (
    EmbeddingMatrix,
    MaskIndex,
    PggConfig,
    PggTrace,
    ScatteredEmbedding,
    affinity_memory_ratio,
    assign_grouping_labels,
    gather_masked,
    gather_masked_dual,
    gbms_iterate,
    pgg_forward,
    pgg_grouping_loss,
    pgg_refine,
    refine_fields,
    refine_tie,
    scatter_back,
    tie_grouping_loss,
)

__all__ = [
    'DecodeConfig', 'PersonHypothesis', 'greedy_decode', 'pose_score',
    'EmbeddingMatrix', 'MaskIndex', 'PggConfig', 'PggTrace', 'ScatteredEmbedding',
    'affinity_memory_ratio', 'assign_grouping_labels', 'gather_masked', 'gather_masked_dual',
    'gbms_iterate', 'pgg_forward', 'pgg_grouping_loss', 'pgg_refine', 'refine_fields',
    'refine_tie', 'scatter_back', 'tie_grouping_loss',
]
