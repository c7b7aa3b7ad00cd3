from .embedding import (
    OrderRelation,
    PersonSamples,
    SpatialLossWeights,
    aux_ordinal_loss,
    aux_total_loss,
    center_offset_loss,
    decode_sie,
    decode_sie_dual,
    ground_truth_order,
    order_ranks,
    grouping_terms,
    pull_loss,
    push_loss,
    reference_embeddings,
    spatial_total_loss,
    svf_loss,
)
from .heatmap import (
    DEFAULT_NMS_RADIUS,
    DEFAULT_PEAK_THRESHOLD,
    DEFAULT_SIGMA,
    DEFAULT_TAU,
    BinaryMask,
    detection_loss,
    extract_peaks,
    pose_mask,
    render_confidence,
)

__all__ = [
    'OrderRelation', 'PersonSamples', 'SpatialLossWeights', 'aux_ordinal_loss', 'aux_total_loss',
    'center_offset_loss', 'decode_sie', 'decode_sie_dual', 'ground_truth_order', 'grouping_terms', 'order_ranks',
    'pull_loss', 'push_loss', 'reference_embeddings', 'spatial_total_loss', 'svf_loss',
    'DEFAULT_NMS_RADIUS', 'DEFAULT_PEAK_THRESHOLD', 'DEFAULT_SIGMA', 'DEFAULT_TAU',
    'BinaryMask', 'detection_loss', 'extract_peaks', 'pose_mask', 'render_confidence',
]
