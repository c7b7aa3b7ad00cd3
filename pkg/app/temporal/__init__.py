from .embedding import (
    DEFAULT_ALPHA,
    DEFAULT_LAMBDA_HE,
    DEFAULT_LAMBDA_TIE,
    TemporalFields,
    combined_cost,
    decode_tie,
    he_triplet_loss,
    psi_he,
    psi_ke_sie,
    psi_tie,
    tvf_loss,
    tvf_loss_terms,
)
from .munkres import Assignment, munkres_solve
from .tracker import (
    Detection,
    FrameObservation,
    MetricMode,
    OnlineTracker,
    TrackerConfig,
    Trajectory,
    associate,
    box_iou,
    iou_similarity,
    oks_similarity,
    pose_scale,
    track_sequence,
)

__all__ = [
    'DEFAULT_ALPHA', 'DEFAULT_LAMBDA_HE', 'DEFAULT_LAMBDA_TIE', 'TemporalFields', 'combined_cost',
    'decode_tie', 'he_triplet_loss', 'psi_he', 'psi_ke_sie', 'psi_tie', 'tvf_loss', 'tvf_loss_terms',
    'Assignment', 'munkres_solve',
    'Detection', 'FrameObservation', 'MetricMode', 'OnlineTracker', 'TrackerConfig', 'Trajectory',
    'associate', 'box_iou', 'iou_similarity', 'oks_similarity', 'pose_scale', 'track_sequence',
]
