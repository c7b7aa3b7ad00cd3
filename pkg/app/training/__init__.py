"""
Игрушечное обучение сквозь PGG и абляция KE vs KE+PGG
"""
from .toy import (
    FEATURES,
    OUTPUTS,
    AblationReport,
    ToyPredictor,
    TrainConfig,
    TrainResult,
    evaluate_ablation,
    frame_loss,
    paired_training,
    toy_noise,
    train,
    training_frames,
)

__all__ = [
    'FEATURES', 'OUTPUTS', 'AblationReport', 'ToyPredictor', 'TrainConfig', 'TrainResult',
    'evaluate_ablation', 'frame_loss', 'paired_training', 'toy_noise', 'train', 'training_frames',
]
