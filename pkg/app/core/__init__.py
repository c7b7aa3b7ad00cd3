"""
Общие типы: сетка, поля, скелет, позы, ошибки
"""
from .errors import (
    EXIT_DIVERGED,
    EXIT_FORMAT_ERROR,
    EXIT_INVALID_INPUT,
    EXIT_OK,
    FormatError,
    InvalidInputError,
    PggTrackError,
    TrainingDivergedError,
    exit_code_for,
)
from .grid import (
    GridShape,
    HeatmapStack,
    ScalarField,
    VectorField2,
    coordinate_grid,
    flat_indices,
    max_over_channels,
    nearest_pixels,
    require_same_shape,
)
from .pose import AUX_ORDER, FrameBundle, HumanEmbedding, Keypoint, Pose, poses_by_id
from .skeleton import Skeleton, default_skeleton, load_skeleton, simple_skeleton

__all__ = [
    'EXIT_DIVERGED', 'EXIT_FORMAT_ERROR', 'EXIT_INVALID_INPUT', 'EXIT_OK',
    'FormatError', 'InvalidInputError', 'PggTrackError', 'TrainingDivergedError', 'exit_code_for',
    'GridShape', 'HeatmapStack', 'ScalarField', 'VectorField2', 'coordinate_grid', 'flat_indices',
    'max_over_channels', 'nearest_pixels', 'require_same_shape',
    'AUX_ORDER', 'FrameBundle', 'HumanEmbedding', 'Keypoint', 'Pose', 'poses_by_id',
    'Skeleton', 'default_skeleton', 'load_skeleton', 'simple_skeleton',
]
