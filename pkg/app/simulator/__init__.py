from .fields import (
    DEFAULT_HE_DIM,
    NoiseConfig,
    PaintRegion,
    he_vector,
    paint_region,
    sample_training_pairs,
    simulate,
    synth_fields,
    synth_frame,
)
from .presets import PRESET_NAMES, ScenarioPreset, get_preset, list_presets, load_presets, scenario_preset
from .scene import (
    CameraModel,
    GeneratedScene,
    OcclusionWindow,
    PersonMotion,
    PersonSpan,
    SceneConfig,
    generate_scene,
    random_scene,
)

__all__ = [
    'DEFAULT_HE_DIM', 'NoiseConfig', 'PaintRegion', 'he_vector', 'paint_region', 'sample_training_pairs',
    'simulate', 'synth_fields', 'synth_frame',
    'PRESET_NAMES', 'ScenarioPreset', 'get_preset', 'list_presets', 'load_presets', 'scenario_preset',
    'CameraModel', 'GeneratedScene', 'OcclusionWindow', 'PersonMotion', 'PersonSpan', 'SceneConfig',
    'generate_scene', 'random_scene',
]
