"""
Сценарии сбоев: загрузка калиброванных пресетов из presets.yml
"""
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import yaml

from ..config.settings import settings
from ..core.errors import InvalidInputError
from .fields import NoiseConfig
from .scene import SceneConfig

logger = logging.getLogger(__name__)

PRESET_NAMES = ('zoom', 'fast_motion', 'pose_change', 'occlusion', 'crossing')


@dataclass(frozen=True)
class ScenarioPreset:
    """Named scene/noise pair with the failure direction it is calibrated for"""
    name: str
    description: str
    scene: SceneConfig
    noise: NoiseConfig
    expectation: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'description': self.description,
            'scene': self.scene.to_dict(),
            'noise': self.noise.to_dict(),
            'expectation': dict(self.expectation),
        }


@lru_cache(maxsize=4)
def load_presets(path: Optional[str] = None) -> Dict[str, ScenarioPreset]:
    """Читает presets.yml"""
    path = path or settings.PRESETS_PATH
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = (yaml.safe_load(f) or {}).get('presets', {})
    except OSError as e:
        raise InvalidInputError(f"cannot read presets file {path}: {e}") from e
    presets = {}
    for name, body in raw.items():
        presets[name] = ScenarioPreset(
            name=name,
            description=body.get('description', ''),
            scene=SceneConfig.from_dict(body.get('scene') or {}),
            noise=NoiseConfig.from_dict(body.get('noise') or {}),
            expectation=body.get('expectation') or {},
        )
    logger.debug(f"[SIM] loaded {len(presets)} presets from {path}")
    return presets


def get_preset(name: str, path: Optional[str] = None) -> ScenarioPreset:
    presets = load_presets(path)
    if name not in presets:
        raise InvalidInputError(f"unknown preset '{name}', expected one of {sorted(presets)}")
    return presets[name]


def scenario_preset(name: str, seed: Optional[int] = None) -> Tuple[SceneConfig, NoiseConfig]:
    """(SceneConfig, NoiseConfig) of a named failure scenario"""
    preset = get_preset(name)
    scene = preset.scene if seed is None else replace(preset.scene, seed=seed)
    return scene, preset.noise


def list_presets() -> List[ScenarioPreset]:
    return [load_presets()[name] for name in sorted(load_presets())]
