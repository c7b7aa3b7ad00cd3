"""
RunConfig: все гиперпараметры прогона, по секциям (pydantic v2)
"""
import json
import logging
import os
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..core.errors import InvalidInputError
from .settings import settings

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class HeatmapSection(_Section):
    sigma: float = Field(2.0, gt=0)
    peak_threshold: float = Field(0.1, gt=0, lt=1)
    nms_radius: int = Field(3, ge=1)
    subpixel: bool = False


class MaskSection(_Section):
    tau: float = Field(0.2, gt=0, lt=1)


class PggSection(_Section):
    enabled: bool = True
    delta: float = Field(5.0, gt=0)
    iterations: int = Field(1, ge=1)
    kernel: Literal['scaled', 'inverse'] = 'scaled'
    channel_scales: List[float] = Field(default_factory=list)

    @field_validator('channel_scales')
    @classmethod
    def _positive(cls, value: List[float]) -> List[float]:
        if any(v <= 0 for v in value):
            raise ValueError("channel scales must be positive")
        return value


class DecodeSection(_Section):
    theta_ke: float = Field(1.0, gt=0)
    theta_sie: float = Field(10.0, gt=0)
    omega: float = Field(0.5, ge=0, le=1)
    joint_order: List[str] = Field(default_factory=list)
    max_people: int = Field(30, ge=1)


class TrackerSection(_Section):
    """Без явных порогов они калибруются по шуму последовательности"""
    lambda_he: float = Field(3.0, ge=0)
    lambda_tie: float = Field(1.0, ge=0)
    theta_gate: Optional[float] = Field(None, gt=0)
    gate_he: Optional[float] = Field(None, gt=0)
    gate_tie: Optional[float] = Field(None, gt=0)
    max_age: int = Field(1, ge=1)
    mode: Literal['combined', 'he_only', 'tie_only', 'ke_sie', 'oks', 'iou'] = 'combined'
    similarity_floor: float = Field(0.1, gt=0, le=1)


class EvalSection(_Section):
    pckh_factor: float = Field(0.5, gt=0)


class RunConfig(_Section):
    heatmap: HeatmapSection = Field(default_factory=HeatmapSection)
    mask: MaskSection = Field(default_factory=MaskSection)
    pgg: PggSection = Field(default_factory=PggSection)
    decode: DecodeSection = Field(default_factory=DecodeSection)
    tracker: TrackerSection = Field(default_factory=TrackerSection)
    eval: EvalSection = Field(default_factory=EvalSection)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()

    def pgg_config(self):
        from ..grouping.pgg import PggConfig
        return PggConfig(self.pgg.delta, self.pgg.iterations, self.pgg.kernel, tuple(self.pgg.channel_scales))

    def decode_config(self, skeleton):
        from ..grouping.decoder import DecodeConfig
        order = tuple(skeleton.index_of(n) for n in self.decode.joint_order) or skeleton.decode_order
        return DecodeConfig(order, self.decode.theta_ke, self.decode.theta_sie,
                            self.decode.omega, self.decode.max_people)

    def tracker_config(self, noise=None):
        """
        TrackerConfig with explicit gates when given, otherwise calibrated
        from the noise model (or module defaults without one).
        """
        from ..temporal.tracker import TrackerConfig
        t = self.tracker
        common = dict(max_age=t.max_age, lambda_he=t.lambda_he, lambda_tie=t.lambda_tie,
                      mode=t.mode, similarity_floor=t.similarity_floor)
        if t.theta_gate is not None:
            return TrackerConfig.with_gate(t.theta_gate, **common)
        if noise is not None:
            cfg = TrackerConfig.calibrated(noise, **common)
        else:
            cfg = TrackerConfig(**common)
        overrides = {k: v for k, v in (('gate_he', t.gate_he), ('gate_tie', t.gate_tie)) if v is not None}
        if overrides:
            cfg = TrackerConfig(**{**common, 'gate_he': cfg.gate_he, 'gate_tie': cfg.gate_tie, **overrides})
        return cfg

    def with_overrides(self, **sections: Dict[str, Any]) -> 'RunConfig':
        """Новая конфигурация с частично заменёнными секциями"""
        data = self.to_dict()
        for name, values in sections.items():
            data.setdefault(name, {}).update(values)
        return parse_run_config(data)


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    key = '.'.join(str(p) for p in first['loc'])
    return f"{key}: {first['msg']}"


def parse_run_config(data: Optional[Dict[str, Any]]) -> RunConfig:
    try:
        return RunConfig.model_validate(data or {})
    except ValidationError as e:
        raise InvalidInputError(f"invalid run config at {_describe(e)}") from e


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """JSON or YAML by extension; without a path, PGGTRACK_CONFIG_PATH or defaults"""
    path = path or settings.CONFIG_PATH
    if not path:
        return RunConfig()
    ext = os.path.splitext(path)[1].lower()
    try:
        with open(path, 'r', encoding='utf-8') as f:
            if ext == '.json':
                data = json.load(f)
            elif ext in ('.yml', '.yaml'):
                data = yaml.safe_load(f)
            else:
                raise InvalidInputError(f"unsupported config extension '{ext}' for {path}")
    except OSError as e:
        raise InvalidInputError(f"cannot read config {path}: {e}") from e
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise InvalidInputError(f"cannot parse config {path}: {e}") from e
    config = parse_run_config(data)
    logger.debug(f"[CONFIG] loaded run config from {path}")
    return config
