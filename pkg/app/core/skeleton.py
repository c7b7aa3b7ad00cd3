"""
Описание скелета: имена суставов, пара головы, константы OKS, группы колонок
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .errors import InvalidInputError
from ..config.settings import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Skeleton:
    """Ordered joint names plus the head pair used for head size"""
    joint_names: Tuple[str, ...]
    head_top_index: int
    neck_index: int
    kappas: Tuple[float, ...] = ()
    decode_order: Tuple[int, ...] = ()
    column_groups: Tuple[Tuple[str, Tuple[int, ...]], ...] = ()
    template: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    articulation: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        j = len(self.joint_names)
        if j < 1:
            raise InvalidInputError("skeleton needs at least one joint")
        if len(set(self.joint_names)) != j:
            raise InvalidInputError("skeleton joint names must be unique")
        for idx in (self.head_top_index, self.neck_index):
            if not 0 <= idx < j:
                raise InvalidInputError(f"head joint index {idx} out of range for {j} joints")
        if self.head_top_index == self.neck_index:
            raise InvalidInputError("head_top and neck must be distinct joints")
        if not self.kappas:
            object.__setattr__(self, 'kappas', tuple([0.079] * j))
        if len(self.kappas) != j:
            raise InvalidInputError("one OKS kappa per joint is required")
        if not self.decode_order:
            object.__setattr__(self, 'decode_order', tuple(range(j)))
        if sorted(self.decode_order) != list(range(j)):
            raise InvalidInputError("decode order must be a permutation of the joints")
        if not self.column_groups:
            object.__setattr__(self, 'column_groups', tuple((name, (i,)) for i, name in enumerate(self.joint_names)))

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    def index_of(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError as e:
            raise InvalidInputError(f"unknown joint '{name}'") from e

    def columns(self) -> List[str]:
        return [name for name, _ in self.column_groups]

    def to_dict(self) -> Dict:
        return {
            'joints': list(self.joint_names),
            'head_top': self.joint_names[self.head_top_index],
            'neck': self.joint_names[self.neck_index],
            'kappas': list(self.kappas),
            'decode_order': [self.joint_names[i] for i in self.decode_order],
            'column_groups': {name: [self.joint_names[i] for i in members]
                              for name, members in self.column_groups},
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'Skeleton':
        """Reads both the YAML layout and the manifest echo produced by to_dict"""
        joints = data.get('joints') or []
        if joints and isinstance(joints[0], dict):
            names = [j['name'] for j in joints]
            kappas = [float(j.get('kappa', 0.079)) for j in joints]
        else:
            names = list(joints)
            kappas = [float(k) for k in data.get('kappas', [])]
        index = {name: i for i, name in enumerate(names)}

        def lookup(name: str) -> int:
            if name not in index:
                raise InvalidInputError(f"skeleton refers to unknown joint '{name}'")
            return index[name]

        groups = tuple(
            (group, tuple(lookup(n) for n in members))
            for group, members in (data.get('column_groups') or {}).items()
        )
        template = articulation = None
        if data.get('template'):
            template = np.array([data['template'][n] for n in names], dtype=np.float64)
            swing = data.get('articulation') or {}
            articulation = np.array([swing.get(n, [0.0, 0.0]) for n in names], dtype=np.float64)
        return cls(
            joint_names=tuple(names),
            head_top_index=lookup(data.get('head_top', names[0])),
            neck_index=lookup(data.get('neck', names[1] if len(names) > 1 else names[0])),
            kappas=tuple(kappas),
            decode_order=tuple(lookup(n) for n in data.get('decode_order', [])),
            column_groups=groups,
            template=template,
            articulation=articulation,
        )


def load_skeleton(path: Optional[str] = None) -> Skeleton:
    """Загружает скелет из YAML файла"""
    path = path or settings.SKELETON_PATH
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise InvalidInputError(f"cannot read skeleton file {path}: {e}") from e
    skeleton = Skeleton.from_dict(data.get('skeleton', data))
    logger.debug(f"[SKELETON] loaded {skeleton.joint_count} joints from {path}")
    return skeleton


@lru_cache(maxsize=1)
def default_skeleton() -> Skeleton:
    return load_skeleton()


def simple_skeleton(names: Sequence[str]) -> Skeleton:
    """Small skeletons for fixtures: first joint is head_top, second is neck"""
    return Skeleton(joint_names=tuple(names), head_top_index=0, neck_index=1)
