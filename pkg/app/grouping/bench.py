"""
Замер памяти PGG: маскированный путь против полного изображения
"""
import logging
import time
import tracemalloc
from dataclasses import dataclass
from typing import Dict

import numpy as np

from ..core.errors import InvalidInputError
from ..core.grid import GridShape, ScalarField, VectorField2
from ..spatial.heatmap import BinaryMask
from .pgg import PggConfig, affinity_memory_ratio, gather_masked, pgg_refine

logger = logging.getLogger(__name__)

# полный путь считается измеренным только до этого числа пикселей
FULL_MEASURE_LIMIT = 4096


@dataclass
class PggBenchReport:
    shape: GridShape
    occupancy: float
    masked_pixels: int
    affinity_ratio: float
    masked_peak_bytes: int
    full_peak_bytes: int
    full_measured: bool
    masked_seconds: float

    @property
    def peak_ratio(self) -> float:
        return self.masked_peak_bytes / self.full_peak_bytes if self.full_peak_bytes else 0.0

    def to_dict(self) -> Dict:
        return {
            'shape': f"{self.shape.width}x{self.shape.height}",
            'occupancy': self.occupancy,
            'masked_pixels': self.masked_pixels,
            'affinity_ratio': self.affinity_ratio,
            'masked_peak_bytes': self.masked_peak_bytes,
            'full_peak_bytes': self.full_peak_bytes,
            'full_measured': self.full_measured,
            'peak_ratio': self.peak_ratio,
            'masked_seconds': self.masked_seconds,
        }


def occupancy_mask(shape: GridShape, occupancy: float, seed: int = 0) -> BinaryMask:
    """Mask with exactly round(occupancy · W·H) set bits at seeded positions"""
    if not 0.0 < occupancy <= 1.0:
        raise InvalidInputError(f"occupancy must lie in (0, 1], got {occupancy}")
    count = max(1, int(round(occupancy * shape.size)))
    chosen = np.random.default_rng([seed, shape.size]).choice(shape.size, size=count, replace=False)
    bits = np.zeros(shape.size, dtype=bool)
    bits[chosen] = True
    return BinaryMask(shape, bits.reshape(shape.array_shape))


def extrapolated_peak_bytes(measured: int, measured_pixels: int, pixels: int) -> int:
    """Peak of the dense path scales with the squared column count"""
    return int(round(measured * (pixels / measured_pixels) ** 2))


def _measure(fields, mask: BinaryMask, cfg: PggConfig):
    tracemalloc.start()
    tracemalloc.reset_peak()
    start = time.perf_counter()
    x, _ = gather_masked(fields, mask, cfg.scales_for(3))
    pgg_refine(x, cfg)
    seconds = time.perf_counter() - start
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return peak, seconds


def bench_pgg(occupancy: float, shape: GridShape, cfg: PggConfig = PggConfig(), seed: int = 0) -> PggBenchReport:
    """
    Peak allocation of one PGG refinement over a random mask of the given
    occupancy. The full-image path is measured on small grids and
    extrapolated quadratically from the masked measurement otherwise.
    """
    rng = np.random.default_rng([seed, 1])
    h, w = shape.array_shape
    fields = [ScalarField(shape, rng.normal(0, 1, (h, w))), VectorField2(shape, rng.normal(0, 1, (h, w, 2)))]
    mask = occupancy_mask(shape, occupancy, seed)
    masked_peak, seconds = _measure(fields, mask, cfg)
    if shape.size <= FULL_MEASURE_LIMIT:
        full_peak, _ = _measure(fields, BinaryMask.full(shape), cfg)
        measured = True
    else:
        full_peak = extrapolated_peak_bytes(masked_peak, mask.occupancy, shape.size)
        measured = False
    report = PggBenchReport(shape, occupancy, mask.occupancy, affinity_memory_ratio(mask),
                            masked_peak, full_peak, measured, seconds)
    logger.info(f"[PGG] bench {shape.width}x{shape.height} at occupancy {occupancy}: "
                f"affinity ratio {report.affinity_ratio:.4f}, peak ratio {report.peak_ratio:.4f}")
    return report
