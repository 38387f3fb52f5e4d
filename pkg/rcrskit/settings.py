"""
Configuration dataclasses for analysis and simulation.

Defaults follow the documented behaviour of the toolchain: 10,000 witness samples drawn in
[-100, 100], a 10,000 atom ceiling for Fourier-Motzkin and a 1e-9 numeric tolerance.
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

from dataclasses import dataclass
from typing import Optional

DEFAULT_SAMPLES = 10_000
DEFAULT_SAMPLE_BOUND = 100
DEFAULT_ATOM_LIMIT = 10_000
DEFAULT_TOLERANCE = 1e-9


@dataclass
class AnalysisSettings:
    samples: int = DEFAULT_SAMPLES
    sample_bound: int = DEFAULT_SAMPLE_BOUND
    atom_limit: int = DEFAULT_ATOM_LIMIT
    seed: int = 0
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.samples < 0:
            raise ValueError(f"samples must be non-negative, got {self.samples}")
        if self.sample_bound <= 0:
            raise ValueError(f"sample_bound must be positive, got {self.sample_bound}")
        if self.atom_limit <= 0:
            raise ValueError(f"atom_limit must be positive, got {self.atom_limit}")
        return

    def get_settings_dict(self) -> dict:
        return vars(self)


@dataclass
class SimulationSettings:
    tolerance: float = DEFAULT_TOLERANCE
    steps: Optional[int] = None

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be non-negative, got {self.tolerance}")
        if self.steps is not None and self.steps < 1:
            raise ValueError(f"steps must be at least 1, got {self.steps}")
        return

    def get_settings_dict(self) -> dict:
        return vars(self)
