"""
Counting functions and smoothed wave traces
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np


@dataclass(frozen=True)
class CountingFunction:
    """N_Z(lam) = #{j : 0 <= lam_j <= lam} over trusted real modes"""

    thresholds: np.ndarray
    excluded_complex: int = 0

    @property
    def counts(self) -> np.ndarray:
        return np.arange(1, self.thresholds.size + 1)

    def __call__(self, lam) -> np.ndarray:
        return np.searchsorted(self.thresholds, np.asarray(lam, dtype=float), side='right')

    def integrated(self, lam) -> np.ndarray:
        """Integral of N_Z from 0 to lam"""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        gaps = lam[:, None] - self.thresholds[None, :]
        return np.sum(np.clip(gaps, 0.0, None), axis=1)


@dataclass
class TracePeak:
    """Local maximum of |T(t)| and its classical interpretation"""

    t_peak: float
    height: float
    matched_period: Optional[float] = None
    orbit_ids: List[str] = field(default_factory=list)
    amplitude_fit: Optional[complex] = None
    fit_residual: Optional[float] = None
    predicted_modulus: Optional[float] = None
    clustered: bool = False
    degenerate: bool = False

    @property
    def abs_a_fit(self) -> Optional[float]:
        return None if self.amplitude_fit is None else abs(self.amplitude_fit)

    @property
    def ratio(self) -> Optional[float]:
        if self.amplitude_fit is None or not self.predicted_modulus:
            return None
        return abs(self.amplitude_fit) / self.predicted_modulus


@dataclass
class TraceProfile:
    """Gaussian-windowed trace sampled on a uniform time grid"""

    times: np.ndarray
    values: np.ndarray
    half_values: np.ndarray
    window: float
    truncation_bound: float = 0.0
    complex_correction_bound: float = 0.0
    peaks: List[TracePeak] = field(default_factory=list)
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0
