"""
Cauchy data of mode solutions on the t = 0 slice
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .grid import SpectralGrid


@dataclass(frozen=True)
class CauchyData:
    """Values g = u|Sigma, time slope f = d_t u|Sigma and unit-normal derivative of a mode"""

    grid: SpectralGrid
    g: np.ndarray
    f: np.ndarray
    normal: np.ndarray
    lam: complex
    source: Optional[int] = None
    normalization: float = 1.0

    def evolved(self, t: float) -> 'CauchyData':
        """Data of the mode solution on the slice at time t"""
        phase = np.exp(1j * self.lam * t)
        return replace(self, g=self.g * phase, f=self.f * phase, normal=self.normal * phase)

    def scaled(self, factor: complex) -> 'CauchyData':
        return replace(self, g=self.g * factor, f=self.f * factor, normal=self.normal * factor,
                       normalization=self.normalization * abs(factor))
