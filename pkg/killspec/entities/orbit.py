"""
Phase points and periodic orbits of the reduced Killing flow
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class PhasePoint:
    """Point (x, xi) of T*Sigma on the universal cover"""

    x: np.ndarray
    xi: np.ndarray
    energy: float

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])


@dataclass
class PeriodicOrbit:
    """Closed orbit of the reduced Killing flow with its linearized return map"""

    seed: PhasePoint
    period_T: float
    primitive_period: float
    winding: Tuple[int, ...]
    closure_defect: float
    monodromy: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)
    full_monodromy: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)
    det_I_minus_P: float = float('nan')
    stability: str = 'unknown'
    rotation_number: Optional[float] = None
    section_defect: float = 0.0
    symplectic_defect: float = 0.0
    repetition: int = 1
    orbit_id: str = ''
    fingerprint: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def is_degenerate(self) -> bool:
        return self.stability == 'degenerate'
