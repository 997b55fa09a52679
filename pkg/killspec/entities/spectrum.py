"""
Eigenmodes and spectra of the Killing generator
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np


@dataclass(frozen=True)
class EigenMode:
    """Pencil eigenpair (lam, psi) with psi unit-normalized in the volume weights"""

    lam: complex
    psi: np.ndarray = field(repr=False)
    residual: float
    tail_fraction: float
    trusted: bool


@dataclass(frozen=True)
class ModeGroup:
    """Cluster of numerically coincident eigenvalues"""

    lambda_rep: complex
    multiplicity: int
    members: List[int]


@dataclass
class SpectrumResult:
    """Filtered, grouped spectrum with structural diagnostics"""

    modes: List[EigenMode]
    groups: List[ModeGroup]
    jordan_at_zero: Dict[str, int]
    symmetry_report: Dict[str, float]
    complex_modes: List[EigenMode]
    cutoff: float
    route: str
    route_discrepancy: Optional[float] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def trusted_modes(self) -> List[EigenMode]:
        return [m for m in self.modes if m.trusted]

    def real_trusted(self, tol_real: float) -> List[EigenMode]:
        return [m for m in self.modes if m.trusted and abs(m.lam.imag) <= tol_real]

    def eigenvalues(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes], dtype=complex)

    def group_of(self, index: int) -> Optional[ModeGroup]:
        for group in self.groups:
            if index in group.members:
                return group
        return None
