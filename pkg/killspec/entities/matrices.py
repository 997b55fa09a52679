"""
Assembled operator matrices
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .geometry import ReducedGeometry
from .grid import SpectralGrid


@dataclass(frozen=True)
class OperatorMatrices:
    """Dense collocation matrices of the pencil and of the energy form blocks"""

    grid: SpectralGrid
    P: np.ndarray
    X: np.ndarray
    volume_weights: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    geometry: Optional[ReducedGeometry] = field(default=None, compare=False, repr=False)
    cache: Dict[str, Any] = field(default_factory=dict, init=False, compare=False, repr=False)

    @property
    def size(self) -> int:
        return self.P.shape[0]

    @property
    def x_vanishes(self) -> bool:
        return not np.any(self.X)

    def weighted_adjoint(self, A: np.ndarray) -> np.ndarray:
        """Adjoint of A in the inner product <u, v> = sum w conj(u) v"""
        w = self.volume_weights
        return (A.conj().T * w[None, :]) / w[:, None]

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(np.sum(self.volume_weights * np.conj(u) * v))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.real(self.inner(u, u))))
