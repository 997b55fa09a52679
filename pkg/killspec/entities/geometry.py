"""
Grid-sampled geometric data
"""

from dataclasses import dataclass

import numpy as np

from .grid import SpectralGrid


@dataclass(frozen=True)
class SampledGeometry:
    """Model fields evaluated once on a grid; tensor indices lead, grid axes trail"""

    grid: SpectralGrid
    lapse: np.ndarray            # N, shape S
    shift_covector: np.ndarray   # beta_i, shape (d, *S)
    shift_vector: np.ndarray     # beta^i = h^{ij} beta_j
    metric: np.ndarray           # h_ij, shape (d, d, *S)
    metric_inverse: np.ndarray
    sqrt_det_metric: np.ndarray
    shift_norm_sq: np.ndarray    # |beta|_h^2
    potential: np.ndarray

    @property
    def timelike_gap(self) -> np.ndarray:
        """N^2 - |beta|_h^2"""
        return self.lapse ** 2 - self.shift_norm_sq


@dataclass(frozen=True)
class ReducedGeometry:
    """Metric h~, conformal weight and reduced potential of the conjugated pencil"""

    sampled: SampledGeometry
    tilde_h_inverse: np.ndarray  # N^2 h^{-1} - beta (x) beta
    tilde_h: np.ndarray
    sqrt_det_tilde_h: np.ndarray
    conformal_weight: np.ndarray
    reduced_potential_W: np.ndarray
    shift_vector: np.ndarray

    @property
    def grid(self) -> SpectralGrid:
        return self.sampled.grid

    @property
    def volume_weights(self) -> np.ndarray:
        """Flattened quadrature weights of dVol_h~"""
        return (self.sqrt_det_tilde_h * self.grid.cell_volume).ravel()


def sample_model(model, grid: SpectralGrid) -> SampledGeometry:
    """Evaluate all model fields on the grid once"""
    mesh = grid.mesh
    h = model.metric(mesh)
    h_last = np.moveaxis(h, (0, 1), (-2, -1))
    h_inv = np.moveaxis(np.linalg.inv(h_last), (-2, -1), (0, 1))
    beta = model.shift_covector(mesh)
    beta_up = np.einsum('ij...,j...->i...', h_inv, beta)
    return SampledGeometry(
        grid=grid,
        lapse=model.lapse.value(mesh),
        shift_covector=beta,
        shift_vector=beta_up,
        metric=h,
        metric_inverse=h_inv,
        sqrt_det_metric=np.sqrt(np.linalg.det(h_last)),
        shift_norm_sq=np.einsum('i...,i...->...', beta, beta_up),
        potential=model.potential.value(mesh),
    )
