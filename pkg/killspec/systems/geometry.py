"""
Closed-form geometric quantities of a stationary model
"""

import logging
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.special import gamma

from ..core.settings import LabSettings
from ..entities.geometry import ReducedGeometry, SampledGeometry, sample_model
from ..entities.grid import SpectralGrid, build_grid
from ..entities.model import StationaryModel
from .discretization import dealias, divergence_laplacian, spectral_derivative

logger = logging.getLogger(__name__)


def default_grid(model: StationaryModel, points: Optional[Sequence[int]] = None) -> SpectralGrid:
    return build_grid(model.torus_lengths, points or [LabSettings.DEFAULT_GRID])


def reduce_geometry(model: StationaryModel, grid: Optional[SpectralGrid] = None,
                    use_dealias: bool = False) -> ReducedGeometry:
    """Reduced metric h~, conformal weight Omega and potential W on the grid"""
    grid = grid or default_grid(model)
    sampled = sample_model(model, grid)
    n = model.dim_spacetime
    N = sampled.lapse
    gap = sampled.timelike_gap
    beta_up = sampled.shift_vector

    tilde_inv = N ** 2 * sampled.metric_inverse - beta_up[:, None] * beta_up[None, :]
    if use_dealias:
        tilde_inv = np.stack([np.stack([dealias(c, grid) for c in row]) for row in tilde_inv])
        beta_up = np.stack([dealias(c, grid) for c in beta_up])
    tilde_last = np.moveaxis(tilde_inv, (0, 1), (-2, -1))
    tilde_h = np.moveaxis(np.linalg.inv(tilde_last), (-2, -1), (0, 1))
    sqrt_det = 1.0 / np.sqrt(np.linalg.det(tilde_last))

    omega = N ** ((n - 3) / 2.0) * gap ** 0.25
    W = N ** 2 * sampled.potential
    if np.ptp(omega) > 0.0:
        # Same discrete operator as P, so Omega lies in the kernel of P when V = 0
        laplacian = divergence_laplacian(grid, sqrt_det, tilde_inv)
        W = W - (laplacian @ omega.ravel()).reshape(grid.shape) / omega
    if use_dealias:
        W = dealias(W, grid)

    return ReducedGeometry(
        sampled=sampled,
        tilde_h_inverse=tilde_inv,
        tilde_h=tilde_h,
        sqrt_det_tilde_h=sqrt_det,
        conformal_weight=omega,
        reduced_potential_W=W,
        shift_vector=beta_up,
    )


def _volume_integral(model: StationaryModel, grid: SpectralGrid,
                     sampled: Optional[SampledGeometry] = None) -> float:
    """Trapezoid quadrature of N (N^2 - |beta|^2)^{-n/2} dVol_h"""
    sampled = sampled or sample_model(model, grid)
    integrand = sampled.lapse * sampled.timelike_gap ** (-model.dim_spacetime / 2.0)
    return float(np.sum(integrand * sampled.sqrt_det_metric) * grid.cell_volume)


def phase_space_volume(model: StationaryModel, grid: Optional[SpectralGrid] = None) -> float:
    """Vol(N_{H<=1}) = Vol(B_d) * integral of N (N^2 - |beta|^2)^{-n/2} over the torus"""
    grid = grid or default_grid(model)
    return LabSettings.unit_ball_volume(model.dim) * _volume_integral(model, grid)


def symplectic_residue(model: StationaryModel, grid: Optional[SpectralGrid] = None) -> float:
    """res(H^{-n+1}) from the unit sphere volume Vol(S_{d-1}) = 2 pi^{d/2} / Gamma(d/2)"""
    grid = grid or default_grid(model)
    d = model.dim
    sphere = 2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0)
    return float(sphere * _volume_integral(model, grid))


def weyl_coefficient(model: StationaryModel, grid: Optional[SpectralGrid] = None) -> float:
    """Leading Weyl coefficient Vol(N_{H<=1}) / (2 pi)^{n-1}"""
    return phase_space_volume(model, grid) / (2.0 * np.pi) ** (model.dim_spacetime - 1)


def lambda_cutoff(model: StationaryModel, grid: SpectralGrid) -> float:
    """Largest |lambda| the grid is trusted to resolve"""
    sampled = sample_model(model, grid)
    resolution = min(np.pi * m / length for m, length in zip(grid.points_per_axis, grid.lengths))
    speed = float(np.min(sampled.lapse - np.sqrt(sampled.shift_norm_sq)))
    inverse = np.moveaxis(sampled.metric_inverse, (0, 1), (-2, -1))
    stretch = float(np.sqrt(np.min(np.linalg.eigvalsh(inverse))))
    return LabSettings.CUTOFF_FRACTION * resolution * speed * stretch


def lie_derivative_tilde_h(geom: ReducedGeometry) -> np.ndarray:
    """(L_beta h~)_ij = beta^k d_k h~_ij + h~_kj d_i beta^k + h~_ik d_j beta^k"""
    grid = geom.grid
    d = grid.dim
    beta = geom.shift_vector
    h = geom.tilde_h
    d_h = np.stack([spectral_derivative(h, grid, axis=k) for k in range(d)])
    d_beta = np.stack([np.stack([spectral_derivative(beta[k], grid, axis=i) for k in range(d)])
                       for i in range(d)])  # [i, k] = d_i beta^k
    out = np.einsum('k...,kij...->ij...', beta, d_h)
    out += np.einsum('kj...,ik...->ij...', h, d_beta)
    out += np.einsum('ik...,jk...->ij...', h, d_beta)
    return out


def check_factorizability(model: StationaryModel, grid: Optional[SpectralGrid] = None,
                          tol_factor: float = LabSettings.TOL_FACTOR,
                          geom: Optional[ReducedGeometry] = None) -> Dict[str, object]:
    """Whether the shift vector is a Killing field of h~"""
    geom = geom or reduce_geometry(model, grid)
    if not np.any(geom.shift_vector):
        defect = 0.0
    else:
        defect = float(np.max(np.abs(lie_derivative_tilde_h(geom))))
    result = {'is_factorizable': defect < tol_factor, 'defect': defect}
    logger.debug(f"Factorizability of '{model.name}': defect {defect:.3e}")
    return result
