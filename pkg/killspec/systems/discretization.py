"""
Fourier collocation assembly on the torus grid
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import toeplitz

from ..core.errors import ArtifactError, ConfigError, ModelError
from ..core.settings import LabSettings
from ..entities.geometry import ReducedGeometry, SampledGeometry, sample_model
from ..entities.grid import SpectralGrid, build_grid
from ..entities.matrices import OperatorMatrices
from ..entities.model import StationaryModel

logger = logging.getLogger(__name__)


def fourier_diff_matrix(M: int, L: float) -> np.ndarray:
    """Periodic spectral differentiation matrix on M equispaced nodes of [0, L)"""
    if not isinstance(M, (int, np.integer)) or M % 2 or M < LabSettings.MIN_GRID:
        raise ConfigError(f"differentiation matrix needs an even M >= {LabSettings.MIN_GRID}, got {M}")
    if not L > 0:
        raise ConfigError(f"period must be positive, got {L}")
    h = 2.0 * np.pi / M
    k = np.arange(1, M)
    column = np.zeros(M)
    column[1:] = 0.5 * (-1.0) ** k / np.tan(0.5 * k * h)
    return toeplitz(column, -column) * (2.0 * np.pi / L)


def diff_matrices(grid: SpectralGrid) -> List[np.ndarray]:
    """Full-size D_i acting on row-major flattened grid functions"""
    out = []
    for axis in range(grid.dim):
        D = np.ones((1, 1))
        for other, (m, length) in enumerate(zip(grid.points_per_axis, grid.lengths)):
            factor = fourier_diff_matrix(m, length) if other == axis else np.eye(m)
            D = np.kron(D, factor)
        out.append(D)
    return out


def spectral_derivative(values: np.ndarray, grid: SpectralGrid, axis: int) -> np.ndarray:
    """d/dx_axis of grid samples; grid axes trail any tensor axes, Nyquist mode dropped"""
    k = grid.wavenumbers(axis).copy()
    k[grid.points_per_axis[axis] // 2] = 0.0
    position = values.ndim - grid.dim + axis
    shape = [1] * values.ndim
    shape[position] = -1
    spectrum = np.fft.fft(values, axis=position) * (1j * k.reshape(shape))
    return np.real(np.fft.ifft(spectrum, axis=position))


def dealias(values: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """2/3-rule truncation of a coefficient field"""
    spectrum = np.fft.fftn(values, axes=tuple(range(-grid.dim, 0)))
    mask = np.ones(grid.shape, dtype=bool)
    for axis, m in enumerate(grid.points_per_axis):
        index = np.abs(np.fft.fftfreq(m, d=1.0 / m))
        shape = [1] * grid.dim
        shape[axis] = -1
        mask &= (index <= LabSettings.DEALIAS_FRACTION * (m // 2)).reshape(shape)
    return np.real(np.fft.ifftn(spectrum * mask, axes=tuple(range(-grid.dim, 0))))


def tail_mask(grid: SpectralGrid) -> np.ndarray:
    """Frequencies with max_i |k_i| / (M_i / 2) above the tail threshold"""
    level = np.zeros(grid.shape)
    for axis, m in enumerate(grid.points_per_axis):
        index = np.abs(np.fft.fftfreq(m, d=1.0 / m)) / (m / 2.0)
        shape = [1] * grid.dim
        shape[axis] = -1
        level = np.maximum(level, index.reshape(shape))
    return level > LabSettings.TAIL_FRACTION


def tail_fraction(psi: np.ndarray, grid: SpectralGrid) -> float:
    """Share of spectral energy in the unresolved tail"""
    spectrum = np.abs(np.fft.fftn(np.asarray(psi).reshape(grid.shape))) ** 2
    total = float(np.sum(spectrum))
    if total == 0.0:
        return 0.0
    return float(np.sum(spectrum[tail_mask(grid)]) / total)


def high_pass(vectors: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Tail part of each column of vectors"""
    axes = tuple(range(1, grid.dim + 1))
    spectra = np.fft.fftn(np.asarray(vectors).T.reshape((-1,) + grid.shape), axes=axes)
    spectra[:, ~tail_mask(grid)] = 0.0
    return np.fft.ifftn(spectra, axes=axes).reshape(vectors.shape[1], -1).T


def divergence_laplacian(grid: SpectralGrid, density: np.ndarray, inverse_metric: np.ndarray,
                         diffs: Optional[List[np.ndarray]] = None) -> np.ndarray:
    """Matrix of -rho^{-1} D_i (rho A^{ij} D_j), positive semi-definite in the rho weights"""
    diffs = diffs if diffs is not None else diff_matrices(grid)
    rho = density.ravel()
    out = np.zeros((grid.total_size, grid.total_size))
    for i in range(grid.dim):
        for j in range(grid.dim):
            coefficient = (rho * inverse_metric[i, j].ravel())
            if not np.any(coefficient):
                continue
            out -= diffs[i] @ (coefficient[:, None] * diffs[j])
    return out / rho[:, None]


def assemble_P(geom: ReducedGeometry, grid: SpectralGrid,
               diffs: Optional[List[np.ndarray]] = None) -> np.ndarray:
    """P = -Delta_h~ + W in divergence form"""
    _check_spd(geom.tilde_h)
    laplacian = divergence_laplacian(grid, geom.sqrt_det_tilde_h, geom.tilde_h_inverse, diffs)
    return (laplacian + np.diag(geom.reduced_potential_W.ravel())).astype(complex)


def assemble_X(geom: ReducedGeometry, grid: SpectralGrid,
               diffs: Optional[List[np.ndarray]] = None) -> np.ndarray:
    """X = (B - B*) / 2 with B = beta^i D_i, adjoint in the dVol_h~ weights"""
    size = grid.total_size
    if not np.any(geom.shift_vector):
        return np.zeros((size, size), dtype=complex)
    diffs = diffs if diffs is not None else diff_matrices(grid)
    B = np.zeros((size, size))
    for i in range(grid.dim):
        B += geom.shift_vector[i].ravel()[:, None] * diffs[i]
    w = geom.volume_weights
    B_adj = (B.T * w[None, :]) / w[:, None]
    return (0.5 * (B - B_adj)).astype(complex)


def assemble_energy_forms(model: StationaryModel, grid: SpectralGrid,
                          sampled: Optional[SampledGeometry] = None,
                          diffs: Optional[List[np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Hermitian matrices of q1 and q2 against the dVol_h quadrature"""
    sampled = sampled if sampled is not None else sample_model(model, grid)
    diffs = diffs if diffs is not None else diff_matrices(grid)
    N = sampled.lapse.ravel()
    weights = sampled.sqrt_det_metric.ravel() * grid.cell_volume
    size = grid.total_size

    q1 = np.zeros((size, size))
    for i in range(grid.dim):
        for j in range(grid.dim):
            tensor = (N ** 2 * sampled.metric_inverse[i, j].ravel()
                      - sampled.shift_vector[i].ravel() * sampled.shift_vector[j].ravel())
            coefficient = 0.5 * weights * tensor / N
            if not np.any(coefficient):
                continue
            q1 += diffs[i].T @ (coefficient[:, None] * diffs[j])
    q1 += np.diag(0.5 * weights * N * sampled.potential.ravel())
    q1 = 0.5 * (q1 + q1.T)
    q2 = np.diag(0.5 * weights / N)
    return q1.astype(complex), q2.astype(complex)


def assemble_operators(model: StationaryModel, geom: ReducedGeometry) -> OperatorMatrices:
    """Assemble P, X, q1 and q2 on the geometry's grid"""
    grid = geom.grid
    diffs = diff_matrices(grid)
    P = assemble_P(geom, grid, diffs)
    X = assemble_X(geom, grid, diffs)
    q1, q2 = assemble_energy_forms(model, grid, geom.sampled, diffs)
    mats = OperatorMatrices(grid=grid, P=P, X=X, volume_weights=geom.volume_weights,
                            q1=q1, q2=q2, geometry=geom)
    defects = operator_defects(mats)
    logger.info(f"Assembled operators of size {grid.total_size} "
                f"(P asym {defects['P']:.2e}, X sym {defects['X']:.2e})")
    return mats


def operator_defects(mats: OperatorMatrices) -> dict:
    """Relative self-adjointness defect of P and skew-adjointness defect of X"""
    out = {}
    for name, A, sign in (('P', mats.P, -1.0), ('X', mats.X, 1.0)):
        scale = np.linalg.norm(A)
        if scale == 0.0:
            out[name] = 0.0
            continue
        out[name] = float(np.linalg.norm(A + sign * mats.weighted_adjoint(A)) / scale)
    return out


def _check_spd(tilde_h: np.ndarray):
    eigs = np.linalg.eigvalsh(np.moveaxis(tilde_h, (0, 1), (-2, -1)))
    if np.min(eigs) <= 0.0:
        raise ModelError("reduced metric h~ is not positive definite on the grid", "/model")


def dump_matrices(mats: OperatorMatrices, path: Union[str, Path]):
    """Little-endian binary dump: header of u4 words, then P, X, q1, q2 as c16 row-major"""
    grid = mats.grid
    header = [LabSettings.DUMP_VERSION, grid.dim, grid.total_size] + list(grid.points_per_axis)
    path = Path(path)
    with open(path, 'wb') as handle:
        handle.write(LabSettings.DUMP_MAGIC)
        handle.write(np.asarray(header, dtype='<u4').tobytes())
        for block in (mats.P, mats.X, mats.q1, mats.q2):
            handle.write(np.ascontiguousarray(block, dtype='<c16').tobytes())
    logger.info(f"Wrote matrix dump {path}")


def load_matrices(path: Union[str, Path], lengths: Optional[Tuple[float, ...]] = None) -> dict:
    """Read a dump written by dump_matrices"""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"matrix dump {path} does not exist")
    raw = path.read_bytes()
    if raw[:4] != LabSettings.DUMP_MAGIC:
        raise ArtifactError(f"{path} is not a matrix dump")
    version, dim, size = np.frombuffer(raw, dtype='<u4', count=3, offset=4)
    points = tuple(int(m) for m in np.frombuffer(raw, dtype='<u4', count=int(dim), offset=16))
    offset = 16 + 4 * int(dim)
    blocks = {}
    for name in ('P', 'X', 'q1', 'q2'):
        blocks[name] = np.frombuffer(raw, dtype='<c16', count=int(size) ** 2,
                                     offset=offset).reshape(int(size), int(size)).copy()
        offset += 16 * int(size) ** 2
    blocks['version'] = int(version)
    blocks['points_per_axis'] = points
    if lengths is not None:
        blocks['grid'] = build_grid(lengths, points)
    return blocks
