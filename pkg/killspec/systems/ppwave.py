"""
Stationary pp-wave: reduced pencils, branch roots and period conditions
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ..core.errors import ConfigError, NumericalError
from ..core.settings import LabSettings
from ..entities.grid import SpectralGrid, build_grid
from ..entities.model import PPWaveModel
from ..entities.spectrum import EigenMode, SpectrumResult
from .discretization import tail_fraction
from .pencil import (SolverOptions, companion_linearize, complex_quadruple_defect, group_modes,
                     kernel_dimension, symmetry_report)

logger = logging.getLogger(__name__)


@dataclass
class BranchScan:
    """Roots of the zero-eigenvalue condition for one Floquet index m"""

    m: int
    bracket: Tuple[float, float]
    roots: List[float] = field(default_factory=list)
    sign_changes: int = 0
    smallest_eigenvalue: List[float] = field(default_factory=list)
    confirmation_defects: List[float] = field(default_factory=list)


@dataclass
class MechanicalOrbit:
    """Periodic orbit of p^2/2 + H(y)/2 on the base circle"""

    period: float
    energy: float
    action_defect: float  # integral of (H - E) over one period
    kind: str  # 'rotation' | 'libration'
    times: np.ndarray = field(repr=False)
    trajectory: np.ndarray = field(repr=False)


def base_grid(pp: PPWaveModel, points: int) -> SpectralGrid:
    return build_grid(pp.base_lengths, [points])


def base_laplacian(grid: SpectralGrid) -> np.ndarray:
    """-Delta_y on the base torus from the full symbol k^2, Nyquist kept so only constants are null"""
    out = np.zeros((grid.total_size, grid.total_size))
    for axis in range(grid.dim):
        m = grid.points_per_axis[axis]
        k = grid.wavenumbers(axis)
        second = np.real(np.fft.ifft(k[:, None] ** 2 * np.fft.fft(np.eye(m), axis=0), axis=0))
        block = np.ones((1, 1))
        for other, points in enumerate(grid.points_per_axis):
            block = np.kron(block, second if other == axis else np.eye(points))
        out += block
    return out


def reduced_potential(pp: PPWaveModel, H: np.ndarray, lam: float, m: int) -> np.ndarray:
    """V(lam, y, m) = (2 pi m + L lam)^2 H / (alpha L)^2 - 2 lam (2 pi m + L lam) / (alpha L)"""
    L, alpha = pp.period_L, pp.alpha
    shift = 2.0 * np.pi * m + L * lam
    return shift ** 2 * H / (alpha * L) ** 2 - 2.0 * lam * shift / (alpha * L)


def pencil_coefficients(pp: PPWaveModel, H: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(a, b, c) with V(lam) = c + lam b + lam^2 a"""
    L, alpha = pp.period_L, pp.alpha
    a = (H - 2.0 * alpha) / alpha ** 2
    b = 4.0 * np.pi * m * (H - alpha) / (alpha ** 2 * L)
    c = (2.0 * np.pi * m) ** 2 * H / (alpha ** 2 * L ** 2)
    return a, b, c


def ppwave_reduced_pencil(pp: PPWaveModel, m: int, points: int,
                          laplacian: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(P, X, M) of the per-m pencil P - 2i lam X - lam^2 M on the base grid"""
    grid = base_grid(pp, points)
    H = pp.profile_H.value(grid.mesh).ravel()
    a, b, c = pencil_coefficients(pp, H, m)
    lap = laplacian if laplacian is not None else base_laplacian(grid)
    P = (lap + np.diag(c)).astype(complex)
    X = np.diag(0.5j * b)
    M = np.diag(-a).astype(complex)
    return P, X, M


def reduced_pencil_eigs(pp: PPWaveModel, m: int, points: int,
                        laplacian: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and base eigenfunctions of the per-m pencil"""
    P, X, M = ppwave_reduced_pencil(pp, m, points, laplacian)
    A, B = companion_linearize(P, X, M)
    values, vectors = scipy.linalg.eig(A, B)
    n = P.shape[0]
    keep = np.isfinite(values)
    values, vectors = values[keep], vectors[:, keep]
    psi = np.where(np.abs(values)[None, :] <= 1.0, vectors[:n], vectors[n:] / np.where(
        np.abs(values) > 1.0, values, 1.0)[None, :])
    return values, psi


def floquet_range(pp: PPWaveModel, lambda_max: float) -> int:
    """Largest |m| whose pencil can hold eigenvalues with |lam| <= lambda_max"""
    H_min = float(np.min(pp.profile_on(LabSettings.DEFAULT_GRID)[1]))
    bound = pp.period_L * lambda_max * (1.0 + 2.0 * pp.alpha / H_min) + 1.0
    return int(np.floor(bound / (2.0 * np.pi)))


def ppwave_cutoff(pp: PPWaveModel, points: int) -> float:
    """Trust cutoff of the per-m solves on a base grid"""
    H_min = float(np.min(pp.profile_on(points)[1]))
    resolution = min(np.pi * points / length for length in pp.base_lengths)
    return LabSettings.CUTOFF_FRACTION * resolution * np.sqrt(H_min)


def ppwave_spectrum(pp: PPWaveModel, points: int, lambda_max: Optional[float] = None,
                    opts: Optional[SolverOptions] = None) -> SpectrumResult:
    """Union over Floquet indices m of the per-m pencil spectra with |lam| <= lambda_max"""
    cutoff = ppwave_cutoff(pp, points)
    lambda_max = cutoff if lambda_max is None else min(lambda_max, cutoff)
    opts = opts or SolverOptions(cutoff=cutoff)
    grid = base_grid(pp, points)
    lap = base_laplacian(grid)
    m_max = floquet_range(pp, lambda_max)
    logger.info(f"pp-wave spectrum: |m| <= {m_max}, |lambda| <= {lambda_max:.4g}, base grid {points}")

    modes: List[EigenMode] = []
    labels: List[int] = []
    geometric = ill_conditioned = 0
    for m in range(-m_max, m_max + 1):
        P, X, M = ppwave_reduced_pencil(pp, m, points, lap)
        values, vectors = reduced_pencil_eigs(pp, m, points, lap)
        first = len(modes)
        for lam, psi in zip(values, vectors.T):
            if abs(lam) > lambda_max:
                continue
            norm = np.linalg.norm(psi)
            psi = psi / norm if norm > 0 else psi
            r = P @ psi - 2j * lam * (X @ psi) - lam ** 2 * (M @ psi)
            residual = float(np.linalg.norm(r))
            if residual >= opts.tol_resid:
                continue
            tail = tail_fraction(psi, grid)
            modes.append(EigenMode(lam=complex(lam), psi=psi, residual=residual, tail_fraction=tail,
                                   trusted=tail < opts.tol_tail))
            labels.append(m)
        if any(abs(mode.lam) < opts.tol_zero and mode.trusted for mode in modes[first:]):
            kernel, near = kernel_dimension(P, grid)
            geometric += kernel
            ill_conditioned += near

    order = sorted(range(len(modes)), key=lambda i: (round(modes[i].lam.real, 12),
                                                     round(modes[i].lam.imag, 12), labels[i]))
    modes = [modes[i] for i in order]
    labels = [labels[i] for i in order]
    trusted = [mode for mode in modes if mode.trusted]
    complex_modes = [mode for mode in trusted if abs(mode.lam.imag) > opts.tol_real]
    zero = sum(1 for mode in trusted if abs(mode.lam) < opts.tol_zero)
    report = symmetry_report(modes, opts.tol_real)
    report['quadruple_defect'] = complex_quadruple_defect(complex_modes) if complex_modes else 0.0
    return SpectrumResult(
        modes=modes,
        groups=group_modes(modes, opts.cluster_rel),
        jordan_at_zero={'algebraic': zero, 'geometric': geometric,
                        'ill_conditioned': int(ill_conditioned > 0)},
        symmetry_report=report,
        complex_modes=complex_modes,
        cutoff=lambda_max,
        route='ppwave_reduced',
        diagnostics={'floquet_index': labels, 'm_max': m_max, 'trusted': len(trusted)},
    )


def _branch_values(pp: PPWaveModel, H: np.ndarray, lap: np.ndarray, lam: float, m: int) -> np.ndarray:
    return scipy.linalg.eigvalsh(lap + np.diag(reduced_potential(pp, H, lam, m)))


def ppwave_branch_solve(pp: PPWaveModel, m: int, bracket: Tuple[float, float], points: int = 32,
                        samples: int = 400, confirm: bool = True) -> BranchScan:
    """Roots in the bracket of every eigenvalue branch of -Delta_y + V(lam, y, m)"""
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise ConfigError(f"empty bracket [{lo}, {hi}]")
    grid = base_grid(pp, points)
    H = pp.profile_H.value(grid.mesh).ravel()
    lap = base_laplacian(grid)
    grid_lams = np.linspace(lo, hi, samples)
    branches = np.array([_branch_values(pp, H, lap, lam, m) for lam in grid_lams])
    scan = BranchScan(m=m, bracket=(lo, hi))
    scan.smallest_eigenvalue = [float(row[np.argmin(np.abs(row))]) for row in branches]

    for j in range(branches.shape[1]):
        values = branches[:, j]
        for k in range(samples - 1):
            if values[k] == 0.0:
                scan.roots.append(float(grid_lams[k]))
                continue
            if values[k] * values[k + 1] < 0.0:
                scan.sign_changes += 1
                root = brentq(lambda lam: _branch_values(pp, H, lap, lam, m)[j],
                              grid_lams[k], grid_lams[k + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps)
                scan.roots.append(float(root))
    scan.roots = sorted(set(round(r, 12) for r in scan.roots))
    if not scan.roots:
        logger.info(f"No sign change for m={m} in [{lo:.4g}, {hi:.4g}] over {samples} samples")

    if confirm and scan.roots:
        values, _ = reduced_pencil_eigs(pp, m, points, lap)
        scan.confirmation_defects = [float(np.min(np.abs(values - r))) for r in scan.roots]
    return scan


def ppwave_mechanical_orbit(pp: PPWaveModel, y0: float, p0: float) -> MechanicalOrbit:
    """Integrate y' = p, p' = -H'(y)/2 for one period on the base circle"""
    if len(pp.base_lengths) != 1:
        raise ConfigError("mechanical orbits are implemented for a one-dimensional base")
    L_y = pp.base_lengths[0]
    H = pp.profile_H
    energy = 0.5 * p0 ** 2 + 0.5 * float(H.value(np.array([[y0]]))[0])
    H_max = float(np.max(pp.profile_on(LabSettings.DEFAULT_GRID)[1]))

    def rhs(s, z):
        y = np.array([[z[0]]])
        return [z[1], -0.5 * float(H.grad(y)[0, 0]), float(H.value(y)[0]) - energy]

    tols = dict(method=LabSettings.ODE_METHOD, rtol=LabSettings.ODE_RTOL, atol=LabSettings.ODE_ATOL)
    speed_floor = np.sqrt(max(2.0 * energy - H_max, 0.0))
    horizon = 200.0 * L_y / max(abs(p0), speed_floor, 1e-3)

    if 2.0 * energy > H_max and p0 != 0.0:
        kind = 'rotation'
        target = y0 + np.sign(p0) * L_y

        def wrapped(s, z):
            return z[0] - target
        wrapped.terminal = True
        sol = solve_ivp(rhs, (0.0, horizon), [y0, p0, 0.0], events=wrapped, dense_output=True, **tols)
        if not sol.t_events[0].size:
            raise NumericalError("rotation did not complete within the integration horizon")
        period = float(sol.t_events[0][0])
    else:
        kind = 'libration'

        def turning(s, z):
            return z[1]
        window = L_y
        while True:
            sol = solve_ivp(rhs, (0.0, window), [y0, p0, 0.0], events=turning, **tols)
            hits = sol.t_events[0]
            hits = hits[hits > 1e-12]
            if hits.size >= 3:
                break
            if window >= horizon:
                raise NumericalError("libration did not return within the integration horizon")
            window = min(2.0 * window, horizon)
        period = float(hits[2] - hits[0])

    sol = solve_ivp(rhs, (0.0, period), [y0, p0, 0.0], dense_output=True, **tols)
    times = np.linspace(0.0, period, 257)
    trajectory = sol.sol(times)
    return MechanicalOrbit(period=period, energy=energy, action_defect=float(sol.y[2, -1]),
                           kind=kind, times=times, trajectory=trajectory[:2])


def ppwave_period_conditions(pp: PPWaveModel, orbit: MechanicalOrbit, max_repeat: int = 4,
                             t_max: float = LabSettings.ORBIT_T_MAX,
                             tol: float = LabSettings.TOL_ORBIT) -> List[Dict[str, float]]:
    """Killing-flow periods T = j l + k L with j * integral(H - E) = -alpha k L"""
    L, alpha = pp.period_L, pp.alpha
    found = []
    k_max = int(np.ceil((t_max + max_repeat * orbit.period) / L))
    for j in range(-max_repeat, max_repeat + 1):
        if j == 0:
            continue
        for k in range(-k_max, k_max + 1):
            defect = j * orbit.action_defect + alpha * k * L
            if abs(defect) > tol * max(1.0, abs(alpha * k * L)):
                continue
            T = j * orbit.period + k * L
            if T == 0.0 or abs(T) > t_max:
                continue
            found.append({'T': abs(T), 'sign': float(np.sign(T)), 'j': j, 'k': k, 'defect': defect})
    found.sort(key=lambda row: (row['T'], row['j'], row['k']))
    return found


def ppwave_xline_periods(pp: PPWaveModel, t_max: float) -> List[float]:
    """Periods k L of the s-line family, which is degenerate"""
    return [k * pp.period_L for k in range(1, int(np.floor(t_max / pp.period_L)) + 1)]


def ppwave_critical_periods(pp: PPWaveModel, y_star: float) -> float:
    """Primitive period of the backward s-line through a critical point of H"""
    H = float(pp.profile_H.value(np.array([[y_star]]))[0])
    return pp.period_L * (2.0 * pp.alpha - H) / H


def ppwave_critical_det(pp: PPWaveModel, y_star: float) -> Dict[str, object]:
    """det(I - P) of that backward s-line; the transverse phase over one period is L sqrt(2 alpha^2 |H''|) / H"""
    if len(pp.base_lengths) != 1:
        raise ConfigError("critical s-lines are implemented for a one-dimensional base")
    point = np.array([[y_star]])
    H = float(pp.profile_H.value(point)[0])
    if abs(float(pp.profile_H.grad(point)[0, 0])) > LabSettings.TOL_FACTOR:
        raise ConfigError(f"y = {y_star:g} is not a critical point of H")
    curvature = float(pp.profile_H.hess(point)[0, 0, 0])
    phase = pp.period_L * np.sqrt(2.0 * pp.alpha ** 2 * abs(curvature)) / H
    if curvature < 0.0:
        return {'det_I_minus_P': float(2.0 - 2.0 * np.cosh(phase)), 'stability': 'hyperbolic'}
    det = float(2.0 - 2.0 * np.cos(phase))
    return {'det_I_minus_P': det, 'stability': 'degenerate' if abs(det) < LabSettings.DET_DEGENERATE else 'elliptic'}


def constant_mode_family(pp: PPWaveModel, m_values: Sequence[int]) -> np.ndarray:
    """lam = -2 pi m / L, the constant-in-y branch"""
    return np.array([-2.0 * np.pi * m / pp.period_L for m in m_values])
