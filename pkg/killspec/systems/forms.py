"""
Symplectic and energy forms on discretized Cauchy data
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..core.settings import LabSettings
from ..entities.cauchy import CauchyData
from ..entities.matrices import OperatorMatrices
from ..entities.spectrum import EigenMode, SpectrumResult
from .discretization import diff_matrices
from .pencil import smooth_rank

logger = logging.getLogger(__name__)


class _SliceData:
    def __init__(self, mats: OperatorMatrices):
        if mats.geometry is None:
            raise ValueError("Cauchy data need operator matrices assembled with their geometry")
        geom = mats.geometry
        sampled = geom.sampled
        self.grid = mats.grid
        self.lapse = sampled.lapse.ravel()
        self.shift = [b.ravel() for b in sampled.shift_vector]
        self.omega = geom.conformal_weight.ravel()
        self.weights = sampled.sqrt_det_metric.ravel() * mats.grid.cell_volume
        self.diffs = diff_matrices(mats.grid) if any(np.any(b) for b in self.shift) else []


def _slice(mats: OperatorMatrices) -> _SliceData:
    if 'slice' not in mats.cache:
        mats.cache['slice'] = _SliceData(mats)
    return mats.cache['slice']


def cauchy_from_values(g: np.ndarray, lam: complex, mats: OperatorMatrices,
                       source: Optional[int] = None) -> CauchyData:
    """Data of u = e^{i lam t} g: f = i lam g and nu u = (f - beta^i d_i g) / N"""
    data = _slice(mats)
    g = np.asarray(g, dtype=complex).ravel()
    if g.size != mats.grid.total_size:
        raise ValueError(f"grid function of size {g.size} does not match grid of size {mats.grid.total_size}")
    f = 1j * lam * g
    transport = np.zeros_like(g)
    for beta, D in zip(data.shift, data.diffs):
        transport += beta * (D @ g)
    return CauchyData(grid=mats.grid, g=g, f=f, normal=(f - transport) / data.lapse,
                      lam=complex(lam), source=source)


def cauchy_data(mode: EigenMode, mats: OperatorMatrices, source: Optional[int] = None) -> CauchyData:
    """Cauchy data of the solution e^{i lam t} psi / Omega built from a pencil eigenpair"""
    data = _slice(mats)
    return cauchy_from_values(mode.psi / data.omega, mode.lam, mats, source)


def _check_pair(u: CauchyData, v: CauchyData):
    if u.grid != v.grid:
        raise ValueError("Cauchy data live on different grids")


def symplectic_form_sigma(u: CauchyData, v: CauchyData, mats: OperatorMatrices) -> complex:
    """sigma(u, v) = integral of (nu u) v - u (nu v) over dVol_h, bilinear"""
    _check_pair(u, v)
    w = _slice(mats).weights
    return complex(np.sum(w * (u.normal * v.g - u.g * v.normal)))


def energy_form_Q(u: CauchyData, v: CauchyData, mats: OperatorMatrices) -> complex:
    """Hermitian energy form q1(g_u, g_v) + q2(f_u, f_v)"""
    _check_pair(u, v)
    return complex(np.conj(u.g) @ (mats.q1 @ v.g) + np.conj(u.f) @ (mats.q2 @ v.f))


def conjugate(u: CauchyData) -> CauchyData:
    return CauchyData(grid=u.grid, g=np.conj(u.g), f=np.conj(u.f), normal=np.conj(u.normal),
                      lam=-np.conj(u.lam), source=u.source, normalization=u.normalization)


def verify_lemma12(mode_u: EigenMode, mode_v: EigenMode, mats: OperatorMatrices) -> float:
    """Relative defect of Q(u, v) = (i/2) sigma(conj u, D_Z v) with D_Z v = lam_v v"""
    u = cauchy_data(mode_u, mats)
    v = cauchy_data(mode_v, mats)
    q = energy_form_Q(u, v, mats)
    rhs = 0.5j * mode_v.lam * symplectic_form_sigma(conjugate(u), v, mats)
    return float(abs(q - rhs) / (1.0 + abs(q)))


# Stacked evaluations

def _stack(data: Sequence[CauchyData]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    G = np.column_stack([d.g for d in data])
    F = np.column_stack([d.f for d in data])
    V = np.column_stack([d.normal for d in data])
    lam = np.array([d.lam for d in data], dtype=complex)
    return G, F, V, lam


def energy_form_matrix(data: Sequence[CauchyData], mats: OperatorMatrices) -> np.ndarray:
    if not data:
        return np.zeros((0, 0), dtype=complex)
    G, F, _, _ = _stack(data)
    return G.conj().T @ mats.q1 @ G + F.conj().T @ mats.q2 @ F


def sigma_form(data: Sequence[CauchyData], mats: OperatorMatrices, conjugate_left: bool = False) -> np.ndarray:
    if not data:
        return np.zeros((0, 0), dtype=complex)
    G, _, V, _ = _stack(data)
    w = _slice(mats).weights[:, None]
    left_G, left_V = (G.conj(), V.conj()) if conjugate_left else (G, V)
    return left_V.T @ (w * G) - left_G.T @ (w * V)


def lemma12_defects(data: Sequence[CauchyData], mats: OperatorMatrices) -> np.ndarray:
    """|Q(u_j, u_k) - (i/2) lam_k sigma(conj u_j, u_k)| / (1 + |Q|) for all pairs"""
    if not data:
        return np.zeros((0, 0))
    lam = np.array([d.lam for d in data], dtype=complex)
    Q = energy_form_matrix(data, mats)
    S = sigma_form(data, mats, conjugate_left=True)
    return np.abs(Q - 0.5j * S * lam[None, :]) / (1.0 + np.abs(Q))


def sigma_antisymmetry_defect(data: Sequence[CauchyData], mats: OperatorMatrices) -> float:
    S = sigma_form(data, mats)
    if S.size == 0:
        return 0.0
    return float(np.max(np.abs(S + S.T)))


def sigma_pairing_matrix(spectrum: SpectrumResult, mats: OperatorMatrices,
                         tol_pair: float = LabSettings.PAIRING_TOL) -> Tuple[np.ndarray, List[Dict[str, object]]]:
    """sigma(u_j, u_k) over trusted real modes, with the pairs that break the pairing rule"""
    indices, data = _trusted_real_data(spectrum, mats)
    return _pairing(indices, data, mats, tol_pair)


def _pairing(indices: Sequence[int], data: Sequence[CauchyData], mats: OperatorMatrices,
             tol_pair: float) -> Tuple[np.ndarray, List[Dict[str, object]]]:
    S = sigma_form(data, mats)
    if S.size == 0:
        return S, []
    scale = max(1.0, float(np.max(np.abs(S))))
    lam = np.array([d.lam.real for d in data])
    opposite = np.abs(lam[:, None] + lam[None, :]) <= LabSettings.CLUSTER_REL * np.maximum(
        1.0, np.abs(lam[:, None]) + np.abs(lam[None, :]))
    bad = (np.abs(S) >= tol_pair * scale) & ~opposite
    violations = [{'j': indices[j], 'k': indices[k], 'lambda_j': float(lam[j]), 'lambda_k': float(lam[k]),
                   'sigma_abs': float(abs(S[j, k]))}
                  for j, k in zip(*np.nonzero(np.triu(bad)))]
    if violations:
        logger.warning(f"{len(violations)} sigma pairings violate the lam_j + lam_k = 0 rule")
    return S, violations


def _trusted_real_data(spectrum: SpectrumResult, mats: OperatorMatrices,
                       tol_real: float = LabSettings.TOL_REAL) -> Tuple[List[int], List[CauchyData]]:
    omega = _slice(mats).omega
    indices = [i for i, m in enumerate(spectrum.modes) if m.trusted and abs(m.lam.imag) <= tol_real]
    data = [cauchy_from_values(spectrum.modes[i].psi / omega, spectrum.modes[i].lam.real, mats, source=i)
            for i in indices]
    return indices, data


def flow_invariance_defect(data: Sequence[CauchyData], mats: OperatorMatrices,
                           times: Sequence[float] = (0.5, 1.0, 2.0),
                           tol_equal: float = LabSettings.CLUSTER_REL) -> float:
    """Largest change of Q under time evolution over pairs with equal eigenvalues"""
    if not data:
        return 0.0
    lam = np.array([d.lam for d in data], dtype=complex)
    same = np.abs(lam[:, None] - lam[None, :]) <= tol_equal * np.maximum(1.0, np.abs(lam[:, None]))
    base = energy_form_matrix(data, mats)
    worst = 0.0
    for t in times:
        moved = energy_form_matrix([d.evolved(t) for d in data], mats)
        change = np.abs(moved - base)[same]
        worst = max(worst, float(np.max(change / (1.0 + np.abs(base[same])), initial=0.0)))
    return worst


# Inertia

def q1_inertia(mats: OperatorMatrices, tol_zero: float = LabSettings.TOL_ZERO,
               symmetrized: bool = False) -> Dict[str, int]:
    """Inertia of q1 relative to q2 on the resolved modes"""
    q1 = 0.5 * (mats.q1 + mats.q1.conj().T)
    q2 = np.real(np.diag(mats.q2))
    if symmetrized:
        root = 1.0 / np.sqrt(q2)
        values, vectors = scipy.linalg.eigh(root[:, None] * q1 * root[None, :])
        vectors = root[:, None] * vectors
    else:
        values, vectors = scipy.linalg.eigh(q1, np.diag(q2).astype(complex))
    threshold = tol_zero

    counts = {}
    for name, selected in (('negative', values < -threshold),
                           ('indeterminate', np.abs(values) <= threshold),
                           ('positive', values > threshold)):
        block = vectors[:, selected]
        counts[name] = smooth_rank(scipy.linalg.orth(block), mats.grid) if block.shape[1] else 0
    return counts


def pontryagin_index(mats: OperatorMatrices, tol_zero: float = LabSettings.TOL_ZERO) -> int:
    """Dimension of the maximal negative subspace of Q"""
    counts = q1_inertia(mats, tol_zero)
    if counts['indeterminate']:
        logger.warning(f"{counts['indeterminate']} q1 eigenvalues within tol_zero of zero; "
                       "index counts only the strictly negative ones")
    return counts['negative']


def forms_report(spectrum: SpectrumResult, mats: OperatorMatrices,
                 tolerances: Optional[Dict[str, float]] = None) -> Dict[str, object]:
    """Invariant-form checks over the trusted real modes of one spectrum"""
    merged = LabSettings.tolerances()
    merged.update(tolerances or {})
    indices, data = _trusted_real_data(spectrum, mats, merged['tol_real'])
    defects = lemma12_defects(data, mats)
    _, violations = _pairing(indices, data, mats, LabSettings.PAIRING_TOL)
    inertia = q1_inertia(mats, merged['tol_zero'])
    cross = q1_inertia(mats, merged['tol_zero'], symmetrized=True)
    report = {
        'lemma12_max_defect': float(np.max(defects, initial=0.0)),
        'sigma_antisymmetry_defect': sigma_antisymmetry_defect(data, mats),
        'pontryagin_index': inertia['negative'],
        'pontryagin_indeterminate': inertia['indeterminate'],
        'pontryagin_cross_check': cross['negative'],
        'pairing_violations': violations,
        'flow_invariance_defect': flow_invariance_defect(data, mats),
        'modes_used': len(indices),
    }
    logger.info(f"Forms: {len(indices)} modes, Lemma defect {report['lemma12_max_defect']:.2e}, "
                f"index {report['pontryagin_index']}, {len(violations)} pairing violations")
    return report
