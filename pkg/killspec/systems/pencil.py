"""
Quadratic pencil solver for the Killing generator spectrum
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..core.errors import NumericalError
from ..core.settings import LabSettings
from ..entities.grid import SpectralGrid
from ..entities.matrices import OperatorMatrices
from ..entities.spectrum import EigenMode, ModeGroup, SpectrumResult
from .discretization import high_pass, tail_fraction

logger = logging.getLogger(__name__)


class SolverOptions:
    """Tolerances and route selection for one spectrum solve"""

    def __init__(self, tolerances: Optional[Dict[str, float]] = None, cutoff: float = np.inf,
                 route: str = 'auto', cross_check: bool = False):
        merged = LabSettings.tolerances()
        merged.update(tolerances or {})
        self.tol_resid = merged['tol_resid']
        self.cluster_rel = merged['cluster_rel']
        self.tol_zero = merged['tol_zero']
        self.tol_real = merged['tol_real']
        self.tol_tail = merged['tol_tail']
        self.cutoff = cutoff
        self.route = route
        self.cross_check = cross_check


def _check_sizes(P: np.ndarray, X: np.ndarray):
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape != X.shape:
        raise ValueError(f"pencil blocks must be square and of equal size, got {P.shape} and {X.shape}")


def companion_linearize(P: np.ndarray, X: np.ndarray,
                        M: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(A, B) with A = [[0, I], [P, -2iX]], B = diag(I, M); eigenvectors are (psi, lam psi)"""
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    _check_sizes(P, X)
    n = P.shape[0]
    identity = np.eye(n, dtype=complex)
    A = np.block([[np.zeros((n, n), dtype=complex), identity], [P, -2j * X]])
    B = np.block([[identity, np.zeros((n, n), dtype=complex)],
                  [np.zeros((n, n), dtype=complex), identity if M is None else np.asarray(M, dtype=complex)]])
    return A, B


def selfadjoint_linearize(P: np.ndarray, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """A = [[2iX, P - 1], [P - 1, 2iX]], B = diag(P, 1); eigenvalue mu = 1/lam - lam"""
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    _check_sizes(P, X)
    n = P.shape[0]
    identity = np.eye(n, dtype=complex)
    zero = np.zeros((n, n), dtype=complex)
    A = np.block([[2j * X, P - identity], [P - identity, 2j * X]])
    B = np.block([[P, zero], [zero, identity]])
    return A, B


def mu_to_lambda(mu: complex) -> Tuple[complex, complex]:
    """Both roots of lam^2 + mu lam - 1 = 0"""
    root = np.lib.scimath.sqrt(complex(mu) ** 2 + 4.0)
    return complex((-mu + root) / 2.0), complex((-mu - root) / 2.0)


def pencil_residual(P: np.ndarray, X: np.ndarray, lam: complex, psi: np.ndarray,
                    weights: Optional[np.ndarray] = None) -> float:
    """Relative residual |(P - 2i lam X - lam^2) psi| / |psi| in the weighted norm"""
    r = P @ psi - 2j * lam * (X @ psi) - lam ** 2 * psi
    w = np.ones(len(psi)) if weights is None else weights
    num = np.sqrt(np.sum(w * np.abs(r) ** 2))
    den = np.sqrt(np.sum(w * np.abs(psi) ** 2))
    return float(num / den) if den > 0 else np.inf


def null_threshold(norm: float, size: int) -> float:
    """Roundoff floor below which an eigenvalue or singular value counts as zero"""
    return LabSettings.NULL_EPS_FACTOR * max(size, 1) * float(np.finfo(float).eps) * max(norm, 1.0)


def residual_filter(modes: Sequence[EigenMode], tol_resid: float) -> List[EigenMode]:
    """Drop candidates whose pencil residual exceeds tol_resid"""
    kept = [m for m in modes if m.residual < tol_resid]
    dropped = len(modes) - len(kept)
    if dropped:
        logger.debug(f"Residual filter dropped {dropped} of {len(modes)} candidates")
    return kept


def _normalize(psi: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Unit weighted norm, largest entry real positive"""
    norm = np.sqrt(np.sum(weights * np.abs(psi) ** 2))
    if norm == 0.0:
        return psi
    psi = psi / norm
    pivot = psi[np.argmax(np.abs(psi))]
    return psi * (abs(pivot) / pivot)


class _PencilContext:
    """Matrices and weights shared by all candidates of one solve"""

    def __init__(self, mats: OperatorMatrices):
        self.mats = mats
        self.P = mats.P
        self.X = mats.X
        self.weights = mats.volume_weights

    def make_mode(self, lam: complex, psi: np.ndarray, opts: SolverOptions) -> EigenMode:
        psi = _normalize(psi, self.weights)
        residual = pencil_residual(self.P, self.X, lam, psi, self.weights)
        tail = tail_fraction(psi, self.mats.grid)
        trusted = tail < opts.tol_tail and abs(lam) < opts.cutoff
        return EigenMode(lam=complex(lam), psi=psi, residual=residual, tail_fraction=tail, trusted=trusted)


def _tail_rotation(block: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Basis of span(block) ordered from smoothest to roughest, padded to the block width"""
    basis = scipy.linalg.orth(block)
    if basis.shape[1] == 0:
        return block
    tail = basis.conj().T @ high_pass(basis, grid)
    _, rotation = scipy.linalg.eigh(0.5 * (tail + tail.conj().T))
    rotated = basis @ rotation
    missing = block.shape[1] - rotated.shape[1]
    if missing > 0:
        rotated = np.column_stack([rotated] + [rotated[:, 0]] * missing)
    return rotated


def separate_tails(values: np.ndarray, vectors: np.ndarray, grid: SpectralGrid,
                   cluster_rel: float) -> np.ndarray:
    """Rotate the eigenvectors of each degenerate cluster so resolved and tail vectors split"""
    vectors = np.array(vectors, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    start = 0
    while start < order.size:
        stop = start + 1
        while stop < order.size and abs(values[order[stop]] - values[order[stop - 1]]) <= \
                cluster_rel * (1.0 + abs(values[order[stop - 1]])):
            stop += 1
        if stop - start > 1:
            members = order[start:stop]
            vectors[:, members] = _tail_rotation(vectors[:, members], grid)
        start = stop
    return vectors


def _companion_candidates(ctx: _PencilContext, opts: SolverOptions) -> List[EigenMode]:
    A, _ = companion_linearize(ctx.P, ctx.X)
    n = ctx.P.shape[0]
    try:
        values, vectors = scipy.linalg.eig(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"companion eigensolve failed: {exc}",
                             {'stage': 'spectrum', 'condition': float(np.linalg.cond(ctx.P))})
    finite = np.isfinite(values)
    values, vectors = values[finite], vectors[:, finite]
    large = np.abs(values) > 1.0
    psis = vectors[:n].copy()
    psis[:, large] = vectors[n:, large] / values[large]
    psis = separate_tails(values, psis, ctx.mats.grid, opts.cluster_rel)
    return [ctx.make_mode(lam, psi, opts) for lam, psi in zip(values, psis.T)]


def _symmetric_candidates(ctx: _PencilContext, opts: SolverOptions) -> List[EigenMode]:
    """X = 0: lam = +-sqrt(mu) for mu in spec(P); null vectors give a 2x1 Jordan block"""
    root_w = np.sqrt(ctx.weights)
    S = (root_w[:, None] * ctx.P) / root_w[None, :]
    S = 0.5 * (S + S.conj().T)
    try:
        mus, ys = scipy.linalg.eigh(S)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"symmetric eigensolve failed: {exc}", {'stage': 'spectrum'})
    threshold = null_threshold(float(np.max(np.abs(mus))), mus.size)
    psis = ys / root_w[:, None]
    clustered = np.where(np.abs(mus) < threshold, 0.0, mus)
    psis = separate_tails(clustered.astype(complex), psis, ctx.mats.grid, opts.cluster_rel)
    modes = []
    for mu, psi in zip(clustered, psis.T):
        if mu == 0.0:
            modes.extend([ctx.make_mode(0.0, psi, opts), ctx.make_mode(0.0, psi, opts)])
            continue
        root = np.lib.scimath.sqrt(mu)
        modes.extend([ctx.make_mode(root, psi, opts), ctx.make_mode(-root, psi, opts)])
    return modes


def _selfadjoint_eigenvalues(ctx: _PencilContext, opts: SolverOptions) -> np.ndarray:
    """Eigenvalues recovered through the doubled (A, B) form, residual-confirmed"""
    A, B = selfadjoint_linearize(ctx.P, ctx.X)
    n = ctx.P.shape[0]
    values, vectors = scipy.linalg.eig(A, B)
    found = []
    for mu, v in zip(values, vectors.T):
        if not np.isfinite(mu):
            continue
        psi = v[:n]
        if not np.any(psi):
            continue
        for lam in mu_to_lambda(mu):
            if pencil_residual(ctx.P, ctx.X, lam, psi, ctx.weights) < opts.tol_resid:
                found.append(lam)
    return np.array(found, dtype=complex)


def group_modes(modes: Sequence[EigenMode], cluster_rel: float) -> List[ModeGroup]:
    """Cluster sorted trusted eigenvalues within cluster_rel (1 + |lam|)"""
    groups: List[ModeGroup] = []
    current: List[int] = []
    for index, mode in enumerate(modes):
        if not mode.trusted:
            continue
        if current:
            last = modes[current[-1]].lam
            if abs(mode.lam - last) > cluster_rel * (1.0 + abs(last)):
                groups.append(_make_group(modes, current))
                current = []
        current.append(index)
    if current:
        groups.append(_make_group(modes, current))
    return groups


def _make_group(modes: Sequence[EigenMode], members: List[int]) -> ModeGroup:
    rep = complex(np.mean([modes[i].lam for i in members]))
    return ModeGroup(lambda_rep=rep, multiplicity=len(members), members=list(members))


def symmetry_report(modes: Sequence[EigenMode], tol_real: float) -> Dict[str, float]:
    """Max pairing defects of the trusted spectrum under lam -> -lam and lam -> conj(lam)"""
    all_values = np.array([m.lam for m in modes], dtype=complex)
    trusted = [m.lam for m in modes if m.trusted]
    reflection = 0.0
    conjugation = 0.0
    for lam in trusted:
        if all_values.size:
            reflection = max(reflection, float(np.min(np.abs(all_values + lam))))
            conjugation = max(conjugation, float(np.min(np.abs(all_values - np.conj(lam)))))
    trusted_arr = np.array(trusted, dtype=complex)
    count_defect = 0
    if trusted_arr.size:
        pos = int(np.sum(trusted_arr.real > tol_real))
        neg = int(np.sum(trusted_arr.real < -tol_real))
        upper = int(np.sum(trusted_arr.imag > tol_real))
        lower = int(np.sum(trusted_arr.imag < -tol_real))
        count_defect = abs(pos - neg) + abs(upper - lower)
    return {'reflection_defect': reflection, 'conjugation_defect': conjugation,
            'count_defect': float(count_defect)}


def complex_quadruple_defect(modes: Sequence[EigenMode]) -> float:
    """Max distance from each complex mode to its partners conj, -lam, -conj"""
    values = np.array([m.lam for m in modes], dtype=complex)
    worst = 0.0
    for lam in values:
        for partner in (np.conj(lam), -lam, -np.conj(lam)):
            worst = max(worst, float(np.min(np.abs(values - partner))))
    return worst


def smooth_rank(vectors: np.ndarray, grid: SpectralGrid) -> int:
    """Dimension of the part of span(vectors) resolved below the tail threshold"""
    if vectors.shape[1] == 0:
        return 0
    smooth = vectors - high_pass(vectors, grid)
    return int(np.sum(scipy.linalg.svdvals(smooth) > 0.5))


def kernel_dimension(P: np.ndarray, grid: SpectralGrid) -> Tuple[int, int]:
    """Resolved dimension of ker P, and the count of singular values too close to the null floor to call"""
    _, singular, vh = scipy.linalg.svd(P)
    sigma_max = float(singular[0]) if singular.size else 0.0
    threshold = null_threshold(sigma_max, P.shape[0])
    null = vh[singular < threshold].conj().T
    factor = LabSettings.JORDAN_CLUSTER_FACTOR
    near = int(np.sum((singular >= threshold) & (singular < threshold * factor)))
    if near:
        logger.warning(f"Zero detection is ill-conditioned: {near} singular values "
                       f"within a factor {factor:g} above {threshold:.2e}")
    return smooth_rank(null, grid), near


def detect_jordan_zero(mats: OperatorMatrices, tol_zero: float = LabSettings.TOL_ZERO,
                       modes: Optional[Sequence[EigenMode]] = None,
                       tol_tail: float = LabSettings.TOL_TAIL) -> Dict[str, int]:
    """Algebraic and geometric multiplicity of lam = 0 among resolved modes"""
    geometric, near = kernel_dimension(mats.P, mats.grid)

    if modes is None and mats.x_vanishes:
        algebraic = 2 * geometric
    else:
        if modes is None:
            ctx = _PencilContext(mats)
            modes = _companion_candidates(ctx, SolverOptions({'tol_tail': tol_tail}))
        algebraic = sum(1 for m in modes if abs(m.lam) < tol_zero and m.tail_fraction < tol_tail)
    return {'algebraic': algebraic, 'geometric': geometric, 'ill_conditioned': int(near > 0)}


def solve_spectrum(mats: OperatorMatrices, opts: Optional[SolverOptions] = None) -> SpectrumResult:
    """Filtered, trusted and grouped spectrum of the pencil"""
    opts = opts or SolverOptions()
    ctx = _PencilContext(mats)
    route = opts.route
    if route == 'auto':
        route = 'symmetric' if mats.x_vanishes else 'companion'
    logger.info(f"Solving pencil of size {mats.size} via the {route} route")

    candidates = _symmetric_candidates(ctx, opts) if route == 'symmetric' else _companion_candidates(ctx, opts)
    modes = residual_filter(candidates, opts.tol_resid)
    modes.sort(key=lambda m: (round(m.lam.real, 12), round(m.lam.imag, 12)))

    jordan = detect_jordan_zero(mats, opts.tol_zero, candidates, opts.tol_tail)

    trusted = [m for m in modes if m.trusted]
    complex_modes = [m for m in trusted if abs(m.lam.imag) > opts.tol_real]
    report = symmetry_report(modes, opts.tol_real)
    report['quadruple_defect'] = complex_quadruple_defect(complex_modes) if complex_modes else 0.0

    discrepancy = None
    if opts.cross_check:
        discrepancy = _route_discrepancy(ctx, opts, trusted)

    result = SpectrumResult(
        modes=modes,
        groups=group_modes(modes, opts.cluster_rel),
        jordan_at_zero=jordan,
        symmetry_report=report,
        complex_modes=complex_modes,
        cutoff=opts.cutoff,
        route=route,
        route_discrepancy=discrepancy,
        diagnostics={'candidates': len(candidates), 'retained': len(modes), 'trusted': len(trusted)},
    )
    logger.info(f"Spectrum: {len(trusted)} trusted of {len(modes)} retained modes, "
                f"{len(complex_modes)} complex, Jordan at zero {jordan['algebraic']}/{jordan['geometric']}")
    return result


def _route_discrepancy(ctx: _PencilContext, opts: SolverOptions, trusted: Sequence[EigenMode]) -> float:
    other = _selfadjoint_eigenvalues(ctx, opts)
    worst = 0.0
    for mode in trusted:
        if abs(mode.lam) <= LabSettings.ROUTE_AGREEMENT_MIN:
            continue
        if other.size == 0:
            return np.inf
        worst = max(worst, float(np.min(np.abs(other - mode.lam))))
    logger.info(f"Two-route discrepancy {worst:.2e}")
    return worst


def direct_hermitian_spectrum(P: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Eigenvalues of P, self-adjoint in the given weights, as an independent oracle"""
    root_w = np.sqrt(weights)
    S = (root_w[:, None] * P) / root_w[None, :]
    return scipy.linalg.eigvalsh(0.5 * (S + S.conj().T))
