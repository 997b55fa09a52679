"""
Reduced Killing flow on T*Sigma: Hamiltonian, trajectories, periodic orbits and return maps
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from functools import reduce
from itertools import product
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import null_space

from ..core.errors import ModelError, NumericalError
from ..core.settings import LabSettings
from ..entities.geometry import sample_model
from ..entities.grid import build_grid
from ..entities.model import StationaryModel
from ..entities.orbit import PeriodicOrbit, PhasePoint

logger = logging.getLogger(__name__)


class _Coefficients(NamedTuple):
    """Model fields and their derivatives at one point; k, l index x-derivatives"""

    N: float
    dN: np.ndarray      # [k]
    ddN: np.ndarray     # [k, l]
    beta: np.ndarray    # [i], covector
    dbeta: np.ndarray   # [k, i]
    ddbeta: np.ndarray  # [k, l, i]
    G: np.ndarray       # h^{ij}
    dG: np.ndarray      # [k, i, j]
    ddG: np.ndarray     # [k, l, i, j]


class ReducedHamiltonian:
    """H(x, xi) = beta(xi) + N |xi|_h on T*Sigma with closed-form derivatives"""

    def __init__(self, model: StationaryModel):
        self.model = model
        self.dim = model.dim
        self.lengths = np.asarray(model.torus_lengths, dtype=float)
        self._frozen = None
        if model.is_constant_coefficient:
            self._frozen = self.coefficients(np.zeros(self.dim))

    def coefficients(self, x: np.ndarray) -> _Coefficients:
        if self._frozen is not None:
            return self._frozen
        m = self.model
        d = self.dim
        x = np.asarray(x, dtype=float)

        lapse = m.lapse
        dN = lapse.grad(x)
        ddN = lapse.hess(x)
        beta = m.shift_covector(x)
        dbeta = np.stack([f.grad(x) for f in m.shift]).T
        ddbeta = np.moveaxis(np.stack([f.hess(x) for f in m.shift]), 0, -1)

        G = np.linalg.inv(m.metric(x))
        if m.has_constant_metric:
            dG = np.zeros((d, d, d))
            ddG = np.zeros((d, d, d, d))
        else:
            dh = m.metric_grad(x)
            ddh = m.metric_hess(x)
            dG = -np.einsum('ia,kab,bj->kij', G, dh, G)
            twice = np.einsum('kab,bc,lcd->klad', dh, G, dh)
            ddG = np.einsum('ia,klab,bj->klij', G, twice + twice.transpose(1, 0, 2, 3) - ddh, G)
        return _Coefficients(float(lapse.value(x)), dN, ddN, beta, dbeta, ddbeta, G, dG, ddG)

    def norm(self, x: np.ndarray, xi: np.ndarray) -> float:
        """|xi|_h"""
        G = self.coefficients(x).G
        return float(np.sqrt(max(xi @ G @ xi, 0.0)))

    def value(self, x: np.ndarray, xi: np.ndarray) -> float:
        c = self.coefficients(x)
        a = c.G @ xi
        return float(c.beta @ a + c.N * np.sqrt(xi @ a))

    def _check_xi(self, s: float):
        if not s > LabSettings.EPS_XI:
            raise NumericalError(f"covector too close to the zero section (|xi|_h = {s:.3e})",
                                 {'stage': 'orbits', 'xi_norm': s})

    def gradient(self, x: np.ndarray, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(dH/dx, dH/dxi)"""
        c = self.coefficients(x)
        a = c.G @ xi
        s = float(np.sqrt(xi @ a))
        self._check_xi(s)
        q = np.einsum('i,kij,j->k', xi, c.dG, xi)
        H_x = (c.dbeta @ a + np.einsum('i,kij,j->k', c.beta, c.dG, xi)
               + c.dN * s + c.N * q / (2.0 * s))
        H_xi = c.G @ c.beta + c.N * a / s
        return H_x, H_xi

    def hessian(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Full 2d x 2d Hessian ordered (x, xi)"""
        c = self.coefficients(x)
        a = c.G @ xi
        s = float(np.sqrt(xi @ a))
        self._check_xi(s)
        q = np.einsum('i,kij,j->k', xi, c.dG, xi)
        qq = np.einsum('i,klij,j->kl', xi, c.ddG, xi)

        H_xixi = c.N * (c.G / s - np.outer(a, a) / s ** 3)
        H_xix = (np.einsum('kij,j->ik', c.dG, c.beta) + c.G @ c.dbeta.T + np.outer(a, c.dN) / s
                 + c.N * (np.einsum('kij,j->ik', c.dG, xi) / s - np.outer(a, q) / (2.0 * s ** 3)))
        cross = np.einsum('ki,lij,j->kl', c.dbeta, c.dG, xi)
        H_xx = (np.einsum('kli,i->kl', c.ddbeta, a) + cross + cross.T
                + np.einsum('i,klij,j->kl', c.beta, c.ddG, xi)
                + c.ddN * s + (np.outer(c.dN, q) + np.outer(q, c.dN)) / (2.0 * s)
                + c.N * (qq / (2.0 * s) - np.outer(q, q) / (4.0 * s ** 3)))
        return np.block([[H_xx, H_xix.T], [H_xix, H_xixi]])

    def gradient_vector(self, state: np.ndarray) -> np.ndarray:
        d = self.dim
        H_x, H_xi = self.gradient(state[:d], state[d:])
        return np.concatenate([H_x, H_xi])

    def vector_field(self, state: np.ndarray) -> np.ndarray:
        """J grad H: (dH/dxi, -dH/dx)"""
        d = self.dim
        H_x, H_xi = self.gradient(state[:d], state[d:])
        return np.concatenate([H_xi, -H_x])

    def augmented_rhs(self, y: np.ndarray, variational: bool) -> np.ndarray:
        """Hamilton's equations, optionally with the variational matrix stacked row-major"""
        d = self.dim
        n = 2 * d
        field = self.vector_field(y[:n])
        if not variational:
            return field
        M = y[n:].reshape(n, n)
        dM = symplectic_matrix(d) @ self.hessian(y[:d], y[d:n]) @ M
        return np.concatenate([field, dM.ravel()])


def reduced_hamiltonian(point: PhasePoint, model: StationaryModel,
                        hamiltonian: Optional[ReducedHamiltonian] = None) -> Tuple[float, np.ndarray, np.ndarray]:
    """H and its gradient (dH/dx, dH/dxi) at a phase point"""
    ham = hamiltonian or ReducedHamiltonian(model)
    H_x, H_xi = ham.gradient(point.x, point.xi)
    return ham.value(point.x, point.xi), H_x, H_xi


def symplectic_matrix(dim: int) -> np.ndarray:
    identity = np.eye(dim)
    zero = np.zeros((dim, dim))
    return np.block([[zero, identity], [-identity, zero]])


def symplectic_defect(M: np.ndarray) -> float:
    """max |M^T J M - J|"""
    n = M.shape[0]
    if n == 0:
        return 0.0
    J = symplectic_matrix(n // 2)
    return float(np.max(np.abs(M.T @ J @ M - J)))


def phase_point(ham: ReducedHamiltonian, x: Sequence[float], xi: Sequence[float]) -> PhasePoint:
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return PhasePoint(x=x, xi=xi, energy=ham.value(x, xi))


def unit_level_point(ham: ReducedHamiltonian, x: Sequence[float], xi: Sequence[float]) -> PhasePoint:
    """Rescale xi onto {H = 1}; H is homogeneous of degree one in xi"""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    energy = ham.value(x, xi)
    if not energy > 0.0:
        raise NumericalError(f"non-positive energy {energy:.3e} at x = {x}", {'stage': 'orbits'})
    return phase_point(ham, x, xi / energy)


def _integrate(ham: ReducedHamiltonian, state: np.ndarray, t: float,
               variational: bool = False, dense: bool = False):
    """solve_ivp run of the (augmented) flow, aborting near the zero section"""
    d = ham.dim
    n = 2 * d
    y0 = np.concatenate([state, np.eye(n).ravel()]) if variational else np.asarray(state, dtype=float)
    floor = LabSettings.EPS_XI * max(1.0, ham.norm(state[:d], state[d:n]))

    def rhs(_, y):
        return ham.augmented_rhs(y, variational)

    def zero_section(_, y):
        return ham.norm(y[:d], y[d:n]) - floor

    zero_section.terminal = True

    sol = solve_ivp(rhs, (0.0, t), y0, method=LabSettings.ODE_METHOD,
                    rtol=LabSettings.ODE_RTOL, atol=LabSettings.ODE_ATOL,
                    dense_output=dense, events=zero_section)
    if sol.status == 1:
        raise NumericalError(f"trajectory reached the zero section at t = {sol.t[-1]:.6g}",
                             {'stage': 'orbits', 't': float(sol.t[-1])})
    if sol.status < 0:
        raise NumericalError(f"flow integration failed: {sol.message}",
                             {'stage': 'orbits', 't': float(sol.t[-1])})
    return sol


def flow(point: PhasePoint, t: float, model: StationaryModel, with_variational: bool = False,
         hamiltonian: Optional[ReducedHamiltonian] = None) -> Tuple[PhasePoint, Optional[np.ndarray]]:
    """Flow a phase point for time t on the universal cover, optionally with its tangent map"""
    ham = hamiltonian or ReducedHamiltonian(model)
    d = ham.dim
    n = 2 * d
    if t == 0.0:
        return point, (np.eye(n) if with_variational else None)

    sol = _integrate(ham, point.state, t, variational=with_variational)
    end = sol.y[:, -1]
    result = phase_point(ham, end[:d], end[d:n])
    drift = abs(result.energy - point.energy)
    logger.debug(f"Flowed for t = {t:.6g}: energy drift {drift:.2e}, {sol.nfev} evaluations")
    tangent = end[n:].reshape(n, n) if with_variational else None
    return result, tangent


def flow_jacobian_fd(point: PhasePoint, t: float, model: StationaryModel, step: float = 1e-6,
                     hamiltonian: Optional[ReducedHamiltonian] = None) -> np.ndarray:
    """Central-difference Jacobian of the time-t flow map"""
    ham = hamiltonian or ReducedHamiltonian(model)
    d = ham.dim
    state = point.state
    columns = []
    for j in range(2 * d):
        offset = np.zeros(2 * d)
        offset[j] = step
        plus = _integrate(ham, state + offset, t).y[:, -1]
        minus = _integrate(ham, state - offset, t).y[:, -1]
        columns.append((plus - minus) / (2.0 * step))
    return np.stack(columns, axis=1)


# Return maps

def _transversal(state_field: np.ndarray, gradient: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Basis of the symplectic complement of span(v, e)"""
    return null_space(np.vstack([state_field @ J, gradient @ J]))


def _reduced_map(M: np.ndarray, v: np.ndarray, e: np.ndarray, J: np.ndarray) -> np.ndarray:
    S = _transversal(v, e, J)
    if S.shape[1] == 0:
        return np.zeros((0, 0))
    frame = np.column_stack([v, e, S])
    coords = np.linalg.lstsq(frame, M @ S, rcond=None)[0]
    return coords[2:, :]


def _det_I_minus(P: np.ndarray) -> float:
    if P.size == 0:
        return 1.0
    return float(np.real(np.linalg.det(np.eye(P.shape[0]) - P)))


def classify_return_map(P: np.ndarray, det_I_minus_P: float) -> Tuple[str, Optional[float]]:
    """Stability label and, for 2x2 elliptic maps, the rotation number"""
    if P.size == 0:
        return 'elliptic', None
    if abs(det_I_minus_P) < LabSettings.DET_DEGENERATE:
        return 'degenerate', None
    moduli = np.abs(np.linalg.eigvals(P))
    on_circle = np.abs(moduli - 1.0) < LabSettings.UNIT_CIRCLE_TOL
    if np.all(on_circle):
        rotation = None
        if P.shape == (2, 2):
            rotation = float(np.arccos(np.clip(np.trace(P) / 2.0, -1.0, 1.0)) / (2.0 * np.pi))
        return 'elliptic', rotation
    if not np.any(on_circle):
        return 'hyperbolic', None
    return 'mixed', None


def monodromy_and_det(orbit: PeriodicOrbit, model: StationaryModel,
                      hamiltonian: Optional[ReducedHamiltonian] = None) -> Dict[str, object]:
    """Linearized return map on a transversal inside {H = 1} and det(I - P)"""
    ham = hamiltonian or ReducedHamiltonian(model)
    d = ham.dim
    J = symplectic_matrix(d)
    _, M = flow(orbit.seed, orbit.period_T, model, with_variational=True, hamiltonian=ham)

    state = orbit.seed.state
    v = ham.vector_field(state)
    e = ham.gradient_vector(state)
    P = _reduced_map(M, v, e, J)
    det = _det_I_minus(P)

    section_defect = 0.0
    if P.size:
        # Second section, tilted inside the first transversal
        S = _transversal(v, e, J)
        P2 = _reduced_map(M, v, e + 0.5 * S[:, 0], J)
        section_defect = abs(det - _det_I_minus(P2))

    stability, rotation = classify_return_map(P, det)
    if stability == 'degenerate':
        logger.debug(f"Orbit with period {orbit.period_T:.6g} and winding {orbit.winding} is degenerate "
                     f"(det(I - P) = {det:.2e})")
    return {
        'monodromy': P,
        'full_monodromy': M,
        'det_I_minus_P': det,
        'stability': stability,
        'rotation_number': rotation,
        'section_defect': section_defect,
        'symplectic_defect': symplectic_defect(M),
        'return_map_det': float(np.real(np.linalg.det(P))) if P.size else 1.0,
    }


# Orbit search

class SearchOptions:
    """Horizon, seeding and tolerances of one periodic-orbit search"""

    def __init__(self, t_max: float = LabSettings.ORBIT_T_MAX,
                 seeds_per_winding: int = LabSettings.SEEDS_PER_WINDING,
                 scan_seeds: int = LabSettings.SCAN_SEEDS, seed: int = 0,
                 windings: Optional[Sequence[Sequence[int]]] = None,
                 tolerances: Optional[Dict[str, float]] = None, threads: int = 1):
        merged = LabSettings.tolerances()
        merged.update(tolerances or {})
        self.t_max = float(t_max)
        self.seeds_per_winding = int(seeds_per_winding)
        self.scan_seeds = int(scan_seeds)
        self.seed = int(seed)
        self.windings = [tuple(int(k) for k in w) for w in windings] if windings is not None else None
        self.tol_orbit = merged['tol_orbit']
        self.near_return = merged['near_return']
        self.threads = max(1, int(threads))


class _Candidate(NamedTuple):
    state: np.ndarray
    period: float
    winding: Tuple[int, ...]


def max_speed(model: StationaryModel) -> float:
    """Bound on the coordinate speed |dx/dt| over {H = 1}"""
    sampled = sample_model(model, build_grid(model.torus_lengths, [LabSettings.MIN_GRID * 2]))
    inverse = np.moveaxis(sampled.metric_inverse, (0, 1), (-2, -1))
    largest = np.linalg.eigvalsh(inverse)[..., -1]
    shift_speed = np.linalg.norm(sampled.shift_vector, axis=0)
    return float(np.max(shift_speed + sampled.lapse * np.sqrt(largest)))


def winding_targets(lengths: Sequence[float], t_max: float, v_max: float) -> List[Tuple[int, ...]]:
    """Nonzero windings whose lattice displacement is reachable before t_max"""
    lengths = np.asarray(lengths, dtype=float)
    reach = t_max * v_max
    ranges = [range(-int(reach // L), int(reach // L) + 1) for L in lengths]
    targets = [w for w in product(*ranges)
               if any(w) and np.linalg.norm(np.asarray(w) * lengths) <= reach]
    targets.sort(key=lambda w: (float(np.linalg.norm(np.asarray(w) * lengths)), w))
    return targets


def _winding_seeds(ham: ReducedHamiltonian, winding: Tuple[int, ...], per_axis: int) -> List[_Candidate]:
    """Seeds on a product grid, launched along h(w L) and rescaled to {H = 1}"""
    d = ham.dim
    displacement = np.asarray(winding, dtype=float) * ham.lengths
    seeds = []
    for index in product(range(per_axis), repeat=d):
        x = np.asarray(index, dtype=float) * ham.lengths / per_axis
        xi = ham.model.metric(x) @ displacement
        try:
            point = unit_level_point(ham, x, xi)
            _, velocity = ham.gradient(point.x, point.xi)
        except NumericalError:
            continue
        speed = float(np.linalg.norm(velocity))
        if speed <= 0.0:
            continue
        seeds.append(_Candidate(point.state, float(np.linalg.norm(displacement)) / speed, winding))
    return seeds


def _lift(ham: ReducedHamiltonian, winding: Sequence[int]) -> np.ndarray:
    return np.concatenate([np.asarray(winding, dtype=float) * ham.lengths, np.zeros(ham.dim)])


def _closure(ham: ReducedHamiltonian, state: np.ndarray, period: float, winding: Sequence[int]) -> np.ndarray:
    return _integrate(ham, state, period).y[:, -1] - state - _lift(ham, winding)


def _shoot(ham: ReducedHamiltonian, candidate: _Candidate, opts: SearchOptions) -> Optional[_Candidate]:
    """Gauss-Newton refinement of (z0, T) with energy and phase conditions"""
    d = ham.dim
    n = 2 * d
    state = np.array(candidate.state, dtype=float)
    period = float(candidate.period)
    lift = _lift(ham, candidate.winding)
    scale = max(1.0, float(np.linalg.norm(lift)))

    try:
        for iteration in range(LabSettings.NEWTON_MAX_ITER):
            sol = _integrate(ham, state, period, variational=True)
            end = sol.y[:n, -1]
            M = sol.y[n:, -1].reshape(n, n)
            F = end - state - lift
            energy_gap = ham.value(state[:d], state[d:]) - 1.0
            if np.max(np.abs(F)) < opts.tol_orbit * scale and abs(energy_gap) < opts.tol_orbit:
                return _Candidate(state, period, candidate.winding)

            A = np.zeros((n + 2, n + 1))
            A[:n, :n] = M - np.eye(n)
            A[:n, n] = ham.vector_field(end)
            A[n, :n] = ham.gradient_vector(state)
            A[n + 1, :n] = ham.vector_field(state)
            rhs = -np.concatenate([F, [energy_gap, 0.0]])
            step = np.linalg.lstsq(A, rhs, rcond=LabSettings.NEWTON_DAMPING)[0]

            # Backtracking to ensure residual decrease
            r0 = float(np.linalg.norm(np.append(F, energy_gap)))
            damping = 1.0
            for _ in range(8):
                trial_state = state + damping * step[:n]
                trial_period = period + damping * step[n]
                if trial_period > 0.0:
                    trial = np.append(_closure(ham, trial_state, trial_period, candidate.winding),
                                      ham.value(trial_state[:d], trial_state[d:]) - 1.0)
                    if np.linalg.norm(trial) < 0.7 * r0:
                        state, period = trial_state, trial_period
                        break
                damping *= 0.5
            else:
                state, period = state + step[:n], period + step[n]
            if period <= 0.0 or period > 2.0 * opts.t_max:
                break
    except NumericalError as exc:
        logger.debug(f"Shooting for winding {candidate.winding} aborted: {exc.message}")
        return None
    logger.debug(f"Shooting for winding {candidate.winding} from T = {candidate.period:.4g} did not converge")
    return None


def _divisors(g: int) -> List[int]:
    if g == 0:
        return [4, 3, 2]
    return [k for k in range(g, 1, -1) if g % k == 0]


def _make_primitive(ham: ReducedHamiltonian, found: _Candidate) -> _Candidate:
    """Divide out repetitions: largest k with the orbit closing after T/k"""
    winding = np.asarray(found.winding, dtype=int)
    g = reduce(math.gcd, (abs(int(k)) for k in winding), 0)
    size = max(1.0, float(np.linalg.norm(found.state)))
    for k in _divisors(g):
        part = tuple(int(w) // k for w in winding)
        try:
            defect = np.max(np.abs(_closure(ham, found.state, found.period / k, part)))
        except NumericalError:
            continue
        if defect < LabSettings.PRIMITIVE_TOL * size:
            return _Candidate(found.state, found.period / k, part)
    return found


def _normalize_position(ham: ReducedHamiltonian, found: _Candidate) -> _Candidate:
    d = ham.dim
    state = found.state.copy()
    state[:d] = np.mod(state[:d], ham.lengths)
    return _Candidate(state, found.period, found.winding)


def orbit_fingerprint(ham: ReducedHamiltonian, state: np.ndarray, period: float) -> np.ndarray:
    """Time-shift invariant averages of xi and of exp(2 pi i x / L) along the orbit"""
    d = ham.dim
    sol = _integrate(ham, state, period, dense=True)
    times = np.linspace(0.0, period, LabSettings.FINGERPRINT_SAMPLES, endpoint=False)
    path = sol.sol(times)
    phases = np.exp(2j * np.pi * path[:d] / ham.lengths[:, None]).mean(axis=1)
    return np.concatenate([path[d:].mean(axis=1), phases.real, phases.imag])


def _scan(ham: ReducedHamiltonian, opts: SearchOptions) -> List[_Candidate]:
    """Near returns of random unit-level trajectories"""
    d = ham.dim
    rng = np.random.default_rng(opts.seed)
    v_max = max_speed(ham.model)
    t_min = 0.5 * float(np.min(ham.lengths)) / v_max
    times = np.arange(t_min, opts.t_max, LabSettings.SCAN_STEP)
    found = []
    for _ in range(opts.scan_seeds):
        x = rng.uniform(0.0, 1.0, size=d) * ham.lengths
        xi = rng.normal(size=d)
        try:
            start = unit_level_point(ham, x, xi)
            sol = _integrate(ham, start.state, opts.t_max, dense=True)
        except NumericalError as exc:
            logger.debug(f"Scan trajectory discarded: {exc.message}")
            continue
        if times.size < 3:
            continue
        path = sol.sol(times)
        offset = path[:d] - start.x[:, None]
        winding = np.round(offset / ham.lengths[:, None])
        offset -= winding * ham.lengths[:, None]
        distance = np.sqrt(np.sum(offset ** 2, axis=0) + np.sum((path[d:] - start.xi[:, None]) ** 2, axis=0))
        minima = np.flatnonzero((distance[1:-1] < distance[:-2]) & (distance[1:-1] <= distance[2:])
                                & (distance[1:-1] < opts.near_return)) + 1
        for index in minima[:4]:
            found.append(_Candidate(start.state, float(times[index]),
                                    tuple(int(k) for k in winding[:, index])))
    logger.debug(f"Near-return scan produced {len(found)} candidates")
    return found


def _same_orbit(a: PeriodicOrbit, b: PeriodicOrbit, dim: int, family: bool) -> bool:
    if a.winding != b.winding:
        return False
    if abs(a.period_T - b.period_T) > LabSettings.DEDUP_TOL * max(1.0, a.period_T):
        return False
    width = dim if family else a.fingerprint.size
    return bool(np.max(np.abs(a.fingerprint[:width] - b.fingerprint[:width]), initial=0.0) < LabSettings.DEDUP_TOL)


def _dedupe(orbits: List[PeriodicOrbit], dim: int, family: bool = False) -> List[PeriodicOrbit]:
    kept: List[PeriodicOrbit] = []
    for orbit in orbits:
        collapse = family and orbit.is_degenerate
        if not any(_same_orbit(orbit, other, dim, collapse and other.is_degenerate) for other in kept):
            kept.append(orbit)
    return kept


def _iterates(orbit: PeriodicOrbit, t_max: float, tol: float) -> List[PeriodicOrbit]:
    out = []
    k = 2
    while k * orbit.primitive_period <= t_max + tol:
        P = np.linalg.matrix_power(orbit.monodromy, k) if orbit.monodromy.size else orbit.monodromy
        det = _det_I_minus(P)
        stability, rotation = classify_return_map(P, det)
        out.append(replace(
            orbit,
            period_T=k * orbit.primitive_period,
            winding=tuple(k * w for w in orbit.winding),
            monodromy=P,
            full_monodromy=np.linalg.matrix_power(orbit.full_monodromy, k),
            det_I_minus_P=det,
            stability=stability,
            rotation_number=rotation,
            repetition=k,
            orbit_id=f"{orbit.orbit_id}^{k}",
        ))
        k += 1
    return out


def _map(function, items: Sequence, threads: int) -> List:
    if threads <= 1 or len(items) < 2:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(function, items))


def find_periodic_orbits(model: StationaryModel, opts: Optional[SearchOptions] = None) -> List[PeriodicOrbit]:
    """Periodic orbits of the reduced flow with periods up to t_max, iterates included"""
    opts = opts or SearchOptions()
    ham = ReducedHamiltonian(model)
    d = ham.dim

    windings = opts.windings
    if windings is None:
        windings = winding_targets(model.torus_lengths, opts.t_max, max_speed(model))
    candidates = [c for w in windings for c in _winding_seeds(ham, w, opts.seeds_per_winding)]
    candidates += _scan(ham, opts)
    logger.info(f"Orbit search on '{model.name}': {len(windings)} windings, {len(candidates)} seeds")

    converged = [c for c in _map(lambda c: _shoot(ham, c, opts), candidates, opts.threads) if c is not None]

    primitive: List[PeriodicOrbit] = []
    for found in converged:
        found = _normalize_position(ham, _make_primitive(ham, found))
        if found.period > opts.t_max + opts.tol_orbit:
            continue
        seed = phase_point(ham, found.state[:d], found.state[d:])
        try:
            closure = float(np.max(np.abs(_closure(ham, found.state, found.period, found.winding))))
            fingerprint = orbit_fingerprint(ham, found.state, found.period)
        except NumericalError:
            continue
        primitive.append(PeriodicOrbit(seed=seed, period_T=found.period, primitive_period=found.period,
                                       winding=found.winding, closure_defect=closure,
                                       fingerprint=fingerprint))
    primitive = _dedupe(primitive, d)

    def analyse(orbit: PeriodicOrbit) -> Optional[PeriodicOrbit]:
        try:
            data = monodromy_and_det(orbit, model, hamiltonian=ham)
        except NumericalError as exc:
            logger.debug(f"Monodromy of orbit with period {orbit.period_T:.6g} failed: {exc.message}")
            return None
        return replace(orbit, **{k: v for k, v in data.items() if k != 'return_map_det'})

    analysed = [o for o in _map(analyse, primitive, opts.threads) if o is not None]
    analysed.sort(key=lambda o: (round(o.period_T, 9), o.winding, tuple(np.round(o.fingerprint, 6))))
    analysed = _dedupe(analysed, d, family=True)

    orbits: List[PeriodicOrbit] = []
    for index, orbit in enumerate(analysed):
        orbit = replace(orbit, orbit_id=f"o{index:03d}")
        orbits.append(orbit)
        orbits.extend(_iterates(orbit, opts.t_max, opts.tol_orbit))
    orbits.sort(key=lambda o: (round(o.period_T, 9), o.winding, o.orbit_id))
    logger.info(f"Found {len(analysed)} primitive orbits, {len(orbits)} with iterates up to t = {opts.t_max:g}")
    return orbits


def period_set(orbits: Sequence[PeriodicOrbit], tol: float = LabSettings.TOL_ORBIT * 1e3) -> List[float]:
    """Distinct periods, merged within tol"""
    periods: List[float] = []
    for T in sorted(o.period_T for o in orbits):
        if not periods or T - periods[-1] > tol * max(1.0, T):
            periods.append(T)
    return periods


def flat_torus_periods(lengths: Sequence[float], metric: np.ndarray, t_max: float) -> List[float]:
    """Lengths |w L|_h of lattice vectors, the period set of an ultrastatic flat torus"""
    lengths = np.asarray(lengths, dtype=float)
    metric = np.asarray(metric, dtype=float)
    smallest = float(np.sqrt(np.min(np.linalg.eigvalsh(metric))))
    periods = set()
    for w in winding_targets(lengths, t_max, 1.0 / smallest):
        D = np.asarray(w) * lengths
        T = float(np.sqrt(D @ metric @ D))
        if T <= t_max:
            periods.add(round(T, 12))
    return sorted(periods)


def constant_coefficient_periods(model: StationaryModel, t_max: float) -> List[float]:
    """Periods of the straight-line families of a constant-coefficient model"""
    if not model.is_constant_coefficient:
        raise ModelError(f"model '{model.name}' does not have constant coefficients")
    c = ReducedHamiltonian(model).coefficients(np.zeros(model.dim))
    h = np.linalg.inv(c.G)
    # |w L / T - G beta|_h = N, one positive root since N^2 > |beta|^2
    a = float(c.beta @ c.G @ c.beta) - c.N ** 2
    periods = set()
    for w in winding_targets(model.torus_lengths, t_max, max_speed(model)):
        D = np.asarray(w) * np.asarray(model.torus_lengths, dtype=float)
        b = float(D @ c.beta)
        T = (b - np.sqrt(b ** 2 - a * float(D @ h @ D))) / a
        if T <= t_max:
            periods.add(round(float(T), 12))
    return sorted(periods)
