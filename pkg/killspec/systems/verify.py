"""
Acceptance suite over the built-in benchmark models
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.benchmarks import (lapse_well, non_killing_shift, ppwave, ppwave_isolated, shifted_circle,
                               static_conformal, static_conformal_torus, ultrastatic_circle, ultrastatic_torus)
from ..core.errors import LabError
from ..core.settings import LabSettings
from ..core.store import spectrum_from_payload, spectrum_payload
from ..entities.grid import build_grid
from ..entities.matrices import OperatorMatrices
from ..entities.model import StationaryModel, build_model
from ..entities.orbit import PeriodicOrbit
from ..entities.spectrum import EigenMode, SpectrumResult
from ..ui.export import spectrum_csv
from .discretization import assemble_operators
from .forms import forms_report, pontryagin_index
from .geometry import (check_factorizability, lambda_cutoff, phase_space_volume, reduce_geometry,
                       symplectic_residue, weyl_coefficient)
from .orbits import (ReducedHamiltonian, SearchOptions, constant_coefficient_periods, find_periodic_orbits,
                     flat_torus_periods, flow, period_set, symplectic_defect, unit_level_point)
from .pencil import SolverOptions, direct_hermitian_spectrum, solve_spectrum
from .ppwave import (constant_mode_family, ppwave_branch_solve, ppwave_critical_det, ppwave_critical_periods,
                     ppwave_cutoff, ppwave_spectrum, ppwave_xline_periods, reduced_pencil_eigs)
from .trace import (annotate_peaks, counting_function, default_weyl_window, detect_peaks,
                    fit_singularity_amplitude, match_report, max_window, positive_half_trace, predicted_amplitude,
                    smoothed_trace, trace_times, weyl_fit)

logger = logging.getLogger(__name__)

Problem = Tuple[StationaryModel, OperatorMatrices, SpectrumResult]


@dataclass
class CheckResult:
    """Outcome of one acceptance check"""

    name: str
    passed: bool
    value: Optional[float]
    threshold: Optional[float]
    detail: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _below(name: str, value: float, threshold: float, detail: str = '') -> CheckResult:
    value = float(value)
    return CheckResult(name, bool(math.isfinite(value) and value < threshold), value, threshold, detail)


def _above(name: str, value: float, threshold: float, detail: str = '') -> CheckResult:
    value = float(value)
    return CheckResult(name, bool(math.isfinite(value) and value > threshold), value, threshold, detail)


def _exact(name: str, value: int, expected: int, detail: str = '') -> CheckResult:
    return CheckResult(name, int(value) == int(expected), float(value), float(expected), detail)


def _real_values(spectrum: SpectrumResult, tol_real: float = LabSettings.TOL_REAL) -> np.ndarray:
    return np.sort(np.array([m.lam.real for m in spectrum.real_trusted(tol_real)], dtype=float))


def manufactured_spectrum(period: float, count: int) -> SpectrumResult:
    """Trusted spectrum 2 pi j / period, |j| <= count, of a single closed orbit"""
    modes = [EigenMode(lam=complex(2.0 * np.pi * j / period), psi=np.zeros(0, dtype=complex),
                       residual=0.0, tail_fraction=0.0, trusted=True)
             for j in range(-count, count + 1)]
    return SpectrumResult(modes=modes, groups=[], jordan_at_zero={}, symmetry_report={},
                          complex_modes=[], cutoff=np.inf, route='manufactured')


def flat_torus_spectrum(lengths: Sequence[float], cutoff: float) -> SpectrumResult:
    """Exact spectrum +-|k| of -dt^2 + |dx|^2, k in the dual lattice, |k| <= cutoff"""
    steps = [2.0 * np.pi / L for L in lengths]
    axes = [np.arange(-int(cutoff // step), int(cutoff // step) + 1) * step for step in steps]
    norms = np.sqrt(sum(k ** 2 for k in np.meshgrid(*axes, indexing='ij'))).ravel()
    norms = np.sort(norms[norms <= cutoff])
    values = np.concatenate([-norms[::-1], norms])
    modes = [EigenMode(lam=complex(lam), psi=np.zeros(0, dtype=complex), residual=0.0, tail_fraction=0.0,
                       trusted=True) for lam in values]
    return SpectrumResult(modes=modes, groups=[], jordan_at_zero={}, symmetry_report={},
                          complex_modes=[], cutoff=float(cutoff), route='lattice')


class VerificationSuite:
    """Runs every acceptance check on the benchmark models"""

    def __init__(self, seed: int = 0, threads: int = 1):
        self.seed = seed
        self.threads = threads
        self.results: List[CheckResult] = []
        self._problems: Dict[Tuple[str, Tuple[int, ...], str], Problem] = {}

        self.checks: List[Tuple[str, Callable[[], List[CheckResult]]]] = [
            ('ultrastatic_oracle', self._check_ultrastatic_oracle),
            ('static_conformal_oracle', self._check_static_conformal),
            ('ppwave_branches', self._check_ppwave_branches),
            ('spectral_symmetry', self._check_symmetry),
            ('weyl_law', self._check_weyl),
            ('residue_identity', self._check_residue),
            ('energy_identity', self._check_energy_identity),
            ('sigma_pairing', self._check_sigma_pairing),
            ('pontryagin_index', self._check_pontryagin),
            ('trace_singular_support', self._check_trace_support),
            ('trace_amplitude', self._check_amplitudes),
            ('dynamics', self._check_dynamics),
            ('factorizability', self._check_factorizability),
            ('determinism', self._check_determinism),
        ]

    def run(self) -> List[CheckResult]:
        """Run all checks in order; a check that raises is recorded as failed"""
        self.results = []
        for group, check in self.checks:
            logger.info(f"Verify: {group}")
            try:
                self.results.extend(check())
            except LabError as exc:
                logger.error(f"Check group '{group}' raised: {exc.message}")
                self.results.append(CheckResult(group, False, None, None, exc.message))
        failed = [r.name for r in self.results if not r.passed]
        logger.info(f"Verification: {len(self.results) - len(failed)} of {len(self.results)} checks passed")
        return self.results

    # Shared solves

    def _problem(self, config: Dict[str, Any], points: Sequence[int], route: str = 'auto') -> Problem:
        key = (config['name'], tuple(points), route)
        if key not in self._problems:
            model = build_model(config, points)
            grid = build_grid(model.torus_lengths, points)
            mats = assemble_operators(model, reduce_geometry(model, grid))
            opts = SolverOptions(cutoff=lambda_cutoff(model, grid), route=route)
            self._problems[key] = (model, mats, solve_spectrum(mats, opts))
        return self._problems[key]

    def _benchmark_problems(self) -> List[Tuple[str, Problem]]:
        return [
            ('ultrastatic_circle', self._problem(ultrastatic_circle(), [64])),
            ('ultrastatic_torus', self._problem(ultrastatic_torus(), [16, 16])),
            ('static_conformal', self._problem(static_conformal(), [64])),
            ('shifted_circle', self._problem(shifted_circle(), [64])),
            ('lapse_well', self._problem(lapse_well(), [16, 16])),
            ('ppwave_quotient', self._problem(ppwave(), [16, 16])),
        ]

    # Spectral oracles

    def _check_ultrastatic_oracle(self) -> List[CheckResult]:
        _, _, spectrum = self._problem(ultrastatic_circle(), [64])
        ks = np.arange(1, int(np.floor(spectrum.cutoff * (1.0 - 1e-12))) + 1, dtype=float)
        expected = np.sort(np.concatenate([[0.0, 0.0], ks, ks, -ks, -ks]))
        found = _real_values(spectrum)
        if found.size != expected.size:
            error = float('inf')
            detail = f"{found.size} trusted eigenvalues, expected {expected.size}"
        else:
            error = float(np.max(np.abs(found - expected)))
            detail = f"{found.size} trusted eigenvalues up to cutoff {spectrum.cutoff:.4g}"
        jordan = spectrum.jordan_at_zero
        return [
            _below('ultrastatic_circle_eigenvalues', error, 1e-8, detail),
            CheckResult('ultrastatic_circle_jordan', jordan['algebraic'] == 2 and jordan['geometric'] == 1,
                        float(jordan['algebraic']), 2.0, f"geometric {jordan['geometric']}"),
        ]

    def _check_static_conformal(self) -> List[CheckResult]:
        results = []
        for config, points in ((static_conformal(), [64]), (static_conformal_torus(), [16, 16])):
            _, mats, spectrum = self._problem(config, points, route='companion')
            direct = direct_hermitian_spectrum(mats.P, mats.volume_weights)
            squares = _real_values(spectrum) ** 2
            error = max((float(np.min(np.abs(direct - mu))) / max(1.0, mu) for mu in squares), default=float('inf'))
            results.append(_below(f"{config['name']}_direct_solve", error, 1e-8,
                                  f"{squares.size} trusted modes against eigh of P"))
        return results

    def _check_ppwave_branches(self) -> List[CheckResult]:
        pp = build_model(ppwave()).ppwave
        m_values = list(range(-10, 11))
        family = constant_mode_family(pp, m_values)
        worst = 0.0
        for m, lam in zip(m_values, family):
            values, _ = reduced_pencil_eigs(pp, m, 32)
            worst = max(worst, float(np.min(np.abs(values - lam))))
        scans = [ppwave_branch_solve(pp, m, (0.25, 4.0), points=32) for m in (0, 1)]
        roots = sum(len(s.roots) for s in scans)
        defect = max((d for s in scans for d in s.confirmation_defects), default=float('inf'))
        return [
            _below('ppwave_constant_family', worst, 1e-9, "|m| <= 10, lam = -2 pi m / L"),
            _below('ppwave_branch_roots', defect, 1e-6, f"{roots} roots for m in (0, 1)"),
        ]

    def _check_symmetry(self) -> List[CheckResult]:
        results = []
        problems = [(name, spectrum) for name, (_, _, spectrum) in self._benchmark_problems()]
        problems.append(('ppwave', ppwave_spectrum(build_model(ppwave()).ppwave, 32)))
        for name, spectrum in problems:
            report = spectrum.symmetry_report
            worst = max(report['reflection_defect'], report['conjugation_defect'],
                        report.get('quadruple_defect', 0.0))
            results.append(_below(f'{name}_symmetry', worst, 1e-7,
                                  f"{len(spectrum.complex_modes)} complex modes"))
        return results

    def _check_weyl(self) -> List[CheckResult]:
        results = []
        slow = shifted_circle(0.1)
        slow['name'] = 'shifted_circle_b0.1'
        for config, points in ((ultrastatic_circle(), [64]), (ultrastatic_torus(), [64, 64]), (slow, [64])):
            model, _, spectrum = self._problem(config, points)
            c_theory = weyl_coefficient(model, build_grid(model.torus_lengths, points))
            fit = weyl_fit(counting_function(spectrum), model.dim_spacetime, c_theory,
                           default_weyl_window(spectrum.cutoff))
            results.append(_below(f"{config['name']}_weyl", fit['rel_err'], 0.02,
                                  f"c_fit {fit['c_fit']:.6g}, c_theory {c_theory:.6g}"))
        return results

    def _check_residue(self) -> List[CheckResult]:
        worst = 0.0
        for config in (ultrastatic_circle(), ultrastatic_torus(), static_conformal(), static_conformal_torus(),
                       shifted_circle(), lapse_well(), ppwave(), non_killing_shift()):
            model = build_model(config)
            grid = build_grid(model.torus_lengths, [LabSettings.DEFAULT_GRID])
            expected = (model.dim_spacetime - 1) * phase_space_volume(model, grid)
            worst = max(worst, abs(symplectic_residue(model, grid) - expected) / abs(expected))
        return [_below('residue_identity', worst, 1e-10, "res(H^(1-n)) against (n-1) Vol on 8 models")]

    # Invariant forms

    def _forms(self) -> List[Tuple[str, Dict[str, Any]]]:
        return [(name, forms_report(spectrum, mats)) for name, (_, mats, spectrum) in self._benchmark_problems()]

    def _check_energy_identity(self) -> List[CheckResult]:
        return [_below(f'{name}_energy_identity', report['lemma12_max_defect'], LabSettings.ENERGY_IDENTITY_TOL,
                       f"{report['modes_used']} modes")
                for name, report in self._forms()]

    def _check_sigma_pairing(self) -> List[CheckResult]:
        return [_exact(f'{name}_sigma_pairing', len(report['pairing_violations']), 0,
                       f"{report['modes_used']} modes")
                for name, report in self._forms()]

    def _check_pontryagin(self) -> List[CheckResult]:
        results = []
        for potential, expected in ((-0.5, 1), (-2.0, 3)):
            config = ultrastatic_circle(potential)
            config['name'] = f'ultrastatic_circle_V{potential:g}'
            model = build_model(config, [32])
            grid = build_grid(model.torus_lengths, [32])
            mats = assemble_operators(model, reduce_geometry(model, grid))
            results.append(_exact(f"pontryagin_V{potential:g}", pontryagin_index(mats), expected))
        return results

    # Trace

    def _orbits(self, config: Dict[str, Any], t_max: float, windings=None, scan_seeds: int = 0) -> List[PeriodicOrbit]:
        model = build_model(config)
        opts = SearchOptions(t_max=t_max, windings=windings, scan_seeds=scan_seeds, seed=self.seed,
                             threads=self.threads)
        return find_periodic_orbits(model, opts)

    def _trace_cases(self) -> List[Tuple[str, SpectrumResult, List[float], List[PeriodicOrbit], float]]:
        lattice = flat_torus_spectrum((2.0 * np.pi, 2.0 * np.pi), 3.0 * LabSettings.DEFAULT_WINDOW)
        torus_periods = flat_torus_periods((2.0 * np.pi, 2.0 * np.pi), np.eye(2), 15.0)
        flat = ppwave()
        flat.update(H=1.0, name='ppwave_flat')
        quotient = build_model(flat)
        # 288 base points resolve 3 x 16 at H = 1
        flat_spectrum = ppwave_spectrum(quotient.ppwave, 288)
        _, _, circle = self._problem(shifted_circle(), [128])
        orbits = self._orbits(shifted_circle(), 20.0)
        return [
            ('ultrastatic_torus_lattice', lattice, torus_periods, [], 15.0),
            ('ppwave_flat', flat_spectrum, constant_coefficient_periods(quotient, 14.0), [], 14.0),
            ('shifted_circle', circle, period_set(orbits), orbits, 20.0),
        ]

    def _check_trace_support(self) -> List[CheckResult]:
        results = []
        for name, spectrum, periods, orbits, t_max in self._trace_cases():
            window = min(LabSettings.DEFAULT_WINDOW, max_window(spectrum.cutoff))
            profile = smoothed_trace(spectrum, trace_times(t_max), window)
            profile.peaks = detect_peaks(profile, periods, orbits)
            report = match_report(profile.peaks, periods, window, t_max)
            misses = len(report['missing_periods']) + len(report['unmatched_peaks'])
            results.append(_exact(f'{name}_trace_peaks', misses, 0,
                                  f"{len(profile.peaks)} peaks at window {window:.4g}"))
        return results

    def _check_amplitudes(self) -> List[CheckResult]:
        _, _, spectrum = self._problem(shifted_circle(), [128])
        orbits = self._orbits(shifted_circle(), 20.0)
        periods = period_set(orbits)
        window = max_window(spectrum.cutoff)
        profile = smoothed_trace(spectrum, trace_times(20.0), window)
        profile.peaks = detect_peaks(profile, periods, orbits)
        annotate_peaks(profile, orbits, periods)
        shortest = min(periods)
        ratios = [p.ratio for p in profile.peaks if p.matched_period == shortest and p.ratio is not None]
        error = abs(ratios[0] - 1.0) if ratios else float('inf')

        period = 5.0
        synthetic = manufactured_spectrum(period, 400)
        times = trace_times(2.0 * period)
        half = smoothed_trace(synthetic, times, 8.0).half_values
        fit = fit_singularity_amplitude(times, half, 8.0, period)
        expected = period / (2.0 * np.pi)
        synthetic_error = abs(abs(fit['a_fit']) / expected - 1.0) if fit['a_fit'] is not None else float('inf')
        pp_error, pp_detail = self._ppwave_amplitude()
        return [
            _below('shifted_circle_amplitude', error, 0.2, f"shortest period {shortest:.6g}"),
            _below('ppwave_isolated_amplitude', pp_error, 0.2, pp_detail),
            _below('manufactured_amplitude', synthetic_error, 0.01, f"period {period:g}"),
        ]

    def _ppwave_amplitude(self) -> Tuple[float, str]:
        """Fitted against predicted modulus at the shortest orbit of the tuned pp-wave, at window 16"""
        window = LabSettings.DEFAULT_WINDOW
        pp = build_model(ppwave_isolated()).ppwave
        per_point = ppwave_cutoff(pp, 64) / 64
        points = 2 * int(np.ceil(3.0 * window / (2.0 * per_point)))
        spectrum = ppwave_spectrum(pp, points)
        orbits = self._orbits(ppwave_isolated(), 3.0, windings=[[-1, 0]])
        period = ppwave_critical_periods(pp, 0.0)
        others = period_set(orbits) + ppwave_xline_periods(pp, 2.0 * period) + [ppwave_critical_periods(pp, np.pi)]
        times = trace_times(2.0 * period)
        fit = fit_singularity_amplitude(times, positive_half_trace(spectrum, times, window), window, period, others)
        prediction = predicted_amplitude(orbits, period)
        if fit['a_fit'] is None or not prediction['modulus']:
            return float('inf'), f"no fit at period {period:.6g}"
        ratio = abs(fit['a_fit']) / prediction['modulus']
        return abs(ratio - 1.0), f"period {period:.6g}, base grid {points}, ratio {ratio:.4g}"

    # Dynamics and geometry

    def _check_dynamics(self) -> List[CheckResult]:
        model = build_model(lapse_well())
        ham = ReducedHamiltonian(model)
        start = unit_level_point(ham, [0.3, 1.0], [1.0, 0.5])
        end, _ = flow(start, 100.0, model, hamiltonian=ham)
        _, tangent = flow(start, 10.0, model, with_variational=True, hamiltonian=ham)

        torus = build_model(ultrastatic_torus())
        found = period_set(find_periodic_orbits(torus, SearchOptions(t_max=30.0, seed=self.seed,
                                                                    threads=self.threads)))
        expected = flat_torus_periods(torus.torus_lengths, np.eye(2), 30.0)
        mismatch = len(found) != len(expected) or any(abs(a - b) > 1e-6 for a, b in zip(found, expected))

        well = self._orbits(lapse_well(), 7.5, windings=[[1, 0]])
        targets = {
            'elliptic': (2.0 * np.pi / 0.9, 3.0),
            'hyperbolic': (2.0 * np.pi / 1.1, 2.0 - 2.0 * np.cosh(np.sqrt(0.11) * 2.0 * np.pi / 1.1)),
        }
        results = [
            _below('energy_drift', abs(end.energy - start.energy), 1e-10, "lapse well, 100 time units"),
            _below('variational_symplecticity', symplectic_defect(tangent), LabSettings.SYMPLECTIC_TOL),
            _exact('flat_torus_periods', int(mismatch), 0, f"{len(found)} periods found, {len(expected)} expected"),
        ]
        for kind, (period, det) in targets.items():
            match = [o for o in well if abs(o.period_T - period) < 1e-6 and o.stability == kind]
            error = abs(match[0].det_I_minus_P - det) / abs(det) if match else float('inf')
            results.append(_below(f'lapse_well_{kind}_det', error, 1e-4, f"period {period:.6g}, det {det:.6g}"))

        pp = build_model(ppwave()).ppwave
        period = ppwave_critical_periods(pp, 0.0)
        expected = ppwave_critical_det(pp, 0.0)
        backward = [o for o in self._orbits(ppwave(), 9.0, windings=[[-1, 0]]) if abs(o.period_T - period) < 1e-6]
        error = (abs(backward[0].det_I_minus_P - expected['det_I_minus_P']) / abs(expected['det_I_minus_P'])
                 if backward and backward[0].stability == expected['stability'] else float('inf'))
        results.append(_below('ppwave_critical_line_det', error, 1e-4,
                              f"period {period:.6g}, det {expected['det_I_minus_P']:.6g}"))
        return results

    def _check_factorizability(self) -> List[CheckResult]:
        worst = 0.0
        for config in (ultrastatic_circle(), ultrastatic_torus(), shifted_circle()):
            model = build_model(config)
            grid = build_grid(model.torus_lengths, [32] * model.dim)
            worst = max(worst, check_factorizability(model, grid)['defect'])
        model = build_model(non_killing_shift())
        defect = check_factorizability(model, build_grid(model.torus_lengths, [32, 32]))['defect']
        return [
            _below('factorizable_constant_models', worst, 1e-12),
            _above('non_killing_shift_defect', defect, 1e-3),
        ]

    def _check_determinism(self) -> List[CheckResult]:
        config = ultrastatic_circle()
        model = build_model(config, [32])
        grid = build_grid(model.torus_lengths, [32])
        texts = []
        for _ in range(2):
            mats = assemble_operators(model, reduce_geometry(model, grid))
            texts.append(spectrum_csv(solve_spectrum(mats, SolverOptions(cutoff=lambda_cutoff(model, grid)))))
        _, _, spectrum = self._problem(config, [64])
        reloaded = spectrum_from_payload(*spectrum_payload(spectrum))
        return [
            _exact('repeat_solve_bytes', int(texts[0] != texts[1]), 0),
            _exact('payload_round_trip_bytes', int(spectrum_csv(spectrum) != spectrum_csv(reloaded)), 0),
        ]


def run_verification(seed: int = 0, threads: int = 1) -> List[CheckResult]:
    return VerificationSuite(seed, threads).run()
