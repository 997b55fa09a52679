"""
Counting function, Weyl fits and the smoothed wave trace
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import dawsn

from ..core.errors import ConfigError
from ..core.settings import LabSettings
from ..entities.orbit import PeriodicOrbit
from ..entities.spectrum import SpectrumResult
from ..entities.trace import CountingFunction, TracePeak, TraceProfile

logger = logging.getLogger(__name__)


def _real_trusted(spectrum: SpectrumResult, tol_real: float) -> np.ndarray:
    return np.array([m.lam.real for m in spectrum.real_trusted(tol_real)], dtype=float)


def counting_function(spectrum: SpectrumResult, tol_real: float = LabSettings.TOL_REAL,
                      tol_zero: float = LabSettings.TOL_ZERO) -> CountingFunction:
    """Cumulative count of trusted non-negative eigenvalues, with multiplicity"""
    lam = _real_trusted(spectrum, tol_real)
    lam = np.where(np.abs(lam) <= tol_zero, 0.0, lam)
    thresholds = np.sort(lam[lam >= 0.0])
    return CountingFunction(thresholds=thresholds, excluded_complex=len(spectrum.complex_modes))


def default_weyl_window(cutoff: float) -> Tuple[float, float]:
    return 0.25 * cutoff, 0.5 * cutoff


def weyl_fit(counting: CountingFunction, dim_spacetime: int, c_theory: float,
             window: Tuple[float, float], samples: int = 400) -> Dict[str, float]:
    """Leading Weyl coefficient from the integrated counting function on a window"""
    lo, hi = float(window[0]), float(window[1])
    if not (lo > 0.0 and hi / lo >= LabSettings.WEYL_MIN_RATIO):
        raise ConfigError(f"Weyl window [{lo:g}, {hi:g}] is too narrow "
                          f"(need lam_hi / lam_lo >= {LabSettings.WEYL_MIN_RATIO:g})", '/weyl/window')
    n = dim_spacetime
    lam = np.linspace(lo, hi, samples)
    integrated = counting.integrated(lam)

    # R(lam) = (c / n) lam^n + b lam^(n - 1) + e, rows weighted by a cos^2 taper over the window
    taper = np.cos(0.5 * np.pi * (2.0 * lam - lo - hi) / (hi - lo))
    design = np.column_stack([lam ** n / n, lam ** (n - 1), np.ones_like(lam)])
    coefficients = np.linalg.lstsq(design * taper[:, None], integrated * taper, rcond=None)[0]
    c_fit = float(coefficients[0])

    raw = counting(lam).astype(float)
    power = lam ** (n - 1)
    c_raw = float(np.sum(raw * power) / np.sum(power * power))

    remainder = np.abs(integrated - c_theory * lam ** n / n)
    usable = remainder > 0.0
    exponent = float('nan')
    if np.count_nonzero(usable) > 2:
        exponent = float(np.polyfit(np.log(lam[usable]), np.log(remainder[usable]), 1)[0]) - 1.0

    rel_err = abs(c_fit - c_theory) / abs(c_theory) if c_theory else float('inf')
    logger.info(f"Weyl fit on [{lo:.3g}, {hi:.3g}]: c_fit {c_fit:.6g}, c_theory {c_theory:.6g}, "
                f"rel_err {rel_err:.2e}")
    return {
        'c_fit': c_fit,
        'c_theory': float(c_theory),
        'rel_err': float(rel_err),
        'c_raw': c_raw,
        'remainder_exponent': exponent,
        'lambda_lo': lo,
        'lambda_hi': hi,
    }


# Smoothed trace

def trace_times(t_max: float, samples_per_unit: int = LabSettings.SAMPLES_PER_UNIT) -> np.ndarray:
    count = int(np.ceil(t_max * samples_per_unit)) + 1
    return np.linspace(0.0, t_max, count)


def trace_sum(eigenvalues: np.ndarray, times: np.ndarray, window: float,
              chunk: int = 256) -> np.ndarray:
    """sum_j exp(-(lam_j / window)^2) exp(i lam_j t)"""
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    times = np.asarray(times, dtype=float)
    weights = np.exp(-(eigenvalues / window) ** 2)
    out = np.zeros(times.size, dtype=complex)
    for start in range(0, eigenvalues.size, chunk):
        lam = eigenvalues[start:start + chunk]
        out += weights[start:start + chunk] @ np.exp(1j * np.outer(lam, times))
    return out


def max_window(cutoff: float) -> float:
    """Largest admissible Gaussian width for a spectrum resolved up to cutoff"""
    return LabSettings.CUTOFF_FRACTION * cutoff


def complex_correction_bound(spectrum: SpectrumResult, window: float, t_max: float) -> float:
    """Bound on the trace contribution of the excluded complex modes up to t_max"""
    total = 0.0
    for mode in spectrum.complex_modes:
        total += abs(np.exp(-(mode.lam / window) ** 2)) * np.exp(abs(mode.lam.imag) * t_max)
    return float(total)


def smoothed_trace(spectrum: SpectrumResult, times: np.ndarray, window: float,
                   tol_real: float = LabSettings.TOL_REAL) -> TraceProfile:
    """Gaussian-windowed trace and its positive-frequency half over trusted real modes"""
    if window <= 0.0:
        raise ConfigError(f"trace window must be positive, got {window:g}", '/trace/window')
    if np.isfinite(spectrum.cutoff) and window > max_window(spectrum.cutoff) * (1.0 + 1e-12):
        raise ConfigError(f"trace window {window:g} exceeds {max_window(spectrum.cutoff):.4g}, "
                          f"a third of the resolved cutoff {spectrum.cutoff:.4g}", '/trace/window')
    lam = _real_trusted(spectrum, tol_real)
    times = np.asarray(times, dtype=float)
    values = trace_sum(lam, times, window)
    half = positive_half_trace(spectrum, times, window, tol_real)

    truncation = 0.0
    if np.isfinite(spectrum.cutoff):
        truncation = float(np.exp(-(spectrum.cutoff / window) ** 2) * lam.size)
    mirrored = trace_sum(lam, -times, window)
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    profile = TraceProfile(
        times=times,
        values=values,
        half_values=half,
        window=float(window),
        truncation_bound=truncation,
        complex_correction_bound=complex_correction_bound(spectrum, window, float(np.max(np.abs(times)))),
        diagnostics={
            'reflection_defect': float(np.max(np.abs(mirrored - np.conj(values)), initial=0.0) / scale),
            'modes': int(lam.size),
        },
    )
    logger.info(f"Trace over {lam.size} modes at window {window:g}, truncation bound {truncation:.2e}")
    return profile


def positive_half_trace(spectrum: SpectrumResult, times: np.ndarray, window: float,
                        tol_real: float = LabSettings.TOL_REAL,
                        tol_zero: float = LabSettings.TOL_ZERO) -> np.ndarray:
    lam = _real_trusted(spectrum, tol_real)
    return trace_sum(lam[lam > tol_zero], times, window)


def t0_scaling(spectrum: SpectrumResult, windows: Sequence[float] = (8.0, 16.0, 32.0),
               tol_real: float = LabSettings.TOL_REAL) -> Dict[str, object]:
    """log-log slope of T(0) against the window width"""
    lam = _real_trusted(spectrum, tol_real)
    values = [float(np.real(trace_sum(lam, np.zeros(1), w)[0])) for w in windows]
    slope = float(np.polyfit(np.log(windows), np.log(values), 1)[0])
    return {'windows': list(windows), 'values': values, 'exponent': slope}


# Peaks and amplitudes

def singularity_kernel(s: np.ndarray, window: float) -> np.ndarray:
    """K(s) = -i integral_0^inf exp(i tau s - (tau / window)^2) d tau"""
    x = 0.5 * window * np.asarray(s, dtype=float)
    return window * dawsn(x) - 0.5j * np.sqrt(np.pi) * window * np.exp(-x ** 2)


def _refine(times: np.ndarray, heights: np.ndarray, index: int) -> float:
    """Vertex of the parabola through three samples"""
    left, mid, right = heights[index - 1], heights[index], heights[index + 1]
    denom = left - 2.0 * mid + right
    if denom == 0.0:
        return float(times[index])
    step = times[index + 1] - times[index]
    return float(times[index] + 0.5 * step * (left - right) / denom)


def detect_peaks(profile: TraceProfile, periods: Sequence[float],
                 orbits: Optional[Sequence[PeriodicOrbit]] = None) -> List[TracePeak]:
    """Local maxima of |T| above median + 5 MAD past t_min, matched to classical periods"""
    window = profile.window
    t_min = LabSettings.PEAK_T_MIN / window
    match = LabSettings.PEAK_MATCH / window
    heights = np.abs(profile.values)
    times = profile.times
    region = times > t_min
    if np.count_nonzero(region) < 3:
        return []
    body = heights[region]
    median = float(np.median(body))
    floor = median + LabSettings.PEAK_MAD_FACTOR * float(np.median(np.abs(body - median)))

    periods = np.sort(np.asarray(list(periods), dtype=float))
    peaks = []
    for index in range(1, times.size - 1):
        if times[index] <= t_min or heights[index] <= floor:
            continue
        if not (heights[index] > heights[index - 1] and heights[index] >= heights[index + 1]):
            continue
        t_peak = _refine(times, heights, index)
        peak = TracePeak(t_peak=t_peak, height=float(heights[index]))
        if periods.size:
            nearest = float(periods[np.argmin(np.abs(periods - t_peak))])
            if abs(nearest - t_peak) <= match:
                peak.matched_period = nearest
                if orbits is not None:
                    peak.orbit_ids = [o.orbit_id for o in orbits
                                      if abs(o.period_T - nearest) <= LabSettings.PRIMITIVE_TOL * max(1.0, nearest)]
        peaks.append(peak)
    logger.info(f"Detected {len(peaks)} peaks above floor {floor:.4g}, "
                f"{sum(p.matched_period is not None for p in peaks)} matched")
    return peaks


def fit_singularity_amplitude(times: np.ndarray, half_values: np.ndarray, window: float,
                              period: float, others: Sequence[float] = ()) -> Dict[str, object]:
    """Least-squares fit of a K(t - T) + b + c (t - T) to the half trace within 2/window of T"""
    neighbours = [p for p in others if 0.0 < abs(p - period) < LabSettings.CLUSTER_WIDTH / window
                  and abs(p - period) > LabSettings.PRIMITIVE_TOL * max(1.0, period)]
    if neighbours:
        return {'a_fit': None, 'residual': None, 'clustered': True}
    near = np.abs(times - period) <= LabSettings.FIT_HALF_WIDTH / window
    if np.count_nonzero(near) < 4:
        return {'a_fit': None, 'residual': None, 'clustered': False}
    offset = times[near] - period
    design = np.column_stack([singularity_kernel(offset, window), np.ones(offset.size, dtype=complex),
                              offset.astype(complex)])
    target = half_values[near]
    coefficients = np.linalg.lstsq(design, target, rcond=None)[0]
    residual = float(np.linalg.norm(design @ coefficients - target) / max(np.linalg.norm(target), 1e-300))
    return {'a_fit': complex(coefficients[0]), 'residual': residual, 'clustered': False}


def predicted_amplitude(orbits: Sequence[PeriodicOrbit], period: float,
                        tol: float = LabSettings.PRIMITIVE_TOL) -> Dict[str, object]:
    """sum of T#/(2 pi |det(I - P)|^(1/2)) over non-degenerate orbits of this period"""
    same = [o for o in orbits if abs(o.period_T - period) <= tol * max(1.0, period)]
    degenerate = [o for o in same if o.is_degenerate]
    modulus = sum(o.primitive_period / (2.0 * np.pi * np.sqrt(abs(o.det_I_minus_P)))
                  for o in same if not o.is_degenerate)
    return {
        'modulus': float(modulus) if same and not degenerate else None,
        'orbit_ids': [o.orbit_id for o in same],
        'degenerate': bool(degenerate),
    }


def annotate_peaks(profile: TraceProfile, orbits: Sequence[PeriodicOrbit],
                   periods: Sequence[float]) -> List[TracePeak]:
    """Amplitude fits and predictions for the matched peaks of a profile"""
    for peak in profile.peaks:
        if peak.matched_period is None:
            continue
        fit = fit_singularity_amplitude(profile.times, profile.half_values, profile.window,
                                        peak.matched_period, periods)
        peak.clustered = bool(fit['clustered'])
        peak.amplitude_fit = fit['a_fit']
        peak.fit_residual = fit['residual']
        prediction = predicted_amplitude(orbits, peak.matched_period)
        peak.predicted_modulus = prediction['modulus']
        peak.degenerate = prediction['degenerate']
        peak.orbit_ids = prediction['orbit_ids']
    return profile.peaks


def match_report(peaks: Sequence[TracePeak], periods: Sequence[float], window: float,
                 t_max: float) -> Dict[str, List[float]]:
    """Two-sided comparison of peaks and classical periods inside (t_min, t_max - 2/window)"""
    t_min = LabSettings.PEAK_T_MIN / window
    match = LabSettings.PEAK_MATCH / window
    visible = [p for p in periods if t_min < p <= t_max - LabSettings.FIT_HALF_WIDTH / window]
    located = np.array([pk.t_peak for pk in peaks], dtype=float)
    missing = [p for p in visible if located.size == 0 or np.min(np.abs(located - p)) > match]
    unmatched = [pk.t_peak for pk in peaks if pk.matched_period is None]
    return {'missing_periods': missing, 'unmatched_peaks': unmatched}


def window_robustness(spectrum: SpectrumResult, periods: Sequence[float], window: float,
                      t_max: float, samples_per_unit: int = LabSettings.SAMPLES_PER_UNIT) -> float:
    """Largest shift of matched peak locations, in units of 1/window, when the window doubles"""
    times = trace_times(t_max, samples_per_unit)
    located = {}
    for width in (window, 2.0 * window):
        profile = smoothed_trace(spectrum, times, width)
        located[width] = {p.matched_period: p.t_peak for p in detect_peaks(profile, periods)
                          if p.matched_period is not None}
    shared = set(located[window]) & set(located[2.0 * window])
    if not shared:
        return 0.0
    return max(abs(located[window][T] - located[2.0 * window][T]) for T in shared) * window
