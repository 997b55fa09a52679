"""
Pipeline controller
"""

import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from .. import __version__
from ..entities.grid import build_grid
from ..entities.matrices import OperatorMatrices
from ..entities.spectrum import SpectrumResult
from ..systems.discretization import assemble_operators, dump_matrices
from ..systems.forms import forms_report
from ..systems.geometry import (check_factorizability, lambda_cutoff, phase_space_volume, reduce_geometry,
                                symplectic_residue, weyl_coefficient)
from ..systems.orbits import SearchOptions, find_periodic_orbits, period_set
from ..systems.pencil import SolverOptions, solve_spectrum
from ..systems.ppwave import ppwave_cutoff, ppwave_spectrum
from ..systems.trace import (annotate_peaks, counting_function, default_weyl_window, detect_peaks,
                             match_report, max_window, smoothed_trace, t0_scaling, trace_times, weyl_fit)
from ..systems.verify import run_verification
from ..ui import export
from ..ui.report import render_summary
from .config import RunConfig
from .errors import VerificationFailed
from .state_manager import STAGE_DEPENDENCIES, PipelineStage, StageManager
from .store import (ResultStore, content_hash, counting_from_payload, counting_payload, orbits_from_payload,
                    orbits_payload, report_from_payload, report_payload, spectrum_from_payload,
                    spectrum_payload, trace_from_payload, trace_payload)

logger = logging.getLogger(__name__)

Encoder = Callable[[Any], Tuple[Dict[str, np.ndarray], Dict[str, Any]]]
Decoder = Callable[[Dict[str, np.ndarray], Dict[str, Any]], Any]


class SpectralLab:
    """Runs the requested stages of one config against a result store"""

    def __init__(self, config: RunConfig):
        self.config = config

        # Core systems
        self.stage_manager = StageManager(config.stages)
        self.store = ResultStore(config.out_dir, config.use_cache)
        self.config_hash = content_hash(config.describe())

        # Model
        self.model = config.build_model()
        self.grid = build_grid(self.model.torus_lengths, config.grid)
        self._mats: Optional[OperatorMatrices] = None

        # Stage bookkeeping
        self.keys: Dict[PipelineStage, str] = {}
        self.cache_hits: Dict[PipelineStage, bool] = {}
        self.results: Dict[str, Any] = {}
        self.runners: Dict[PipelineStage, Callable[[], None]] = {
            PipelineStage.SPECTRUM: self._run_spectrum,
            PipelineStage.WEYL: self._run_weyl,
            PipelineStage.ORBITS: self._run_orbits,
            PipelineStage.TRACE: self._run_trace,
            PipelineStage.FORMS: self._run_forms,
            PipelineStage.VERIFY: self._run_verify,
        }

    @property
    def mats(self) -> OperatorMatrices:
        """Operator matrices, assembled on first use"""
        if self._mats is None:
            geom = reduce_geometry(self.model, self.grid, use_dealias=self.config.dealias)
            self._mats = assemble_operators(self.model, geom)
        return self._mats

    @property
    def is_ppwave(self) -> bool:
        return self.model.ppwave is not None

    def run(self) -> Dict[str, Any]:
        """Execute the stage plan; failed stages block their dependents"""
        manager = self.stage_manager
        logger.info(f"Pipeline plan: {[s.key for s in manager.plan]} (config {self.config_hash[:12]})")
        for stage in manager.plan:
            manager.change_stage(stage)
            blocked = manager.blocked_by(stage)
            if blocked:
                logger.warning(f"Skipping '{stage.key}': {', '.join(s.key for s in blocked)} did not finish")
                manager.mark_skipped(stage)
                self.store.record_stage(stage.key, None, False, 0.0, 'skipped')
                continue
            started = time.perf_counter()
            try:
                self.runners[stage]()
            except Exception as exc:
                seconds = time.perf_counter() - started
                logger.error(f"Stage '{stage.key}' failed after {seconds:.2f}s: {exc}")
                manager.mark_failed(stage, exc)
                self.store.record_stage(stage.key, self.keys.get(stage), False, seconds, 'failed')
                continue
            seconds = time.perf_counter() - started
            hit = self.cache_hits.get(stage, False)
            logger.info(f"Stage '{stage.key}' finished in {seconds:.2f}s ({'cache hit' if hit else 'computed'})")
            self.store.record_stage(stage.key, self.keys.get(stage), hit, seconds)

        self.store.write_artifact('summary.txt', render_summary(self.results))
        self.store.write_manifest(self.config_hash)
        if manager.failed:
            raise next(iter(manager.failed.values()))
        return self.results

    def dump_matrices(self, path: Union[str, Path]):
        dump_matrices(self.mats, path)

    # Cache plumbing

    def _stage_key(self, stage: PipelineStage, params: Dict[str, Any]) -> str:
        """Content hash of everything the stage output depends on"""
        payload = {
            'stage': stage.key,
            'version': __version__,
            'model': self.model.describe(),
            'tolerances': dict(sorted(self.config.tolerances.items())),
            'params': params,
            'depends': [self.keys[dep] for dep in STAGE_DEPENDENCIES[stage]],
        }
        if stage is not PipelineStage.ORBITS:
            payload['grid'] = list(self.grid.points_per_axis)
        return content_hash(payload)

    def _cached(self, stage: PipelineStage, params: Dict[str, Any], compute: Callable[[], Any],
                encode: Encoder, decode: Decoder) -> Any:
        """Stage output from the store, or computed and stored; both paths decode the payload"""
        key = self._stage_key(stage, params)
        self.keys[stage] = key
        if self.store.has(stage.key, key):
            logger.info(f"Cache hit for '{stage.key}' ({key[:12]})")
            arrays, meta = self.store.load(stage.key, key)
            self.cache_hits[stage] = True
        else:
            logger.info(f"Cache miss for '{stage.key}' ({key[:12]})")
            self.store.save(stage.key, key, *encode(compute()))
            arrays, meta = self.store.load(stage.key, key)
            self.cache_hits[stage] = False
        value = decode(arrays, meta)
        self.stage_manager.set_data(stage, value)
        return value

    # Stages

    def _run_spectrum(self):
        params = {'route': self.config.route, 'dealias': self.config.dealias}
        spectrum = self._cached(PipelineStage.SPECTRUM, params, self._solve_spectrum,
                                spectrum_payload, spectrum_from_payload)
        self.results['spectrum'] = spectrum
        self.store.write_artifact('spectrum.csv', export.spectrum_csv(spectrum))
        self.store.write_artifact('spectrum.json', export.spectrum_json(spectrum))

    def _solve_spectrum(self) -> SpectrumResult:
        tolerances = self.config.tolerances
        if self.is_ppwave:
            points = self.grid.points_per_axis[-1]
            opts = SolverOptions(tolerances, cutoff=ppwave_cutoff(self.model.ppwave, points))
            spectrum = ppwave_spectrum(self.model.ppwave, points, opts=opts)
        else:
            cutoff = lambda_cutoff(self.model, self.grid)
            opts = SolverOptions(tolerances, cutoff=cutoff, route=self.config.route)
            spectrum = solve_spectrum(self.mats, opts)
        geom = self._mats.geometry if self._mats is not None else None
        spectrum.diagnostics['factorizability'] = check_factorizability(
            self.model, self.grid, tolerances['tol_factor'], geom=geom)
        return spectrum

    def _run_weyl(self):
        spectrum = self.stage_manager.get_data(PipelineStage.SPECTRUM)
        window = self.config.weyl['window'] or list(default_weyl_window(spectrum.cutoff))
        params = {'window': window}

        def compute():
            tolerances = self.config.tolerances
            counting = counting_function(spectrum, tolerances['tol_real'], tolerances['tol_zero'])
            c_theory = weyl_coefficient(self.model, self.grid)
            report = weyl_fit(counting, self.model.dim_spacetime, c_theory, window)
            volume = phase_space_volume(self.model, self.grid)
            residue = symplectic_residue(self.model, self.grid)
            report['phase_space_volume'] = volume
            report['symplectic_residue'] = residue
            report['residue_defect'] = abs(residue - (self.model.dim_spacetime - 1) * volume) / volume
            report['excluded_complex'] = counting.excluded_complex
            top = max_window(spectrum.cutoff)
            scaling = t0_scaling(spectrum, (0.25 * top, 0.5 * top, top), tolerances['tol_real'])
            report['t0_exponent'] = scaling['exponent']
            report['t0_exponent_expected'] = self.model.dim_spacetime - 1
            return counting, report

        counting, report = self._cached(PipelineStage.WEYL, params, compute,
                                        lambda value: counting_payload(*value), counting_from_payload)
        self.results['weyl'] = {'counting': counting, 'report': report}
        self.store.write_artifact('counting.csv', export.counting_csv(counting))
        self.store.write_artifact('weyl.json', export.to_json(report))

    def _run_orbits(self):
        params = {'orbits': self.config.orbits, 'seed': self.config.seed}
        settings = self.config.orbits
        opts = SearchOptions(t_max=settings['t_max'], seeds_per_winding=settings['seeds_per_winding'],
                             scan_seeds=settings['scan_seeds'], seed=self.config.seed,
                             windings=settings.get('windings'), tolerances=self.config.tolerances,
                             threads=self.config.threads)
        dim = self.model.dim
        orbits = self._cached(PipelineStage.ORBITS, params, lambda: find_periodic_orbits(self.model, opts),
                              lambda value: orbits_payload(value, dim), orbits_from_payload)
        self.results['orbits'] = orbits
        self.store.write_artifact('orbits.csv', export.orbits_csv(orbits, dim))

    def _run_trace(self):
        spectrum = self.stage_manager.get_data(PipelineStage.SPECTRUM)
        orbits = self.stage_manager.get_data(PipelineStage.ORBITS)
        settings = self.config.trace
        window = settings['window']
        limit = max_window(spectrum.cutoff)
        if window > limit:
            logger.warning(f"Trace window {window:g} exceeds {limit:.4g}, a third of the spectral cutoff; "
                           f"clamping to {limit:.4g}")
            window = limit
        params = {'trace': settings, 'window': window}

        def compute():
            times = trace_times(settings['t_max'], settings['samples_per_unit'])
            profile = smoothed_trace(spectrum, times, window, self.config.tolerances['tol_real'])
            periods = period_set(orbits)
            profile.peaks = detect_peaks(profile, periods, orbits)
            annotate_peaks(profile, orbits, periods)
            match = match_report(profile.peaks, periods, window, settings['t_max'])
            return profile, {'periods': periods, 'match': match, 'requested_window': settings['window']}

        profile, extra = self._cached(PipelineStage.TRACE, params, compute,
                                      lambda value: trace_payload(*value), trace_from_payload)
        self.results['trace'] = {'profile': profile, 'match': extra['match'], 'periods': extra['periods']}
        self.store.write_artifact('trace.csv', export.trace_csv(profile))
        self.store.write_artifact('peaks.json', export.peaks_json(profile.peaks))

    def _run_forms(self):
        spectrum = self.stage_manager.get_data(PipelineStage.SPECTRUM)
        params = {'route': self.config.route, 'dealias': self.config.dealias}

        def compute():
            source = spectrum
            if self.is_ppwave:
                # Per-m eigenvectors live on the base circle; the forms need quotient-torus data
                opts = SolverOptions(self.config.tolerances, cutoff=lambda_cutoff(self.model, self.grid),
                                     route=self.config.route)
                source = solve_spectrum(self.mats, opts)
            return forms_report(source, self.mats, self.config.tolerances)

        report = self._cached(PipelineStage.FORMS, params, compute, report_payload, report_from_payload)
        self.results['forms'] = report
        self.store.write_artifact('forms.json', export.to_json(report))

    def _run_verify(self):
        checks = [check.to_dict() for check in run_verification(self.config.seed, self.config.threads)]
        self.results['verify'] = checks
        self.store.write_artifact('verify.json', export.to_json(checks))
        failed = [check['name'] for check in checks if not check['passed']]
        if failed:
            raise VerificationFailed(f"{len(failed)} of {len(checks)} checks failed: {', '.join(failed)}")


def run_pipeline(config: RunConfig) -> SpectralLab:
    """Run every stage the config asks for and return the finished lab"""
    lab = SpectralLab(config)
    lab.run()
    return lab
