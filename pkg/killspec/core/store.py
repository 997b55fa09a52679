"""
Content-hash result store

Layout of an output directory:

    manifest.json          run manifest, rewritten atomically after every run
    cache/<stage>-<key>.npz   numeric payload of one stage output
    cache/<stage>-<key>.json  metadata payload of the same output
    *.csv, *.json, summary.txt  exported artifacts

manifest.json schema:

    {
      "schema": 1,
      "config_hash": "<sha256 of the canonical run config>",
      "versions": {"killspec": ..., "numpy": ..., "scipy": ..., "sympy": ...},
      "stages": {"<stage>": {"key": "<sha256>", "cache_hit": bool, "seconds": float,
                             "status": "ok" | "failed" | "skipped"}},
      "artifacts": ["<file name>", ...]
    }
"""

import hashlib
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy
import sympy

from .. import __version__
from ..entities.orbit import PeriodicOrbit, PhasePoint
from ..entities.spectrum import EigenMode, ModeGroup, SpectrumResult
from ..entities.trace import CountingFunction, TracePeak, TraceProfile
from .errors import ArtifactError
from .settings import LabSettings

logger = logging.getLogger(__name__)

Arrays = Dict[str, np.ndarray]
Meta = Dict[str, Any]


def canonical_json(obj: Any) -> str:
    """Sorted, compact JSON; floats use the shortest round-trip repr"""
    return json.dumps(obj, sort_keys=True, separators=(',', ':'), ensure_ascii=True)


def content_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode('utf-8')).hexdigest()


def atomic_write(path: Path, data: bytes):
    """Single-writer atomic replacement of path"""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.remove(tmp_path)
        except OSError:
            pass
        raise


class ResultStore:
    """Stage payloads keyed by content hash, plus the artifacts and manifest of a run"""

    def __init__(self, root: Union[str, Path], use_cache: bool = True):
        self.root = Path(root)
        self.cache_dir = self.root / 'cache'
        self.use_cache = use_cache
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = self._read_manifest()

    def _read_manifest(self) -> Dict[str, Any]:
        path = self.root / LabSettings.MANIFEST_NAME
        if path.exists():
            try:
                return json.loads(path.read_text(encoding='utf-8'))
            except json.JSONDecodeError:
                logger.warning(f"Ignoring unreadable manifest {path}")
        return {'schema': 1, 'config_hash': None, 'versions': self.versions(), 'stages': {}, 'artifacts': []}

    @staticmethod
    def versions() -> Dict[str, str]:
        return {'killspec': __version__, 'numpy': np.__version__, 'scipy': scipy.__version__,
                'sympy': sympy.__version__}

    def _paths(self, stage: str, key: str) -> Tuple[Path, Path]:
        stem = f"{stage}-{key[:32]}"
        return self.cache_dir / f"{stem}.npz", self.cache_dir / f"{stem}.json"

    def has(self, stage: str, key: str) -> bool:
        """Cache hit: reuse allowed and both payload files present"""
        arrays, meta = self._paths(stage, key)
        return self.use_cache and arrays.exists() and meta.exists()

    def save(self, stage: str, key: str, arrays: Arrays, meta: Meta):
        array_path, meta_path = self._paths(stage, key)
        buffer = io.BytesIO()
        np.savez(buffer, **arrays)
        atomic_write(array_path, buffer.getvalue())
        atomic_write(meta_path, canonical_json({'key': key, 'stage': stage, 'meta': meta}).encode('utf-8'))

    def load(self, stage: str, key: str) -> Tuple[Arrays, Meta]:
        array_path, meta_path = self._paths(stage, key)
        if not (array_path.exists() and meta_path.exists()):
            raise ArtifactError(f"no cached '{stage}' output with key {key[:12]} in {self.cache_dir}")
        with np.load(array_path, allow_pickle=False) as data:
            arrays = {name: data[name] for name in data.files}
        meta = json.loads(meta_path.read_text(encoding='utf-8'))['meta']
        return arrays, meta

    def latest_key(self, stage: str) -> str:
        """Key of the stage output recorded by the last run in this directory"""
        entry = self.manifest.get('stages', {}).get(stage)
        if not entry or entry.get('status') != 'ok':
            raise ArtifactError(f"no '{stage}' output recorded in {self.root / LabSettings.MANIFEST_NAME}")
        return entry['key']

    def record_stage(self, stage: str, key: Optional[str], cache_hit: bool, seconds: float, status: str = 'ok'):
        self.manifest.setdefault('stages', {})[stage] = {
            'key': key, 'cache_hit': cache_hit, 'seconds': round(seconds, 6), 'status': status}

    def write_artifact(self, name: str, text: str) -> Path:
        path = self.root / name
        atomic_write(path, text.encode('utf-8'))
        artifacts = set(self.manifest.setdefault('artifacts', []))
        artifacts.add(name)
        self.manifest['artifacts'] = sorted(artifacts)
        logger.info(f"Wrote {path}")
        return path

    def write_manifest(self, config_hash: Optional[str] = None):
        if config_hash is not None:
            self.manifest['config_hash'] = config_hash
        self.manifest['versions'] = self.versions()
        text = json.dumps(self.manifest, sort_keys=True, indent=2) + '\n'
        atomic_write(self.root / LabSettings.MANIFEST_NAME, text.encode('utf-8'))


# Stage payload codecs

def _optional_float(value: Optional[float]) -> float:
    return float('nan') if value is None else float(value)


def _from_optional(value: float) -> Optional[float]:
    return None if np.isnan(value) else float(value)


def spectrum_payload(result: SpectrumResult) -> Tuple[Arrays, Meta]:
    """Eigenvalues and diagnostics of every mode; eigenvectors of the trusted modes only"""
    modes = result.modes
    vectors = [i for i, m in enumerate(modes) if m.trusted]
    size = modes[vectors[0]].psi.size if vectors else 0
    members = [i for g in result.groups for i in g.members]
    complex_ids = [i for i, m in enumerate(modes) if any(m is c for c in result.complex_modes)]
    arrays = {
        'lam': np.array([m.lam for m in modes], dtype=complex),
        'residual': np.array([m.residual for m in modes], dtype=float),
        'tail': np.array([m.tail_fraction for m in modes], dtype=float),
        'trusted': np.array([m.trusted for m in modes], dtype=bool),
        'psi': (np.stack([modes[i].psi for i in vectors]) if vectors
                else np.zeros((0, size), dtype=complex)).astype(complex),
        'psi_index': np.array(vectors, dtype=np.int64),
        'group_rep': np.array([g.lambda_rep for g in result.groups], dtype=complex),
        'group_size': np.array([len(g.members) for g in result.groups], dtype=np.int64),
        'group_members': np.array(members, dtype=np.int64),
        'complex_index': np.array(complex_ids, dtype=np.int64),
    }
    meta = {
        'jordan_at_zero': result.jordan_at_zero,
        'symmetry_report': result.symmetry_report,
        'cutoff': result.cutoff,
        'route': result.route,
        'route_discrepancy': result.route_discrepancy,
        'diagnostics': result.diagnostics,
    }
    return arrays, meta


def spectrum_from_payload(arrays: Arrays, meta: Meta) -> SpectrumResult:
    psi_of = {int(i): row for i, row in zip(arrays['psi_index'], arrays['psi'])}
    empty = np.zeros(0, dtype=complex)
    modes = [EigenMode(lam=complex(lam), psi=psi_of.get(i, empty), residual=float(res),
                       tail_fraction=float(tail), trusted=bool(ok))
             for i, (lam, res, tail, ok) in enumerate(zip(arrays['lam'], arrays['residual'],
                                                            arrays['tail'], arrays['trusted']))]
    groups = []
    offset = 0
    for rep, count in zip(arrays['group_rep'], arrays['group_size']):
        members = [int(i) for i in arrays['group_members'][offset:offset + int(count)]]
        groups.append(ModeGroup(lambda_rep=complex(rep), multiplicity=len(members), members=members))
        offset += int(count)
    return SpectrumResult(
        modes=modes,
        groups=groups,
        jordan_at_zero={k: int(v) for k, v in meta['jordan_at_zero'].items()},
        symmetry_report=meta['symmetry_report'],
        complex_modes=[modes[int(i)] for i in arrays['complex_index']],
        cutoff=float(meta['cutoff']),
        route=meta['route'],
        route_discrepancy=meta['route_discrepancy'],
        diagnostics=meta['diagnostics'],
    )


def orbits_payload(orbits: List[PeriodicOrbit], dim: int) -> Tuple[Arrays, Meta]:
    k = len(orbits)
    m = 2 * dim - 2
    width = orbits[0].fingerprint.size if orbits else 0

    def stacked(name: str, shape: Tuple[int, ...], dtype=float) -> np.ndarray:
        if not orbits:
            return np.zeros((0,) + shape, dtype=dtype)
        return np.stack([np.asarray(getattr(o, name), dtype=dtype).reshape(shape) for o in orbits])

    arrays = {
        'x': np.array([o.seed.x for o in orbits], dtype=float).reshape(k, dim),
        'xi': np.array([o.seed.xi for o in orbits], dtype=float).reshape(k, dim),
        'energy': np.array([o.seed.energy for o in orbits], dtype=float),
        'period': np.array([o.period_T for o in orbits], dtype=float),
        'primitive_period': np.array([o.primitive_period for o in orbits], dtype=float),
        'winding': np.array([o.winding for o in orbits], dtype=np.int64).reshape(k, dim),
        'closure_defect': np.array([o.closure_defect for o in orbits], dtype=float),
        'monodromy': stacked('monodromy', (m, m)),
        'full_monodromy': stacked('full_monodromy', (2 * dim, 2 * dim)),
        'det_I_minus_P': np.array([o.det_I_minus_P for o in orbits], dtype=float),
        'rotation_number': np.array([_optional_float(o.rotation_number) for o in orbits], dtype=float),
        'section_defect': np.array([o.section_defect for o in orbits], dtype=float),
        'symplectic_defect': np.array([o.symplectic_defect for o in orbits], dtype=float),
        'repetition': np.array([o.repetition for o in orbits], dtype=np.int64),
        'fingerprint': stacked('fingerprint', (width,)),
    }
    meta = {'ids': [o.orbit_id for o in orbits], 'stability': [o.stability for o in orbits], 'dim': dim}
    return arrays, meta


def orbits_from_payload(arrays: Arrays, meta: Meta) -> List[PeriodicOrbit]:
    orbits = []
    for i, orbit_id in enumerate(meta['ids']):
        seed = PhasePoint(x=arrays['x'][i].copy(), xi=arrays['xi'][i].copy(), energy=float(arrays['energy'][i]))
        orbits.append(PeriodicOrbit(
            seed=seed,
            period_T=float(arrays['period'][i]),
            primitive_period=float(arrays['primitive_period'][i]),
            winding=tuple(int(w) for w in arrays['winding'][i]),
            closure_defect=float(arrays['closure_defect'][i]),
            monodromy=arrays['monodromy'][i].copy(),
            full_monodromy=arrays['full_monodromy'][i].copy(),
            det_I_minus_P=float(arrays['det_I_minus_P'][i]),
            stability=meta['stability'][i],
            rotation_number=_from_optional(arrays['rotation_number'][i]),
            section_defect=float(arrays['section_defect'][i]),
            symplectic_defect=float(arrays['symplectic_defect'][i]),
            repetition=int(arrays['repetition'][i]),
            orbit_id=orbit_id,
            fingerprint=arrays['fingerprint'][i].copy(),
        ))
    return orbits


def _peak_meta(peak: TracePeak) -> Dict[str, Any]:
    a = peak.amplitude_fit
    return {
        't_peak': peak.t_peak,
        'height': peak.height,
        'matched_period': peak.matched_period,
        'orbit_ids': list(peak.orbit_ids),
        'a_fit': None if a is None else [a.real, a.imag],
        'fit_residual': peak.fit_residual,
        'predicted_modulus': peak.predicted_modulus,
        'clustered': peak.clustered,
        'degenerate': peak.degenerate,
    }


def _peak_from_meta(data: Dict[str, Any]) -> TracePeak:
    a = data['a_fit']
    return TracePeak(
        t_peak=float(data['t_peak']),
        height=float(data['height']),
        matched_period=data['matched_period'],
        orbit_ids=list(data['orbit_ids']),
        amplitude_fit=None if a is None else complex(a[0], a[1]),
        fit_residual=data['fit_residual'],
        predicted_modulus=data['predicted_modulus'],
        clustered=bool(data['clustered']),
        degenerate=bool(data['degenerate']),
    )


def trace_payload(profile: TraceProfile, extra: Optional[Meta] = None) -> Tuple[Arrays, Meta]:
    arrays = {'times': profile.times, 'values': profile.values, 'half_values': profile.half_values}
    meta = {
        'window': profile.window,
        'truncation_bound': profile.truncation_bound,
        'complex_correction_bound': profile.complex_correction_bound,
        'diagnostics': profile.diagnostics,
        'peaks': [_peak_meta(p) for p in profile.peaks],
        'extra': extra or {},
    }
    return arrays, meta


def trace_from_payload(arrays: Arrays, meta: Meta) -> Tuple[TraceProfile, Meta]:
    profile = TraceProfile(
        times=arrays['times'],
        values=arrays['values'],
        half_values=arrays['half_values'],
        window=float(meta['window']),
        truncation_bound=float(meta['truncation_bound']),
        complex_correction_bound=float(meta['complex_correction_bound']),
        peaks=[_peak_from_meta(p) for p in meta['peaks']],
        diagnostics=meta['diagnostics'],
    )
    return profile, meta['extra']


def counting_payload(counting: CountingFunction, report: Meta) -> Tuple[Arrays, Meta]:
    return {'thresholds': counting.thresholds}, {'excluded_complex': counting.excluded_complex, 'report': report}


def counting_from_payload(arrays: Arrays, meta: Meta) -> Tuple[CountingFunction, Meta]:
    counting = CountingFunction(thresholds=arrays['thresholds'], excluded_complex=int(meta['excluded_complex']))
    return counting, meta['report']


def report_payload(report: Meta) -> Tuple[Arrays, Meta]:
    return {}, report


def report_from_payload(arrays: Arrays, meta: Meta) -> Meta:
    return meta
