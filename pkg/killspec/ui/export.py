"""
Byte-stable CSV and JSON artifact writers
"""

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import ArtifactError, ConfigError
from ..core.settings import LabSettings
from ..core.store import (ResultStore, counting_from_payload, orbits_from_payload, report_from_payload,
                          spectrum_from_payload, trace_from_payload)
from ..entities.orbit import PeriodicOrbit
from ..entities.spectrum import SpectrumResult
from ..entities.trace import CountingFunction, TracePeak, TraceProfile

logger = logging.getLogger(__name__)


def number(value: float) -> str:
    """Shortest round-trip decimal form"""
    return repr(float(value))


def _clean(obj: Any) -> Any:
    """JSON-safe copy: non-finite floats become null, tuples become lists"""
    if isinstance(obj, (np.generic, np.ndarray)):
        return _clean(obj.tolist())
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def to_json(obj: Any) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + '\n'


def _csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _flag(value: bool) -> str:
    return 'true' if value else 'false'


def spectrum_csv(spectrum: SpectrumResult) -> str:
    rows = []
    for index, mode in enumerate(spectrum.modes):
        group = spectrum.group_of(index) if mode.trusted else None
        multiplicity = group.multiplicity if group is not None else 1
        rows.append([number(mode.lam.real), number(mode.lam.imag), multiplicity,
                     number(mode.residual), _flag(mode.trusted)])
    return _csv(LabSettings.CSV_HEADERS['spectrum'], rows)


def spectrum_json(spectrum: SpectrumResult) -> str:
    return to_json({
        'route': spectrum.route,
        'cutoff': spectrum.cutoff,
        'jordan_at_zero': spectrum.jordan_at_zero,
        'symmetry_report': spectrum.symmetry_report,
        'route_discrepancy': spectrum.route_discrepancy,
        'groups': [{'lambda_re': g.lambda_rep.real, 'lambda_im': g.lambda_rep.imag,
                    'multiplicity': g.multiplicity} for g in spectrum.groups],
        'complex_modes': [[m.lam.real, m.lam.imag] for m in spectrum.complex_modes],
    })


def counting_csv(counting: CountingFunction) -> str:
    rows = []
    thresholds = counting.thresholds
    for i, lam in enumerate(thresholds):
        if i + 1 < thresholds.size and thresholds[i + 1] == lam:
            continue
        rows.append([number(lam), i + 1])
    return _csv(LabSettings.CSV_HEADERS['counting'], rows)


def orbits_csv(orbits: Sequence[PeriodicOrbit], dim: int) -> str:
    rows = []
    for orbit in orbits:
        rows.append([number(orbit.period_T), number(orbit.primitive_period)]
                    + [int(w) for w in orbit.winding]
                    + [number(orbit.det_I_minus_P), orbit.stability, number(orbit.closure_defect)])
    return _csv(LabSettings.orbit_columns(dim), rows)


def orbits_json(orbits: Sequence[PeriodicOrbit]) -> str:
    return to_json([{
        'id': o.orbit_id,
        'period': o.period_T,
        'primitive_period': o.primitive_period,
        'winding': list(o.winding),
        'repetition': o.repetition,
        'det_I_minus_P': o.det_I_minus_P,
        'stability': o.stability,
        'rotation_number': o.rotation_number,
        'closure_defect': o.closure_defect,
        'section_defect': o.section_defect,
        'symplectic_defect': o.symplectic_defect,
        'seed_x': [float(v) for v in o.seed.x],
        'seed_xi': [float(v) for v in o.seed.xi],
    } for o in orbits])


def trace_csv(profile: TraceProfile) -> str:
    rows = ([number(t), number(v.real), number(v.imag), number(abs(v))]
            for t, v in zip(profile.times, profile.values))
    return _csv(LabSettings.CSV_HEADERS['trace'], rows)


def peak_record(peak: TracePeak) -> Dict[str, Any]:
    a = peak.amplitude_fit
    return {
        't_peak': peak.t_peak,
        'a_fit_re': None if a is None else a.real,
        'a_fit_im': None if a is None else a.imag,
        'abs_a_fit': peak.abs_a_fit,
        'matched_period': peak.matched_period,
        'orbit_ids': list(peak.orbit_ids),
        'predicted_modulus': peak.predicted_modulus,
        'ratio': peak.ratio,
    }


def peaks_json(peaks: Sequence[TracePeak]) -> str:
    return to_json([peak_record(p) for p in peaks])


# Export of cached stage outputs

Renderer = Callable[[Dict[str, Any], Dict[str, Any]], str]

EXPORTS: Dict[Tuple[str, str], Tuple[str, Renderer]] = {
    ('spectrum', 'csv'): ('spectrum', lambda a, m: spectrum_csv(spectrum_from_payload(a, m))),
    ('spectrum', 'json'): ('spectrum', lambda a, m: spectrum_json(spectrum_from_payload(a, m))),
    ('counting', 'csv'): ('weyl', lambda a, m: counting_csv(counting_from_payload(a, m)[0])),
    ('weyl', 'json'): ('weyl', lambda a, m: to_json(counting_from_payload(a, m)[1])),
    ('orbits', 'csv'): ('orbits', lambda a, m: orbits_csv(orbits_from_payload(a, m), int(m['dim']))),
    ('orbits', 'json'): ('orbits', lambda a, m: orbits_json(orbits_from_payload(a, m))),
    ('trace', 'csv'): ('trace', lambda a, m: trace_csv(trace_from_payload(a, m)[0])),
    ('peaks', 'json'): ('trace', lambda a, m: peaks_json(trace_from_payload(a, m)[0].peaks)),
    ('forms', 'json'): ('forms', lambda a, m: to_json(report_from_payload(a, m))),
    ('verify', 'json'): ('verify', lambda a, m: to_json(report_from_payload(a, m))),
}


def export_names() -> List[str]:
    return sorted({what for what, _ in EXPORTS})


def render_export(store: ResultStore, what: str, fmt: str) -> str:
    """Text of one artifact rebuilt from the cached output of its stage"""
    if (what, fmt) not in EXPORTS:
        formats = sorted(f for w, f in EXPORTS if w == what)
        if not formats:
            raise ConfigError(f"unknown artifact '{what}' (expected one of {', '.join(export_names())})", '--what')
        raise ConfigError(f"'{what}' exports as {' or '.join(formats)}, not {fmt}", '--format')
    stage, render = EXPORTS[(what, fmt)]
    arrays, meta = store.load(stage, store.latest_key(stage))
    return render(arrays, meta)


def export_artifact(out_dir: Union[str, Path], what: str, fmt: str,
                    dest: Optional[Union[str, Path]] = None) -> Path:
    """Write an artifact from the result store in out_dir"""
    root = Path(out_dir)
    if not (root / LabSettings.MANIFEST_NAME).exists():
        raise ArtifactError(f"{root} holds no run manifest")
    store = ResultStore(root)
    text = render_export(store, what, fmt)
    path = Path(dest) if dest is not None else root / f"{what}.{fmt}"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    logger.info(f"Exported {what} as {fmt} to {path}")
    return path
