"""
Console report of a pipeline run
"""

import io
from typing import Any, Dict, List, Optional, Sequence

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..entities.orbit import PeriodicOrbit
from ..entities.spectrum import SpectrumResult
from ..entities.trace import TraceProfile


def _fmt(value: Any, digits: int = 6) -> str:
    if value is None:
        return '-'
    if isinstance(value, complex):
        return f"{value.real:.{digits}g}{value.imag:+.{digits}g}i"
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


class LabReport:
    """Rich tables and panels for stage outputs"""

    def __init__(self, console: Console, max_rows: int = 24):
        self.console = console
        self.max_rows = max_rows

    def draw(self, results: Dict[str, Any], stages: Optional[Dict[str, Dict[str, Any]]] = None):
        """Draw every stage output present in results"""
        if 'spectrum' in results:
            self._draw_spectrum(results['spectrum'])
        if 'weyl' in results:
            self._draw_mapping('Weyl law', results['weyl']['report'])
        if 'orbits' in results:
            self._draw_orbits(results['orbits'])
        if 'trace' in results:
            self._draw_trace(results['trace']['profile'], results['trace']['match'])
        if 'forms' in results:
            forms = dict(results['forms'])
            forms['pairing_violations'] = len(forms.get('pairing_violations', []))
            self._draw_mapping('Invariant forms', forms)
        if 'verify' in results:
            self.draw_checks(results['verify'])
        if stages:
            self._draw_stages(stages)

    def _draw_spectrum(self, spectrum: SpectrumResult):
        table = Table(title=f"Spectrum ({spectrum.route} route, cutoff {_fmt(spectrum.cutoff, 4)})",
                      box=box.SIMPLE_HEAVY)
        table.add_column("lambda", justify="right")
        table.add_column("mult", justify="right")
        shown = [g for g in spectrum.groups if g.lambda_rep.real >= -1e-12][:self.max_rows]
        for group in shown:
            lam = group.lambda_rep
            table.add_row(_fmt(lam.real, 10) if abs(lam.imag) == 0.0 else _fmt(lam, 8), str(group.multiplicity))
        if len(shown) < len(spectrum.groups):
            table.caption = f"{len(shown)} of {len(spectrum.groups)} groups (non-negative part)"
        self.console.print(table)

        jordan = spectrum.jordan_at_zero
        report = spectrum.symmetry_report
        lines = [
            f"trusted modes: {len(spectrum.trusted_modes)} of {len(spectrum.modes)}",
            f"Jordan block at 0: algebraic {jordan.get('algebraic')}, geometric {jordan.get('geometric')}",
            f"reflection defect {_fmt(report.get('reflection_defect'), 3)}, "
            f"conjugation defect {_fmt(report.get('conjugation_defect'), 3)}",
            f"complex modes: {len(spectrum.complex_modes)}",
        ]
        if spectrum.route_discrepancy is not None:
            lines.append(f"two-route discrepancy {_fmt(spectrum.route_discrepancy, 3)}")
        self.console.print(Panel("\n".join(lines), title="Spectral structure", expand=False))

    def _draw_orbits(self, orbits: Sequence[PeriodicOrbit]):
        table = Table(title=f"Periodic orbits ({len(orbits)})", box=box.SIMPLE_HEAVY)
        for column in ("id", "period", "winding", "det(I-P)", "stability", "closure"):
            table.add_column(column, justify="right" if column not in ("id", "stability") else "left")
        for orbit in orbits[:self.max_rows]:
            table.add_row(orbit.orbit_id, _fmt(orbit.period_T, 10), str(tuple(orbit.winding)),
                          _fmt(orbit.det_I_minus_P, 6), orbit.stability, _fmt(orbit.closure_defect, 2))
        self.console.print(table)

    def _draw_trace(self, profile: TraceProfile, match: Dict[str, Any]):
        table = Table(title=f"Trace peaks (window {_fmt(profile.window, 4)})", box=box.SIMPLE_HEAVY)
        for column in ("t_peak", "period", "|a_fit|", "predicted", "ratio", "orbits"):
            table.add_column(column, justify="right")
        for peak in profile.peaks[:self.max_rows]:
            note = "clustered" if peak.clustered else ("degenerate" if peak.degenerate else "")
            table.add_row(_fmt(peak.t_peak, 8), _fmt(peak.matched_period, 8), _fmt(peak.abs_a_fit, 5),
                          _fmt(peak.predicted_modulus, 5), _fmt(peak.ratio, 4),
                          ",".join(peak.orbit_ids[:4]) + (f" {note}" if note else ""))
        self.console.print(table)
        self.console.print(f"missing periods: {[round(p, 6) for p in match.get('missing_periods', [])]}, "
                           f"unmatched peaks: {[round(t, 6) for t in match.get('unmatched_peaks', [])]}")

    def _draw_mapping(self, title: str, data: Dict[str, Any]):
        table = Table(title=title, box=box.MINIMAL_DOUBLE_HEAD, show_header=False)
        table.add_column("key")
        table.add_column("value", justify="right")
        for key in sorted(data):
            table.add_row(key, _fmt(data[key]))
        self.console.print(table)

    def draw_checks(self, checks: List[Dict[str, Any]]):
        table = Table(title="Verification", box=box.SIMPLE_HEAVY)
        table.add_column("check")
        table.add_column("status")
        table.add_column("value", justify="right")
        table.add_column("threshold", justify="right")
        table.add_column("detail")
        for check in checks:
            status = "[green]PASS[/green]" if check['passed'] else "[red]FAIL[/red]"
            table.add_row(check['name'], status, _fmt(check['value'], 3), _fmt(check['threshold'], 3),
                          check.get('detail', ''))
        self.console.print(table)

    def _draw_stages(self, stages: Dict[str, Dict[str, Any]]):
        table = Table(title="Stages", box=box.SIMPLE)
        table.add_column("stage")
        table.add_column("status")
        table.add_column("cache")
        table.add_column("seconds", justify="right")
        for name, entry in stages.items():
            table.add_row(name, entry.get('status', ''), "hit" if entry.get('cache_hit') else "miss",
                          f"{entry.get('seconds', 0.0):.2f}")
        self.console.print(table)


def render_summary(results: Dict[str, Any]) -> str:
    """Plain-text summary of the stage outputs, free of timings"""
    console = Console(file=io.StringIO(), record=True, width=100, color_system=None, force_terminal=False)
    LabReport(console).draw(results)
    return console.export_text()
