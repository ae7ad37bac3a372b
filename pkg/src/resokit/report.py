"""Sweep manifests and the JSON report format (schema_version "1").

Reports are serialized as canonical JSON: keys sorted, compact separators,
floats in Python's shortest round-trip representation, never NaN/Inf.  The
same report therefore always produces identical bytes, which the acceptance
suite diffs directly.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cpw import CpwGeometry
from .errors import ManifestError, TraceParseError
from .loss import QpParams
from .notch import AttenuationChain, AttenuationStage
from .specfit import FitReport
from .tracefile import parse_csv_trace, parse_touchstone

__all__ = [
    "SweepEntry",
    "SweepManifest",
    "TraceRecord",
    "Report",
    "load_manifest",
    "parse_trace_file",
    "write_report",
    "parse_report",
    "canonical_json",
]

SCHEMA_VERSION = "1"


# --------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepEntry:
    path: str
    vna_power_dbm: float
    temperature_k: float
    field_mt: float = 0.0


@dataclass(frozen=True)
class SweepManifest:
    entries: tuple[SweepEntry, ...]
    chain: AttenuationChain
    material: QpParams
    geometry: CpwGeometry | None = None


def parse_trace_file(path: str | Path, label: str = ""):
    """Parse a trace file, choosing Touchstone or CSV by content sniffing."""
    data = Path(path).read_bytes()
    head = data.lstrip()[:1]
    if head == b"#" or str(path).lower().endswith((".s2p", ".ts")):
        return parse_touchstone(data, label=label)
    return parse_csv_trace(data, label=label)


def load_manifest(path: str | Path, check_files: bool = True) -> SweepManifest:
    """Load and validate a sweep manifest JSON file.

    Checks that entry paths are unique and, when check_files is set, that
    every referenced trace file parses.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None

    try:
        entries = tuple(
            SweepEntry(path=str(e["path"]),
                       vna_power_dbm=float(e["vna_power_dbm"]),
                       temperature_k=float(e["temperature_k"]),
                       field_mt=float(e.get("field_mt", 0.0)))
            for e in raw["entries"])
        chain = AttenuationChain(tuple(
            AttenuationStage(label=str(s.get("label", f"stage{i}")),
                             attenuation_db=float(s["attenuation_db"]))
            for i, s in enumerate(raw.get("chain", {}).get("stages", []))))
        mat = raw.get("material", {})
        material = QpParams(
            t_c=float(mat.get("t_c", QpParams().t_c)),
            alpha_kinetic=float(mat.get("alpha_kinetic", QpParams().alpha_kinetic)),
            gap_joules=float(mat["gap_joules"]) if "gap_joules" in mat else None)
        geometry = None
        if raw.get("geometry"):
            g = raw["geometry"]
            geometry = CpwGeometry(
                width=float(g["width"]), gap=float(g["gap"]),
                film_thickness=float(g["film_thickness"]),
                substrate_epsilon_r=float(g["substrate_epsilon_r"]),
                substrate_thickness=float(g["substrate_thickness"]),
                resonator_length=float(g["resonator_length"]),
                mode=str(g.get("mode", "quarter_wave")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from None

    if not entries:
        raise ManifestError(f"manifest {path} has no entries")
    paths = [e.path for e in entries]
    if len(set(paths)) != len(paths):
        raise ManifestError(f"manifest {path} has duplicate entry paths")

    if check_files:
        base = path.parent
        for entry in entries:
            trace_path = base / entry.path
            if not trace_path.is_file():
                raise ManifestError(f"missing trace file {trace_path}")
            try:
                parse_trace_file(trace_path)
            except TraceParseError as exc:
                raise ManifestError(f"unparseable trace {trace_path}: {exc}") from None

    return SweepManifest(entries=entries, chain=chain, material=material,
                         geometry=geometry)


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRecord:
    """One fitted trace inside a report."""

    label: str
    vna_power_dbm: float
    temperature_k: float
    field_mt: float
    params: dict[str, float]
    q_internal: float
    uncertainties: dict[str, float]
    rms_residual: float
    n_points: int
    flags: tuple[str, ...]
    p_in_watts: float | None = None
    photon_number: float | None = None

    @staticmethod
    def from_fit(label: str, fit: FitReport, vna_power_dbm: float = 0.0,
                 temperature_k: float = 0.0, field_mt: float = 0.0,
                 p_in_watts: float | None = None,
                 photon_number: float | None = None) -> "TraceRecord":
        p = fit.params
        return TraceRecord(
            label=label, vna_power_dbm=vna_power_dbm,
            temperature_k=temperature_k, field_mt=field_mt,
            params={"f_r": p.f_r, "q_loaded": p.q_loaded,
                    "q_coupling_mag": p.q_coupling_mag, "phi": p.phi,
                    "amp": p.amp, "phase_offset": p.phase_offset,
                    "delay": p.delay},
            q_internal=fit.q_internal,
            uncertainties=dict(fit.uncertainties),
            rms_residual=fit.rms_residual, n_points=fit.n_points,
            flags=tuple(sorted(fit.flags)),
            p_in_watts=p_in_watts, photon_number=photon_number)


@dataclass(frozen=True)
class Report:
    """Machine-readable sweep analysis: per-trace fits, derived curves and
    fitted model parameters, plus provenance."""

    traces: tuple[TraceRecord, ...]
    curves: dict[str, list[dict]]
    fits: dict[str, dict | None]
    material: dict[str, float]
    geometry: dict[str, float | str] | None
    provenance: dict[str, object]
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "provenance": self.provenance,
            "material": self.material,
            "geometry": self.geometry,
            "traces": [asdict(t) for t in self.traces],
            "curves": self.curves,
            "fits": self.fits,
        }

    @staticmethod
    def from_dict(d: dict) -> "Report":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ManifestError(
                f"unsupported report schema_version {d.get('schema_version')!r}")
        traces = tuple(TraceRecord(**t) if not isinstance(t, TraceRecord) else t
                       for t in d.get("traces", []))
        traces = tuple(
            TraceRecord(**{**asdict(t), "flags": tuple(t.flags)})
            if isinstance(t, TraceRecord) else t for t in traces)
        return Report(traces=traces, curves=d.get("curves", {}),
                      fits=d.get("fits", {}), material=d.get("material", {}),
                      geometry=d.get("geometry"),
                      provenance=d.get("provenance", {}))


def _sanitize(obj):
    """Plain-Python view of nested data: numpy scalars to float/int, tuples to
    lists, with NaN/Inf rejected (canonical JSON has no representation)."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if not np.isfinite(value):
            raise ValueError("report contains non-finite float")
        return value
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    return obj


def canonical_json(data: dict) -> bytes:
    """Deterministic JSON bytes: sorted keys, compact, shortest float repr."""
    return json.dumps(_sanitize(data), sort_keys=True,
                      separators=(",", ":"), allow_nan=False).encode("utf-8")


def write_report(report: Report) -> bytes:
    return canonical_json(report.to_dict())


def parse_report(data: bytes) -> Report:
    try:
        d = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ManifestError(f"cannot parse report: {exc}") from None
    report = Report.from_dict(d)
    # normalize list-typed fields back to tuples for equality round trips
    traces = tuple(
        TraceRecord(**{**asdict(t), "flags": tuple(t.flags)}) for t in report.traces)
    return Report(traces=traces, curves=report.curves, fits=report.fits,
                  material=report.material, geometry=report.geometry,
                  provenance=report.provenance)


def sha256_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance_for(paths: list[str | Path]) -> dict[str, object]:
    """Provenance block for a set of input files.

    The timestamp is reproducible: SOURCE_DATE_EPOCH wins when set, otherwise
    the newest input mtime is used, so identical inputs give identical bytes.
    """
    digests = {str(Path(p).name): sha256_digest(p) for p in paths}
    epoch_env = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch_env is not None:
        epoch = float(epoch_env)
    elif paths:
        epoch = max(Path(p).stat().st_mtime for p in paths)
    else:
        epoch = 0.0
    stamp = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    return {
        "tool_version": __version__,
        "input_digests": digests,
        "timestamp": stamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
