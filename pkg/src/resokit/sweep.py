"""Batch orchestration: sweep fitting and synthetic dataset generation.

run_sweep_fit fits every manifest entry (optionally in parallel; the
RESOKIT_THREADS environment variable caps the worker count), attaches photon
numbers from the attenuation chain, and reduces the results into a Report in
manifest order, so the output is byte-identical for any thread count.

synthesize_dataset writes a self-consistent power sweep from a parameter
preset; feeding it back through sweep-fit and tls-fit recovers the preset.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ManifestError
from .loss import QpParams, TlsParams, tls_loss
from .notch import (AttenuationChain, NotchParams, chip_input_power,
                    photon_number, synthesize_trace)
from .report import (Report, SweepManifest, TraceRecord, canonical_json,
                     load_manifest, parse_trace_file, provenance_for)
from .specfit import fit_notch
from .tracefile import write_csv_trace

__all__ = ["run_sweep_fit", "SynthPreset", "PRESETS", "synthesize_dataset",
           "thread_count"]


def thread_count() -> int:
    """Worker cap for batch fitting, from RESOKIT_THREADS (default: cpu, max 8)."""
    raw = os.environ.get("RESOKIT_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ManifestError(f"RESOKIT_THREADS must be an integer, got {raw!r}")
    return max(1, min(os.cpu_count() or 1, 8))


def _real_coupling_q(q_coupling_mag: float, phi: float) -> float:
    """Diameter-corrected coupling Q = |Qc|/cos(phi), the Q_c of the
    parallel-resistor identity 1/Ql = 1/Qi + 1/Qc."""
    return q_coupling_mag / math.cos(phi)


def run_sweep_fit(manifest: SweepManifest, base_dir: str | Path,
                  manifest_path: str | Path | None = None) -> Report:
    """Fit all traces of a sweep manifest and assemble the report."""
    base = Path(base_dir)
    paths = [base / e.path for e in manifest.entries]
    labels = [Path(e.path).name for e in manifest.entries]

    def fit_one(i: int) -> TraceRecord:
        entry = manifest.entries[i]
        trace = parse_trace_file(paths[i], label=labels[i])
        fit = fit_notch(trace)
        p_in = chip_input_power(entry.vna_power_dbm, manifest.chain)
        q_c = _real_coupling_q(fit.params.q_coupling_mag, fit.params.phi)
        n_ph = photon_number(p_in, fit.params.f_r, fit.q_internal, q_c,
                             fit.params.q_loaded)
        return TraceRecord.from_fit(
            labels[i], fit, vna_power_dbm=entry.vna_power_dbm,
            temperature_k=entry.temperature_k, field_mt=entry.field_mt,
            p_in_watts=p_in, photon_number=n_ph)

    workers = thread_count()
    if workers > 1 and len(manifest.entries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(fit_one, range(len(manifest.entries))))
    else:
        records = [fit_one(i) for i in range(len(manifest.entries))]

    curves = _build_curves(records)
    material = {"t_c": manifest.material.t_c,
                "alpha_kinetic": manifest.material.alpha_kinetic,
                "gap_joules": manifest.material.gap_joules}
    geometry = None
    if manifest.geometry is not None:
        g = manifest.geometry
        geometry = {"width": g.width, "gap": g.gap,
                    "film_thickness": g.film_thickness,
                    "substrate_epsilon_r": g.substrate_epsilon_r,
                    "substrate_thickness": g.substrate_thickness,
                    "resonator_length": g.resonator_length, "mode": g.mode}
    prov_inputs = list(paths)
    if manifest_path is not None:
        prov_inputs.append(Path(manifest_path))
    return Report(traces=tuple(records), curves=curves,
                  fits={"tls": None, "freq_shift": None, "field": None},
                  material=material, geometry=geometry,
                  provenance=provenance_for(prov_inputs))


def _build_curves(records: list[TraceRecord]) -> dict[str, list[dict]]:
    """Derived curves, each point tagged with its source trace label."""
    qi_vs_nph = [{"n_ph": r.photon_number, "q_i": r.q_internal, "source": r.label}
                 for r in records if r.photon_number is not None]
    qi_vs_nph.sort(key=lambda d: d["n_ph"])
    f_vs_t = sorted(({"temperature_k": r.temperature_k, "f_r": r.params["f_r"],
                      "source": r.label} for r in records),
                    key=lambda d: d["temperature_k"])
    qi_vs_b = sorted(({"field_mt": r.field_mt, "q_i": r.q_internal,
                       "source": r.label} for r in records),
                     key=lambda d: d["field_mt"])
    f_vs_b = sorted(({"field_mt": r.field_mt, "f_r": r.params["f_r"],
                      "source": r.label} for r in records),
                    key=lambda d: d["field_mt"])
    return {"qi_vs_nph": qi_vs_nph, "f_vs_t": f_vs_t,
            "qi_vs_b": qi_vs_b, "f_vs_b": f_vs_b}


# --------------------------------------------------------------------------
# synthetic datasets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthPreset:
    """Parameter bundle for a synthetic power sweep."""

    name: str
    f_r: float
    q_coupling_mag: float
    phi: float
    tls: TlsParams
    delta_const: float
    temperature_k: float
    chain_db: tuple[float, ...]
    film_thickness: float
    vna_powers_dbm: tuple[float, ...]
    amp: float = 1.0
    phase_offset: float = 0.3
    delay: float = 30e-9
    span_linewidths: float = 10.0
    n_points: int = 1201
    noise_sigma: float = 1e-3
    material: QpParams = QpParams(t_c=12.0, alpha_kinetic=0.0974)


# Sample-2-like bundle: 5.9643 GHz fundamental, Qc 2308, TLS parameters
# (9.5102e4, 13, 0.35) at 26 mK behind a 100 dB input chain on 100 nm film.
PRESETS = {
    "paper-sample2": SynthPreset(
        name="paper-sample2",
        f_r=5.9643e9,
        q_coupling_mag=2308.0,
        phi=0.06,
        tls=TlsParams(q_tls0=9.5102e4, n_c=13.0, beta=0.35),
        delta_const=8e-7,
        temperature_k=0.026,
        chain_db=(40.0, 20.0, 20.0, 20.0),
        film_thickness=100e-9,
        vna_powers_dbm=tuple(np.linspace(-38.0, 10.0, 20)),
    ),
}


def _self_consistent_photons(p_in: float, preset: SynthPreset) -> tuple[float, float]:
    """Photon number solving n = photon_number(p_in, ..., Q_i(n), ...).

    The TLS loss depends on the photon number which depends on Q_i; a plain
    fixed-point iteration converges fast because the saturation is gentle.
    Returns (n_ph, q_i).
    """
    q_c_real = preset.q_coupling_mag / math.cos(preset.phi)

    def q_i_of(n: float) -> float:
        delta = tls_loss(preset.temperature_k, n, preset.f_r, preset.tls) + preset.delta_const
        return 1.0 / delta

    n = 0.0
    for _ in range(200):
        q_i = q_i_of(n)
        q_l = 1.0 / (1.0 / q_i + 1.0 / q_c_real)
        n_new = photon_number(p_in, preset.f_r, q_i, q_c_real, q_l)
        if abs(n_new - n) <= 1e-13 * max(n_new, 1e-30):
            n = n_new
            break
        n = n_new
    return n, q_i_of(n)


def synthesize_dataset(preset: SynthPreset, seed: int, out_dir: str | Path) -> Path:
    """Write a synthetic power-sweep dataset (CSV traces plus manifest.json).

    Each trace gets an independent noise substream derived from (seed, index);
    the dataset is fully deterministic for a given seed.  Returns the manifest
    path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chain = AttenuationChain.from_db_list(preset.chain_db)
    entries = []
    for i, power in enumerate(preset.vna_powers_dbm):
        p_in = chip_input_power(power, chain)
        _n_ph, q_i = _self_consistent_photons(p_in, preset)
        q_l = 1.0 / (1.0 / q_i + math.cos(preset.phi) / preset.q_coupling_mag)
        params = NotchParams(f_r=preset.f_r, q_loaded=q_l,
                             q_coupling_mag=preset.q_coupling_mag,
                             phi=preset.phi, amp=preset.amp,
                             phase_offset=preset.phase_offset,
                             delay=preset.delay)
        linewidth = preset.f_r / q_l
        half = 0.5 * preset.span_linewidths * linewidth
        trace = synthesize_trace(params, preset.f_r - half, preset.f_r + half,
                                 preset.n_points, preset.noise_sigma,
                                 seed=seed * 100003 + i)
        name = f"trace_{i:02d}.csv"
        (out / name).write_bytes(write_csv_trace(trace))
        entries.append({"path": name, "vna_power_dbm": float(power),
                        "temperature_k": preset.temperature_k, "field_mt": 0.0})

    manifest = {
        "entries": entries,
        "chain": {"stages": [{"label": f"stage{i}", "attenuation_db": db}
                             for i, db in enumerate(preset.chain_db)]},
        "material": {"t_c": preset.material.t_c,
                     "alpha_kinetic": preset.material.alpha_kinetic},
        "geometry": None,
        "preset": {"name": preset.name, "seed": seed,
                   "q_tls0": preset.tls.q_tls0, "n_c": preset.tls.n_c,
                   "beta": preset.tls.beta, "delta_const": preset.delta_const,
                   "film_thickness": preset.film_thickness},
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_bytes(canonical_json(manifest))
    return manifest_path
