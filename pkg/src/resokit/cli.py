"""Command-line interface.

Subcommands: design, fit, sweep-fit, tls-fit, shift-fit, field-fit, synth,
plot-data.  Failures print one machine-readable JSON line on stderr and exit
with a stable code: 1 usage, 2 no resonance, 3 parse error, 4 fit did not
converge or is unphysical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .cpw import CpwGeometry, line_params_from_geometry, resonance_frequency
from .errors import (DomainError, ManifestError, NoResonanceError,
                     ResokitError, SingularJacobianError, TraceParseError,
                     UnphysicalValueError)
from .loss import (QpParams, detect_jumps, fit_field_shift, fit_freq_shift,
                   fit_tls, vortex_thresholds)
from .report import (Report, TraceRecord, load_manifest, parse_report,
                     parse_trace_file, provenance_for, write_report)
from .specfit import fit_notch
from .sweep import PRESETS, run_sweep_fit, synthesize_dataset

EXIT_USAGE = 1
EXIT_NO_RESONANCE = 2
EXIT_PARSE = 3
EXIT_NO_CONVERGENCE = 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        self.code = code
        self.kind = kind
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the exit-code contract
    # reserves 2 for no-resonance, so remap to 1
    def error(self, message):
        _emit_error("usage", message)
        sys.exit(EXIT_USAGE)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _print_json(data) -> None:
    sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_or_print_report(report: Report, out: str | None) -> None:
    payload = write_report(report)
    if out:
        Path(out).write_bytes(payload)
    else:
        sys.stdout.write(payload.decode("utf-8") + "\n")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _cmd_design(args) -> int:
    geom = CpwGeometry(width=args.width_um * 1e-6, gap=args.gap_um * 1e-6,
                       film_thickness=args.thickness_nm * 1e-9,
                       substrate_epsilon_r=args.eps_r,
                       substrate_thickness=args.sub_um * 1e-6,
                       resonator_length=args.length_mm * 1e-3,
                       mode=args.mode)
    lp = line_params_from_geometry(geom, args.lk_per_m)
    f1 = resonance_frequency(lp, geom.resonator_length, 1, geom.mode)
    _print_json({**asdict(lp), "f_1": f1, "mode": geom.mode,
                 "resonator_length": geom.resonator_length})
    return 0


def _cmd_fit(args) -> int:
    path = Path(args.trace)
    trace = parse_trace_file(path, label=path.name)
    fit = fit_notch(trace)
    record = TraceRecord.from_fit(path.name, fit)
    report = Report(traces=(record,),
                    curves={"qi_vs_nph": [], "f_vs_t": [], "qi_vs_b": [],
                            "f_vs_b": []},
                    fits={"tls": None, "freq_shift": None, "field": None},
                    material={}, geometry=None,
                    provenance=provenance_for([path]))
    if args.out:
        Path(args.out).write_bytes(write_report(report))
    _print_json({"label": record.label, "params": record.params,
                 "q_internal": record.q_internal,
                 "uncertainties": record.uncertainties,
                 "rms_residual": record.rms_residual,
                 "flags": list(record.flags)})
    if "no_convergence" in record.flags:
        raise CliError(EXIT_NO_CONVERGENCE, "no_convergence",
                       f"fit of {path.name} did not converge")
    return 0


def _cmd_sweep_fit(args) -> int:
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    report = run_sweep_fit(manifest, manifest_path.parent,
                           manifest_path=manifest_path)
    _write_or_print_report(report, args.out)
    bad = [t.label for t in report.traces if "no_convergence" in t.flags]
    if bad:
        raise CliError(EXIT_NO_CONVERGENCE, "no_convergence",
                       f"{len(bad)} trace fits did not converge: {bad}")
    return 0


def _load_report(path: str) -> Report:
    return parse_report(Path(path).read_bytes())


def _cmd_tls_fit(args) -> int:
    report = _load_report(args.report)
    tol = max(1e-4, 1e-3 * args.temperature_k)
    points = [(t.photon_number, t.q_internal) for t in report.traces
              if t.photon_number is not None
              and abs(t.temperature_k - args.temperature_k) <= tol]
    if len(points) < 6:
        raise CliError(EXIT_USAGE, "usage",
                       f"report has {len(points)} usable (n_ph, q_i) points at "
                       f"T = {args.temperature_k} K; need >= 6")
    f_r = float(sum(t.params["f_r"] for t in report.traces) / len(report.traces))
    result = fit_tls(points, f_r, args.temperature_k)
    fits = dict(report.fits)
    fits["tls"] = {"q_tls0": result.params.q_tls0, "n_c": result.params.n_c,
                   "beta": result.params.beta,
                   "delta_const": result.delta_const,
                   "uncertainties": result.uncertainties,
                   "converged": result.converged,
                   "beta_at_boundary": result.beta_at_boundary,
                   "temperature_k": args.temperature_k}
    updated = Report(traces=report.traces, curves=report.curves, fits=fits,
                     material=report.material, geometry=report.geometry,
                     provenance=report.provenance)
    if args.out:
        Path(args.out).write_bytes(write_report(updated))
    _print_json(fits["tls"])
    if not result.converged:
        raise CliError(EXIT_NO_CONVERGENCE, "no_convergence",
                       "TLS fit did not converge")
    return 0


def _cmd_shift_fit(args) -> int:
    report = _load_report(args.report)
    curve = report.curves.get("f_vs_t", [])
    if len(curve) < 4:
        raise CliError(EXIT_USAGE, "usage",
                       f"report has {len(curve)} (T, f_r) points; need >= 4")
    material = report.material or {}
    qp = QpParams(t_c=material.get("t_c", QpParams().t_c),
                  alpha_kinetic=material.get("alpha_kinetic",
                                             QpParams().alpha_kinetic),
                  gap_joules=material.get("gap_joules"))
    result = fit_freq_shift([p["temperature_k"] for p in curve],
                            [p["f_r"] for p in curve], qp)
    fits = dict(report.fits)
    fits["freq_shift"] = {"f_r0": result.f_r0, "q_tls0": result.q_tls0,
                          "alpha_kinetic": result.alpha_kinetic,
                          "uncertainties": result.uncertainties,
                          "converged": result.converged,
                          "t_c": qp.t_c, "gap_joules": qp.gap_joules}
    updated = Report(traces=report.traces, curves=report.curves, fits=fits,
                     material=report.material, geometry=report.geometry,
                     provenance=report.provenance)
    if args.out:
        Path(args.out).write_bytes(write_report(updated))
    _print_json(fits["freq_shift"])
    if not result.converged:
        raise CliError(EXIT_NO_CONVERGENCE, "no_convergence",
                       "frequency-shift fit did not converge")
    return 0


def _cmd_field_fit(args) -> int:
    report = _load_report(args.report)
    curve = report.curves.get("f_vs_b", [])
    if len(curve) < 4:
        raise CliError(EXIT_USAGE, "usage",
                       f"report has {len(curve)} (B, f_r) points; need >= 4")
    b_tesla = [p["field_mt"] * 1e-3 for p in curve]
    f_r = [p["f_r"] for p in curve]
    result = fit_field_shift(b_tesla, f_r)
    jumps = [{"b_field_mt": j.b_field * 1e3, "delta_f": j.delta_f}
             for j in detect_jumps(list(zip(b_tesla, f_r)))]
    thresholds = None
    if report.geometry and report.geometry.get("film_thickness"):
        b_a, b_c1 = vortex_thresholds(float(report.geometry["film_thickness"]))
        thresholds = {"b_a_tesla": b_a, "b_c1_tesla": b_c1}
    fits = dict(report.fits)
    fits["field"] = {"f_r0": result.f_r0, "k_quad": result.k_quad,
                     "uncertainties": result.uncertainties,
                     "converged": result.converged,
                     "vortex_thresholds": thresholds, "jumps": jumps}
    updated = Report(traces=report.traces, curves=report.curves, fits=fits,
                     material=report.material, geometry=report.geometry,
                     provenance=report.provenance)
    if args.out:
        Path(args.out).write_bytes(write_report(updated))
    _print_json(fits["field"])
    if not result.converged:
        raise CliError(EXIT_NO_CONVERGENCE, "no_convergence",
                       "field-shift fit did not converge")
    return 0


def _cmd_synth(args) -> int:
    if args.preset not in PRESETS:
        raise CliError(EXIT_USAGE, "usage",
                       f"unknown preset {args.preset!r}; available: "
                       f"{sorted(PRESETS)}")
    manifest_path = synthesize_dataset(PRESETS[args.preset], args.seed,
                                       args.out)
    _print_json({"manifest": str(manifest_path),
                 "n_traces": len(PRESETS[args.preset].vna_powers_dbm)})
    return 0


_CURVES = {"qi-vs-nph": ("qi_vs_nph", ("n_ph", "q_i")),
           "f-vs-t": ("f_vs_t", ("temperature_k", "f_r")),
           "qi-vs-b": ("qi_vs_b", ("field_mt", "q_i")),
           "f-vs-b": ("f_vs_b", ("field_mt", "f_r"))}


def _cmd_plot_data(args) -> int:
    report = _load_report(args.report)
    key, cols = _CURVES[args.curve]
    points = report.curves.get(key, [])
    lines = [",".join(cols + ("source",))]
    for p in points:
        lines.append(f"{p[cols[0]]!r},{p[cols[1]]!r},{p['source']}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="resokit",
                     description="CPW resonator design and S21 analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="CPW line parameters and f_1 from geometry")
    p.add_argument("--width-um", type=float, required=True)
    p.add_argument("--gap-um", type=float, required=True)
    p.add_argument("--thickness-nm", type=float, required=True)
    p.add_argument("--eps-r", type=float, required=True)
    p.add_argument("--sub-um", type=float, required=True)
    p.add_argument("--length-mm", type=float, required=True)
    p.add_argument("--lk-per-m", type=float, default=0.0)
    p.add_argument("--mode", choices=("quarter_wave", "half_wave"),
                   default="quarter_wave")
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("fit", help="fit a single trace file")
    p.add_argument("trace")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sweep-fit", help="batch-fit a sweep manifest")
    p.add_argument("manifest")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep_fit)

    p = sub.add_parser("tls-fit", help="fit the TLS power law to a report")
    p.add_argument("report")
    p.add_argument("--temperature-k", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_tls_fit)

    p = sub.add_parser("shift-fit", help="fit the f_r(T) shift model to a report")
    p.add_argument("report")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_shift_fit)

    p = sub.add_parser("field-fit", help="fit the parabolic f_r(B) model")
    p.add_argument("report")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_field_fit)

    p = sub.add_parser("synth", help="generate a synthetic sweep dataset")
    p.add_argument("--preset", default="paper-sample2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("plot-data", help="emit a report curve as CSV")
    p.add_argument("report")
    p.add_argument("--curve", choices=sorted(_CURVES), required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_plot_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _emit_error(exc.kind, str(exc))
        return exc.code
    except NoResonanceError as exc:
        _emit_error("no_resonance", str(exc))
        return EXIT_NO_RESONANCE
    except (TraceParseError, ManifestError) as exc:
        _emit_error("parse", str(exc))
        return EXIT_PARSE
    except (SingularJacobianError, UnphysicalValueError) as exc:
        _emit_error("no_convergence", str(exc))
        return EXIT_NO_CONVERGENCE
    except (DomainError, FileNotFoundError, IsADirectoryError,
            PermissionError) as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except ResokitError as exc:
        _emit_error("error", str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
