"""Command-line front end.

Exit codes: 0 success, 1 computational failure, 2 usage error.
``STARKHOLE_OUTPUT_DIR`` sets the default output directory of ``simulate``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .core import Amorphous, Crystal, HoleWidth, StarkCoefficient
from .cribplan import (
    CribTarget,
    amorphous_field_plan,
    broadened_fwhm,
    crystal_field_plan,
    crystal_span,
    polarity_reversal_map,
)
from .errors import BoundaryWarning, StarkHoleError
from .expsim import PRESETS, ScanConfig, field_from_voltage, simulate_scan
from .fileio import make_manifest, read_profile, read_sweep_dir, write_manifest, write_profile
from .fitting import (
    SCAN_TAGS,
    FieldSweep,
    analyze_amorphous,
    analyze_crystal,
    fit_broadened,
    fit_lorentzian,
    reversibility_check,
)
from .lineshape import hole_shape_with_error
from .oracle import EnsembleSpec, mc_hole_shape

OUTPUT_DIR_ENV = "STARKHOLE_OUTPUT_DIR"
Z_FAIL = 5.0


def _nonneg_float(text):
    value = float(text)
    if not (value >= 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {text}")
    return value


def _pos_float(text):
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be a finite number > 0, got {text}")
    return value


def _pos_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(text, path):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- shape -----------------------------------------------------------------

def cmd_shape(args):
    x = np.linspace(args.xmin, args.xmax, args.npoints)
    h, err = hole_shape_with_error(x, args.fbar, args.rel_tol)
    lines = [f"# f_bar: {args.fbar!r}", f"# rel_tol: {args.rel_tol!r}", "x,h,error"]
    lines += [f"{xi:.17g},{hi:.17g},{ei:.3g}" for xi, hi, ei in zip(x, h, err)]
    _emit("\n".join(lines) + "\n", args.output)
    return 0


# --- simulate --------------------------------------------------------------

def _simulation_setup(args, parser):
    preset = PRESETS[args.preset] if args.preset else None
    medium = args.medium or (preset.medium if preset else None)
    if medium is None:
        parser.error("give --preset or --medium")
    if medium == "amorphous" and args.inversion_symmetric:
        parser.error("--inversion-symmetric only applies to crystals")
    kappa = args.kappa if args.kappa is not None else (preset.kappa if preset else None)
    if kappa is None:
        parser.error("--kappa is required without a preset")
    voltages = args.voltages if args.voltages is not None else (list(preset.voltages) if preset else None)
    if not voltages:
        parser.error("--voltages is required without a preset")
    gap = args.gap if args.gap is not None else (preset.gap_mm if preset else 1.0)
    base = preset.scan if preset else ScanConfig()
    overrides = {
        "span": args.span,
        "n_points": args.npoints,
        "gamma": args.gamma,
        "hole_depth": args.depth,
        "noise_sigma": args.noise,
        "seed": args.seed,
    }
    values = {k: getattr(base, k) for k in overrides}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ScanConfig(**values)
    except StarkHoleError as exc:
        parser.error(str(exc))
    k = StarkCoefficient(kappa)
    model = Crystal(k, inversion_symmetric=args.inversion_symmetric) if medium == "crystal" else Amorphous(k)
    return preset, medium, model, voltages, gap, cfg


def cmd_simulate(args, parser):
    preset, medium_name, model, voltages, gap, cfg = _simulation_setup(args, parser)
    outdir = Path(args.outdir or os.environ.get(OUTPUT_DIR_ENV) or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    if medium_name == "crystal" and model.inversion_symmetric:
        medium_label = "crystal-centrosymmetric"
    else:
        medium_label = medium_name
    written = []
    for i, volt in enumerate(voltages):
        E = field_from_voltage(volt, gap)
        for tag in SCAN_TAGS:
            prof = simulate_scan(model, E, cfg, tag, field_index=i)
            meta = {
                "medium": medium_label,
                "preset": preset.name if preset else "custom",
                "voltage_v": volt,
                "gap_mm": gap,
                "gamma_mhz": cfg.gamma,
                "kappa_khz_per_v_cm": float(model.kappa),
            }
            if preset:
                meta["wavelength_nm"] = preset.wavelength_nm
            path = outdir / f"step{i:03d}_{tag}.csv"
            write_profile(path, prof, meta)
            written.append(path)
    print(f"wrote {len(written)} profiles to {outdir}")
    return 0


# --- fit -------------------------------------------------------------------

def _lorentz_dict(f):
    return {
        "center_mhz": f.center, "center_err_mhz": f.center_err,
        "gamma_mhz": f.gamma, "gamma_err_mhz": f.gamma_err,
        "amplitude": f.amplitude, "amplitude_err": f.amplitude_err,
        "baseline": f.baseline, "baseline_err": f.baseline_err,
        "residual_norm": f.residual_norm, "iterations": f.n_iter,
    }


def _broadened_dict(f):
    return {
        "f_bar": f.f_bar, "f_bar_err": f.f_bar_err,
        "amplitude": f.amplitude, "amplitude_err": f.amplitude_err,
        "baseline": f.baseline, "baseline_err": f.baseline_err,
        "center_mhz": f.center, "center_err_mhz": f.center_err,
        "gamma_mhz": f.gamma, "at_bound": f.at_bound,
        "residual_norm": f.residual_norm, "iterations": f.n_iter,
    }


def _seeds(profiles):
    return [p.metadata["seed"] for p in profiles if isinstance(p.metadata.get("seed"), int)]


def cmd_fit(args, parser):
    profiles = []
    failures = []
    for path in args.files:
        try:
            profiles.append((path, read_profile(path)))
        except (OSError, StarkHoleError) as exc:
            failures.append({"input": str(path), "error": str(exc)})
    gamma = args.gamma
    gamma_source = "flag" if gamma is not None else None
    if args.mode == "broadened" and gamma is None:
        zero = [(p, prof) for p, prof in profiles if prof.field == 0.0]
        if not zero:
            parser.error("broadened mode needs --gamma or a zero-field profile among the inputs")
        fz = fit_lorentzian(zero[0][1])
        gamma, gamma_source = fz.gamma, str(zero[0][0])
    results = []
    for path, prof in profiles:
        try:
            if args.mode == "lorentzian":
                fit = _lorentz_dict(fit_lorentzian(prof))
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", BoundaryWarning)
                    fit = _broadened_dict(fit_broadened(prof, gamma))
            results.append({"input": str(path), "field_v_per_cm": prof.field, "scan_tag": prof.scan_tag, **fit})
        except StarkHoleError as exc:
            failures.append({"input": str(path), "error": str(exc)})
    doc = make_manifest(
        "fit",
        inputs=args.files,
        seeds=_seeds([p for _, p in profiles]),
        parameters={"mode": args.mode, "gamma_mhz": gamma, "gamma_source": gamma_source},
        results=results,
        failures=failures,
    )
    _emit(json.dumps(doc, indent=2) + "\n", args.output)
    return 0 if results else 1


# --- extract ---------------------------------------------------------------

def _infer_medium(profiles, requested):
    if requested != "auto":
        return requested
    labels = {str(p.metadata.get("medium", "")) for p in profiles}
    for label in ("amorphous", "crystal-centrosymmetric", "crystal"):
        if label in labels:
            return label
    return "crystal"


_QUANTITY = {"crystal": "shift_khz", "crystal-centrosymmetric": "half_split_khz", "amorphous": "f_bar"}


def cmd_extract(args, parser):
    records, paths = read_sweep_dir(args.directory)
    profiles = [p for _, p in records]
    medium = _infer_medium(profiles, args.medium)
    placeholder = StarkCoefficient(0.0)
    if medium == "amorphous":
        model = Amorphous(placeholder)
    else:
        model = Crystal(placeholder, inversion_symmetric=(medium == "crystal-centrosymmetric"))
    sweep = FieldSweep(records=records, medium=model,
                       gamma_zero_field=HoleWidth(args.gamma) if args.gamma else None)
    ex = analyze_amorphous(sweep) if medium == "amorphous" else analyze_crystal(sweep)
    points = []
    for pt in ex.points:
        entry = {"field_v_per_cm": pt.field, "value": pt.value, "error": pt.error}
        points.append(entry)
    rev = reversibility_check(sweep) if medium != "crystal-centrosymmetric" else None
    kappa = ex.coefficient
    summary = {
        "kappa_khz_per_v_cm": kappa.kappa,
        "kappa_err_khz_per_v_cm": kappa.sigma_kappa,
        "medium": medium,
        "regression_chi2": ex.regression.chi2,
        "regression_points": ex.regression.n,
        "weighted": ex.regression.weighted,
    }
    results = {
        "quantity": _QUANTITY[medium],
        "points": points,
        "reference": ex.reference,
    }
    if rev is not None:
        results["reversibility"] = [
            {"field_v_per_cm": r.field, "quantity": r.quantity, "before_mhz": r.before,
             "after_mhz": r.after, "delta_mhz": r.delta, "tol_mhz": r.tol, "passed": r.passed}
            for r in rev.rows
        ]
        summary["reversibility_passed"] = rev.all_passed
    doc = make_manifest(
        "extract",
        inputs=paths,
        seeds=_seeds(profiles),
        parameters={"medium": medium, "gamma_mhz": args.gamma},
        results=results,
        summary=summary,
    )
    if args.output:
        write_manifest(args.output, doc)
    print(f"kappa = {kappa.kappa:.3f} ± {kappa.sigma_kappa:.3f} kHz/(V/cm)")
    if rev is not None and rev.rows:
        print(f"reversibility: {len(rev.rows) - len(rev.failures)}/{len(rev.rows)} after-scans pass")
    return 0


# --- plan ------------------------------------------------------------------

def cmd_plan(args, parser):
    k = StarkCoefficient(args.kappa)
    if args.medium == "crystal":
        target = CribTarget(Crystal(k), bandwidth=args.bandwidth_mhz, pulse_duration=args.duration_ns)
        plan = crystal_field_plan(target)
        achieved = crystal_span(args.kappa, plan.e_max)
        text = (f"crystal gradient: +{plan.e_max:.6g} V/cm to -{plan.e_max:.6g} V/cm "
                f"(shift span {achieved:.6g} MHz for {target.bandwidth:.6g} MHz target)")
    else:
        if args.gamma is None:
            parser.error("amorphous planning needs --gamma (zero-field HWHM, MHz)")
        target = CribTarget(Amorphous(k), bandwidth=args.bandwidth_mhz,
                            pulse_duration=args.duration_ns, gamma=HoleWidth(args.gamma))
        plan = amorphous_field_plan(target)
        achieved = broadened_fwhm(args.kappa, plan.e_max, args.gamma)
        text = (f"amorphous homogeneous field: {plan.e_max:.6g} V/cm "
                f"(broadened FWHM {achieved:.6g} MHz for {target.bandwidth:.6g} MHz target)")
    schedule = polarity_reversal_map(plan, t_switch=args.t_switch)
    print(text)
    for ph in schedule.phases:
        print(f"  t = {ph.t_start:g}..{ph.t_end:g} us: field {ph.field_entrance:+.6g} -> {ph.field_exit:+.6g} V/cm")
    doc = {"medium": args.medium, "kappa_khz_per_v_cm": args.kappa, "gamma_mhz": args.gamma,
           "achieved_mhz": achieved, **schedule.as_dict()}
    text_json = json.dumps(doc, indent=2) + "\n"
    if args.json:
        Path(args.json).write_text(text_json)
    else:
        sys.stdout.write(text_json)
    return 0


# --- oracle ----------------------------------------------------------------

def cmd_oracle(args, parser):
    x = np.linspace(args.xmin, args.xmax, args.npoints)
    h, qerr = hole_shape_with_error(x, args.fbar, args.rel_tol)
    mc = mc_hole_shape(EnsembleSpec(args.samples, args.fbar, args.seed, x), workers=args.workers)
    scale = np.sqrt(mc.stderr**2 + qerr**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(scale > 0, (mc.mean - h) / scale, 0.0)
    lines = [f"# f_bar: {args.fbar!r}", f"# samples: {args.samples}", f"# seed: {args.seed}",
             "x,quadrature,monte_carlo,stderr,z"]
    lines += [f"{a:.6g},{b:.10g},{c:.10g},{d:.3g},{e:+.3f}" for a, b, c, d, e in zip(x, h, mc.mean, mc.stderr, z)]
    worst = float(np.max(np.abs(z)))
    ok = worst <= Z_FAIL
    lines.append(f"# max |z| = {worst:.3f}: {'PASS' if ok else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.output)
    return 0 if ok else 1


# --- parser ----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="starkhole", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shape", help="tabulate the broadened hole shape h(x)")
    p.add_argument("--fbar", type=_nonneg_float, required=True)
    p.add_argument("--xmin", type=float, default=None)
    p.add_argument("--xmax", type=float, default=10.0)
    p.add_argument("--npoints", type=_pos_int, default=201)
    p.add_argument("--rel-tol", type=_pos_float, default=1e-8)
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("simulate", help="write synthetic before/during/after profiles")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--medium", choices=["crystal", "amorphous"])
    p.add_argument("--inversion-symmetric", action="store_true")
    p.add_argument("--kappa", type=float, help="kHz/(V/cm)")
    p.add_argument("--voltages", type=_float_list, help="comma-separated voltages (V)")
    p.add_argument("--gap", type=_pos_float, help="electrode gap (mm)")
    p.add_argument("--span", type=_pos_float, help="scan span (MHz)")
    p.add_argument("--npoints", type=_pos_int)
    p.add_argument("--gamma", type=_pos_float, help="zero-field HWHM (MHz)")
    p.add_argument("--depth", type=_pos_float)
    p.add_argument("--noise", type=_nonneg_float)
    p.add_argument("--seed", type=int)
    p.add_argument("--outdir", default=None)

    p = sub.add_parser("fit", help="fit profile files and write a JSON manifest")
    p.add_argument("files", nargs="+")
    p.add_argument("--mode", choices=["lorentzian", "broadened"], default="lorentzian")
    p.add_argument("--gamma", type=_pos_float, help="zero-field HWHM (MHz) for broadened fits")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("extract", help="extract the Stark coefficient from a sweep directory")
    p.add_argument("directory")
    p.add_argument("--medium", choices=["auto", "crystal", "crystal-centrosymmetric", "amorphous"], default="auto")
    p.add_argument("--gamma", type=_pos_float, help="override the zero-field HWHM (MHz)")
    p.add_argument("-o", "--output", default=None, help="manifest path")

    p = sub.add_parser("plan", help="CRIB field planning")
    p.add_argument("--medium", choices=["crystal", "amorphous"], required=True)
    p.add_argument("--kappa", type=_pos_float, required=True, help="kHz/(V/cm)")
    p.add_argument("--gamma", type=_pos_float, help="zero-field HWHM (MHz)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--duration-ns", type=_pos_float)
    g.add_argument("--bandwidth-mhz", type=_pos_float)
    p.add_argument("--t-switch", type=_pos_float, default=1.0, help="polarity switch time (us)")
    p.add_argument("--json", default=None)

    p = sub.add_parser("oracle", help="compare quadrature with the Monte-Carlo ensemble")
    p.add_argument("--fbar", type=_nonneg_float, required=True)
    p.add_argument("--samples", type=_pos_int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--xmin", type=float, default=None)
    p.add_argument("--xmax", type=float, default=10.0)
    p.add_argument("--npoints", type=_pos_int, default=21)
    p.add_argument("--rel-tol", type=_pos_float, default=1e-8)
    p.add_argument("--workers", type=_pos_int, default=1)
    p.add_argument("-o", "--output", default=None)
    return parser


COMMANDS = {
    "shape": lambda a, p: cmd_shape(a),
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "extract": cmd_extract,
    "plan": cmd_plan,
    "oracle": cmd_oracle,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "xmin", "unset") is None:
        args.xmin = -args.xmax
    if hasattr(args, "rel_tol") and not args.rel_tol <= 1e-2:
        parser.error("--rel-tol must be <= 1e-2")
    try:
        return COMMANDS[args.command](args, parser)
    except StarkHoleError as exc:
        print(f"starkhole {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
