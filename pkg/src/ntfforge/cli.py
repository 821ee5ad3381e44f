"""Batch frontend: design, sweep, evaluate, curves, verify.

Exit codes: 0 success, 2 validation error, 3 solver failure, 4 verification
failure.  All file writes are whole-file atomic (write to a temp file in the
target directory, then rename).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

import numpy as np

from .design import (
    DesignSpec,
    default_tone_freqs,
    evaluate_ntf,
    run_design,
    sweep_orders,
)
from .errors import BoundViolationError, InvalidSpecError, NtfForgeError, SolverError
from .filters import FrequencyGrid, design_filter
from .kyp import verify_bounded_real
from .modsim import NtfFir
from .objective import merit_integrand

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_VERIFICATION = 4

log = logging.getLogger("ntfforge.cli")


def atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ntfforge-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_design_spec(path: str) -> DesignSpec:
    with open(path) as fh:
        return DesignSpec.from_json_dict(json.load(fh))


def load_ntf(path: str):
    with open(path) as fh:
        d = json.load(fh)
    if "a" not in d and not ("num" in d and "den" in d):
        raise InvalidSpecError(
            "NTF artifact needs 'a' (FIR) or 'num'/'den' (rational) lists"
        )
    return d


def ntf_from_artifact(d: dict):
    """FIR coefficients become an NtfFir; rational ones a (num, den) pair."""
    if "a" in d:
        return NtfFir(coeffs=np.asarray(d["a"], dtype=float))
    return (np.asarray(d["num"], dtype=float), np.asarray(d["den"], dtype=float))


def cmd_design(args) -> int:
    spec = load_design_spec(args.config)
    if args.gamma is not None:
        spec = DesignSpec(fs_hz=spec.fs_hz, filter_spec=spec.filter_spec,
                          fir_order=spec.fir_order, gamma=args.gamma,
                          quantizer_levels=spec.quantizer_levels,
                          solver=spec.solver, grid_points=spec.grid_points,
                          energy_tol=spec.energy_tol)
    result = run_design(spec)
    atomic_write(args.out, dump_json(result.to_json_dict()))
    print(f"order {result.ntf.order}: sigma_h={result.sigma_h:.6e} "
          f"grid_max={result.certificate.grid_max:.6f} -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_design_spec(args.config)
    if args.gamma is not None:
        spec = DesignSpec(fs_hz=spec.fs_hz, filter_spec=spec.filter_spec,
                          fir_order=spec.fir_order, gamma=args.gamma,
                          quantizer_levels=spec.quantizer_levels,
                          solver=spec.solver, grid_points=spec.grid_points,
                          energy_tol=spec.energy_tol)
    orders = [int(tok) for tok in args.orders.split(",") if tok.strip()]
    rows = sweep_orders(spec, orders)
    lines = ["order,sigma_h,runtime_seconds,status"]
    for row in rows:
        lines.append(f"{row['order']},{row['sigma_h']:.12e},"
                     f"{row['runtime_seconds']:.3f},{row['status']}")
    atomic_write(args.out, "\n".join(lines) + "\n")
    for row in rows:
        print(f"order {row['order']:3d}: sigma_h={row['sigma_h']:.6e} "
              f"({row['status']})")
    return EXIT_OK


def _parse_signal(text: str):
    if text == "dc":
        return "dc", ()
    if ":" not in text:
        raise InvalidSpecError(
            "signal must be 'dc', 'sine:FREQ_HZ' or 'multitone:F1,F2,...'"
        )
    kind, freqs = text.split(":", 1)
    if kind not in ("sine", "multitone"):
        raise InvalidSpecError(f"unknown signal kind {kind!r}")
    return kind, tuple(float(tok) for tok in freqs.split(",") if tok.strip())


def cmd_evaluate(args) -> int:
    spec = load_design_spec(args.config)
    artifact = load_ntf(args.ntf)
    ntf = ntf_from_artifact(artifact)
    if args.signal:
        kind, freqs = _parse_signal(args.signal)
    else:
        kind, freqs = ("sine", default_tone_freqs(spec)[:1])
        if len(default_tone_freqs(spec)) > 1:
            kind, freqs = "multitone", default_tone_freqs(spec)
    report = evaluate_ntf(ntf, spec, args.amplitude, signal_kind=kind,
                          freqs_hz=freqs,
                          certificate=artifact.get("certificate"))
    atomic_write(args.out, dump_json(report.to_json_dict()))
    base, _ = os.path.splitext(args.out)
    grid = FrequencyGrid.uniform(args.grid or spec.grid_points)
    filt = design_filter(spec.filter_spec)
    num, den = (ntf.coeffs, (1.0,)) if isinstance(ntf, NtfFir) else ntf
    integrand = merit_integrand(num, den, filt, grid)
    freq_hz = grid.omegas * spec.fs_hz / (2.0 * np.pi)
    lines = ["freq_hz,integrand_linear"]
    lines += [f"{f:.10g},{v:.12e}" for f, v in zip(freq_hz, integrand)]
    atomic_write(base + "_integrand.csv", "\n".join(lines) + "\n")
    print(f"expected {report.expected_snr_db:.2f} dB, "
          f"simulated {report.simulated_snr_db:.2f} dB, "
          f"grid max {report.grid_max_ntf:.6f}"
          + (" [overloaded]" if report.overloaded else ""))
    if args.strict and not report.passed:
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_curves(args) -> int:
    spec = load_design_spec(args.config)
    grid = FrequencyGrid.uniform(args.grid or spec.grid_points)
    freq_hz = grid.omegas * spec.fs_hz / (2.0 * np.pi)
    filt = design_filter(spec.filter_spec)
    if args.what == "filter":
        mag = np.abs(filt.response(grid))
        header = "freq_hz,magnitude_db"
        values = 20.0 * np.log10(np.maximum(mag, 1e-300))
    elif args.what == "ntf":
        from .filters import frequency_response

        ntf = ntf_from_artifact(load_ntf(args.ntf))
        num, den = (ntf.coeffs, (1.0,)) if isinstance(ntf, NtfFir) else ntf
        mag = np.abs(frequency_response(num, den, grid))
        header = "freq_hz,magnitude_db"
        values = 20.0 * np.log10(np.maximum(mag, 1e-300))
    elif args.what == "integrand":
        ntf = ntf_from_artifact(load_ntf(args.ntf))
        num, den = (ntf.coeffs, (1.0,)) if isinstance(ntf, NtfFir) else ntf
        header = "freq_hz,integrand_linear"
        values = merit_integrand(num, den, filt, grid)
    else:
        raise InvalidSpecError(f"unknown curve kind {args.what!r}")
    lines = [header]
    lines += [f"{f:.10g},{v:.12e}" for f, v in zip(freq_hz, values)]
    atomic_write(args.out, "\n".join(lines) + "\n")
    print(f"{args.what} curve ({grid.count} points) -> {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    artifact = load_ntf(args.ntf)
    gamma = args.gamma if args.gamma is not None else artifact.get("gamma")
    if gamma is None:
        raise InvalidSpecError("no gamma given and none stored in the artifact")
    coeffs = np.asarray(artifact["a"], dtype=float)
    cert = verify_bounded_real(coeffs, float(gamma))
    if args.out:
        atomic_write(args.out, dump_json(cert.to_json_dict()))
    print(f"gain bound holds: grid max {cert.grid_max:.6f} <= gamma {gamma}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntfforge",
        description="FIR noise-transfer-function design driven by the "
                    "output filter, with verification and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="solve one design spec")
    p_design.add_argument("--config", required=True)
    p_design.add_argument("--out", required=True)
    p_design.add_argument("--gamma", type=float, default=None)
    p_design.set_defaults(func=cmd_design)

    p_sweep = sub.add_parser("sweep", help="design across FIR orders")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--orders", required=True,
                         help="comma-separated ascending list")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--gamma", type=float, default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_eval = sub.add_parser("evaluate", help="score an NTF artifact")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--ntf", required=True)
    p_eval.add_argument("--amplitude", type=float, required=True)
    p_eval.add_argument("--signal", default=None,
                        help="dc | sine:FREQ_HZ | multitone:F1,F2,...")
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--grid", type=int, default=None)
    p_eval.add_argument("--strict", action="store_true")
    p_eval.set_defaults(func=cmd_evaluate)

    p_curves = sub.add_parser("curves", help="export magnitude/integrand CSV")
    p_curves.add_argument("--what", required=True,
                          choices=("filter", "ntf", "integrand"))
    p_curves.add_argument("--config", required=True)
    p_curves.add_argument("--ntf", default=None)
    p_curves.add_argument("--grid", type=int, default=None)
    p_curves.add_argument("--out", required=True)
    p_curves.set_defaults(func=cmd_curves)

    p_verify = sub.add_parser("verify", help="check the gain bound of an NTF")
    p_verify.add_argument("--ntf", required=True)
    p_verify.add_argument("--gamma", type=float, default=None)
    p_verify.add_argument("--out", default=None)
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("NTFFORGE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BoundViolationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidSpecError, FileNotFoundError, json.JSONDecodeError,
            KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NtfForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
