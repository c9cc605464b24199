"""Command-line entry point: ``ringchaos <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .amplitude import NonresonanceError, NotCubicError, gl_coefficients
from .glsolver import GLBlowUp, GLField, GLIllPosedError, gl_integrate, snapshot_observer
from .model import DuffingRingParams, ModelError, RingModel, load_model, make_duffing_ring
from .scan import DuffingFamily, ScanError, scaling_experiment, scaling_summary
from .simulate import AttractorProtocol, IntegrationError, LyapunovError, integrate, lyapunov_spectrum
from .spectrum import (CriticalPointError, SpectrumError, continuous_spectrum, dense_origin_spectrum,
                       discrete_spectrum, find_critical, lemma1_check, pairing_error)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
NUMERICAL_ERRORS = (SpectrumError, CriticalPointError, NonresonanceError, NotCubicError, GLBlowUp,
                    GLIllPosedError, IntegrationError, LyapunovError, ScanError, FloatingPointError,
                    np.linalg.LinAlgError)
CONFIG_ERRORS = (ModelError, ValueError, KeyError, OSError, json.JSONDecodeError)

PROFILES = {
    "ci": dict(t_transient=5e2, t_total=5e3),
    "production": dict(t_transient=5e3, t_total=5e4),
}
GLOBAL_KEYS = ("seed", "threads", "profile", "config")


class ConfigError(ValueError):
    pass


class RingFamily:
    """Ring-size family built from a model file (picklable)."""

    def __init__(self, model: RingModel):
        self.model = model

    def __call__(self, N: int) -> RingModel:
        return self.model.with_size(N)


# --- model handling -----------------------------------------------------------

def _family(args):
    if args.model == "duffing":
        return DuffingFamily(args.a, args.d)
    path = Path(args.model)
    if not path.is_file():
        raise ConfigError(f"model file not found: {path}")
    return RingFamily(load_model(path))


def _model(args) -> RingModel:
    if args.model == "duffing":
        return make_duffing_ring(DuffingRingParams(args.a, args.d), args.n or 30)
    model = load_model(args.model)
    return model.with_size(args.n) if args.n else model


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", newline="")


def _check_out(path):
    if path in (None, "-"):
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise ConfigError(f"output directory does not exist: {parent}")


def _write_json(obj, path):
    fh = _open_out(path)
    try:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _write_csv(header, rows, path):
    fh = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _p_range(text):
    lo, hi = (float(x) for x in text.split(","))
    return lo, hi


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _critical(args, model):
    return find_critical(model, args.p_range)


# --- subcommands --------------------------------------------------------------

def cmd_spectrum(args):
    model = _model(args)
    curve = continuous_spectrum(model, args.k, args.num_phi)
    _write_csv(["phi", "branch", "re_lambda", "im_lambda"], curve.rows(), args.out)
    if args.modes:
        lam = discrete_spectrum(model, args.k)
        _write_csv(["re_lambda", "im_lambda"], ((z.real, z.imag) for z in lam), args.modes)
    return 0


def cmd_critical(args):
    model = _model(args)
    _write_json(_critical(args, model).to_json(), args.out)
    return 0


def cmd_coeffs(args):
    model = _model(args)
    coeffs = gl_coefficients(model, _critical(args, model))
    _write_json(coeffs.to_json(), args.out)
    return 0


def cmd_gl(args):
    model = _model(args)
    coeffs = gl_coefficients(model, _critical(args, model))
    if args.dispersion_kappa3:
        coeffs = coeffs.with_dispersion_kappa3()
    field = GLField.random(args.grid, 1e-3, args.seed)
    final, log = gl_integrate(field, args.r, coeffs, args.t_end, args.dt, snapshot_observer, args.stride,
                              spectral_cutoff=args.spectral_cutoff)
    if args.snapshots:
        xi = field.xi
        rows = ((t, x, u.real, u.imag) for t, vals in log for x, u in zip(xi, vals))
        _write_csv(["T2", "xi", "re_u", "im_u"], rows, args.snapshots)
    _write_json({"T2": final.time, "norm2": final.norm2(), "tail_fraction": final.tail_fraction(),
                 "snapshots": len(log)}, args.out)
    return 0


def _initial_state(model, args):
    rng = np.random.default_rng(args.seed)
    return rng.normal(scale=args.init_scale, size=model.dim)


def cmd_simulate(args):
    model = _model(args)
    traj = integrate(model, _initial_state(model, args), args.k, args.t_end, args.dt,
                     method=args.method, stride=args.stride)
    header = ["t"] + [f"y{i}" for i in range(model.dim)]
    _write_csv(header, np.column_stack([traj.times, traj.states]).tolist(), args.out)
    return 0


def cmd_lyapunov(args):
    model = _model(args)
    prof = PROFILES[args.profile]
    t_tr = prof["t_transient"] if args.t_transient is None else args.t_transient
    t_tot = prof["t_total"] if args.t_total is None else args.t_total
    res = lyapunov_spectrum(model, args.k, args.num_exponents, _initial_state(model, args), t_tr, t_tot,
                            args.renorm_interval, args.dt, seed=args.seed)
    _write_json(res.to_json(), args.out)
    return 0


def _scan_records(args):
    protocol = AttractorProtocol.profile(args.profile)
    return scaling_experiment(_family(args), sorted(args.n_list), protocol, k_step=args.k_step,
                              k_tol=args.k_tol, k_max=args.k_max, seed=args.seed, workers=args.threads)


def cmd_scan(args):
    records = _scan_records(args)
    _write_csv(["N", "k_H", "k_Ch", "k_Re"], (r.row() for r in records), args.out)
    if args.diagnostics:
        _write_json([{"N": r.N, **r.diagnostics} for r in records], args.diagnostics)
    return 0


def cmd_scaling(args):
    records = _scan_records(args)
    _write_csv(["N", "k_H", "k_Ch", "k_Re"], (r.row() for r in records), args.out)
    summary = scaling_summary(records)
    gaps = [r.k_Ch - r.k_H for r in records]
    summary["gap_decreasing"] = bool(all(b < a for a, b in zip(gaps, gaps[1:])))
    _write_json(summary, args.summary)
    return 0


def verify_checks(model: RingModel, p_range=(0.0, 1.0)):
    """Built-in cross-checks as ``(name, value, tolerance)`` triples; pass means ``value < tolerance``."""
    checks = []
    crit = find_critical(model, p_range)
    checks.append(("lemma1_residual", lemma1_check(model, crit), 1e-5))
    p = 0.5 * (p_range[0] + p_range[1])
    err = pairing_error(dense_origin_spectrum(model, p), discrete_spectrum(model, p))
    checks.append(("mode_vs_dense_spectrum", err, 1e-8))

    gl = SimpleNamespace(kappa2=1.0, kappa3=0.2, zeta=-1.0)
    r = 20.0
    rho = math.sqrt((r - 0.1 * (2 * math.pi) ** 2) / 1.0)
    u0 = GLField.plane_wave(64, rho, 1)
    u1, _ = gl_integrate(u0, r, gl, 10.0, 1e-3)
    checks.append(("gl_plane_wave_persistence", float(np.abs(u1.values - u0.values).max()), 1e-6))

    lyap = lyapunov_spectrum(model, p, model.dim, t_transient=50.0, t_total=250.0, seed=0)
    trace = float(np.trace(model.matrices(p)[model.R]) * model.N)
    checks.append(("lyapunov_sum_rule", abs(lyap.exponents.sum() - trace), 0.01 * abs(trace) or 1e-6))
    return checks


def cmd_verify(args):
    model = _model(args)
    checks = verify_checks(model, args.p_range)
    ok = True
    for name, value, tol in checks:
        passed = value < tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {value:.3e} (tol {tol:.1e})")
    return 0 if ok else 1


# --- parser -------------------------------------------------------------------

def _model_args(p, n_default=None):
    p.add_argument("--model", default="duffing", help="'duffing' or path to a model JSON file")
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--d", type=float, default=0.3)
    p.add_argument("--n", type=int, default=n_default, help="ring size N")
    p.add_argument("--p-range", type=_p_range, default=(0.0, 1.0), help="bracket lo,hi for the critical search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ringchaos", description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=os.cpu_count())
    parser.add_argument("--profile", choices=sorted(PROFILES), default="ci")
    parser.add_argument("--config", help="JSON file with option defaults (CLI flags take precedence)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="continuous spectrum CSV")
    _model_args(p)
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--num-phi", type=int, default=256)
    p.add_argument("--out")
    p.add_argument("--modes", help="also write the discrete mode eigenvalues to this CSV")
    p.set_defaults(func=cmd_spectrum)

    for name, func, text in (("critical", cmd_critical, "continuum critical point JSON"),
                             ("coeffs", cmd_coeffs, "amplitude-equation coefficients JSON")):
        p = sub.add_parser(name, help=text)
        _model_args(p)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("gl", help="integrate the amplitude equation")
    _model_args(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--stride", type=int, default=1000)
    p.add_argument("--spectral-cutoff", type=int)
    p.add_argument("--dispersion-kappa3", action="store_true",
                   help="use -lambda''(phi0) for the diffusion coefficient")
    p.add_argument("--snapshots")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gl)

    p = sub.add_parser("simulate", help="integrate the ring ODEs")
    _model_args(p, 30)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--method", choices=("rk4", "rk45"), default="rk4")
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lyapunov", help="Lyapunov spectrum JSON")
    _model_args(p, 30)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--num-exponents", type=int, default=2)
    p.add_argument("--t-transient", type=float)
    p.add_argument("--t-total", type=float)
    p.add_argument("--renorm-interval", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lyapunov)

    for name, func, text in (("scan", cmd_scan, "k_H and k_Ch per N, records CSV"),
                             ("scaling", cmd_scaling, "scan plus k_Re summary JSON")):
        p = sub.add_parser(name, help=text)
        _model_args(p)
        p.add_argument("--n-list", type=_int_list, default=[5, 10, 15, 20, 25, 30])
        p.add_argument("--k-step", type=float, default=1e-3)
        p.add_argument("--k-tol", type=float, default=1e-4)
        p.add_argument("--k-max", type=float, default=1.0)
        p.add_argument("--out", default="records.csv")
        if name == "scan":
            p.add_argument("--diagnostics", help="per-N diagnostics JSON")
        else:
            p.add_argument("--summary", help="JSON summary path (default stdout)")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="run built-in cross-checks")
    _model_args(p, 8)
    p.set_defaults(func=cmd_verify)
    return parser


def _apply_config(parser, argv):
    """Reparse ``argv`` with defaults taken from ``--config``; explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
    known_sub = {a.dest for a in sub._actions if a.dest not in ("help",)} - {"func"}
    known = known_sub | set(GLOBAL_KEYS)
    keys = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = set(keys) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    converters = {a.dest: a.type for a in sub._actions if a.type is not None}
    for k, v in list(keys.items()):
        if isinstance(v, str) and k in converters:
            keys[k] = converters[k](v)
        elif isinstance(v, list) and k == "p_range":
            keys[k] = tuple(float(x) for x in v)
    parser.set_defaults(**{k: v for k, v in keys.items() if k in GLOBAL_KEYS})
    sub.set_defaults(**{k: v for k, v in keys.items() if k in known_sub})
    return parser.parse_args(argv)


def _validate(args):
    for key in ("out", "snapshots", "modes", "diagnostics", "summary"):
        _check_out(getattr(args, key, None))
    if args.model != "duffing" and not Path(args.model).is_file():
        raise ConfigError(f"model file not found: {args.model}")
    if getattr(args, "n", None) is not None and args.n < 2:
        raise ConfigError("ring size must be at least 2")
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be positive")


def _fail(code, exc):
    kind = "config" if code == EXIT_CONFIG else "numerical"
    json.dump({"error": kind, "type": type(exc).__name__, "message": str(exc)}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        _validate(args)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    except CONFIG_ERRORS as exc:
        return _fail(EXIT_CONFIG, exc)
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except CONFIG_ERRORS as exc:
        return _fail(EXIT_CONFIG, exc)


if __name__ == "__main__":
    sys.exit(main())
