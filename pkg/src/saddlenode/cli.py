"""Command-line front end: ``saddlenode <subcommand> [options]``.

Every subcommand prints one JSON object (sorted keys, a "version" field) to
stdout and writes its files under --out.  Exit codes: 0 success, 2 invalid
input, 1 failed computation.  Errors are reported on stderr as a JSON object
with "error", "message" and "exit_code".  No timings or other run-dependent
data are printed, so repeated runs with the same flags are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SaddleNodeError, ValidationError
from .series import FORMAT_VERSION, TruncatedSeries

THREADS_ENV = "SADDLENODE_THREADS"


# ----------------------------------------------------------------- encoding
def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return {"re": z.real, "im": z.imag}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def _emit(record: dict) -> None:
    record = dict(record)
    record.setdefault("version", FORMAT_VERSION)
    sys.stdout.write(_dumps(record) + "\n")


def _write_json(path: Path, record: dict) -> None:
    record = dict(record)
    record.setdefault("version", FORMAT_VERSION)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dumps(record) + "\n", encoding="utf-8")


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ValidationError(f"input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _read_field(path: str | None):
    from .vectorfield import FiberedVectorField

    if path is None:
        raise ValidationError("--in FIELD.json is required")
    return FiberedVectorField.from_dict(_read_json(path))


def _complex_arg(text: str) -> complex:
    try:
        z = complex(text.replace(" ", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from exc
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return z


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _finite_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return v


def _orientation(text: str) -> int:
    if text in ("+", "plus", "1", "+1"):
        return 1
    if text in ("-", "minus", "-1"):
        return -1
    raise argparse.ArgumentTypeError(f"orientation must be + or -, got {text!r}")


def thread_cap(environ=None) -> int:
    """Parallelism cap from SADDLENODE_THREADS (default 1); the computations are serial."""
    environ = os.environ if environ is None else environ
    raw = environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        v = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if v < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return v


# ----------------------------------------------------------------- subcommands
def cmd_normalize(args) -> int:
    from .straighten import full_formal_normalize
    from .vectorfield import classify

    Y = _read_field(args.inp)
    N = Y.trunc_x - 2 if args.N is None else args.N
    ny = Y.trunc_y if args.ny is None else args.ny
    if Y.trunc_x < N + 2:
        raise ValidationError(f"--N {N} needs the field to x-order {N + 2}; the input has trunc_x = {Y.trunc_x}")
    if Y.trunc_y < ny:
        raise ValidationError(f"--ny {ny} exceeds the input trunc_y = {Y.trunc_y}")
    cls = classify(Y)
    res = full_formal_normalize(Y, N, ny, args.tol)
    p = res.params
    out = _out_dir(args)
    files = []
    if out is not None:
        _write_json(out / "params.json", p.to_dict())
        _write_json(out / "map.json", res.map.to_dict())
        files = ["params.json", "map.json"]
    c_sum = p.c_sum_residual if p.c_sum_residual is not None else np.zeros(0)
    _emit({
        "command": "normalize",
        "trunc_x": N,
        "trunc_y": ny,
        "residue": cls["residue"],
        "non_degenerate": cls["non_degenerate"],
        "strictly_non_degenerate": cls["strictly_non_degenerate"],
        "transversally_hamiltonian": cls["transversally_hamiltonian"],
        "lambda": p.lam,
        "a1": p.a1,
        "a2": p.a2,
        "c": np.asarray(p.c.coeffs, dtype=complex),
        "c1_plus_c2_max": float(np.abs(c_sum).max()) if c_sum.size else 0.0,
        "det_defect": float(res.map.det_defect().max_abs()),
        "files": files,
    })
    return 0


def cmd_borel_sum(args) -> int:
    from .borel import borel, borel_sum_series, laplace_sum

    if args.x is None:
        raise ValidationError("--x is required")
    if args.euler == (args.inp is not None):
        raise ValidationError("give exactly one of --euler and --in SERIES.json")
    rec = {"command": "borel-sum", "theta": args.theta, "x": args.x}
    if args.euler:
        from .acceptance import euler_series

        value, err = laplace_sum(borel(euler_series(args.terms), "bis"), args.theta, args.x, "bis")
        rec.update({"series": "euler", "variant": "bis", "value": value, "error": err})
    else:
        F = TruncatedSeries.from_dict(_read_json(args.inp))
        value, err, growth = borel_sum_series(F, args.theta, args.x, args.y1, args.y2)
        rec.update({"series": "file", "variant": "standard", "y1": args.y1, "y2": args.y2,
                    "value": value, "error": err, "growth": growth})
    _emit(rec)
    return 0


def cmd_sectorial_conjugate(args) -> int:
    from .acceptance import FLATNESS_X, sectorial_sample_points
    from .sectorial import conjugacy_residual, flatness_fit, sectorial_normalize

    Y = _read_field(args.inp)
    N = 4 if args.N is None else args.N
    if Y.trunc_x < N + 3:
        raise ValidationError(f"--N {N} needs the field to x-order >= {N + 3}; the input has trunc_x = {Y.trunc_x}")
    S = sectorial_normalize(Y, N, args.tol)
    YN = S.target_field()
    plus, minus = sectorial_sample_points(args.samples, args.seed)
    rec = {"command": "sectorial-conjugate", "N": N, "seed": args.seed, "samples": args.samples,
           "lambda": S.formal.params.lam, "a1": S.formal.params.a1, "a2": S.formal.params.a2,
           "residual_plus": conjugacy_residual(S.plus, Y, YN, plus),
           "residual_minus": conjugacy_residual(S.minus, Y, YN, minus)}
    if args.flatness:
        diffs = [float(np.abs(np.subtract(S.plus(x, 0.02, 0.015), S.minus(x, 0.02, 0.015))).max())
                 for x in FLATNESS_X]
        A, B = flatness_fit(FLATNESS_X, diffs)
        rec["flatness"] = {"x": list(FLATNESS_X), "diff": diffs, "A": A, "B": B}
    out = _out_dir(args)
    if out is not None:
        rows = [("+", p, S.plus(*p)) for p in plus] + [("-", p, S.minus(*p)) for p in minus]
        _write_json(out / "sectorial_values.json", {
            "points": [{"sector": s, "x": p[0], "y1": p[1], "y2": p[2], "image": list(v)} for s, p, v in rows]})
        rec["files"] = ["sectorial_values.json"]
    _emit(rec)
    return 0


def cmd_stable_domain(args) -> int:
    from .sectorial import (StableDomainParams, domain_point_cloud, in_sector, in_stable_domain,
                            sandwich_grid)

    if args.a is None:
        raise ValidationError("--a (the residue a1 + a2) is required")
    P = StableDomainParams.auto(args.a, args.r, args.eps, args.orientation)
    inner, outer = sandwich_grid(P, args.samples, args.seed)
    om = in_stable_domain(*outer.T, P)
    in_big = in_sector(outer[:, 0], P.r, P.eps, P) & (np.abs(outer[:, 1]) < P.r1) & (np.abs(outer[:, 2]) < P.r2)
    rec = {"command": "stable-domain", "a": P.a, "r": P.r, "eps": P.eps, "orientation": "+" if P.orientation == 1 else "-",
           "omega": P.omega, "omega_prime": P.omega_p, "mu": P.mu, "delta": P.delta, "delta_prime": P.delta_p,
           "r_prime": P.r_prime, "r1_prime": P.r1_prime, "r2_prime": P.r2_prime, "seed": args.seed,
           "samples": args.samples, "inner_in_omega": bool(in_stable_domain(*inner.T, P).all()),
           "omega_in_outer": bool(in_big[om].all()), "omega_fraction": float(om.mean())}
    out = _out_dir(args)
    if out is not None:
        cloud = domain_point_cloud(P, args.grid)
        path = out / "stable_domain.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# version {FORMAT_VERSION}\n")
            w = csv.writer(fh)
            w.writerow(["re_x", "im_x", "in_omega"])
            for re, im, flag in cloud:
                w.writerow([repr(float(re)), repr(float(im)), int(flag)])
        rec["files"] = ["stable_domain.csv"]
    _emit(rec)
    return 0


def _chart_params(args):
    from .series import UniSeries
    from .straighten import NormalFormParams

    if args.inp is None:
        return NormalFormParams(1.0, 0.3, 0.8, UniSeries([0.0, 0.1, -0.05]))
    return NormalFormParams.from_dict(_read_json(args.inp))


def cmd_stokes(args) -> int:
    from .errors import HypersurfaceNotAnalytic
    from .leaves import (LeafChart, epsilon_leaf_map, growth_bound_check, invariant_variety_test,
                         isotropy_from_leaf_map, martinet_ramis_restriction, stokes_coefficients)

    params = _chart_params(args)
    n_max = 6 if args.N is None else args.N
    w_grid = [0.0, 0.1, 0.1j, -0.2 + 0.05j]
    data = None
    charts = {}
    for sign in (1, -1):
        ch = LeafChart.from_params(params, sign)
        charts[sign] = ch
        if args.epsilon == 0:
            iso = lambda x, y1, y2: (x, y1, y2)  # noqa: E731
        else:
            iso = isotropy_from_leaf_map(ch, epsilon_leaf_map(args.epsilon, sign))
        d = stokes_coefficients(iso, ch, n_max, w_grid, quad_tol=args.tol)
        data = d if data is None else data.merge(d)
    growth = growth_bound_check(data, charts[1], 0.3, 0.1, chart_minus=charts[-1])
    inv = invariant_variety_test(data, args.tol)
    rec = {"command": "stokes", "epsilon": args.epsilon, "n_max": n_max,
           "normalization_defect": data.normalization_defect(),
           "index_range_defect": data.index_range_defect(),
           "off_normalization_max": data.off_normalization_max(),
           "growth_ok": growth["ok"], "growth_violations": len(growth["violations"]),
           "invariant_varieties": inv}
    try:
        rec["martinet_ramis"] = martinet_ramis_restriction(data, args.tol)
    except HypersurfaceNotAnalytic as exc:
        rec["martinet_ramis"] = {"analytic": False, "reason": str(exc)}
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "stokes.json", data.to_dict())
        rec["files"] = ["stokes.json"]
    _emit(rec)
    return 0


def cmd_painleve1(args) -> int:
    from .painleve import kapaev_experimental, kapaev_jump_check, kapaev_target, painleve1_field, painleve1_pipeline

    N = 4 if args.N is None else args.N
    ny = 13 if args.ny is None else args.ny
    out = _out_dir(args)
    files = []
    if out is not None:
        _write_json(out / "p1.json", painleve1_field(N + 2, ny).to_dict())
        files.append("p1.json")
    res = painleve1_pipeline(N, ny, args.tol)
    if out is not None:
        _write_json(out / "params.json", res["result"].params.to_dict())
        _write_json(out / "map.json", res["result"].map.to_dict())
        files += ["params.json", "map.json"]
    T = kapaev_target()
    rec = {"command": "painleve1", "trunc_x": N, "trunc_y": ny, "residue": res["residue"],
           "residue_formal": res["residue_formal"], "divergence_defect": res["divergence_defect"],
           "lambda": res["lam"], "a1": res["a1"], "a2": res["a2"], "c": res["c"],
           "c1_plus_c2": res["c_sum_residual"], "det_defect": res["det_defect"],
           "kapaev_target": T, "kapaev_target_modulus": abs(T), "files": files}
    if args.experimental_kapaev:
        exp = kapaev_experimental()
        jump = kapaev_jump_check()
        exp["jump_check"] = jump
        exp["note"] = ("experimental, non-blocking: scale-free invariant Psi_{2,+,0}(0) Psi_{1,-,0}(0) "
                       "from large-order fits, compared with -i T^2")
        rec["experimental_kapaev"] = exp
    _emit(rec)
    return 0


def cmd_selftest(args) -> int:
    from .acceptance import CRITERIA

    wanted = set(range(1, len(CRITERIA) + 1)) if not args.criteria else set(args.criteria)
    bad = sorted(k for k in wanted if not 1 <= k <= len(CRITERIA))
    if bad:
        raise ValidationError(f"unknown criteria {bad}; valid numbers are 1..{len(CRITERIA)}")
    results = []
    for k in sorted(wanted):
        r = CRITERIA[k - 1]()
        sys.stderr.write(r.line() + "\n")
        results.append({"criterion": r.number, "name": r.name, "passed": r.passed})
    ok = all(r["passed"] for r in results)
    _emit({"command": "selftest", "results": results, "passed": ok})
    return 0 if ok else 1


# ----------------------------------------------------------------- parser
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--in", dest="inp", default=None, help="input JSON file")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--tol", type=_positive_float, default=1e-9, help="numerical tolerance")
    common.add_argument("--seed", type=_nonneg_int, default=0, help="seed for randomized sampling")

    p = _Parser(prog="saddlenode", description="Doubly-resonant saddle-node toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("normalize", parents=[common], help="formal normal form of a field file")
    s.add_argument("--N", type=_positive_int, default=None, help="x-order of the normalizing map")
    s.add_argument("--ny", type=_positive_int, default=None, help="y-order of the normalizing map")
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("borel-sum", parents=[common], help="Borel-Laplace sum of a series")
    s.add_argument("--euler", action="store_true", help="sum the Euler series sum (-1)^k k! x^(k+1)")
    s.add_argument("--terms", type=_positive_int, default=30, help="Euler series terms")
    s.add_argument("--theta", type=_finite_float, default=0.0, help="direction of summation (radians)")
    s.add_argument("--x", type=_complex_arg, default=None, help="evaluation point")
    s.add_argument("--y1", type=_complex_arg, default=0.0)
    s.add_argument("--y2", type=_complex_arg, default=0.0)
    s.set_defaults(func=cmd_borel_sum)

    s = sub.add_parser("sectorial-conjugate", parents=[common], help="sectorial normalizing maps and residuals")
    s.add_argument("--N", type=_positive_int, default=None, help="remainder order (default 4)")
    s.add_argument("--samples", type=_positive_int, default=10, help="sample points per sector")
    s.add_argument("--flatness", action="store_true", help="also fit the Phi+/Phi- flatness")
    s.set_defaults(func=cmd_sectorial_conjugate)

    s = sub.add_parser("stable-domain", parents=[common], help="stable domain constants and point cloud")
    s.add_argument("--a", type=_complex_arg, default=None, help="residue a1 + a2 (Re > 0)")
    s.add_argument("--r", type=_positive_float, default=0.05, help="sector radius")
    s.add_argument("--eps", type=_positive_float, default=0.3, help="excess opening")
    s.add_argument("--orientation", type=_orientation, default=1)
    s.add_argument("--samples", type=_positive_int, default=1000, help="sandwich test samples")
    s.add_argument("--grid", type=_positive_int, default=101, help="point cloud grid size per axis")
    s.set_defaults(func=cmd_stable_domain)

    s = sub.add_parser("stokes", parents=[common], help="Stokes coefficient functions of an isotropy")
    s.add_argument("--N", type=_positive_int, default=None, help="largest |n| (default 6)")
    s.add_argument("--epsilon", type=_finite_float, default=0.0,
                   help="synthetic isotropy parameter (0: identity)")
    s.set_defaults(func=cmd_stokes)

    s = sub.add_parser("painleve1", parents=[common], help="Painleve I pipeline")
    s.add_argument("--N", type=_positive_int, default=None, help="x-order of the map (default 4)")
    s.add_argument("--ny", type=_positive_int, default=None, help="y-order of the map (default 13)")
    s.add_argument("--experimental-kapaev", action="store_true", help="report the experimental Stokes estimate")
    s.set_defaults(func=cmd_painleve1)

    s = sub.add_parser("selftest", help="run the acceptance suite")
    s.add_argument("--criteria", type=_positive_int, nargs="*", default=None, help="subset of criteria")
    s.set_defaults(func=cmd_selftest)
    return p


def _diagnostic(exc: BaseException, code: int) -> None:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
                                sort_keys=True) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        thread_cap()
        parser = build_parser()
        if not argv or argv[0] in ("-h", "--help"):
            parser.print_help()
            return 0 if argv else 2
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        _diagnostic(exc, 2)
        return 2
    except SaddleNodeError as exc:
        _diagnostic(exc, 1)
        return 1
    except (ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        _diagnostic(exc, 1)
        return 1


if __name__ == "__main__":
    sys.exit(main())
