"""Command-line interface: ``bwlab <subcommand> [flags]``.

Exit status 0 on success, 2 on invalid input, 3 when a numerical guard
refuses to produce a result. Every subcommand accepts --seed, --out,
--workers, --dry-run and --config (a JSON object whose keys mirror the
long flags; flags given on the command line win).
"""

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from . import curvature, diophantine, dynamics, harmonic, spectra, weyl_qe
from . import quaternion as quat
from ._validation import GuardError, ValidationError
from .lie_core import GroupSpec, Weight

MODELS = ("u1-flat-circle", "su2-flat-circle", "magnetic-torus")


# --------------------------------------------------------------------------
# parsing helpers


def _alpha(text):
    """Holonomy angle: float, p/q fraction, or liouville:J."""
    text = str(text)
    if text.startswith("liouville:"):
        return spectra.liouville_alpha(int(text.split(":", 1)[1])).alpha
    if "/" in text:
        return Fraction(text)
    return float(text)


def _floats(text, n=None):
    vals = [float(v) for v in str(text).split(",")]
    if n is not None and len(vals) != n:
        raise ValidationError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _ints(text):
    return [int(v) for v in str(text).split(",")]


def _model(args):
    if args.model == "u1-flat-circle":
        return spectra.U1FlatCircle(_alpha(args.alpha))
    if args.model == "su2-flat-circle":
        return spectra.SU2FlatCircle(tuple(quat.normalize(np.array(_floats(args.holonomy, 4)))))
    return spectra.MagneticTorus(args.m, args.grid, tuple(_floats(args.sides, 2)))


def _weight(model, k):
    if isinstance(model, spectra.SU2FlatCircle):
        return Weight((), (k,))
    return Weight((k,), ())


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_model_flags(p):
    p.add_argument("--model", choices=MODELS, default="u1-flat-circle")
    p.add_argument("--alpha", default="0.5", help="float, p/q or liouville:J")
    p.add_argument("--holonomy", default="1,0,0,0", help="unit quaternion w,x,y,z")
    p.add_argument("--m", type=int, default=1, help="magnetic flux per unit weight")
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--sides", default="1,1")


# --------------------------------------------------------------------------
# subcommands


def cmd_spec(args):
    model = _model(args)
    if args.classify:
        return _classify_model(args, model)
    table = model.spectrum(_weight(model, args.k), args.count)
    _emit(args, table.to_csv())
    print(f"spec: {len(table)} eigenvalues, lambda1 = {table.lambda1!r}", file=sys.stderr)
    return 0


def _classify_model(args, model):
    if not isinstance(model, spectra.U1FlatCircle):
        raise ValidationError("--classify is implemented for u1-flat-circle")
    ks = set(range(1, args.kmax + 1))
    witnesses = ()
    if str(args.alpha).startswith("liouville:"):
        data = spectra.liouville_alpha(int(str(args.alpha).split(":")[1]))
        witnesses = data.witnesses
        ks |= {w.k for w in witnesses}
    pairs = spectra.lambda1_series(model.alpha, sorted(ks))
    result = spectra.classify_growth(pairs)
    out = {"classification": type(result).__name__, "result": _jsonable(result)}
    if witnesses:
        out["witnesses"] = [
            {"j": w.j, "k": w.k, "p": w.p, "residual": str(w.residual), "bound": str(w.bound), "holds": w.holds}
            for w in witnesses
        ]
    _emit(args, json.dumps(out, sort_keys=True) + "\n")
    print(f"classify: {type(result).__name__}", file=sys.stderr)
    return 0


def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    if isinstance(obj, (tuple, list)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def cmd_classify(args):
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            rows = [line.strip().split(",") for line in fh if line.strip() and not line.startswith("norm")]
        pairs = [(float(a), float(b)) for a, b in rows]
    else:
        args.model = "u1-flat-circle"
        return _classify_model(args, spectra.U1FlatCircle(_alpha(args.alpha)))
    result = spectra.classify_growth(pairs)
    _emit(args, json.dumps({"classification": type(result).__name__, "result": _jsonable(result)}, sort_keys=True) + "\n")
    print(f"classify: {type(result).__name__}", file=sys.stderr)
    return 0


def cmd_fmin(args):
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            field = curvature.CurvatureField.from_csv(fh.read())
    elif args.field == "magnetic-torus":
        field = curvature.magnetic_torus_field(args.m, args.grid)
    else:
        field = curvature.constant_u1_field(args.B, args.grid)
    value = curvature.f_min(field, args.chamber_resolution)
    nondeg = curvature.globally_nondegenerate(field)
    _emit(args, json.dumps({"f_min": value, "nondegenerate": nondeg}, sort_keys=True) + "\n")
    print(f"fmin: {value!r}", file=sys.stderr)
    return 0


def _generators(text, group):
    text = str(text)
    if text.startswith("random:"):
        seed = int(text.split("seed=")[1]) if "seed=" in text else 0
        return diophantine.random_su2_generators(seed)
    if text.startswith("liouville:"):
        return [(spectra.liouville_alpha(int(text.split(":")[1])).alpha,)]
    gens = [_floats(g) for g in text.split(";")]
    if group == "torus":
        return [tuple(g) for g in gens]
    return np.array(gens)


def cmd_density(args):
    space = "torus" if args.group == "torus" else "su2"
    gens = _generators(args.generators, args.group)
    ns = _ints(args.ns) if args.ns else list(range(2, args.nmax + 1))
    ns, lows, highs = diophantine.measure_density(gens, ns, space, measure_space=args.group)
    record = diophantine.density_exponent_fit(ns, lows, radii_high=highs)
    _emit(args, record.to_csv())
    stalls = diophantine.stall_windows(ns, lows)
    print(f"density: alpha_hat = {record.fitted_alpha!r} over n in {record.fit_window}, stall windows = {stalls}", file=sys.stderr)
    return 0


def cmd_fourier_check(args):
    g = GroupSpec(args.a, args.b)
    quad = harmonic.HaarQuadrature.build(g, args.band)
    rng = np.random.default_rng(args.seed)
    worst_planch, worst_round = 0.0, 0.0
    first = None
    for _ in range(args.functions):
        f, _blocks = harmonic.random_band_limited(g, args.band, quad, 1, rng)
        blocks = [harmonic.fourier_transform(f, quad, blk.weight) for blk in _blocks]
        lhs, rhs = harmonic.plancherel_sides(f, quad, blocks)
        back = harmonic.inverse_fourier(blocks, g, quad.nodes)
        worst_planch = max(worst_planch, abs(lhs - rhs) / lhs)
        worst_round = max(worst_round, float(np.max(np.abs(back - f))))
        first = first or blocks
    _emit(args, "[" + ",".join(b.to_json() for b in first) + "]\n")
    print(f"fourier-check: plancherel rel err {worst_planch:.3e}, round-trip sup err {worst_round:.3e}", file=sys.stderr)
    return 0


def _cocycle(text):
    text = str(text)
    if text.startswith("constant:"):
        return dynamics.U1Cocycle(float(text.split(":")[1]))
    if text == "cos":
        return dynamics.U1Cocycle.cos_x1()
    if text == "two-bump":
        return dynamics.SU2Cocycle.two_bump()
    raise ValidationError(f"unknown cocycle {text!r}; use constant:c, cos or two-bump")


def cmd_correlate(args):
    system = dynamics.SkewSystem(_cocycle(args.cocycle))
    m1 = tuple(_ints(args.mode))
    m2 = tuple(_ints(args.mode2)) if args.mode2 else m1
    fib2 = args.fiber if args.fiber2 is None else args.fiber2
    f1, f2 = dynamics.Observable(m1, args.fiber), dynamics.Observable(m2, fib2)
    series = dynamics.correlation(system, f1, f2, args.tmax, args.samples, args.seed, args.workers)
    _emit(args, series.to_csv())
    print(f"correlate: |C_{args.tmax}| = {abs(series.values[-1]):.3e} +- {series.stderr[-1]:.1e}", file=sys.stderr)
    return 0


def cmd_weyl_count(args):
    model = _model(args)
    k = _weight(model, args.k)
    table = weyl_qe.deep_table(model, k, args.b / args.h**2)
    n, ratio = weyl_qe.weyl_count(table, args.h, args.a, args.b, model)
    _emit(args, json.dumps({"count": n, "ratio": ratio, "h": args.h, "a": args.a, "b": args.b}, sort_keys=True) + "\n")
    print(f"weyl-count: N = {n}, ratio = {ratio!r}", file=sys.stderr)
    return 0


def cmd_omega(args):
    model = _model(args)
    omega = weyl_qe.build_omega(model, args.R)
    _emit(args, omega.to_json() + "\n")
    lo = min(10.0, args.R / 4)
    growth = weyl_qe.omega_growth(omega, np.geomspace(lo, args.R, 12))
    print(f"omega: #C(R) = {omega.count_square()}, slope = {growth.slope!r}, r = {growth.r}", file=sys.stderr)
    return 0


def _observable(name):
    if name == "cos":
        return lambda p: np.cos(2 * np.pi * p[:, 0])
    if name == "bump":
        return lambda p: np.exp(np.cos(2 * np.pi * (p[:, 0] - 0.5)) - 1.0)
    if name == "constant":
        return lambda p: np.ones(len(p))
    raise ValidationError(f"unknown observable {name!r}")


def cmd_qe_variance(args):
    model = _model(args)
    grid = args.grid if isinstance(model, spectra.U1FlatCircle) else None
    omega = weyl_qe.build_omega(model, args.R, eigenvectors=True, grid=grid)
    radii = np.linspace(args.R / 4, args.R, 4) if not args.radii else _floats(args.radii)
    _emit(args, weyl_qe.variance_curve_csv(omega, _observable(args.observable), radii))
    print(f"qe-variance: {weyl_qe.qe_variance(omega, _observable(args.observable))!r}", file=sys.stderr)
    return 0


def cmd_flow(args):
    state = weyl_qe.FlowState(
        tuple(_floats(args.x, 2)), tuple(_floats(args.xi, 2)), h=args.h, k=args.k, curvature=args.curvature
    )
    final, t, X, P = weyl_qe.integrate(state, args.dt, args.steps, args.record_every)
    _emit(args, weyl_qe.flow_trace_csv(t, X, P))
    drift = abs(final.energy - state.energy) / max(state.energy, 1e-300)
    print(f"flow: energy drift {drift:.3e}, cyclotron radius {state.cyclotron_radius()!r}", file=sys.stderr)
    return 0


COMMANDS = {
    "spec": cmd_spec,
    "classify": cmd_classify,
    "fmin": cmd_fmin,
    "density": cmd_density,
    "fourier-check": cmd_fourier_check,
    "correlate": cmd_correlate,
    "weyl-count": cmd_weyl_count,
    "omega": cmd_omega,
    "qe-variance": cmd_qe_variance,
    "flow": cmd_flow,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--workers", type=int, default=None, help="default: $BWLAB_WORKERS or CPU count")
    common.add_argument("--dry-run", action="store_true", help="validate the configuration and exit")
    common.add_argument("--config", default=None, help="JSON file of flag values")

    parser = argparse.ArgumentParser(prog="bwlab", description="Spectral and dynamical computations on model principal bundles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spec", parents=[common], help="twisted Laplacian spectrum of a model")
    _add_model_flags(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--classify", action="store_true")
    p.add_argument("--kmax", type=int, default=32)

    p = sub.add_parser("classify", parents=[common], help="growth class of lambda_1 along |k|")
    p.add_argument("--input", default=None, help="CSV of norm,lambda1 rows")
    p.add_argument("--alpha", default="0.5")
    p.add_argument("--kmax", type=int, default=32)

    p = sub.add_parser("fmin", parents=[common], help="curvature invariant F_min")
    p.add_argument("--field", choices=("magnetic-torus", "constant-u1"), default="magnetic-torus")
    p.add_argument("--input", default=None, help="curvature field CSV")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--chamber-resolution", type=int, default=16)

    p = sub.add_parser("density", parents=[common], help="covering radii of word balls")
    p.add_argument("--group", choices=("su2", "s2", "torus"), default="su2")
    p.add_argument("--generators", default="random:seed=7")
    p.add_argument("--nmax", type=int, default=8)
    p.add_argument("--ns", default=None, help="comma-separated word lengths (overrides --nmax)")

    p = sub.add_parser("fourier-check", parents=[common], help="Plancherel and inversion on U(1)^a x SU(2)^b")
    p.add_argument("--a", type=int, default=1)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--band", type=int, default=4)
    p.add_argument("--functions", type=int, default=3)

    p = sub.add_parser("correlate", parents=[common], help="correlation function of a skew product")
    p.add_argument("--cocycle", default="cos")
    p.add_argument("--mode", default="0,0")
    p.add_argument("--fiber", type=int, default=1)
    p.add_argument("--mode2", default=None)
    p.add_argument("--fiber2", type=int, default=None)
    p.add_argument("--tmax", type=int, default=30)
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("weyl-count", parents=[common], help="eigenvalue count against the Weyl formula")
    _add_model_flags(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)

    p = sub.add_parser("omega", parents=[common], help="eigendata set Omega to radius R")
    _add_model_flags(p)
    p.add_argument("--R", type=float, default=40.0)

    p = sub.add_parser("qe-variance", parents=[common], help="quantum-ergodicity variance curve")
    _add_model_flags(p)
    p.add_argument("--R", type=float, default=10.0)
    p.add_argument("--observable", choices=("cos", "bump", "constant"), default="cos")
    p.add_argument("--radii", default=None)

    p = sub.add_parser("flow", parents=[common], help="twisted Hamiltonian flow trace")
    p.add_argument("--x", default="0,0")
    p.add_argument("--xi", default="1,0")
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--curvature", type=float, default=2 * np.pi)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--record-every", type=int, default=1)
    return parser


_POSITIVE = ("count", "grid", "kmax", "nmax", "band", "functions", "samples", "steps", "record_every", "m")
_POSITIVE_REAL = ("h", "dt", "R")


def _validate(args):
    """Range checks shared by --dry-run and real runs."""
    for name in _POSITIVE:
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise ValidationError(f"--{name.replace('_', '-')} must be >= 1")
    for name in _POSITIVE_REAL:
        v = getattr(args, name, None)
        if v is not None and not v > 0:
            raise ValidationError(f"--{name} must be > 0")
    if getattr(args, "samples", None) is not None and args.samples < 10_000:
        raise ValidationError("--samples must be >= 10000")
    if hasattr(args, "model"):
        _model(args)
    if args.command == "flow":
        weyl_qe._check_dt(
            weyl_qe.FlowState(tuple(_floats(args.x, 2)), tuple(_floats(args.xi, 2))), args.dt
        )


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            conf = json.load(fh)
        if not isinstance(conf, dict):
            raise ValidationError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(k.replace("-", "_") for k in conf) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in conf.items()})
        args = parser.parse_args(argv)
    if args.workers is None:
        args.workers = dynamics.default_workers()
    if args.workers < 1:
        raise ValidationError("--workers must be >= 1")
    return args


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
        _validate(args)
        if args.dry_run:
            print(f"{args.command}: configuration valid", file=sys.stderr)
            return 0
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GuardError as exc:
        print(f"guard: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
