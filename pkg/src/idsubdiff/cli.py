"""Command-line front end: ``idsubdiff simulate | verify-operators | reference | equivalence``."""

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import exponents as ex
from . import memory_ops as mo
from . import reference as ref
from .config import load_config, lipschitz_check
from .errors import ConfigError, ParameterDomainError, SubdiffError
from .montecarlo import run_ensemble, run_equivalence_suite

MOMENT_COLUMNS = ("t", "mean", "mean_se", "var", "var_se", "n")
DENSITY_COLUMNS = ("bin_left", "bin_right", "density")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fmt(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def time_label(t):
    return format(t, "g")


def write_outputs(report, out_dir, formats):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "moments" in formats:
        path = out_dir / "moments.csv"
        _write_csv(path, MOMENT_COLUMNS,
                   [(m.t, m.mean, m.mean_se, m.var, m.var_se, m.n) for m in report.moments])
        written.append(path)
    if "density" in formats:
        for d in report.densities:
            path = out_dir / f"density_t{time_label(d.t)}.csv"
            _write_csv(path, DENSITY_COLUMNS, zip(d.bin_edges[:-1], d.bin_edges[1:], d.density))
            written.append(path)
    if "report" in formats:
        path = out_dir / "report.txt"
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        written.append(path)
    return written


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario,
                                                                      master_seed=args.seed))
    return cfg


def cmd_simulate(args):
    cfg = _load(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lipschitz_check(cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report = run_ensemble(cfg.scenario, workers=args.workers,
                          density_range=cfg.output.density_range, n_bins=cfg.output.bins)
    out = args.out or cfg.output.directory
    for path in write_outputs(report, out, cfg.output.formats):
        print(f"wrote {path}")
    for m in report.moments:
        print(f"t={m.t:g}  mean={_fmt(m.mean)}  var={_fmt(m.var)}  n={m.n}")
    failed = [k for k, v in report.verdicts.items() if not v["pass"]]
    for key, v in report.verdicts.items():
        print(f"{'PASS' if v['pass'] else 'FAIL'} {key}: measured {v['measured']:.6g}, "
              f"expected {v['expected']:.6g} +/- {v['tolerance']:.3g}")
    return EXIT_FAIL if failed else EXIT_OK


# --- verify-operators -------------------------------------------------------

TEST_FUNCTIONS = {
    "1": (lambda t: np.ones_like(t), lambda t: np.zeros_like(t)),
    "t": (lambda t: t, lambda t: np.ones_like(t)),
    "t^2": (lambda t: t * t, lambda t: 2.0 * t),
}


def _parse_mixture(text):
    try:
        pairs = [tuple(float(v) for v in item.split(":")) for item in text.split(",")]
    except ValueError:
        raise ConfigError(f"--mixture expects w:b,w:b,...; got {text!r}") from None
    if any(len(p) != 2 for p in pairs):
        raise ConfigError(f"--mixture expects w:b,w:b,...; got {text!r}")
    return pairs


def law_from_args(args):
    if args.law == "stable":
        return ex.LawSpec.stable(args.alpha)
    if args.law == "tempered":
        return ex.LawSpec.tempered(args.alpha, args.lam)
    return ex.LawSpec.distributed(_parse_mixture(args.mixture))


def verify_operators(law, h, horizon=1.0, tol=None):
    """Sup-norm errors of the two operator identities at h and h/2."""
    if tol is None:
        tol = 5e-3 if law.family is ex.Family.STABLE else 1e-2
    rows = []
    for name, (f, df) in TEST_FUNCTIONS.items():
        errs = []
        for step in (h, h / 2):
            grid = mo.TimeGrid.covering(horizon, step)
            errs.append(mo.check_phi_theta_identity(law, mo.SampledFunction.sample(f, grid)))
        grid = mo.TimeGrid.covering(horizon, h)
        leib = mo.check_leibniz_boundary(law, mo.SampledFunction.sample(f, grid),
                                         mo.SampledFunction.sample(df, grid))
        ratio = errs[0] / errs[1] if errs[1] > 0 else math.inf
        rows.append({"f": name, "error_h": errs[0], "error_h2": errs[1], "ratio": ratio,
                     "order": math.log2(ratio) if 0 < ratio < math.inf else math.nan,
                     "leibniz": leib, "pass": errs[0] < tol and leib < tol})
    return rows, tol


def cmd_verify_operators(args):
    law = law_from_args(args)
    rows, tol = verify_operators(law, args.h, args.horizon, args.tol)
    print(f"law={law.family.value} h={args.h:g} threshold={tol:g}")
    print(f"{'f':>4} {'err(h)':>11} {'err(h/2)':>11} {'ratio':>8} {'order':>7} {'leibniz':>11}")
    for r in rows:
        print(f"{r['f']:>4} {r['error_h']:11.3e} {r['error_h2']:11.3e} {r['ratio']:8.3f} "
              f"{r['order']:7.3f} {r['leibniz']:11.3e}  {'PASS' if r['pass'] else 'FAIL'}")
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_FAIL


# --- reference --------------------------------------------------------------

def reference_curves(cfg, case, n_points=401):
    """(filename, header, rows) triples for each observation time."""
    scn = cfg.scenario
    params = ref.classify_reference_case(scn, case)
    alpha = scn.law.alpha
    out = []
    for t in scn.obs_times:
        if case == "levy-flight":
            u = np.linspace(0.0, 5.0, n_points)
            cf = ref.levy_flight_cf(alpha, params["beta"], u, t, params["scale"])
            out.append((f"reference_levy-flight_t{time_label(t)}.csv", ("u", "abs_cf"),
                        list(zip(u, cf))))
            continue
        if case == "free":
            density = ref.free_density(params["sigma"])
            var = params["sigma"] ** 2 * t ** alpha / math.gamma(1.0 + alpha)
        else:
            density = ref.ou_density(params["sigma"], params["theta"])
            var = ref.subordination_integral(ref.ou_variance(params["sigma"], params["theta"]),
                                             alpha, t)
        half = 8.0 * math.sqrt(var)
        lo, hi = cfg.output.density_range or (-half, half)
        x = np.linspace(lo, hi, n_points)
        w = ref.subordination_curve(density, alpha, x, t)
        out.append((f"reference_{case}_t{time_label(t)}.csv", ("x", "density"), list(zip(x, w))))
    return out


def cmd_reference(args):
    cfg = _load(args)
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, header, rows in reference_curves(cfg, args.case):
        _write_csv(out / name, header, rows)
        xs = np.array([r[0] for r in rows])
        ys = np.array([r[1] for r in rows])
        if args.case == "levy-flight":
            print(f"wrote {out / name}  |cf|(1) = {np.interp(1.0, xs, ys):.6g}")
        else:
            mass = float(np.trapezoid(ys, xs))
            var = float(np.trapezoid(ys * xs * xs, xs))
            print(f"wrote {out / name}  mass = {mass:.6f}  variance = {var:.6g}")
    return EXIT_OK


# --- equivalence ------------------------------------------------------------

def cmd_equivalence(args):
    cfg = _load(args)
    verdicts = run_equivalence_suite(cfg.scenario, n_per_arm=args.n_per_arm, workers=args.workers)
    for v in verdicts:
        print(f"t={v.t:g}  D={v.statistic:.5f}  critical={v.critical:.5f}  "
              f"{'PASS' if v.passed else 'FAIL'}")
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="idsubdiff",
                                     description="Subordinated Langevin simulation and checks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo ensemble from a config file")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory (overrides [output] directory)")
    p.add_argument("--seed", type=int, help="master seed (overrides [ensemble] seed)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-operators", help="check the discrete memory operators")
    p.add_argument("--law", choices=[f.value for f in ex.Family], default="stable")
    p.add_argument("--alpha", type=float, default=0.7)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mixture", default="0.5:0.3,0.5:0.8", help="w:b pairs for distributed order")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--tol", type=float, help="error threshold (default 5e-3, 1e-2 non-stable)")
    p.set_defaults(func=cmd_verify_operators)

    p = sub.add_parser("reference", help="emit semi-analytic reference curves")
    p.add_argument("config")
    p.add_argument("--case", choices=ref.CASES, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("equivalence", help="KS test of the two process representations")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-per-arm", type=int, help="paths per arm (default: [ensemble] n_paths)")
    p.set_defaults(func=cmd_equivalence)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SubdiffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
