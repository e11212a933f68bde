"""Command-line runner: symbolic queries, orbit dumps, equidistribution reports.

Exit status 0 on success, 2 on validation/parse/range errors, 3 when the
numeric magnitude budget is exceeded.  A header with the input hash and
the thresholds in force goes to stderr for every run.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import random
import sys
from fractions import Fraction
from importlib import resources

import jsonschema
import numpy as np

from . import equidist
from .errors import NilsamplerError, NumericBudgetError
from .hardy import Growth, as_expr, compare, evaluate
from .nilgroup import positions
from .normal_form import check_property_p_w, choose_w, normal_form, simple_normal_form, verify_normal_form
from .orbit import compile_orbit, generate, spec_from_json, validate
from .scalars import format_scalar
from .schemes import IDENTITY, parse_scheme

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("nilsampler")


def load_schema(name: str) -> dict:
    return json.loads(resources.files("nilsampler").joinpath("schemas", f"{name}.schema.json").read_text())


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def spec_hash(obj) -> str:
    return hashlib.sha256(canonical(obj).encode()).hexdigest()[:16]


def header(h: str, thresholds: dict) -> None:
    print(f"# spec_hash {h} thresholds {canonical(thresholds)}", file=sys.stderr)


def load_config(path: str) -> dict:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: not valid JSON ({exc})") from None
    try:
        jsonschema.validate(cfg, load_schema("config"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigInvalid(f"{path}: {where}: {exc.message}") from None
    return cfg


class ConfigInvalid(ValueError):
    pass


def _thresholds(cfg: dict) -> equidist.Thresholds:
    t = cfg.get("analysis", {}).get("thresholds", {})
    return equidist.Thresholds(weyl=t.get("weyl", 0.02), discrepancy=t.get("discrepancy", 0.02))


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


# ------------------------------------------------------------- symbolic

def _relation_text(rel) -> str:
    if rel.kind is Growth.STRICTLY_SLOWER:
        return "strictly slower"
    if rel.kind is Growth.STRICTLY_FASTER:
        return "strictly faster"
    if rel.kind is Growth.EQUAL:
        return "equal"
    return f"same order (limit {format_scalar(rel.limit)})"


def cmd_compare(args) -> int:
    header(spec_hash(["compare", args.f, args.g]), {"cancel_tol": "2^-90"})
    print(_relation_text(compare(as_expr(args.f), as_expr(args.g))))
    return EXIT_OK


def cmd_diff(args) -> int:
    header(spec_hash(["diff", args.f, args.order]), {"cancel_tol": "2^-90"})
    print(as_expr(args.f).differentiate(args.order))
    return EXIT_OK


def cmd_eval(args) -> int:
    header(spec_hash(["eval", args.f, args.t, args.precision]), {"precision": args.precision})
    v = evaluate(as_expr(args.f), args.t, args.precision)
    if isinstance(v, Fraction):
        from mpmath import mp, mpf
        with mp.workprec(120):
            print(mp.nstr(mpf(v.numerator) / v.denominator, 32))
    else:
        print(repr(v))
    return EXIT_OK


def nf_to_json(fs, nf) -> dict:
    return {
        "input": [str(f) for f in fs],
        "g": [str(x) for x in nf.g],
        "lambda": [[format_scalar(c) for c in row] for row in nf.lam],
        "p": [str(x) for x in nf.p],
        "ell": list(nf.ell),
        "residual": [str(x) for x in nf.residual(fs)],
    }


def cmd_normal_form(args) -> int:
    header(spec_hash(["normal-form", args.simple] + args.f), {"cancel_tol": "2^-90"})
    fs = [as_expr(f) for f in args.f]
    nf = simple_normal_form(fs) if args.simple else normal_form(fs)
    out = nf_to_json(fs, nf)
    out["failures"] = verify_normal_form(fs, nf, closed=not args.simple)
    print(_dump(out))
    return EXIT_OK


def report_to_json(rep) -> dict:
    w = rep.witness
    return {
        "holds": rep.holds,
        "scheme": rep.scheme.name,
        "witness": None if w is None else {
            "coefficients": [format_scalar(c) for c in w.coefficients],
            "orders": list(w.orders),
            "combination": str(w.combination),
            "non_polynomial": str(w.non_polynomial),
            "classification": w.classification,
        },
    }


def cmd_check_p(args) -> int:
    scheme = parse_scheme(args.w) if args.w else IDENTITY
    header(spec_hash(["check-p", scheme.name] + args.f), {"cancel_tol": "2^-90"})
    rep = check_property_p_w([as_expr(f) for f in args.f], scheme)
    print(_dump(report_to_json(rep)))
    return EXIT_OK


def cmd_choose_w(args) -> int:
    header(spec_hash(["choose-w"] + args.f), {"cancel_tol": "2^-90"})
    print(choose_w([as_expr(f) for f in args.f]).name)
    return EXIT_OK


# ---------------------------------------------------------------- orbits

def _spec(cfg):
    return spec_from_json({k: v for k, v in cfg.items() if k not in ("analysis", "output", "sweep_q")})


def cmd_orbit(args) -> int:
    cfg = load_config(args.config)
    header(spec_hash(cfg), {"magnitude_limit": 1e20})
    spec = _spec(cfg)
    for d in validate(spec):
        print(f"{'ok  ' if d.ok else 'FAIL'} {d.name}" + (f": {d.detail}" if d.detail else ""))
    path = args.dump or cfg.get("output", {}).get("dump")
    if path:
        co = compile_orbit(spec, args.precision)
        names = ["n"] + [f"x{i + 1}_{j + 1}" for i, j in positions(spec.dim)]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(names) + "\n")
            for ch in generate(co, threads=args.threads):
                block = np.column_stack([ch.n.astype(np.float64), ch.coords])
                np.savetxt(fh, block, delimiter=",", fmt=["%d"] + ["%.17g"] * ch.coords.shape[1])
        print(f"wrote {path}")
    return EXIT_OK


def _runs(cfg, spec):
    qs = cfg.get("sweep_q")
    if not qs:
        return [spec]
    return [spec.with_progression(q, r) for q in qs for r in range(q)]


def cmd_equidist(args) -> int:
    cfg = load_config(args.config)
    th = _thresholds(cfg)
    analysis = cfg.get("analysis", {})
    K = analysis.get("K", 5)
    mode = analysis.get("discrepancy", "auto")
    h = spec_hash(cfg)
    header(h, {"weyl": th.weyl, "discrepancy": th.discrepancy, "K": K})
    spec = _spec(cfg)
    runs, rows = [], []
    for sp in _runs(cfg, spec):
        rep, series = equidist.criterion_check(sp, K, th, threads=args.threads, series=True,
                                               mode=mode, precision=args.precision)
        runs.append(rep.to_json())
        rows.extend((sp.q, sp.r, row) for row in series)
    out = {
        "spec_hash": h,
        "thresholds": {"weyl": th.weyl, "discrepancy": th.discrepancy},
        "runs": runs,
        "consistent": all(r["verdicts"]["consistent"] for r in runs),
        "diagnostics": [{"name": d.name, "ok": d.ok, "detail": d.detail} for d in validate(spec)],
    }
    jsonschema.validate(out, load_schema("report"))
    text = json.dumps(out, sort_keys=True, indent=2) + "\n"
    path = args.report or cfg.get("output", {}).get("report")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    spath = args.series or cfg.get("output", {}).get("series")
    if spath:
        with open(spath, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["q", "r", "n", "count", "weight", "abs_weyl_first", "max_abs_weyl"])
            for q, r, row in rows:
                wr.writerow([q, r, row.n, row.count, repr(row.weight), repr(row.abs_weyl_first),
                             repr(row.max_abs_weyl)])
    for r in runs:
        v = r["verdicts"]
        print(f"q={r['progression'][0]} r={r['progression'][1]} torus={v['torus']} full={v['full']} "
              f"consistent={v['consistent']}", file=sys.stderr)
    return EXIT_OK


def cmd_vdc(args) -> int:
    cfg = load_config(args.config)
    vcfg = cfg.get("analysis", {}).get("vdc", {})
    H = args.H or vcfg.get("H", 100)
    spec = _spec(cfg)
    k = [int(v) for v in args.k.split(",")] if args.k else vcfg.get("k") or [1] + [0] * (spec.dim - 2)
    if len(k) != spec.dim - 1:
        raise ConfigInvalid(f"frequency needs {spec.dim - 1} entries, got {len(k)}")
    h = spec_hash([cfg, H, k])
    header(h, {"vdc_c": equidist.VDC_C, "vdc_tol": equidist.VDC_TOL})
    co = compile_orbit(spec, args.precision)
    u, w = equidist.torus_sequence(co, k, threads=args.threads)
    table = equidist.vdc_correlations(u, w, H)
    out = table.to_json()
    out["k"] = k
    out["spec_hash"] = h
    print(_dump(out))
    return EXIT_OK


# -------------------------------------------------------------- selftest

def _random_expr(rng: random.Random):
    from .hardy import HardyExpr
    f = HardyExpr()
    for _ in range(rng.randint(1, 3)):
        a = Fraction(rng.randint(0, 8), rng.choice([1, 2, 3]))
        b = rng.randint(0, 2)
        c = Fraction(rng.randint(-5, 5) or 1, rng.randint(1, 4))
        f = f + HardyExpr.monomial(a, b, c)
    return f


def cmd_selftest(args) -> int:
    from .nilgroup import GroupElement, exp_nilpotent, log_nilpotent, reduce_mod_lattice
    header(spec_hash(["selftest", args.seed, args.count]), {"cancel_tol": "2^-90", "group_tol": "2^-80"})
    rng = random.Random(args.seed)
    failures = []
    for i in range(args.count):
        fs = [e for e in (_random_expr(rng) for _ in range(rng.randint(1, 3))) if not e.is_zero()]
        if not fs:
            continue
        nf = normal_form(fs)
        bad = verify_normal_form(fs, nf)
        if bad:
            failures.append(f"normal_form {[str(f) for f in fs]}: {bad}")
        f = fs[0]
        if f.differentiate().integrate().differentiate() != f.differentiate():
            failures.append(f"integrate/differentiate round trip for {f}")
        dim = rng.randint(2, 5)
        ents = {(a, b): Fraction(rng.randint(-300, 300), 100) for a, b in positions(dim)}
        g = GroupElement(dim, ents, exact=True)
        back = exp_nilpotent(log_nilpotent(g))
        if back.max_abs_diff(g) > Fraction(1, 2**80):
            failures.append(f"exp/log round trip in dim {dim}")
        gamma_ents = {(a, b): Fraction(rng.randint(-3, 3)) for a, b in positions(dim)}
        gamma = GroupElement(dim, gamma_ents, exact=True)
        c1, _ = reduce_mod_lattice(g)
        c2, _ = reduce_mod_lattice(g * gamma)
        if c1.values != c2.values:
            failures.append(f"coset invariance in dim {dim}")
    for msg in failures:
        print(f"FAIL {msg}")
    print(f"selftest seed={args.seed} cases={args.count} failures={len(failures)}")
    return EXIT_OK if not failures else EXIT_FAIL


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nilsampler", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="worker threads for orbit generation")
    p.add_argument("--seed", type=int, default=0, help="seed for the randomized selftest")
    p.add_argument("--precision", choices=["standard", "extended"], default="extended")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("compare", help="growth relation between f and g")
    s.add_argument("f")
    s.add_argument("g")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("diff", help="derivative of f")
    s.add_argument("f")
    s.add_argument("-n", "--order", type=int, default=1)
    s.set_defaults(func=cmd_diff)

    s = sub.add_parser("eval", help="evaluate f at t")
    s.add_argument("f")
    s.add_argument("t")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("normal-form", help="derivative-closed normal form as JSON")
    s.add_argument("f", nargs="+")
    s.add_argument("--simple", action="store_true", help="simple normal form only")
    s.set_defaults(func=cmd_normal_form)

    s = sub.add_parser("check-p", help="decide property (P) or (P_W)")
    s.add_argument("f", nargs="+")
    s.add_argument("--w", help="scheme: cesaro, log, loglog, powlog:<gamma>")
    s.set_defaults(func=cmd_check_p)

    s = sub.add_parser("choose-w", help="first catalogue scheme satisfying the window condition")
    s.add_argument("f", nargs="+")
    s.set_defaults(func=cmd_choose_w)

    s = sub.add_parser("orbit", help="validate a config and optionally dump points")
    s.add_argument("config")
    s.add_argument("--dump", help="CSV path for reduced coordinates")
    s.set_defaults(func=cmd_orbit)

    s = sub.add_parser("equidist", help="torus and full equidistribution report")
    s.add_argument("config")
    s.add_argument("--report", help="JSON output path (stdout if omitted)")
    s.add_argument("--series", help="CSV of running Weyl sums per chunk")
    s.set_defaults(func=cmd_equidist)

    s = sub.add_parser("vdc", help="van der Corput correlation table")
    s.add_argument("config")
    s.add_argument("-H", type=int, default=None)
    s.add_argument("--k", help="torus frequency, comma separated")
    s.set_defaults(func=cmd_vdc)

    s = sub.add_parser("selftest", help="randomized property checks")
    s.add_argument("--count", type=int, default=50)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except NumericBudgetError as exc:
        print(f"error: numeric budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NilsamplerError, ConfigInvalid, jsonschema.ValidationError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
