"""star-forge command line.

Every subcommand builds a result dictionary (rationals as "p/q" strings) and a
text rendering of it; ``--format json`` prints the dictionary instead.
Exit status: 0 success, 1 domain error, 2 parse or usage error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from itertools import permutations

from .algebra import SymplecticFrame, WeylSeries, format_rational, moyal_product, star_commutator
from .errors import ParseError, StarForgeError
from .parser import parse_series

DEFAULTS = {
    "n": 1,
    "N": 6,
    "lambda": "minus",
    "format": "text",
    "grid": 33,
    "seed": 0,
    "K": 4,
    "degree": 2,
}

HELP_DEFAULTS = ", ".join(f"{k}={v}" for k, v in DEFAULTS.items())


class UsageError(Exception):
    pass


def _rat(x):
    return format_rational(x)


def _matrix_json(m):
    return [[_rat(x) for x in row] for row in m]


def _parse_matrix(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"matrix must be a JSON list of rows: {exc}") from None
    if not isinstance(data, list) or not all(isinstance(r, list) for r in data):
        raise UsageError("matrix must be a list of rows")
    try:
        return [[Fraction(str(x)) for x in row] for row in data]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad matrix entry: {exc}") from None


def read_config(path):
    """key = value lines; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected key = value", lineno, 1)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in DEFAULTS:
                raise ParseError(f"unknown config key {key!r}", lineno, 1)
            out[key] = value
    return out


def _coerce(cfg):
    out = dict(cfg)
    for key in ("n", "N", "grid", "seed", "K", "degree"):
        try:
            out[key] = int(out[key])
        except (TypeError, ValueError):
            raise UsageError(f"{key} must be an integer") from None
    if out["n"] < 1:
        raise UsageError("n must be at least 1")
    if out["N"] < 0:
        raise UsageError("N must be non-negative")
    if out["format"] not in ("text", "json"):
        raise UsageError("format must be text or json")
    return out


def make_frame(cfg, n=None):
    n = n or cfg["n"]
    lam = cfg["lambda"]
    if lam in ("minus", "plus"):
        return SymplecticFrame.named(lam, n)
    m = _parse_matrix(lam)
    if len(m) != 2 * n:
        raise UsageError(f"lambda must be {2 * n}x{2 * n}")
    return SymplecticFrame(m)


def _frame_json(frame):
    return {"n": frame.dim_n, "convention": frame.convention, "lambda": _matrix_json(frame.lam)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_star(args, cfg):
    frame = make_frame(cfg)
    a = parse_series(args.a, frame, cfg["N"])
    b = parse_series(args.b, frame, cfg["N"])
    res = moyal_product(a, b, frame)
    return {"product": res.canonical_text()}, [res.canonical_text()]


def cmd_commutator(args, cfg):
    frame = make_frame(cfg)
    a = parse_series(args.a, frame, cfg["N"])
    b = parse_series(args.b, frame, cfg["N"])
    res = star_commutator(a, b, frame)
    return {"commutator": res.canonical_text()}, [res.canonical_text()]


def cmd_sharp(args, cfg):
    from .weyl_functions import sharp
    frame = make_frame(cfg)
    f = parse_series(args.f, frame)
    res = sharp(f, frame, cfg["N"])
    return {"continuation": res.canonical_text()}, [res.canonical_text()]


def cmd_bch(args, cfg):
    from .group import GroupExponent, bch_compose
    frame = make_frame(cfg)
    N = cfg["N"]
    H1 = GroupExponent.from_series(parse_series(args.h1, frame), frame, N)
    H2 = GroupExponent.from_series(parse_series(args.h2, frame), frame, N)
    H = bch_compose(H1, H2)
    res = {"H": H.series.canonical_text(), "g": H.g_part.canonical_text(), "f": H.f_part.canonical_text()}
    return res, [f"H = {res['H']}", f"g = {res['g']}", f"f = {res['f']}"]


def cmd_factorize(args, cfg):
    from .group import factorize_automorphism, realize
    frame = make_frame(cfg)
    N = cfg["N"]
    width = 2 * frame.dim_n
    if args.images:
        if len(args.images) != width:
            raise UsageError(f"need {width} images, got {len(args.images)}")
        images = [parse_series(s, frame, N) for s in args.images]
    else:
        A = _parse_matrix(args.A) if args.A else [[Fraction(int(i == j)) for j in range(width)]
                                                    for i in range(width)]
        F = parse_series(args.F, frame) if args.F else WeylSeries.zero(frame.dim_n)
        images = realize(A, F, frame, N)
    data = factorize_automorphism(images, frame)
    res = {"A": _matrix_json(data.A), "c": _rat(data.c_part), "F": data.F_part.canonical_text(),
           "images": [img.canonical_text() for img in images]}
    lines = ["A = " + json.dumps(res["A"]), f"c = {res['c']}", f"F = {res['F']}"]
    return res, lines


def curvature_battery(name, frame, N):
    """Named curvature inputs: zero, constant nu^2 2-form, curvature of a constant connection."""
    from .fedosov import FedosovState, connection_curvature, gamma_from_symmetric
    n = frame.dim_n
    width = 2 * n
    if name == "zero":
        return None, WeylSeries.zero(n)
    if name == "nu2":
        return None, WeylSeries.monomial(n, 3, nu=2, forms=(0, 1))
    if name == "quadratic":
        T = [[[Fraction(0)] * width for _ in range(width)] for _ in range(width)]
        for idx, v in (((0, 0, 0), 1), ((0, 0, 1), Fraction(1, 2)), ((1, 1, 1), -1)):
            for p in set(permutations(idx)):
                T[p[0]][p[1]][p[2]] = Fraction(v)
        gamma = gamma_from_symmetric(T, frame)
        R = connection_curvature(FedosovState(frame, WeylSeries.zero(n), N, gamma))
        return gamma, R
    raise UsageError(f"unknown battery {name!r}")


def _load_state(path, cfg):
    from .fedosov import FedosovState
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    n = int(data.get("n", cfg["n"]))
    lam = data.get("lambda", cfg["lambda"])
    frame = make_frame(dict(cfg, **{"lambda": lam if isinstance(lam, str) else json.dumps(lam)}), n)
    N = int(data.get("N", cfg["N"]))
    gamma = data.get("gamma")
    if gamma is not None:
        width = 2 * n

        def square(a):
            return isinstance(a, list) and len(a) == width

        if not (square(gamma) and all(square(p) and all(square(r) for r in p) for p in gamma)):
            raise ValueError(f"gamma must be a {width}x{width}x{width} array")
        gamma = [[[Fraction(str(x)) for x in row] for row in plane] for plane in gamma]
    R = parse_series(data.get("R", "0"), frame)
    return FedosovState(frame, R, N, gamma)


def cmd_fedosov(args, cfg):
    from .fedosov import FedosovState, curvature_mismatch, fedosov_recursion, flatness_defect
    if args.state:
        state = _load_state(args.state, cfg)
    else:
        frame = make_frame(cfg)
        gamma, R = curvature_battery(args.battery, frame, cfg["N"])
        state = FedosovState(frame, R, cfg["N"], gamma)
    r = fedosov_recursion(state, check=False)
    defect = flatness_defect(state.with_r(r))
    by_degree = {str(d): r.degree_part(d).canonical_text() for d in range(3, state.trunc_N + 2)}
    mismatch = curvature_mismatch(state)
    res = {"frame": _frame_json(state.frame), "N": state.trunc_N, "r": by_degree,
           "defect": defect.canonical_text(), "curvature_mismatch": mismatch.canonical_text(),
           "flat": defect.is_zero() and mismatch.is_zero()}
    lines = [f"r[{d}] = {t}" for d, t in by_degree.items()]
    lines.append(f"defect = {res['defect']}")
    lines.append(f"curvature mismatch = {res['curvature_mismatch']}")
    lines.append("FLAT" if res["flat"] else "NOT FLAT")
    return res, lines


def _starexp_matrix(spec, n):
    if spec == "identity":
        return [[Fraction(int(i == j)) for j in range(2 * n)] for i in range(2 * n)]
    return _parse_matrix(spec)


def cmd_starexp(args, cfg):
    from .star_exp import exp_frame, riccati_closed, riccati_solve, star_exp_closed, star_exp_taylor
    n = cfg["n"]
    A = _starexp_matrix(args.A, n)
    if len(A) != 2 * n:
        raise UsageError(f"A must be {2 * n}x{2 * n}")
    K = cfg["K"]
    frame = exp_frame(n)
    taylor = star_exp_taylor(A, K, frame)
    res = {"K": K, "taylor": taylor.table()}
    lines = ["taylor:"] + [f"  t^{k}: {t}" for k, t in enumerate(taylor.table())]
    if args.compare:
        closed = star_exp_closed(A, K, frame)
        diff = taylor - closed
        res["closed"] = closed.table()
        res["difference"] = diff.table()
        res["equal"] = diff.is_zero()
        lines += ["closed:"] + [f"  t^{k}: {t}" for k, t in enumerate(closed.table())]
        lines += ["difference:"] + [f"  t^{k}: {t}" for k, t in enumerate(diff.table())]
    if args.riccati is not None:
        size = 2 * n
        B = _parse_matrix(args.B) if args.B else [[Fraction(0)] * size for _ in range(size)]
        ts, qs, gs = riccati_solve(A, B, args.riccati, args.steps)
        qc, gc = riccati_closed([[float(x) for x in r] for r in A], [[float(x) for x in r] for r in B],
                                args.riccati)
        res["riccati"] = {"type": "float", "t": ts[-1].item(), "q": qs[-1].tolist(), "g": float(gs[-1]),
                          "q_closed": qc.tolist(), "g_closed": float(gc)}
        lines.append(f"riccati t={ts[-1]:.6g} g={gs[-1]:.12g} g_closed={gc:.12g}")
    return res, lines


def cmd_lift(args, cfg):
    from .lift import apply_corrections, ccr_defect, ccr_repair, closedness_audit, defect_is_zero
    frame = make_frame(cfg)
    width = 2 * frame.dim_n
    if len(args.components) != width:
        raise UsageError(f"need {width} components, got {len(args.components)}")
    comps = [parse_series(s, frame) for s in args.components]
    N = max(cfg["N"], 3)
    table = ccr_defect(comps, N, frame)
    defects = {}
    lines = []
    for order, row in table.items():
        entry = {f"{s + 1},{t + 1}": p.canonical_text() for (s, t), p in row.items()}
        defects[str(order)] = entry
        for k, v in entry.items():
            lines.append(f"defect nu^{order} ({k}): {v}")
    closed = {}
    for order, row in table.items():
        if any(not p.is_zero() for p in row.values()):
            closed[str(order)] = closedness_audit(row, comps, frame)[1]
    corr = ccr_repair(comps, N, frame)
    corrections = {str(p): [c.canonical_text() for c in cs] for p, cs in corr.items()}
    for p, cs in corrections.items():
        for s, c in enumerate(cs):
            lines.append(f"correction nu^{p} component {s + 1}: {c}")
    repaired = defect_is_zero(ccr_defect(apply_corrections(comps, corr), N, frame, check=False))
    lines.append("REPAIRED" if repaired else "DEFECT REMAINS")
    res = {"defects": defects, "closed": closed, "corrections": corrections, "repaired": repaired}
    return res, lines


def cmd_dgla(args, cfg):
    from .dgla import PolyDiffOp, mc_defect_star, moyal_cochains
    order = args.order
    if args.file:
        with open(args.file, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, exc.lineno, exc.colno) from None
        dim = int(data["dim"])
        B = [PolyDiffOp(dim, 1)]
        for m in range(1, order + 1):
            B.append(PolyDiffOp.from_json(dim, 1, data.get("B", {}).get(str(m), [])))
    else:
        B = moyal_cochains(make_frame(cfg), order)
    d = mc_defect_star(B, order, max_degree=cfg["degree"])
    res = {"zero": d.is_zero, "orders": {}}
    lines = []
    for m, vals in d.by_order.items():
        entry = {json.dumps([list(e) for e in k]): v.text() for k, v in sorted(vals.items())}
        res["orders"][str(m)] = entry
        lines.append(f"nu^{m}: {'0' if not entry else f'{len(entry)} nonzero evaluations'}")
        for k, v in entry.items():
            lines.append(f"  {k}: {v}")
    lines.append("MC OK" if d.is_zero else "MC DEFECT")
    return res, lines


def _rand_rational(rng, lo=-3, hi=3):
    return Fraction(rng.randint(lo, hi), rng.randint(1, 3))


def _rand_fiber_series(rng, n, max_deg, N):
    width = 2 * n
    zero = (0,) * width
    acc = {}
    for _ in range(4):
        exps = [0] * width
        for _ in range(rng.randint(0, max_deg)):
            exps[rng.randrange(width)] += 1
        nu = rng.randint(0, 1)
        acc[(nu, tuple(exps), zero, 0)] = _rand_rational(rng)
    return WeylSeries(n, N, acc)


def audit_ccr(cfg, rng):
    frame = make_frame(cfg)
    n, N = frame.dim_n, max(cfg["N"], 2)
    rows = []
    ok = True
    for i in range(2 * n):
        for j in range(2 * n):
            c = star_commutator(WeylSeries.fiber_var(n, i, N), WeylSeries.fiber_var(n, j, N), frame)
            want = WeylSeries.nu(n, 1, N).scale(frame.lam[i][j])
            good = c == want
            ok &= good
            rows.append({"i": i + 1, "j": j + 1, "commutator": c.canonical_text(), "pass": good})
    return ok, rows, [f"[Z{r['i']},Z{r['j']}] = {r['commutator']}  {'ok' if r['pass'] else 'FAIL'}" for r in rows]


def audit_assoc(cfg, rng):
    frame = make_frame(cfg)
    n, N = frame.dim_n, cfg["N"]
    rows = []
    ok = True
    for t in range(cfg["trials"]):
        f, g, h = (_rand_fiber_series(rng, n, 4, N) for _ in range(3))
        d = moyal_product(moyal_product(f, g, frame), h, frame) - moyal_product(f, moyal_product(g, h, frame), frame)
        ok &= d.is_zero()
        rows.append({"trial": t, "defect": d.canonical_text()})
    return ok, rows, [f"triple {r['trial']}: {r['defect']}" for r in rows]


def audit_hodge(cfg, rng):
    from .fedosov import center_projection, delta, delta_inv
    frame = make_frame(cfg)
    n = frame.dim_n
    width = 2 * n
    rows = []
    ok = True
    for t in range(cfg["trials"]):
        acc = {}
        for _ in range(4):
            fib = [0] * width
            for _ in range(rng.randint(0, 3)):
                fib[rng.randrange(width)] += 1
            base = tuple(rng.randint(0, 1) for _ in range(width))
            mask = rng.choice([0] + [1 << k for k in range(width)])
            acc[(rng.randint(0, 1), tuple(fib), base, mask)] = _rand_rational(rng)
        a = WeylSeries(n, None, acc)
        lhs = delta(delta_inv(a), frame) + delta_inv(delta(a, frame)) + center_projection(a)
        d = lhs - a
        ok &= d.is_zero()
        rows.append({"trial": t, "defect": d.canonical_text()})
    return ok, rows, [f"section {r['trial']}: {r['defect']}" for r in rows]


def audit_cayley(cfg, rng):
    from .linalg import is_symplectic, matmul
    from .star_exp import cayley
    frame = make_frame(cfg)
    lam = [list(r) for r in frame.lam]
    width = 2 * frame.dim_n
    rows = []
    ok = True
    for t in range(cfg["trials"]):
        while True:
            S = [[Fraction(0)] * width for _ in range(width)]
            for i in range(width):
                for j in range(i, width):
                    S[i][j] = S[j][i] = _rand_rational(rng, -2, 2)
            X = matmul(lam, S)
            try:
                C = cayley(X)
                break
            except StarForgeError:
                continue
        good = is_symplectic(C, lam)
        ok &= good
        rows.append({"trial": t, "C": _matrix_json(C), "pass": good})
    return ok, rows, [f"X{r['trial']}: {'ok' if r['pass'] else 'FAIL'}" for r in rows]


def audit_quasimult(cfg, rng):
    from .group import quasi_mult_constant, seminorm
    from .weyl_functions import base_moyal
    frame = make_frame(cfg)
    n = frame.dim_n
    rows = []
    ok = True
    for t in range(cfg["trials"]):
        i = t % 5
        f, g = (WeylSeries(n, None, {(0, (0,) * (2 * n), tuple(rng.randint(0, 2) for _ in range(2 * n)), 0):
                                     _rand_rational(rng) for _ in range(3)}) for _ in range(2))
        C = quasi_mult_constant(i, frame)
        lhs = seminorm(base_moyal(f, g, frame), i, points=cfg["grid"])
        rhs = float(C) * seminorm(f, i, points=cfg["grid"]) * seminorm(g, i, points=cfg["grid"])
        good = lhs <= rhs * (1 + 1e-12)
        ok &= good
        rows.append({"trial": t, "i": i, "C": _rat(C), "pass": good})
    return ok, rows, [f"pair {r['trial']} i={r['i']} C={r['C']}: {'ok' if r['pass'] else 'FAIL'}" for r in rows]


AUDITS = {"ccr": audit_ccr, "assoc": audit_assoc, "hodge": audit_hodge, "cayley": audit_cayley,
          "quasimult": audit_quasimult}


def cmd_audit(args, cfg):
    rng = random.Random(cfg["seed"])
    cfg = dict(cfg, trials=args.trials)
    ok, rows, lines = AUDITS[args.which](cfg, rng)
    return {"audit": args.which, "pass": ok, "rows": rows}, ["PASS" if ok else "FAIL"] + lines


# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-n", dest="n", help="half dimension (default 1)")
    common.add_argument("-N", dest="N", help="total-degree truncation (default 6)")
    common.add_argument("-K", dest="K", help="t-order for star exponentials (default 4)")
    common.add_argument("--lambda", dest="lambda_", metavar="LAMBDA",
                        help="minus (Lambda[i][n+i] = -1) | plus (= +1) | JSON matrix (default minus)")
    common.add_argument("--format", dest="format", help="text | json (default text)")
    common.add_argument("--grid", dest="grid", help="grid points per axis for seminorms (default 33)")
    common.add_argument("--seed", dest="seed", help="seed for randomized audits (default 0)")
    common.add_argument("--degree", dest="degree", help="monomial degree bound for operator checks (default 2)")
    common.add_argument("--out", dest="out", metavar="FILE", help="write output to FILE")
    common.add_argument("--config", dest="config", metavar="FILE", help="key = value config file")

    p = argparse.ArgumentParser(prog="star-forge", description=f"Weyl algebra toolkit. Defaults: {HELP_DEFAULTS}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("star", parents=[common], help="Moyal product of two expressions")
    s.add_argument("a")
    s.add_argument("b")
    s.set_defaults(func=cmd_star)

    s = sub.add_parser("commutator", parents=[common], help="star commutator")
    s.add_argument("a")
    s.add_argument("b")
    s.set_defaults(func=cmd_commutator)

    s = sub.add_parser("sharp", parents=[common], help="Weyl continuation of a base polynomial")
    s.add_argument("f")
    s.set_defaults(func=cmd_sharp)

    s = sub.add_parser("bch", parents=[common], help="compose two group exponents")
    s.add_argument("h1")
    s.add_argument("h2")
    s.set_defaults(func=cmd_bch)

    s = sub.add_parser("factorize", parents=[common], help="split an automorphism into linear part and exponent")
    s.add_argument("images", nargs="*", help="images of Z1..Z2n")
    s.add_argument("--A", dest="A", help="linear part (JSON matrix) when images are not given")
    s.add_argument("--F", dest="F", help="exponent expression when images are not given")
    s.set_defaults(func=cmd_factorize)

    s = sub.add_parser("fedosov", parents=[common], help="solve for r and audit flatness")
    s.add_argument("--state", help="JSON state file (n, lambda, gamma, R, N)")
    s.add_argument("--battery", default="zero", choices=["zero", "nu2", "quadratic"])
    s.set_defaults(func=cmd_fedosov)

    s = sub.add_parser("starexp", parents=[common], help="star exponential of a quadratic form")
    s.add_argument("--A", dest="A", default="identity", help="identity or JSON symmetric matrix")
    s.add_argument("--compare", action="store_true", help="also run the closed route and print the difference")
    s.add_argument("--riccati", type=float, default=None, metavar="T", help="integrate the Riccati system to T")
    s.add_argument("--B", dest="B", help="initial phase matrix for --riccati (default 0)")
    s.add_argument("--steps", type=int, default=1000)
    s.set_defaults(func=cmd_starexp)

    s = sub.add_parser("lift", parents=[common], help="CCR defects and repair for a polynomial symplectomorphism")
    s.add_argument("components", nargs="+")
    s.set_defaults(func=cmd_lift)

    s = sub.add_parser("dgla", parents=[common], help="Maurer-Cartan checks")
    dsub = s.add_subparsers(dest="dgla_command", required=True)
    m = dsub.add_parser("mc-check", parents=[common], help="MC defect per nu order")
    m.add_argument("file", nargs="?", help="JSON with dim and B cochains; Moyal tail when omitted")
    m.add_argument("--order", type=int, default=3)
    m.set_defaults(func=cmd_dgla)

    s = sub.add_parser("audit", parents=[common], help="randomized and exhaustive audits")
    s.add_argument("which", choices=sorted(AUDITS))
    s.add_argument("--trials", type=int, default=20)
    s.set_defaults(func=cmd_audit)
    return p


def _resolve_config(ns):
    cfg = dict(DEFAULTS)
    if ns.config:
        cfg.update(read_config(ns.config))
    flags = {"n": ns.n, "N": ns.N, "K": ns.K, "lambda": ns.lambda_, "format": ns.format, "grid": ns.grid,
             "seed": ns.seed, "degree": ns.degree}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    return _coerce(cfg)


def emit(command, cfg, result, lines):
    if cfg["format"] == "json":
        doc = {"command": command, "status": "ok", "config": {k: cfg[k] for k in sorted(DEFAULTS)},
               "result": result}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    return "\n".join(lines) + "\n"


def run_command(argv, out=None):
    """Run one invocation; returns the exit status."""
    out = out or sys.stdout
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve_config(ns)
        command = ns.command if ns.command != "dgla" else "dgla mc-check"
        result, lines = ns.func(ns, cfg)
        text = emit(command, cfg, result, lines)
    except (ParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StarForgeError, ValueError, ArithmeticError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if ns.out:
        with open(ns.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
