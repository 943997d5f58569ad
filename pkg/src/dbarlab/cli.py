"""Command-line front end: every check as a seeded, self-describing report.

Exit status: 0 when every checked claim holds within its error budget,
2 when a claim or an input hypothesis fails, 1 on execution errors and
64 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import carleman as cm
from . import constructions as ex
from . import dbar_reduce as dr
from .errors import DbarLabError
from .reports import SCHEMA_VERSION, _jsonable
from .scaled_field import Annulus, Rectangle, SampledField, build_patch, sc_add, sc_mul, sc_normalize

EXIT_OK, EXIT_ERROR, EXIT_FAILED, EXIT_USAGE = 0, 1, 2, 64
OUT_ENV = "DBARLAB_OUT"


# ---------------------------------------------------------------------------
# flag grammar


def parse_ints(text: str) -> list:
    """``"4..7,10"`` -> ``[4, 5, 6, 7, 10]``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError("empty list")
    return out


def parse_floats(text: str) -> list:
    out = [float(p) for p in text.split(",") if p.strip()]
    if not out:
        raise ValueError("empty list")
    return out


def _typed(fn, name):
    def conv(text):
        try:
            return fn(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {name}: {text!r}") from None
    return conv


INTS = _typed(parse_ints, "integer list or range")
FLOATS = _typed(parse_floats, "number list")


class _Parser(argparse.ArgumentParser):
    def __init__(self, *a, **kw):
        kw.setdefault("allow_abbrev", False)
        super().__init__(*a, **kw)

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# commands; each returns (records, claims_ok, hypotheses_ok)


def _margin_job(job):
    kind, seed, i, res, taus, theta = job
    v = cm.random_bump_field(np.random.default_rng([seed, i]), res)
    out = []
    w = cm.adversarial_w(v, theta) if kind == "lemma2" else None
    for tau in taus:
        if kind == "identity":
            rep = cm.carleman_identity_gap(v, tau)
        elif kind == "lemma1":
            rep = cm.lemma1_check(v, tau)
        else:
            rep = cm.lemma2_check(v, w, tau, theta)
        d = rep.to_json()
        d["field"] = i
        out.append(d)
    return out


def _map_jobs(fn, jobs, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _margin_command(kind):
    def run(args):
        jobs = [(kind, args.seed, i, args.resolution, args.tau, args.theta) for i in range(args.fields)]
        recs = [r for chunk in _map_jobs(_margin_job, jobs, args.jobs) for r in chunk]
        ok = all(r["holds"] for r in recs)
        hyp = all(all(v for k, v in r["hypothesis_status"].items() if isinstance(v, bool)) for r in recs)
        if kind == "identity":
            ok = ok and all(r["extra"]["relative_gap"] <= args.tolerance for r in recs)
        return recs, ok, hyp
    return run


def cmd_probe(args):
    recs, ok, hyp = [], True, True
    for A in args.A:
        u = cm.probe_field(A, args.resolution)
        for alpha in args.alpha:
            rep = cm.vanishing_probe(u, A, alpha, tau_list=args.tau,
                                     delta=None if args.delta is None else args.delta)
            d = rep.to_json()
            recs.append(d)
            ok &= rep.bound_holds
            st = rep.hypothesis_status
            hyp &= st["vanishes_on_parabola_side"] and st["cutoff_support_compact"]
    return recs, ok, hyp


def cmd_sharpness(args):
    recs, ok = [], True
    for alpha in args.alpha:
        slope = cm.sharpness_slope(alpha, args.epsilon, taus=args.tau)
        rows = [{"tau": t, "lhs": l, "rhs": r}
                for t, (l, r) in ((t, cm.sharpness_gap(alpha, args.epsilon, t)) for t in args.tau)]
        good = abs(slope - (2 * alpha - 1)) <= args.tolerance
        ok &= good
        recs.append({"claim": "holder-half-sharpness", "alpha": alpha, "slope": slope,
                     "expected": 2 * alpha - 1, "ok": good, "rows": rows})
    return recs, ok, True


def cmd_ratio(args):
    emap = ex.get_map(args.example)
    recs = []
    for n in args.n:
        rep = ex.annulus_ratio_report(emap, n, args.resolution)
        recs.append(rep.to_json())
    ok = True
    for r in recs:
        ok &= r.get("holomorphic_band_ok", True) and r.get("band_ok", True)
        if r["n"] >= 7:
            ok &= r.get("lower_bound_ok", True)
    cn = [r["C_n"] for r in recs]
    if args.example == "ex31" and len(cn) > 1:
        ok &= max(cn) / min(cn) <= 10
    return recs, ok, True


def cmd_decay(args):
    rows = ex.decay_report(ex.get_map(args.example), args.n)
    orders = [r["local_order"] for r in rows]
    ok = all(b > a for a, b in zip(orders, orders[1:])) or args.example == "control"
    if args.example in ("ex31", "ex32"):
        ok &= all(r["within_bound"] for r in rows if r["n"] >= 6)
    return rows, ok, True


def cmd_remark2(args):
    recs = []
    for p in args.p:
        t1, t2 = ex.remark2_probe(p, args.n[0])
        r1, r2 = ex.remark2_terms(p, args.n[0])
        recs.append({"claim": "scale-exponent-rigidity", "p": p, "n": args.n[0], "term1_ok": t1,
                     "term2_ok": t2, "log2_term1_ratio": r1, "log2_term2_ratio": r2})
    return recs, True, True


def cmd_intro(args):
    recs, ok = [], True
    for k in args.k:
        pair = ex.intro_pair(k)
        hol = pair.holder_estimate()
        res = {}
        for side, (y0, y1) in (("upper", (0.0, 0.5)), ("lower", (-0.5, 0.0))):
            h = 1.0 / (args.resolution - 1)
            shift = h if side == "upper" else -h
            patch = build_patch(Rectangle(-0.5, 0.5, y0 + shift, y1 + shift), args.resolution)
            for name, m in (("u", pair.u), ("v", pair.v)):
                res[f"{name}_{side}"] = pair.residual(m.sample(patch))
        inj = pair.injective(np.linspace(0.01, 0.5, 200))
        good = all(r["ok"] for r in res.values()) and abs(hol["beta"] - hol["expected"]) <= 0.05 and inj
        ok &= good
        recs.append({"claim": "nonuniqueness-pair", "k": k, "holder": hol, "residuals": res,
                     "injective": inj, "ok": good})
    return recs, ok, True


def cmd_remark3(args):
    prof = ex.q_norm_profile(args.m)
    sups = prof["sup_Q"]
    dec = all(b < a for a, b in zip(sups, sups[1:]))
    half = sups[-1] <= 0.5 * sups[0]
    zeros = {}
    for m in args.m:
        a = Annulus(m).a_n
        zeros[m] = max(abs(v.mantissa) for v in ex.remark3_eval(a))
    rec = {"claim": "lift-structure-decay", "m": prof["m"], "sup_Q": sups,
           "per_annulus": prof["per_annulus"], "strictly_decreasing": dec,
           "halved": half, "U_at_a_m": zeros}
    return [rec], dec and half and all(v == 0 for v in zeros.values()), True


def cmd_reduce(args):
    if args.input:
        u = SampledField.load(args.input)
    else:
        u, _ = dr.manufactured_u(args.resolution)
    v, rep = dr.reduce(u, args.floor, args.max_iter, args.tol)
    if args.dump:
        v.dump(Path(args.out) / "reduce_v")
    d = rep.to_json()
    d["claim"] = "similarity-reduction"
    return [d], d["zero_sets_match"], True


def _selftest_cases():
    yield "normalize 3", sc_normalize(3.0, 0) == sc_normalize(1.5, 1) and sc_normalize(3.0, 0).mantissa == 1.5
    z = sc_normalize(0, 17)
    yield "canonical zero", (z.mantissa, z.exp2) == (0, 0)
    p = sc_mul(sc_normalize(1.5, 10), sc_normalize(1.5, 10))
    yield "product", (p.mantissa, p.exp2) == (1.125, 21)
    a = sc_normalize(1.0, 0)
    yield "add zero", sc_add(a, sc_normalize(0, 0)) == a
    yield "add gap", sc_add(a, sc_normalize(1.0, -200)) == a
    patch = build_patch(Rectangle(-0.9, -0.1, -0.4, 0.4), 256)
    yield "patch spacing", abs(patch.h - 0.8 / 255) < 1e-15
    try:
        build_patch(Annulus(0), 512)
        yield "annulus outside disc", False
    except DbarLabError:
        yield "annulus outside disc", True
    from .wirtinger import holo_residual, wirtinger_derivatives
    fz = SampledField.from_function(patch, lambda z: z)
    pr = wirtinger_derivatives(fz)
    yield "d z = 1", np.abs(pr.dz.values[pr.valid] - 1).max() < 1e-12
    yield "dbar conj z = 1", np.abs(wirtinger_derivatives(fz.conj()).dzbar.values[pr.valid] - 1).max() < 1e-12
    yield "constant residual", holo_residual(SampledField.from_function(patch, lambda z: 0 * z + 2)) == 0
    zero = SampledField(patch, np.zeros(patch.shape))
    yield "dbar_star of 0", np.abs(cm.dbar_star(zero, cm.CarlemanWeight(2.0)).values).max() == 0
    u = ex.example31_eval(0.3)
    yield "ex31 at 0.3", abs(u[0].value() - 0.36) < 1e-15
    yield "ex32 zero", all(x.mantissa == 0 for x in ex.example32_eval(Annulus(5).a_n))
    yield "ex32 at 0.4", abs(ex.example32_eval(0.4)[0].value() - 0.04) < 1e-15
    yield "remark2 p=2", ex.remark2_probe(2.0, 10) == (True, True)
    yield "cauchy of 0", np.abs(dr.cauchy_transform(zero).values).max() == 0
    A0 = dr.MatrixField(patch, np.zeros(patch.shape + (2, 2)))
    sol = dr.solve_M(A0)
    yield "M = I for A = 0", sol.iterations == 1 and np.abs(sol.M.entries - np.eye(2)).max() == 0


def cmd_selftest(args):
    recs = []
    for name, ok in _selftest_cases():
        recs.append({"case": name, "ok": bool(ok)})
    return recs, all(r["ok"] for r in recs), True


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--resolution", type=int, default=512)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=os.environ.get(OUT_ENV, "."))
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--jobs", type=int, default=1)

    parser = _Parser(prog="dbarlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, **defaults):
        p = sub.add_parser(name, parents=[common])
        p.set_defaults(func=fn, **defaults)
        return p

    for name, kind, taus in (("verify-identity", "identity", "1,5,20"), ("verify-lemma1", "lemma1", "1,2,5,10,20,50"),
                             ("verify-lemma2", "lemma2", "1,2,5,10,20,50")):
        p = add(name, _margin_command(kind))
        p.add_argument("--tau", type=FLOATS, default=parse_floats(taus))
        p.add_argument("--fields", type=int, default=20)
        p.add_argument("--theta", type=float, default=0.1)
        p.add_argument("--tolerance", type=float, default=1e-4)

    p = add("vanishing-probe", cmd_probe)
    p.add_argument("--tau", type=FLOATS, default=[10.0, 20.0, 40.0])
    p.add_argument("--A", type=FLOATS, default=[4.0])
    p.add_argument("--alpha", type=FLOATS, default=[0.2])
    p.add_argument("--delta", type=float, default=None)

    p = add("sharpness", cmd_sharpness)
    p.add_argument("--alpha", type=FLOATS, default=[0.3, 0.4, 0.5])
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--tau", type=FLOATS, default=[10.0, 1e2, 1e3, 1e4])
    p.add_argument("--tolerance", type=float, default=0.02)

    p = add("ratio-report", cmd_ratio)
    p.add_argument("--example", choices=("ex31", "ex32", "remark3"), default="ex31")
    p.add_argument("--n", type=INTS, default=parse_ints("4..12"))

    p = add("decay-report", cmd_decay)
    p.add_argument("--example", choices=("ex31", "ex32", "control"), default="ex31")
    p.add_argument("--n", type=INTS, default=parse_ints("6..12"))

    p = add("remark2", cmd_remark2)
    p.add_argument("--p", type=FLOATS, default=[1.5, 2.0, 3.0])
    p.add_argument("--n", type=INTS, default=[10])

    p = add("intro-pair", cmd_intro)
    p.add_argument("--k", type=INTS, default=[2, 3, 4])

    p = add("remark3", cmd_remark3)
    p.add_argument("--m", type=INTS, default=parse_ints("7..11"))

    p = add("reduce", cmd_reduce)
    p.add_argument("--input", default=None, help="field dump path (without suffix)")
    p.add_argument("--floor", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--dump", action="store_true")
    p.set_defaults(resolution=256)

    add("selftest", cmd_selftest)
    return parser


# ---------------------------------------------------------------------------
# output


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and set(v) >= {"mant_re", "exp2"}:
            out[key] = v["approx"]
        elif isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def write_report(command, config, records, status, out_dir, fmt) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = command.replace("-", "_")
    if fmt == "csv":
        rows = [_flatten(_jsonable(r)) for r in records]
        cols = []
        for r in rows:
            cols.extend(k for k in r if k not in cols)
        path = out_dir / f"{stem}.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=cols)
            wr.writeheader()
            wr.writerows(rows)
        return path
    doc = {"schema": SCHEMA_VERSION, "command": command, "config": config, "status": status,
           "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), "results": records}
    path = out_dir / f"{stem}.json"
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = {k: v for k, v in vars(args).items() if k != "func"}
    try:
        records, ok, hyp = args.func(args)
    except DbarLabError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    status = {"claims_hold": bool(ok), "hypotheses_hold": bool(hyp)}
    path = write_report(args.command, config, records, status, args.out, args.format)
    verdict = "pass" if ok and hyp else "FAIL"
    print(f"{args.command}: {len(records)} record(s), {verdict} -> {path}")
    return EXIT_OK if ok and hyp else EXIT_FAILED


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
