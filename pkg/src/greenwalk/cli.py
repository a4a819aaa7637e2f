"""Command-line experiment runner.

``greenwalk run CONFIG`` writes one CSV (or JSON) row file and a JSON
summary; ``greenwalk validate CONFIG`` checks a config without computing;
``greenwalk list-experiments`` prints the experiment names.

Exit codes: 0 success, 2 inconclusive verdict, 1 error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as C
from .ancona import (WINDOW_NOTE, TripleOnGeodesic, ancona_ratio,
                     hourglass_check, local_limit_fit, pre_ancona_profile, strong_ancona_sweep)
from .domains import Domain
from .errors import GreenwalkError, InvariantError, SchemaError
from .green import first_visit, green_restricted, martin_kernel, spectral_radius
from .groups import Group
from .measures import srw
from .pathological import (assemble, certify_violation, oscillation_report, prop_spec,
                           solve_parameters, thm_spec)
from .templates import (TemplateUniverse, enumerate_classes, sum_all_bound, sum_max_ge,
                        sum_max_lt_len_ge)

DESCRIPTIONS = {
    "green": "G(x, y) or G(x, y; omega) with truncation diagnostics",
    "martin": "Martin kernel K_y(z) = G(z, y)/G(e, y) over points z and targets y",
    "spectral": "spectral radius: even-return root vs working-ball power iteration",
    "ancona-scan": "G(x,z)/(G(x,y)G(y,z)) over geodesic triples",
    "pre-ancona": "G(x, z; B(y, n)^c) and its slope -log(value)/n",
    "hourglass": "Ancona ratio restricted to hourglass domains",
    "strong-ancona": "double Green ratio minus 1 over separated pairs",
    "llt-fit": "fit of p^n(x, y) ~ C R^-n n^exponent",
    "patho-solve": "solve the parameters of a counterexample universe",
    "patho-certify": "closed-form certificates that the Ancona inequality fails",
    "patho-oscillation": "per-level bounds for G'(e, z y_i)/G'(e, y_i)",
    "templates-bound": "closed-form template bounds, optionally against enumeration",
}


class Context:
    def __init__(self, cfg: dict, threads: int, unsafe: bool):
        self.cfg = cfg
        self.params = cfg.get("params", {})
        self.threads = max(1, threads)
        self.unsafe = unsafe
        self.group: Group = C.build_group(cfg)
        self.rng = random.Random(cfg.get("seed", 0))
        self.notes: list[str] = []
        self.receipts: list[dict] = []
        self._mu = None

    @property
    def engine(self):
        return C.build_engine(self.cfg, self.group)

    @property
    def mu(self):
        if self._mu is None:
            m = self.cfg.get("measure")
            if m is not None and m["source"] == "pathological":
                spec = self.patho_spec("prop")
                self._mu = assemble(spec)[1]
                self.notes.append("measure is the normalized pathological measure mu'")
            else:
                self._mu = C.build_measure(self.cfg, self.group)
            if self._mu.receipt is not None:
                self.receipts.append(self._mu.receipt.to_dict())
        return self._mu

    def parse(self, w):
        return self.group.parse(w)

    def fmt(self, g):
        return self.group.format(g)

    def map(self, fn, items):
        """Order-preserving parallel map; results do not depend on the thread count."""
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [fn(it) for it in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))

    # ------------------------------------------------------- pathological
    def base_measure(self):
        m = self.cfg.get("measure")
        if m is None or m["source"] == "pathological":
            return srw(self.group)
        return C.build_measure(self.cfg, self.group)

    def universe(self) -> TemplateUniverse:
        p = self.cfg.get("pathological", {})
        if "universe" in p:
            U = TemplateUniverse(**p["universe"])
            found = U.findings()
            if found:
                if not self.unsafe:
                    raise InvariantError("; ".join(found))
                self.notes.append("UNSAFE: universe violates its invariants: " + "; ".join(found))
            return U
        for k in ("r_limit", "depth", "rho_bound"):
            if k not in p:
                raise SchemaError(f"pathological/{k}: required to solve parameters")
        U = solve_parameters(self.base_measure(), p["r_limit"], p["depth"], p["rho_bound"],
                             even=p.get("mode", "prop") == "prop",
                             s0_rule=p.get("s0_rule", "extend"))
        if p.get("s0_rule", "extend") == "extend" and U.s[0] != U.r[0]:
            self.notes.append(f"s_0 = {U.s[0]:.17g} from the rate rule extended one index down")
        return U

    def patho_spec(self, mode: str):
        p = self.cfg.get("pathological", {})
        U = self.universe()
        gen = p.get("generator", "a")
        if mode == "prop":
            return prop_spec(self.base_measure(), U, gen, unsafe=self.unsafe)
        if "z_marker" not in p:
            raise SchemaError("pathological/z_marker: required in thm mode")
        return thm_spec(self.base_measure(), U, p["z_marker"], gen, unsafe=self.unsafe)


# ------------------------------------------------------------ experiments
def _random_reduced(group: Group, rng: random.Random, n: int):
    w = ()
    while len(w) < n:
        s = rng.randrange(group.n_letters)
        u = group.multiply(w, (s,))
        if len(u) == len(w) + 1:
            w = u
    return w


def _triples(ctx: Context):
    p = ctx.params
    out = [TripleOnGeodesic.make(ctx.group, *t) for t in p.get("triples", [])]
    g = ctx.group
    for _ in range(p.get("random_triples", 0)):
        d1, d2 = p.get("d1", 3), p.get("d2", 3)
        while True:
            y = _random_reduced(g, ctx.rng, ctx.rng.randrange(0, 3))
            u = _random_reduced(g, ctx.rng, d1)
            v = _random_reduced(g, ctx.rng, d2)
            if len(g.multiply(g.invert(u), v)) == d1 + d2:
                break
        out.append(TripleOnGeodesic.make(g, g.multiply(y, u), y, g.multiply(y, v)))
    if not out:
        raise SchemaError("params: give triples or random_triples")
    return out


def exp_green(ctx):
    p = ctx.params
    mu, eng = ctx.mu, ctx.engine
    x = ctx.parse(p.get("x", "e"))
    targets = [ctx.parse(t) for t in p.get("targets", [p.get("y", "e")])]
    om = p.get("omega", {"kind": "full"})
    if om["kind"] == "full":
        omega = Domain.full()
    elif om["kind"] == "point_complement":
        omega = Domain.point_complement(ctx.parse(om.get("center", "e")))
    else:
        omega = Domain.ball_complement(ctx.parse(om.get("center", "e")), om.get("radius", 0))

    def one(y):
        if p.get("first_visit"):
            gv = first_visit(x, y, mu, eng)
        else:
            gv = green_restricted(x, y, omega, mu, eng)
        return {"x": ctx.fmt(x), "y": ctx.fmt(y)} | gv.to_dict() | \
            {"exact": str(gv.exact) if gv.exact is not None else ""}
    rows = ctx.map(one, targets)
    conv = all(r["converged"] for r in rows)
    summary = {"value": rows[0]["value"], "converged": conv, "omega": omega.describe(ctx.group)}
    return rows, summary, "ok" if conv else "inconclusive"


def exp_martin(ctx):
    p = ctx.params
    mu, eng = ctx.mu, ctx.engine
    zs = [ctx.parse(z) for z in p.get("points", ["e"])]
    ys = [ctx.parse(y) for y in p.get("targets", [p.get("y", "e")])]

    def one(zy):
        z, y = zy
        m = martin_kernel(z, y, mu, eng)
        return {"z": ctx.fmt(z), "y": ctx.fmt(y), "K": m.value, "rel_error": m.rel_error}
    rows = ctx.map(one, [(z, y) for y in ys for z in zs])
    return rows, {"n_values": len(rows)}, "ok"


def exp_spectral(ctx):
    est = spectral_radius(ctx.mu, ctx.engine, ctx.params.get("n"))
    row = est.to_dict()
    row["flags"] = ";".join(est.flags)
    agree = est.gap is not None and est.gap <= 0.01
    summary = est.to_dict() | {"agree_within_1pct": agree}
    return [row], summary, "ok" if agree else "inconclusive"


def exp_ancona_scan(ctx):
    mu, eng = ctx.mu, ctx.engine

    def one(t):
        r = ancona_ratio(t, mu, eng)
        return {"x": ctx.fmt(t.x), "y": ctx.fmt(t.y), "z": ctx.fmt(t.z), "raw": r.value,
                "raw_lower": r.lower, "raw_upper": r.upper, "normalized": r.normalized,
                "normalized_lower": r.normalized_lower, "normalized_upper": r.normalized_upper}
    rows = ctx.map(one, _triples(ctx))
    low = min(r["normalized_upper"] for r in rows)
    summary = {"max_normalized": max(r["normalized"] for r in rows),
               "min_normalized": min(r["normalized"] for r in rows),
               "lower_bound_one_holds": low >= 1.0 - 1e-12}
    return rows, summary, "ok"


def exp_pre_ancona(ctx):
    p = ctx.params
    y = ctx.parse(p.get("y", "e"))
    cfg = ctx.cfg.get("engine")
    eng = ctx.engine if cfg else None
    rows = pre_ancona_profile(y, p.get("n_values", [1, 2, 3]), ctx.mu, eng, p.get("rule", "axis"),
                              p.get("multiplier", 1))
    out = [r.to_dict() for r in rows]
    sl = [r.slope for r in rows]
    ctx.notes.append(WINDOW_NOTE)
    summary = {"slopes": sl,
               "slope_strictly_increasing": all(b > a for a, b in zip(sl, sl[1:])),
               "all_zero": all(r.value == 0 for r in rows)}
    return out, summary, "ok"


def exp_hourglass(ctx):
    mu, eng = ctx.mu, ctx.engine
    H0 = ctx.params.get("H0", 2)

    def one(t):
        r = hourglass_check(t, H0, mu, eng)
        return {"x": ctx.fmt(t.x), "y": ctx.fmt(t.y), "z": ctx.fmt(t.z), "H0": H0,
                "raw": r.value, "normalized": r.normalized,
                "normalized_lower": r.normalized_lower, "normalized_upper": r.normalized_upper}
    rows = ctx.map(one, _triples(ctx))
    summary = {"max_normalized": max(r["normalized"] for r in rows),
               "min_normalized": min(r["normalized"] for r in rows)}
    return rows, summary, "ok"


def exp_strong_ancona(ctx):
    p = ctx.params
    rows, rate = strong_ancona_sweep(ctx.group, p.get("n_values", [2, 3, 4, 5, 6]), ctx.mu,
                                     ctx.engine, tuple(p.get("offsets", ["b", "bb"])))
    out = [r.to_dict() for r in rows]
    dev = [abs(r.deviation) for r in rows]
    summary = {"rate_estimate": rate,
               "monotone_decreasing": all(b < a for a, b in zip(dev, dev[1:])),
               "zero_within_error": all(r.inconclusive for r in rows)}
    return out, summary, "ok"


def exp_llt(ctx):
    p = ctx.params
    x, y = ctx.parse(p.get("x", "e")), ctx.parse(p.get("y", "e"))
    fit = local_limit_fit(ctx.mu, x, y, p.get("n_max", 4000))
    rows = [{"n": int(n), "residual": float(r)} for n, r in zip(fit.n_used, fit.residuals)]
    return rows, fit.to_dict(), "inconclusive" if fit.inconclusive else "ok"


def exp_patho_solve(ctx):
    U = ctx.universe()
    rows = [{"level": i, "r": U.r[i], "s": U.s[i], "n": U.n[i],
             "jump_weight": U.jump_weight(i)} for i in range(U.depth)]
    return rows, {"universe": U.to_dict(), "findings": U.findings()}, "ok"


def exp_patho_certify(ctx):
    spec = ctx.patho_spec("prop")
    levels = ctx.params.get("levels", list(range(spec.depth)))
    certs = ctx.map(lambda i: certify_violation(spec, i), levels)
    rows = [r for c in certs for r in c.rows]
    ratios = [c.ratio for c in certs]
    ok = all(r > 1 for r in ratios)
    summary = {"ratios": ratios, "universe": spec.universe.to_dict(),
               "certificates": [c.to_dict() for c in certs],
               "all_ratios_above_one": ok}
    ctx.notes.append("upper bounds use G' <= G since mu' <= mu (mu(Gamma) >= 1)")
    return rows, summary, "ok" if ok else "inconclusive"


def exp_patho_osc(ctx):
    spec = ctx.patho_spec("thm")
    rep = oscillation_report(spec)
    ctx.notes.extend(rep.notes)
    return list(rep.rows), rep.to_dict() | {"universe": spec.universe.to_dict()}, \
        "ok" if rep.certified else "inconclusive"


def exp_templates(ctx):
    U = ctx.universe()
    p = ctx.params
    zl = p.get("z_lengths", [0])
    rows = []
    for i in range(U.depth + 1):
        for n in zl:
            row = {"level": i, "z_length": n, "sum_max_ge": sum_max_ge(i, U).value,
                   "sum_max_lt_len_ge": sum_max_lt_len_ge(i, n, U).value}
            rows.append(row)
    summary = {"sum_all_bound": sum_all_bound(U), "universe": U.to_dict()}
    if "weight_floor" in p:
        classes = list(enumerate_classes(U, p["weight_floor"]))
        total = math.fsum(c.mass for c in classes)
        summary["enumerated_total"] = total
        ok = total <= summary["sum_all_bound"]
        for row in rows:
            i, n = row["level"], row["z_length"]
            ge = math.fsum(c.mass for c in classes if c.max_level >= i)
            lt = math.fsum(c.mass for c in classes if c.max_level < i and c.length >= n)
            row["enumerated_max_ge"] = ge
            row["enumerated_max_lt_len_ge"] = lt
            ok &= ge <= row["sum_max_ge"] and lt <= row["sum_max_lt_len_ge"]
        summary["bounds_hold"] = ok
    return rows, summary, "ok"


EXPERIMENT_FUNCS = {
    "green": exp_green, "martin": exp_martin, "spectral": exp_spectral,
    "ancona-scan": exp_ancona_scan, "pre-ancona": exp_pre_ancona, "hourglass": exp_hourglass,
    "strong-ancona": exp_strong_ancona, "llt-fit": exp_llt, "patho-solve": exp_patho_solve,
    "patho-certify": exp_patho_certify, "patho-oscillation": exp_patho_osc,
    "templates-bound": exp_templates,
}


# ------------------------------------------------------------------ output
def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "to_dict"):
        return _clean(v.to_dict())
    return v


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def run(cfg: dict, output_dir=None, fmt: str = "csv", threads: int = 1,
        unsafe: bool = False) -> tuple[int, dict]:
    """Run one experiment and write its files; returns ``(exit_code, summary)``."""
    ctx = Context(cfg, threads, unsafe)
    rows, summary, verdict = EXPERIMENT_FUNCS[cfg["experiment"]](ctx)
    out = Path(output_dir or cfg.get("output", {}).get("dir", "results"))
    name = cfg.get("output", {}).get("name", cfg["experiment"])
    out.mkdir(parents=True, exist_ok=True)
    doc = {"experiment": cfg["experiment"], "config_hash": C.config_hash(cfg),
           "version": __version__, "seed": cfg.get("seed", 0), "verdict": verdict,
           "certified": {"green_values": "lower_bound",
                         "template_bounds": "closed_form_upper_bound"},
           "receipts": ctx.receipts, "notes": ctx.notes, "result": summary}
    doc = _clean(doc)
    if fmt == "csv":
        (out / f"{name}.csv").write_text(rows_to_csv(rows))
    else:
        (out / f"{name}.json").write_text(json.dumps(_clean(rows), indent=1, sort_keys=True) + "\n")
    (out / f"{name}.summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return (2 if verdict == "inconclusive" else 0), doc


def validate(cfg_path) -> tuple[bool, list[str]]:
    """Schema and invariant checks without computation; returns ``(ok, report lines)``."""
    lines = []
    try:
        cfg = C.load(cfg_path)
        ctx = Context(cfg, 1, False)
        ctx.engine
        if "measure" in cfg and cfg["measure"]["source"] != "pathological":
            C.build_measure(cfg, ctx.group)
        if "pathological" in cfg:
            U = ctx.universe()
            lines.append("solved universe: " + json.dumps(_clean(U.to_dict()), sort_keys=True))
    except GreenwalkError as exc:
        return False, [f"finding: {exc}"]
    return True, ["ok"] + lines


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="greenwalk", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--output-dir")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--unsafe-allow-invalid-universe", action="store_true",
                   help="accept template universes that fail validation (toy instances only)")
    v = sub.add_parser("validate", help="check a config without computing")
    v.add_argument("config")
    sub.add_parser("list-experiments", help="print the experiment names")
    a = ap.parse_args(argv)
    if a.cmd == "list-experiments":
        for k in C.EXPERIMENTS:
            print(f"{k:18s} {DESCRIPTIONS[k]}")
        return 0
    if a.cmd == "validate":
        ok, lines = validate(a.config)
        print("\n".join(lines))
        return 0 if ok else 1
    try:
        cfg = C.load(a.config)
        code, doc = run(cfg, a.output_dir, a.format, a.threads, a.unsafe_allow_invalid_universe)
    except GreenwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{doc['experiment']}: {doc['verdict']}")
    return code


if __name__ == "__main__":
    sys.exit(main())
