"""Command-line front end: ``bm-lab verify|scan|check|acceptance``."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import reports
from .body import SupportFunction, ball, ellipse, validate_in_S
from .errors import UsageError
from .functionals import solve_eigen, solve_torsion
from .inequalities import (
    bm_concavity_scan,
    local_theorem_scan,
    poincare_capacity_ball,
    poincare_eigen_ball,
    poincare_log_ball,
    poincare_torsion_ball,
    poincare_torsion_general,
    problem_a_form,
    theorem_family_body,
)
from .phispec import field_from_terms, format_phi, parse_phi, random_even_terms
from .spherical import build_grid
from .variations import eigen_variation_lp, torsion_variation_log, torsion_variation_lp

VERIFIERS = ("ball-poincare", "ball-poincare-log", "capacity-ball", "eigen-ball", "poincare-general",
             "local-bm", "problem-a")
GRID_RES = {2: 64, 3: 16}
DEFAULT_OUT = "bm_lab_out"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=None, help="ambient dimension (2 or 3)")
    p.add_argument("--p", type=float, default=None, help="L_p parameter")
    p.add_argument("--phi", action="append", default=None,
                   help='harmonic coefficient list "l<deg>[,m<ord>]:<c>;...", repeatable')
    p.add_argument("--random", type=int, default=0, help="add K seeded random even inputs")
    p.add_argument("--degrees", default="2,4,6", help="degrees of random inputs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.05, help="perturbation size eps0")
    p.add_argument("--pairs", type=int, default=11, help="(s1, s2) grid size for local-bm")
    p.add_argument("--refinement", type=int, default=3)
    p.add_argument("--body", default="ball", help='"ball", "ball:<r>", "ellipse:<a>,<b>" or a coefficient list')
    p.add_argument("--out", default=None, help=f"output directory (default ./{DEFAULT_OUT})")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bm-lab", description="Brunn-Minkowski / Poincare inequality lab")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run an inequality verifier")
    v.add_argument("verifier", choices=VERIFIERS)
    _common(v)
    s = sub.add_parser("scan", help="concavity scan")
    s.add_argument("what", choices=("bm",))
    _common(s)
    c = sub.add_parser("check", help="variational formula checks")
    c.add_argument("what", choices=("variational",))
    c.add_argument("--functional", choices=("torsion", "eigenvalue"), default="torsion")
    _common(c)
    a = sub.add_parser("acceptance", help="run the acceptance suite")
    a.add_argument("--quick", action="store_true")
    a.add_argument("--only", default=None, help="comma separated criterion numbers")
    a.add_argument("--out", default=None)
    return ap


def _dim(args, default: int, allowed=(2, 3)) -> int:
    n = default if args.n is None else args.n
    if n not in allowed:
        raise UsageError("n", f"dimension {n} not supported here (allowed: {allowed})")
    return n


def _inputs(args, n: int, need: bool = True) -> list:
    items = []
    for spec in args.phi or []:
        items.append(parse_phi(spec, n))
    if args.random:
        try:
            degs = [int(x) for x in args.degrees.split(",") if x.strip()]
        except ValueError:
            raise UsageError("degrees", "expected comma separated integers") from None
        rng = np.random.default_rng(args.seed)
        for _ in range(args.random):
            try:
                items.append(random_even_terms(rng, n, degs, amplitude=1.0))
            except ValueError as exc:
                raise UsageError("degrees", str(exc)) from None
    if need and not items:
        raise UsageError("phi", "empty harmonic coefficient list")
    return items


def _body(spec: str, n: int) -> SupportFunction:
    res = GRID_RES[n]
    try:
        if spec == "ball":
            return ball(n, res)
        if spec.startswith("ball:"):
            return ball(n, res, float(spec[5:]))
        if spec.startswith("ellipse:"):
            a, b = (float(x) for x in spec[8:].split(","))
            return ellipse(a, b, res)
    except ValueError:
        raise UsageError("body", f"cannot parse body {spec!r}") from None
    return SupportFunction.from_terms(n, res, parse_phi(spec, n, field="body"))


def _p(args, default: float) -> float:
    return default if args.p is None else args.p


def _variation_item(rep) -> dict:
    d = rep.to_dict()
    ok = (d["gap_first"] is not None and d["gap_first"] < 1e-2
          and d["gap_second"] is not None and d["gap_second"] < 5e-2)
    d["verdict"] = "pass" if ok else "fail"
    d["name"] = f"{rep.functional}_variation_{rep.mode}"
    return d


def _plan(args) -> tuple[str, list]:
    """Validate arguments and return (label, list of zero-argument jobs)."""
    cmd = args.command
    if cmd == "verify":
        name = args.verifier
        if name == "capacity-ball":
            n = _dim(args, 3, (3,))
        elif name in ("eigen-ball", "poincare-general", "local-bm", "problem-a"):
            n = _dim(args, 2, (2,))
        else:
            n = _dim(args, 2)
        inputs = _inputs(args, n)
        grid = build_grid(n, GRID_RES[n])
        jobs = []
        for terms in inputs:
            label = format_phi(terms)
            f = field_from_terms(terms, grid)
            if name == "ball-poincare":
                p = _p(args, 1.0)
                if p <= 0:
                    raise UsageError("p", "ball-poincare needs p > 0 (use ball-poincare-log for p = 0)")
                jobs.append(lambda f=f, p=p, label=label: poincare_torsion_ball(f, p, label).to_dict())
            elif name == "ball-poincare-log":
                jobs.append(lambda f=f, label=label: poincare_log_ball(f, label).to_dict())
            elif name == "capacity-ball":
                p = _p(args, 1.0)
                if p < 1:
                    raise UsageError("p", "capacity-ball needs p >= 1")
                jobs.append(lambda f=f, p=p, label=label: poincare_capacity_ball(f, p, label=label).to_dict())
            elif name == "eigen-ball":
                jobs.append(lambda f=f, label=label: poincare_eigen_ball(f, label).to_dict())
            elif name == "local-bm":
                p = _p(args, 0.5)
                if not 0 <= p < 1:
                    raise UsageError("p", "local-bm needs 0 <= p < 1")
                jobs.append(lambda f=f, p=p, label=label: local_theorem_scan(
                    f, p, args.eps, args.pairs, refinement=args.refinement, label=label).to_dict())
            else:
                p = _p(args, 1.0 if name == "poincare-general" else 0.5)
                if name == "problem-a" and not 0 <= p < 1:
                    raise UsageError("p", "problem-a needs 0 <= p < 1")
                h = _body(args.body, 2)
                jobs.append(lambda f=f, p=p, h=h, label=label: _general(h, f, p, args.refinement, label))
        return name, jobs
    if cmd == "scan":
        _dim(args, 2, (2,))
        p = _p(args, 0.5)
        if p < 0:
            raise UsageError("p", "p must be non-negative")
        grid = build_grid(2, GRID_RES[2])
        jobs = []
        for terms in _inputs(args, 2):
            f = field_from_terms(terms, grid)
            label = format_phi(terms)
            jobs.append(lambda f=f, label=label: bm_concavity_scan(
                theorem_family_body(f, p, -args.eps), theorem_family_body(f, p, args.eps), p,
                refinement=args.refinement, label=label).to_dict())
        return "bm", jobs
    if cmd == "check":
        _dim(args, 2, (2,))
        p = _p(args, 1.0)
        if p < 0:
            raise UsageError("p", "p must be non-negative")
        if args.functional == "eigenvalue" and p == 0:
            raise UsageError("p", "eigenvalue checks need p > 0")
        h = _body(args.body, 2)
        grid = h.grid
        jobs = []
        geom_sol = {}

        def base():
            if not geom_sol:
                g = validate_in_S(h)
                solver = solve_torsion if args.functional == "torsion" else solve_eigen
                geom_sol["v"] = (g, solver(g, args.refinement))
            return geom_sol["v"]

        for terms in _inputs(args, 2):
            f = field_from_terms(terms, grid)
            label = format_phi(terms)

            def job(f=f, label=label):
                g, sol = base()
                if args.functional == "eigenvalue":
                    rep = eigen_variation_lp(g, sol, f, p, label=label)
                elif p == 0:
                    rep = torsion_variation_log(g, sol, f, label=label)
                else:
                    rep = torsion_variation_lp(g, sol, f, p, label=label)
                return _variation_item(rep)

            jobs.append(job)
        # the shared base solve happens once, before the pool starts
        if jobs:
            base()
        return "variational", jobs
    raise UsageError("command", f"unknown command {cmd}")


def _general(h: SupportFunction, f, p: float, refinement: int, label: str) -> dict:
    g = validate_in_S(h)
    sol = solve_torsion(g, refinement)
    if p >= 1:
        return poincare_torsion_general(g, sol, f, p, label=label).to_dict()
    return problem_a_form(g, sol, f, p, label=label).to_dict()


def _run_job(job) -> dict:
    try:
        return job()
    except Exception as exc:  # per-item failure, batch continues
        return {"verdict": "error", "error": f"{type(exc).__name__}: {exc}"}


def _threads() -> int:
    raw = os.environ.get("BM_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError("BM_LAB_THREADS", f"not an integer: {raw!r}") from None


def _config(args) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("out", "figures")}
    return d


def run_command(argv: list, write: bool = False, echo=None) -> tuple[str, int, list]:
    """Run a non-acceptance command; returns (json text, exit code, printed lines)."""
    args = build_parser().parse_args(argv)
    label, jobs = _plan(args)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        items = list(pool.map(_run_job, jobs))
    doc = reports.document(f"{args.command} {label}", _config(args), items)
    text = reports.dumps(doc)
    lines = []
    for i, it in enumerate(items):
        if it["verdict"] == "error":
            lines.append(f"[{i}] error: {it['error']}")
        elif "margin" in it:
            lines.append(f"[{i}] {it['name']} {it['verdict']} margin={it['margin']:.6e} est={it['est_error']:.2e}")
        else:
            lines.append(f"[{i}] {it['name']} {it['verdict']} gap1={it['gap_first']:.2e} gap2={it['gap_second']:.2e}")
    verdicts = [it["verdict"] for it in items]
    lines.append(reports.summary_line(verdicts))
    if write:
        out = Path(args.out or DEFAULT_OUT)
        stem = f"{args.command}-{label}"
        reports.write_text(out / f"{stem}.json", text)
        for i, it in enumerate(items):
            table = it.get("artifacts", {}).get("scan_table") or it.get("artifacts", {}).get("worst_scan_table")
            if table:
                reports.write_text(out / f"{stem}-{i}.csv", reports.scan_csv(table))
            if args.figures and it["verdict"] != "error":
                _figures(out, stem, i, it)
    code = 0 if all(v in ("pass", "inconclusive") for v in verdicts) else 1
    return text, code, lines


def _figures(out: Path, stem: str, i: int, item: dict) -> None:
    from . import plotting

    art = item.get("artifacts", {})
    if "scan_table" in art:
        plotting.plot_scan(art["scan_table"], out / f"{stem}-{i}.png", item["name"])
    elif "pairs" in art:
        plotting.plot_pair_margins(art["pairs"], out / f"{stem}-{i}-pairs.png", item["name"])
        plotting.plot_scan(art["worst_scan_table"], out / f"{stem}-{i}-worst.png", "worst pair")
    elif "terms" in art:
        plotting.plot_terms(art["terms"], out / f"{stem}-{i}-terms.png", item["name"])


def _acceptance(args) -> int:
    from .acceptance import acceptance_document, run_all

    numbers = None
    if args.only:
        try:
            numbers = [int(x) for x in args.only.split(",")]
        except ValueError:
            raise UsageError("only", "expected comma separated criterion numbers") from None
    results = run_all(args.quick, numbers)
    out = Path(args.out or DEFAULT_OUT)
    reports.write_json(out / "acceptance.json", acceptance_document(results, args.quick))
    v = ["pass" if r.passed else "fail" for r in results]
    print(reports.summary_line(v))
    return 0 if all(r.passed for r in results) else 1


def main(argv: Optional[list] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
        if args.command == "acceptance":
            return _acceptance(args)
        _, code, lines = run_command(argv, write=True)
    except UsageError as exc:
        print(f"bm-lab: usage error: {exc}", file=sys.stderr)
        return 2
    for line in lines:
        print(line)
    return code


if __name__ == "__main__":
    sys.exit(main())
