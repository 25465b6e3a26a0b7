"""Command-line entry point: scenario files in, JSON reports out.

Exit codes: 0 success, 1 input error, 2 a property check failed.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from . import __version__
from . import expr as ex
from . import integral as ig
from . import lln
from . import maximal as mx
from . import pde
from . import regions as rg
from . import whitenoise as wn
from .report import CheckReport, _plain
from .scenario import Scenario, ScenarioError, load

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2

SUBCOMMAND_TYPES = {
    "eval": None,
    "pde-check": ("pde",),
    "lln": ("lln",),
    "integral": ("integral",),
    "conditional": ("conditional",),
}


class RunError(RuntimeError):
    """The scenario was valid but could not be evaluated (e.g. search budget)."""


def _sanitize(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, dict):
        return {k: _sanitize(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_sanitize(v) for v in x]
    return x


def _value(cv: mx.CertifiedValue) -> dict:
    return {"value": cv.value,
            "error_bound": cv.error_bound if math.isfinite(cv.error_bound) else None,
            "certified": cv.certified}


def _expect(model, regions, phi, sc: Scenario, mode=None):
    """Certified value; in certified mode falls back to the flagged heuristic."""
    mode = mode or sc.mode
    try:
        return wn.expect(model, regions, phi, sc.epsilon, mode=mode, seed=sc.seed)
    except mx.CertificationError:
        if mode == "heuristic":
            raise
        return wn.expect(model, regions, phi, sc.epsilon, mode="heuristic", seed=sc.seed)


def _cyl_expect(X: ig.CylinderRandomVariable, model, sc: Scenario):
    return _expect(model, X.regions, X.expr, sc)


def _atom_table(regions) -> list[dict]:
    dec = rg.atoms(regions)
    return [{"mask": m, "measure": v} for m, v in dec.table()]


def _region_names(regions) -> list[str]:
    return [r.name or f"R{i}" for i, r in enumerate(regions)]


# ---------------------------------------------------------------------------
# runners return (result dict, list of CheckReport, csv rows or None)


def _run_fdd(sc: Scenario):
    regs = sc.query["regions"]
    v = _expect(sc.model(), regs, sc.phi, sc)
    table = _atom_table(regs)
    return {"phi": ex.to_text(sc.phi), "regions": _region_names(regs), **_value(v),
            "atoms": table}, [], (["mask", "measure"], [[a["mask"], a["measure"]] for a in table])


def _run_generating(sc: Scenario):
    regs, p = sc.query["regions"], sc.query["p"]
    model = sc.model()
    value = wn.fdd_generating(model, regs, p)
    out = {"regions": _region_names(regs), "p": p, "value": value, "atoms": _atom_table(regs)}
    if len(regs) == 3:
        terms, total = wn.expansion_3set(model, *regs, p)
        out["expansion"] = [{"mask": "".join(map(str, t.mask)), "slope": t.slope,
                             "g": t.g_value, "measure": t.measure} for t in terms]
        out["expansion_total"] = total
    table = out["atoms"]
    return out, [], (["mask", "measure"], [[a["mask"], a["measure"]] for a in table])


def _run_integral(sc: Scenario, check_only=False):
    field = sc.query["field"]
    model = sc.model()
    if sc.query["kind"] == "spatial":
        I = ig.integrate_spatial(field, model)
        simple = field
    else:
        I = ig.integrate_temporal_spatial(field, model)
        simple = field.to_simple()
    rep = ig.bound_check_spatial(simple, model, sc.epsilon)
    out = {"kind": sc.query["kind"], "integral": str(I)}
    if not check_only:
        out["E[I]"] = _value(_cyl_expect(I, model, sc))
        out["E[-I]"] = _value(_cyl_expect(-I, model, sc))
        out["E[|I|]"] = rep.details["lhs"]
        out["norm_M1"] = rep.details["norm_M1"]
    return out, [rep], None


def _run_conditional(sc: Scenario):
    X, t = sc.query["X"], sc.query["t"]
    model = sc.model()
    Y = ig.conditional_expect(X, t, model)
    return {
        "t": t, "X": str(X), "conditional": str(Y),
        "observed_regions": [[list(b.extents) for b in r.boxes] for r in Y.regions],
        "E[X]": _value(_cyl_expect(X, model, sc)),
        "E[E[X|F_t]]": _value(_cyl_expect(Y, model, sc)),
    }, [], None


def _run_pde(sc: Scenario):
    prob = sc.query["problem"]
    table, rep = pde.convergence_study(prob, sc.query["refinements"], sc.query["threshold"])
    finest = pde.solve_fd(pde.with_step(prob, sc.query["refinements"][-1]))
    d = prob.dim
    header = ["t", "x"] + (["y"] if d == 2 else []) + ["u_numeric", "u_closed", "abs_err"]
    rows = list(finest.rows(prob.horizon))
    for row in table:
        row.pop("seconds", None)
    return {"convergence": table, "final_error": finest.error}, [rep], (header, rows)


def _run_lln(sc: Scenario):
    q = sc.query
    rows, rep = lln.convergence_curve(q["family"], q["phi"], q["n"], q["samples"], sc.seed,
                                      q["threshold"])
    curve = [{"n": r.n, "value": r.value, "std_error": r.std_error, "reference": r.reference,
              "gap": r.gap, "best_strategy": r.best_strategy} for r in rows]
    return {"curve": curve}, [rep], (
        ["n", "value", "std_error", "reference", "gap", "best_strategy"],
        [[c[k] for k in ("n", "value", "std_error", "reference", "gap", "best_strategy")]
         for c in curve])


def _run_verify(sc: Scenario):
    q = sc.query
    prop = q["property"]
    model = sc.model()
    eps = sc.epsilon
    if prop == "additivity":
        v = wn.additivity_residual(model, q["regions"], eps)
        rep = CheckReport("additivity", v.value <= eps, {"residual": v.value,
                                                         "error_bound": v.error_bound})
        return {"residual": v.value}, [rep], None
    if prop == "consistency":
        rep = wn.consistency_check(model, q["regions"], q["trials"], sc.seed)
        return {"residual": max(rep.details["compatibility_residual"],
                                rep.details["symmetry_residual"])}, [rep], None
    if prop == "expansion":
        terms, total = wn.expansion_3set(model, *q["regions"], q["p"])
        direct = wn.fdd_generating(model, q["regions"], q["p"])
        ok = abs(total - direct) <= 1e-12 * max(1.0, abs(direct))
        rep = CheckReport("expansion", ok, {"expansion_total": total, "generating": direct})
        return {"value": total, "terms": [{"mask": "".join(map(str, t.mask)), "g": t.g_value,
                                           "measure": t.measure} for t in terms]}, [rep], None
    if prop == "integral_bound":
        out, reps, _ = _run_integral(sc, check_only=True)
        out["value"] = reps[0].details["lhs"]
        return out, reps, None
    if prop == "integral_properties":
        rep = ig.integral_properties_check(q["f"], q["g"], q["alpha"], model, q["s"], q["r"],
                                           q["t"], eps)
        return {"residual": max(rep.details["split_residual"],
                                rep.details["linearity_residual"])}, [rep], None
    if prop == "conditional_properties":
        rep = ig.conditional_properties_check(q["X"], q["Y"], q["eta"], q["t"], q["s"], model,
                                              eps, seed=sc.seed)
        return {"residual": rep.details["tower"]["residual"]}, [rep], None
    if prop == "invariance":
        rep = wn.invariance_check(model, q["regions"], sc.phi, q["shift"], q["perm"],
                                  q["signs"], eps)
        return {"value": rep.details["difference"]}, [rep], None
    if prop == "axioms":
        rep = mx.axioms_check(q["box"], q["e1"], q["e2"], q["lambda"], eps)
        return {"value": rep.details["E[e1+e2]"]}, [rep], None
    if prop == "independence":
        rep = mx.independence_factorization_check(q["intervals"], q["trials"], eps, sc.seed)
        return {"residual": rep.details["iterated_residual"]}, [rep], None
    if prop == "distance":
        rep = wn.distance_to_range_check(model, q["region"], eps)
        return {"value": rep.details["expected_distance"]}, [rep], None
    if prop == "semigroup":
        rep = pde.semigroup_check(q["problem"], q["t"], q["s"], q["points"], eps)
        return {"value": rep.details["max_difference"]}, [rep], None
    raise AssertionError(prop)


RUNNERS = {
    "fdd": _run_fdd, "generating": _run_generating, "integral": _run_integral,
    "conditional": _run_conditional, "pde": _run_pde, "lln": _run_lln, "verify": _run_verify,
}


def _headline(result: dict):
    for k in ("value", "residual"):
        if isinstance(result.get(k), (int, float)):
            return float(result[k])
    return None


def run_scenario(sc: Scenario, timings: bool = True) -> tuple[dict, list, tuple | None]:
    t0 = time.perf_counter()
    try:
        result, checks, table = RUNNERS[sc.qtype](sc)
    except mx.CertificationError as e:
        raise RunError(str(e)) from None
    if sc.expect is not None:
        got = _headline(result)
        want, tol = sc.expect["value"], sc.expect["tol"]
        ok = got is not None and abs(got - want) <= tol
        checks = list(checks) + [CheckReport("assert", ok, {"expected": want, "tolerance": tol,
                                                            "actual": got})]
    if timings:
        result["seconds"] = round(time.perf_counter() - t0, 3)
    return result, checks, table


def _base_report(no_timestamp: bool) -> dict:
    rep = {"tool": "maxfield", "version": __version__}
    if not no_timestamp:
        rep["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return rep


def _apply_overrides(sc: Scenario, args):
    if getattr(args, "epsilon", None) is not None:
        if not args.epsilon > 0:
            raise ScenarioError("must be positive", "--epsilon")
        sc.epsilon = args.epsilon
    if getattr(args, "mode", None) is not None:
        sc.mode = args.mode
    if getattr(args, "seed", None) is not None:
        sc.seed = args.seed


def scenario_report(path, args) -> tuple[dict, int, tuple | None]:
    """Report for one scenario file, with the exit code it implies."""
    entry = {"scenario": str(path)}
    try:
        sc = load(path)
        _apply_overrides(sc, args)
        allowed = SUBCOMMAND_TYPES.get(getattr(args, "command", "eval"))
        if allowed is not None and sc.qtype not in allowed:
            raise ScenarioError(f"query type {sc.qtype!r} does not fit this subcommand; "
                                f"expected {allowed[0]!r}", "query.type")
    except (ScenarioError, ex.ExpressionError, ValueError) as e:
        entry.update(error=str(e), passed=False)
        return entry, EXIT_INPUT, None
    entry["query"] = sc.source["query"]
    try:
        result, checks, table = run_scenario(sc, timings=not args.no_timestamp)
    except (RunError, ValueError) as e:
        entry.update(error=str(e), passed=False)
        return entry, EXIT_INPUT, None
    passed = all(c.passed for c in checks)
    entry["result"] = result
    entry["checks"] = [c.to_dict() for c in checks]
    entry["passed"] = passed
    return entry, (EXIT_OK if passed else EXIT_FAIL), table


def default_fixtures() -> Path:
    return Path(str(resources.files("maxfield") / "fixtures"))


def verify_all(fixtures_dir=None, epsilon: float | None = None, seed: int | None = None,
               threads: int = 1, no_timestamp: bool = True,
               mode: str | None = None) -> tuple[dict, int]:
    """Run every ``*.json`` fixture; results are listed in file-name order."""
    d = Path(fixtures_dir) if fixtures_dir is not None else default_fixtures()
    files = sorted(d.glob("*.json")) if d.is_dir() else []
    report = _base_report(no_timestamp)
    if not files:
        report.update(error=f"no fixtures found in {d}", passed=False)
        return report, EXIT_INPUT
    args = argparse.Namespace(epsilon=epsilon, mode=mode, seed=seed, no_timestamp=no_timestamp,
                              command="eval")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(lambda f: scenario_report(f, args), files))
    entries = []
    for f, (entry, code, _) in zip(files, outcomes):
        entry["scenario"] = f.name
        entries.append(entry)
    codes = [c for _, c, _ in outcomes]
    code = EXIT_INPUT if EXIT_INPUT in codes else (EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK)
    report["fixtures"] = entries
    report["summary"] = [{"scenario": e["scenario"], "passed": e["passed"]} for e in entries]
    report["passed"] = code == EXIT_OK
    return report, code


def dumps(report: dict) -> str:
    return json.dumps(_sanitize(_plain(report)), indent=2) + "\n"


def _write(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _write_csv(path, table):
    header, rows = table
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--epsilon", type=float, help="certified tolerance (overrides the file)")
    common.add_argument("--mode", choices=("certified", "heuristic"))
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads (results do not depend on this)")
    common.add_argument("--csv", metavar="PATH", help="also write a CSV table")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit timestamp and timings so reports are byte-reproducible")
    common.add_argument("-o", "--output", metavar="PATH", help="report path (default stdout)")

    p = argparse.ArgumentParser(prog="maxfield", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"maxfield {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("eval", "evaluate any scenario"),
                        ("pde-check", "PDE convergence scenario"),
                        ("lln", "law of large numbers scenario"),
                        ("integral", "stochastic integral scenario"),
                        ("conditional", "conditional expectation scenario")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("scenario")
    vp = sub.add_parser("verify", parents=[common], help="run the fixture suite")
    vp.add_argument("fixtures", nargs="?", help="fixture directory (default: bundled)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        sys.stderr.write("maxfield: --threads must be at least 1\n")
        return EXIT_INPUT
    if args.command == "verify":
        report, code = verify_all(args.fixtures, args.epsilon, args.seed, args.threads,
                                  args.no_timestamp, args.mode)
        if args.csv:
            _write_csv(args.csv, (["scenario", "passed"],
                                  [[e["scenario"], e["passed"]] for e in report.get("summary", [])]))
        _write(dumps(report), args.output)
        return code
    entry, code, table = scenario_report(args.scenario, args)
    report = _base_report(args.no_timestamp)
    report.update(entry)
    if args.csv and table is not None:
        _write_csv(args.csv, table)
    _write(dumps(report), args.output)
    if "error" in entry:
        sys.stderr.write(f"maxfield: {entry['error']}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
