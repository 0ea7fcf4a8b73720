"""``gwave`` command line: run a scenario and write JSON and CSV reports.

Exit codes: 0 all verdicts as expected (or consistent), 1 a verdict contradicts
an expectation or a consistency/agreement check fails, 2 usage, scenario or
I/O error, 3 at least one Inconclusive verdict (and nothing worse).
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .genfun import derivative_bound_test
from .netcalc import classify_scale
from .report import INCONCLUSIVE, REGULAR, SINGULAR, RegularityReport, _num
from .scenario import Scenario, ScenarioError, load_scenario
from .wavefront import consistency_check, singular_support_scan, wavefront_scan

SCHEMA = "gwave.report/1"
COMMANDS = ("classify", "wavefront", "singsupp", "consistency", "selftest")
CSV_COLUMNS = ("report", "m", "eps", "sup", "fitted_exponent")
TIMESTAMP_FIELD = "generated_at"

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class Outcome:
    """Collects verdict checks and produces the exit code."""

    def __init__(self):
        self.failures = []
        self.inconclusive = 0

    def verdict(self, key: str, actual: str, expected: str | None):
        if actual == INCONCLUSIVE:
            self.inconclusive += 1
        elif expected is not None and actual != expected:
            self.failures.append(f"{key}: expected {expected}, got {actual}")

    def require(self, key: str, ok: bool, what: str):
        if not ok:
            self.failures.append(f"{key}: {what}")

    @property
    def code(self) -> int:
        if self.failures:
            return EXIT_FAIL
        return EXIT_INCONCLUSIVE if self.inconclusive else EXIT_OK

    def to_dict(self) -> dict:
        return {"failures": self.failures, "inconclusive": self.inconclusive, "exit_code": self.code}


# --- commands -----------------------------------------------------------------------

def _need(items, what):
    if not items:
        raise ScenarioError(f"scenario defines no {what}")


def cmd_classify(sc: Scenario, out: Outcome):
    """Scale class of each point and its derivative-bound verdicts."""
    _need(sc.points, "points")
    results, reports = [], []
    p = sc.params
    for pt in sc.points:
        sv = classify_scale(pt.net.norm())
        uni = derivative_bound_test(sc.family, pt, p.N_max, p.M_max, p.A_max, "uniform")
        per = derivative_bound_test(sc.family, pt, p.N_max, p.M_max, p.A_max, "per_m")
        agree = uni.verdict == per.verdict or INCONCLUSIVE in (uni.verdict, per.verdict)
        out.verdict(pt.label, uni.verdict, sc.expect.get(pt.label))
        out.require(pt.label, agree, "uniform and per-m derivative-bound verdicts disagree")
        results.append({
            "point": pt.label,
            "scale": sv.to_dict(),
            "verdict": uni.verdict,
            "quantifiers_agree": agree,
            "reports": {"uniform": uni.to_dict(), "per_m": per.to_dict()},
        })
        reports += [(f"{pt.label}:uniform", uni), (f"{pt.label}:per_m", per)]
    return results, reports


def cmd_wavefront(sc: Scenario, out: Outcome):
    _need(sc.points, "points")
    _need(sc.directions, "directions")
    table = wavefront_scan(sc.family, sc.points, sc.directions, sc.mode, sc.params)
    results, reports = [], []
    for p, d, rep in table.rows:
        key = f"{p.label}/{d.label}"
        out.verdict(key, rep.verdict, sc.expect.get(key))
        results.append({"point": p.label, "direction": d.label, "verdict": rep.verdict, "report": rep.to_dict()})
        reports.append((key, rep))
    return results, reports


def cmd_singsupp(sc: Scenario, out: Outcome):
    _need(sc.points, "points")
    extra = [sc.direction(n) for n in sc.extra_directions]
    rows = singular_support_scan(sc.family, sc.points, extra, sc.params)
    results, reports = [], []
    for row in rows:
        pt = row["point"]
        out.verdict(pt, row["derivative_bound"], sc.expect.get(pt))
        out.verdict(f"{pt}/all", row["all_directions"], sc.expect.get(pt))
        out.require(pt, row["agree"] or INCONCLUSIVE in (row["derivative_bound"], row["all_directions"]),
                    "derivative-bound and all-directions columns disagree")
        results.append({
            "point": pt,
            "derivative_bound": row["derivative_bound"],
            "all_directions": row["all_directions"],
            "agree": row["agree"],
            "directions": row["directions"],
            "reports": {k: v.to_dict() for k, v in row["reports"].items()},
        })
        reports += [(f"{pt}/{k}", v) for k, v in row["reports"].items()]
    return results, reports


def cmd_consistency(sc: Scenario, out: Outcome):
    if not sc.x0 or not sc.xi0:
        raise ScenarioError("consistency needs [test] x0 and xi0")
    x0, xi0 = sc.point(sc.x0), sc.direction(sc.xi0)
    res = consistency_check(
        sc.family, x0, xi0, sc.params.r, sc.grid,
        extra_points=[sc.point(n) for n in sc.extra_points],
        extra_directions=[sc.direction(n) for n in sc.extra_directions],
        params=sc.params,
    )
    out.require("consistency", res["consistent"], "classical and refined sides disagree")
    cl = res["classical"]
    out.verdict("classical", cl.verdict, sc.expect.get("classical"))
    result = {
        "x0": sc.x0,
        "xi0": sc.xi0,
        "r": sc.params.r,
        "classical": cl.to_dict(),
        "refined_conjunction": res["refined_conjunction"],
        "consistent": res["consistent"],
        "localization": res["localization"],
        "refined": [
            {"point": p.label, "direction": d.label, "verdict": r.verdict, "report": r.to_dict()}
            for p, d, r in res["refined"].rows
        ],
    }
    reports = [("classical", cl)] + [(f"{p.label}/{d.label}", r) for p, d, r in res["refined"].rows]
    return [result], reports


def cmd_selftest(sc, out: Outcome):
    from .selftest import run_selftest

    results = run_selftest()
    for r in results:
        out.require(r["name"], r["passed"], r.get("detail", "failed"))
    return results, []


HANDLERS = {
    "classify": cmd_classify,
    "wavefront": cmd_wavefront,
    "singsupp": cmd_singsupp,
    "consistency": cmd_consistency,
    "selftest": cmd_selftest,
}


# --- output ---------------------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        return _num(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def render_json(doc: dict) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_csv(reports: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for key, rep in reports:
        for m, eps, sup, a in rep.curves():
            w.writerow([key, m, repr(eps), "nan" if math.isnan(sup) else repr(sup),
                        "nan" if math.isnan(a) else repr(a)])
    return buf.getvalue()


def strip_timestamp(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != TIMESTAMP_FIELD}


def run(sc: Scenario | None, command: str, out_dir: Path | None = None) -> tuple[int, dict]:
    """Run one command; write ``<name>-<command>.json`` and ``-curves.csv``."""
    outcome = Outcome()
    results, reports = HANDLERS[command](sc, outcome)
    name = sc.name if sc is not None else "selftest"
    doc = {
        "schema": SCHEMA,
        "version": __version__,
        TIMESTAMP_FIELD: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "command": command,
        "scenario": sc.to_dict() if sc is not None else None,
        "results": results,
        "outcome": outcome.to_dict(),
    }
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{name}-{command}.json").write_text(render_json(doc))
        if reports:
            (out_dir / f"{name}-{command}-curves.csv").write_text(render_csv(reports))
    return outcome.code, doc


def _summary_lines(command: str, doc: dict) -> list:
    lines = []
    for r in doc["results"]:
        if command == "wavefront":
            lines.append(f"{r['point']:>16} {r['direction']:>12}  {r['verdict']}")
        elif command == "classify":
            lines.append(f"{r['point']:>16}  {r['scale']['kind']:<18} {r['verdict']}")
        elif command == "singsupp":
            lines.append(f"{r['point']:>16}  derivative-bound {r['derivative_bound']:<12} "
                         f"all-directions {r['all_directions']:<12} agree {str(r['agree']).lower()}")
        elif command == "consistency":
            lines.append(f"classical {r['classical']['verdict']}  refined {r['refined_conjunction']}  "
                         f"consistent: {str(r['consistent']).lower()}")
            for row in r["localization"]:
                lines.append(f"  localization {row['point']}/{row['direction']}: {row['verdict']}")
        else:
            lines.append(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}")
    for f in doc["outcome"]["failures"]:
        lines.append(f"failure: {f}")
    return lines


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gwave", description="Microlocal regularity tests on generalized-function scenarios.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scenario", type=Path, help="scenario file (INI); not needed for selftest")
    ap.add_argument("--out", type=Path, default=Path("gwave-out"), help="output directory (default: gwave-out)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for spectrum slices")
    ap.add_argument("--eps-floor", type=float, metavar="K", help="drop grid values below 2^-K")
    ap.add_argument("--version", action="version", version=f"gwave {__version__}")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads < 1:
        ap.error("--threads must be positive")
    try:
        if args.command == "selftest":
            sc = load_scenario(args.scenario, threads=args.threads) if args.scenario else None
        else:
            if args.scenario is None:
                ap.error(f"{args.command} needs --scenario")
            floor = None if args.eps_floor is None else 2.0 ** (-args.eps_floor)
            sc = load_scenario(args.scenario, floor, args.threads)
        code, doc = run(sc, args.command, args.out)
    except ScenarioError as e:
        print(f"gwave: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"gwave: I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE
    for line in _summary_lines(args.command, doc):
        print(line)
    return code


if __name__ == "__main__":
    sys.exit(main())
