"""Refined and classical microlocal regularity tests and the scans built on them."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .genfun import (
    GROWTH_SLOPE_LIMIT,
    GeneralizedDirection,
    GeneralizedPoint,
    RepFamily,
    _slope,
    derivative_bound_test,
)
from .microfft import (
    DEFAULT_RESOLUTION,
    FastTube,
    Resolution,
    ScaledCutoff,
    SliceSet,
    StandardCone,
    compute_slices,
    default_schedule,
    scan_region,
)
from .netcalc import EpsilonGrid, InsufficientData, ScaleKind, growth_exponent, is_moderate, is_negligible
from .report import (
    INCONCLUSIVE,
    MIN_TAIL,
    REGULAR,
    SINGULAR,
    SINGULAR_MARGIN,
    RegularityReport,
    Row,
    decide,
)


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class ScanParams:
    M_max: int = 6
    N_max: int = 10
    A_max: int = 4
    r: float = 0.3
    schedule: object = None
    res: Resolution = DEFAULT_RESOLUTION
    threads: int = 1

    def k_schedule(self):
        return self.schedule or default_schedule(self.M_max)


DEFAULT_PARAMS = ScanParams()


def _executor(params: ScanParams):
    return ThreadPoolExecutor(max_workers=params.threads) if params.threads > 1 else None


def _slices(u, cutoff, grid, params):
    ex = _executor(params)
    try:
        return compute_slices(u, cutoff, grid, params.res, ex)
    finally:
        if ex is not None:
            ex.shutdown()


# --- rows -----------------------------------------------------------------------

def decay_row(m: int, net, M_max: int, note: str = "") -> Row:
    """Row passes iff the sup-net is Negligible at order >= m."""
    try:
        nv = is_negligible(net, M_max)
    except InsufficientData as e:
        return Row(m, net.grid.values, net.magnitude, math.nan, -float(m), None, note=str(e))
    a = nv.fit_exponent
    margin = m + a if np.isfinite(a) else (-math.inf if a == -math.inf else math.inf)
    return Row(m, net.grid.values, net.magnitude, a, -float(m), nv.order >= m,
               margin=margin, order=nv.order, note=note or nv.note)


def weighted_rows(nets: dict, N_max: int):
    """Single-N verdict for the <xi>^m-weighted sups over m = 1..M.

    Finite data cannot tell "one N for all m" from "N growing with m" by a
    bound alone, so exponents rising with m at slope >= 0.25 count as
    failure, like the derivative-bound tests do in |alpha|.
    """
    rows, exps = [], {}
    for m, net in nets.items():
        try:
            a = growth_exponent(net)
            mv = is_moderate(net, N_max)
            order = mv.order if mv.kind is ScaleKind.MODERATE else None
        except InsufficientData as e:
            rows.append(Row(m, net.grid.values, net.magnitude, math.nan, float(N_max), None,
                            kind="weighted", note=str(e)))
            continue
        exps[m] = a
        rows.append(Row(m, net.grid.values, net.magnitude, a, float(N_max), None,
                        order=order, kind="weighted"))
    if len(exps) < len(nets):
        verdict = INCONCLUSIVE
        worst = math.nan
    else:
        slope = _slope(list(exps), list(exps.values()))
        top = max(exps.values())
        orders = [r.order for r in rows]
        ok = all(o is not None and o <= N_max for o in orders)
        if ok and slope < GROWTH_SLOPE_LIMIT:
            verdict = REGULAR
        elif slope >= 2 * GROWTH_SLOPE_LIMIT or top >= N_max + 0.75:
            verdict = SINGULAR
        else:
            verdict = INCONCLUSIVE
        worst = slope
    for r in rows:
        r.passed = None if verdict == INCONCLUSIVE else verdict == REGULAR
        r.margin = worst
    return rows, verdict


def _tube_monotone(rows) -> bool:
    passed = [r.m for r in rows if r.passed is True]
    failed = [r.m for r in rows if r.passed is False]
    return not (passed and failed and min(failed) < max(passed))


def _subject(u, x0, xi0):
    return {
        "family": u.describe(),
        "x0": x0.describe() if hasattr(x0, "describe") else list(map(float, x0)),
        "xi0": xi0.describe() if hasattr(xi0, "describe") else list(map(float, xi0)),
    }


# --- refined ---------------------------------------------------------------------

def refined_cutoff(x0: GeneralizedPoint, params: ScanParams) -> ScaledCutoff:
    return ScaledCutoff.scheduled(x0, x0.d, params.M_max, params.k_schedule())


def refined_from_slices(u: RepFamily, x0: GeneralizedPoint, xi0: GeneralizedDirection,
                        slices: SliceSet, params: ScanParams = DEFAULT_PARAMS,
                        cutoff: ScaledCutoff | None = None, weighted: bool = False) -> RegularityReport:
    rows, w_nets, empty = [], {}, 0
    for m in range(1, params.M_max + 1):
        tube = FastTube(xi0, m)
        scan = scan_region(slices, tube)
        empty += scan.empty
        rows.append(decay_row(m, scan.net, params.M_max))
        if weighted:
            w_nets[m] = scan_region(slices, tube, weight_m=m, use_floor=False).net
    verdict = decide(rows)
    extra = {}
    if weighted:
        wr, wv = weighted_rows(w_nets, params.N_max)
        extra["weighted"] = {"verdict": wv, "rows": [r.to_dict() for r in wr]}
    grid = slices.grid
    sched = params.k_schedule()
    return RegularityReport(
        subject=_subject(u, x0, xi0),
        mode="refined",
        rows=rows,
        verdict=verdict,
        cutoff={
            "schedule": "max(2M, floor(log log(1/eps)) + 2M)" if params.schedule is None else "custom",
            "k": [int(sched(e)) for e in grid.values],
        },
        diagnostics={
            "empty_region": empty,
            "resolution_ceilings": slices.ceilings,
            "tube_monotone": _tube_monotone(rows),
            "M_max": params.M_max,
        },
        extra=extra,
    )


def refined_regularity_test(u: RepFamily, x0: GeneralizedPoint, xi0: GeneralizedDirection,
                            params: ScanParams = DEFAULT_PARAMS) -> RegularityReport:
    """Decay of the windowed transform in fast tubes around xi0, m = 1..M_max."""
    grid = x0.grid
    xi0 = xi0.on_grid(grid)
    cut = refined_cutoff(x0, params)
    return refined_from_slices(u, x0, xi0, _slices(u, cut, grid, params), params, cut)


# --- classical -------------------------------------------------------------------

def _standard(v, name: str) -> np.ndarray:
    if hasattr(v, "net"):
        arr = v.net.array().real
        if not np.all(arr == arr[0]):
            raise ValueError(f"{name} must be a standard (constant) net")
        return arr[0]
    return np.atleast_1d(np.asarray(v, dtype=float))


def classical_regularity_test(u: RepFamily, x0, xi0, grid: EpsilonGrid,
                              params: ScanParams = DEFAULT_PARAMS,
                              slices: SliceSet | None = None) -> RegularityReport:
    """Fixed window of radius r at x0 and the standard cone of half-width r.

    Two forms are evaluated: eps^m decay above the floor eps^(-1/M_max), and a
    single-N moderate bound on <xi>^m |v^| over the whole cone.  The verdict
    is the common one; disagreement gives Inconclusive.
    """
    x = _standard(x0, "x0")
    th = _standard(xi0, "xi0")
    th = th / np.linalg.norm(th)
    cut = ScaledCutoff.standard(x.tolist(), u.d, params.r)
    slices = slices or _slices(u, cut, grid, params)
    rows, w_nets = [], {}
    cone = StandardCone(th, params.r, floor=lambda eps: eps ** (-1.0 / params.M_max))
    for m in range(1, params.M_max + 1):
        rows.append(decay_row(m, scan_region(slices, cone).net, params.M_max))
        w_nets[m] = scan_region(slices, StandardCone(th, params.r), weight_m=m, use_floor=False).net
    decay_v = decide(rows)
    wr, weighted_v = weighted_rows(w_nets, params.N_max)
    verdict = decay_v if decay_v == weighted_v else INCONCLUSIVE
    return RegularityReport(
        subject=_subject(u, x, th),
        mode="classical",
        rows=rows,
        verdict=verdict,
        cutoff={"window": "phi0((x - x0) / r)", "r": params.r},
        diagnostics={
            "resolution_ceilings": slices.ceilings,
            "decay_verdict": decay_v,
            "weighted_verdict": weighted_v,
            "tube_monotone": _tube_monotone(rows),
            "M_max": params.M_max,
            "N_max": params.N_max,
        },
        extra={"weighted": {"verdict": weighted_v, "rows": [r.to_dict() for r in wr]}},
    )


# --- scans -----------------------------------------------------------------------

@dataclass
class WavefrontTable:
    rows: list = field(default_factory=list)  # (point, direction, report)

    def verdicts(self) -> list:
        return [r.verdict for _, _, r in self.rows]

    def keys(self) -> list:
        return [(p.label, d.label) for p, d, _ in self.rows]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"point": p.label, "direction": d.label, "report": r.to_dict()}
                for p, d, r in self.rows
            ]
        }


def _check_unique(items, what):
    labels = [i.label for i in items]
    if len(set(labels)) != len(labels):
        raise ValueError(f"{what} labels must be unique")


def wavefront_scan(u: RepFamily, points: list, directions: list, mode: str = "refined",
                   params: ScanParams = DEFAULT_PARAMS) -> WavefrontTable:
    """Cartesian product of tests, one slice set per point, deterministic order."""
    if not points or not directions:
        raise EmptyInput("points and directions must be nonempty")
    _check_unique(points, "point")
    _check_unique(directions, "direction")
    table = WavefrontTable()
    for p in points:
        grid = p.grid
        if mode == "refined":
            cut = refined_cutoff(p, params)
            sl = _slices(u, cut, grid, params)
            for d in directions:
                table.rows.append((p, d, refined_from_slices(u, p, d.on_grid(grid), sl, params, cut)))
        elif mode == "classical":
            x = _standard(p, "point")
            cut = ScaledCutoff.standard(x.tolist(), u.d, params.r)
            sl = _slices(u, cut, grid, params)
            for d in directions:
                table.rows.append((p, d, classical_regularity_test(u, p, d, grid, params, sl)))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return table


def standard_directions(grid: EpsilonGrid, d: int) -> list:
    if d == 1:
        return [GeneralizedDirection.constant(grid, [1.0], "+1"),
                GeneralizedDirection.constant(grid, [-1.0], "-1")]
    out = []
    for j in range(16):
        a = 2 * math.pi * j / 16
        out.append(GeneralizedDirection.constant(grid, [math.cos(a), math.sin(a)], f"angle{j}/16"))
    return out


def _conjunction(verdicts) -> str:
    if verdicts and all(v == REGULAR for v in verdicts):
        return REGULAR
    if any(v == SINGULAR for v in verdicts):
        return SINGULAR
    return INCONCLUSIVE


def _agree(a: str, b: str) -> bool:
    return a == b and a != INCONCLUSIVE


def singular_support_scan(u: RepFamily, points: list, extra_directions=(),
                          params: ScanParams = DEFAULT_PARAMS) -> list:
    """Per point: derivative-bound verdict vs the conjunction over directions."""
    if not points:
        raise EmptyInput("no points")
    out = []
    for p in points:
        grid = p.grid
        dirs = standard_directions(grid, u.d) + [d.on_grid(grid) for d in extra_directions]
        db = derivative_bound_test(u, p, params.N_max, params.M_max, params.A_max, "uniform")
        cut = refined_cutoff(p, params)
        sl = _slices(u, cut, grid, params)
        reports = [(d, refined_from_slices(u, p, d, sl, params, cut)) for d in dirs]
        col = _conjunction([r.verdict for _, r in reports])
        out.append({
            "point": p.label,
            "derivative_bound": db.verdict,
            "all_directions": col,
            "agree": _agree(db.verdict, col),
            "directions": {d.label: r.verdict for d, r in reports},
            "reports": {"derivative_bound": db, **{d.label: r for d, r in reports}},
        })
    return out


def consistency_points(x0: np.ndarray, r: float, grid: EpsilonGrid) -> list:
    """x0 + c r e1 for c in {0, +-1/2, +-1} and the offsets sqrt(eps) r, r/log(1/eps)."""
    d = x0.size
    pts = []

    def mk(offset: str, label: str):
        exprs = [f"{float(x0[0])!r} + {offset}"] + [repr(float(v)) for v in x0[1:]]
        pts.append(GeneralizedPoint.from_exprs(exprs, grid, label))

    for c, lab in [(0.0, "x0"), (0.5, "x0+r/2"), (-0.5, "x0-r/2"), (1.0, "x0+r"), (-1.0, "x0-r")]:
        mk(repr(float(c * r)), lab)
    mk(f"sqrt(eps) * {r!r}", "x0+sqrt(eps)r")
    mk(f"{r!r} / log(1/eps)", "x0+r/log(1/eps)")
    return pts


def consistency_directions(xi0: np.ndarray, r: float, grid: EpsilonGrid, extra=()) -> list:
    d = xi0.size
    out = [GeneralizedDirection.constant(grid, xi0, "xi0")]
    if d == 2:
        base = math.atan2(xi0[1], xi0[0])
        for s, lab in [(0.5, "xi0+r/2"), (-0.5, "xi0-r/2")]:
            a = base + s * r  # chord 2 sin(r/4) < r
            out.append(GeneralizedDirection.constant(grid, [math.cos(a), math.sin(a)], lab))
    for e in extra:
        out.append(e.on_grid(grid))
    return out


def consistency_check(u: RepFamily, x0, xi0, r: float, grid: EpsilonGrid,
                      extra_points=(), extra_directions=(), samples: int = 4,
                      params: ScanParams = DEFAULT_PARAMS) -> dict:
    """Classical verdict at (x0, xi0) against refined verdicts in the r-ball."""
    x = _standard(x0, "x0")
    th = _standard(xi0, "xi0")
    pts = consistency_points(x, r, grid) + [p.on_grid(grid) for p in extra_points]
    if len(pts) < max(samples, 4):
        raise ValueError("consistency needs at least 4 sample points")
    dirs = consistency_directions(th / np.linalg.norm(th), r, grid, extra_directions)
    classical = classical_regularity_test(u, x, th, grid, ScanParams(**{**params.__dict__, "r": r}))
    table = wavefront_scan(u, pts, dirs, "refined", params)
    refined = _conjunction(table.verdicts())
    if classical.verdict == REGULAR:
        consistent = refined == REGULAR
    elif classical.verdict == SINGULAR:
        consistent = refined == SINGULAR
    else:
        consistent = False
    localization = [
        {"point": p.label, "direction": d.label, "verdict": rep.verdict}
        for p, d, rep in table.rows if p.label == "x0"
    ]
    return {
        "classical": classical,
        "refined": table,
        "refined_conjunction": refined,
        "consistent": consistent,
        "localization": localization,
    }
