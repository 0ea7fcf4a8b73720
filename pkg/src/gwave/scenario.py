"""Scenario files: INI sections describing a grid, a family, points and tests.

Layout (keys are case-insensitive)::

    [scenario]   name, dimension, description
    [grid]       preset = default | analysis | analysis_2d
                 or k_min, k_max, [k_step], [base]
    [family]     kind = smooth | mollified | plane_wave | bump | product
                 plus kind-specific keys; optional scale, translate
    [family:NAME]  further families, referenced by product factors
    [points]     NAME = vector expression, e.g. "1/log(1/eps)" or "(0, 0.2)"
    [directions] NAME = vector expression (normalized per eps)
    [test]       mode, M_max, N_max, A_max, r, schedule, x0, xi0,
                 extra_points, extra_directions
    [expect]     POINT/DIRECTION = verdict, POINT = verdict, classical = verdict
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .genfun import (
    BumpFamily,
    BumpSpec,
    GeneralizedDirection,
    GeneralizedPoint,
    NotCompact,
    NotUnit,
    RepFamily,
    embed_smooth,
    mollified_distribution,
    plane_wave,
    product,
    scale,
    translate,
)
from .microfft import DEFAULT_RESOLUTION, default_schedule
from .netcalc import EpsilonGrid, NetError
from .netexpr import ExprError, ExprSyntaxError, UnknownSymbol, eval_scalar, parse
from .report import INCONCLUSIVE, REGULAR, SINGULAR
from .wavefront import ScanParams

MODES = ("refined", "classical")
VERDICTS = {v.lower(): v for v in (REGULAR, SINGULAR, INCONCLUSIVE)}
FAMILY_KINDS = ("smooth", "mollified", "plane_wave", "bump", "product")


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class ValidationError(ScenarioError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class Scenario:
    name: str
    path: Path | None
    dimension: int
    grid: EpsilonGrid
    grid_spec: dict
    family: RepFamily
    family_spec: dict
    points: list
    directions: list
    mode: str = "refined"
    params: ScanParams = field(default_factory=ScanParams)
    x0: str | None = None
    xi0: str | None = None
    extra_points: list = field(default_factory=list)
    extra_directions: list = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    description: str = ""

    def point(self, name: str) -> GeneralizedPoint:
        for p in self.points:
            if p.label == name:
                return p
        raise ValidationError("points", f"no point named {name!r}")

    def direction(self, name: str) -> GeneralizedDirection:
        for d in self.directions:
            if d.label == name:
                return d
        raise ValidationError("directions", f"no direction named {name!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "grid": self.grid_spec,
            "family": self.family_spec,
            "points": [p.describe() for p in self.points],
            "directions": [d.describe() for d in self.directions],
            "mode": self.mode,
            "params": {
                "M_max": self.params.M_max, "N_max": self.params.N_max,
                "A_max": self.params.A_max, "r": self.params.r,
                "schedule": self.family_spec.get("_schedule", "default"),
            },
        }


# --- raw text ---------------------------------------------------------------------

class _Lines:
    """Maps (section, key) to the 1-based line where it is defined."""

    def __init__(self, text: str):
        self.where = {}
        section = None
        for i, raw in enumerate(text.splitlines(), 1):
            s = raw.strip()
            if not s or s[0] in "#;":
                continue
            m = re.fullmatch(r"\[([^\]]+)\]", s)
            if m:
                section = m.group(1).strip().lower()
                self.where[(section, None)] = i
                continue
            k = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            if section is not None:
                self.where[(section, k)] = i

    def __call__(self, section: str, key: str | None = None):
        return self.where.get((section.lower(), None if key is None else key.lower()))


def split_vector(text: str) -> list:
    """'(a, b)' or 'a, b' into component strings; commas inside calls are kept."""
    s = text.strip()
    if s.startswith("(") and s.endswith(")"):
        depth = 0
        for i, ch in enumerate(s):
            depth += ch == "("
            depth -= ch == ")"
            if depth == 0 and i < len(s) - 1:
                break
        else:
            s = s[1:-1]
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return parts


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, lines: _Lines):
        self.cp = cp
        self.lines = lines

    def has(self, section, key=None):
        if key is None:
            return self.cp.has_section(section)
        return self.cp.has_option(section, key)

    def get(self, section, key, default=None, required=False):
        if self.cp.has_option(section, key):
            return self.cp.get(section, key).strip()
        if required:
            raise ValidationError(f"{section}.{key}", "missing")
        return default

    def number(self, section, key, default, kind=float):
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return kind(v)
        except ValueError:
            raise ValidationError(f"{section}.{key}", f"expected a {kind.__name__}, got {v!r}") from None

    def expr(self, section, key, text, d):
        """Parse once to surface syntax errors with the defining line."""
        try:
            return parse(text, d)
        except ExprSyntaxError as e:
            raise ParseError(f"[{section}] {key}: {e}", self.lines(section, key)) from None
        except UnknownSymbol as e:
            raise ValidationError(f"{section}.{key}", str(e)) from None

    def vector(self, section, key, text, d, want=None):
        parts = split_vector(text)
        for p in parts:
            self.expr(section, key, p, d)
        if want is not None and len(parts) != want:
            raise ValidationError(f"{section}.{key}", f"expected {want} components, got {len(parts)}")
        return parts


# --- loading --------------------------------------------------------------------

def _grid(r: _Reader, eps_floor: float | None) -> tuple[EpsilonGrid, dict]:
    preset = (r.get("grid", "preset") or "").lower()
    try:
        if preset:
            spec = {"preset": preset}
            if preset == "default":
                grid = EpsilonGrid.default()
            elif preset == "analysis":
                grid = EpsilonGrid.analysis()
            elif preset == "analysis_2d":
                grid = EpsilonGrid.analysis_2d()
            else:
                raise ValidationError("grid.preset", f"unknown preset {preset!r}")
        else:
            k_min = r.number("grid", "k_min", 6.0)
            k_max = r.number("grid", "k_max", 20.0)
            k_step = r.number("grid", "k_step", 1.0)
            base = r.number("grid", "base", 2.0)
            if not (k_step > 0 and base > 1 and k_max > k_min):
                raise ValidationError("grid", "need k_max > k_min, k_step > 0, base > 1")
            spec = {"k_min": k_min, "k_max": k_max, "k_step": k_step, "base": base}
            grid = EpsilonGrid.geometric(k_min, k_max, k_step, base)
        if eps_floor is not None:
            keep = grid.values[grid.values >= eps_floor]
            spec["eps_floor"] = eps_floor
            grid = EpsilonGrid(keep)
    except NetError as e:
        raise ValidationError("grid", str(e)) from None
    return grid, spec


def _family(r: _Reader, section: str, d: int, seen: tuple = ()) -> tuple[RepFamily, dict]:
    if not r.has(section):
        raise ValidationError(section, "section missing")
    if section in seen:
        raise ValidationError(section, "families reference each other in a cycle")
    kind = (r.get(section, "kind", required=True)).lower()
    spec = {"kind": kind}
    try:
        if kind == "smooth":
            f = r.get(section, "f", required=True)
            r.expr(section, "f", f, d)
            u = embed_smooth(f, d, scale=r.number(section, "feature_scale", 1.0))
            spec["f"] = f
        elif kind == "mollified":
            dist = r.get(section, "distribution", "delta").lower()
            if dist not in ("delta", "dirac_derivative", "heaviside"):
                raise ValidationError(f"{section}.distribution", f"unknown distribution {dist!r}")
            c = r.vector(section, "center", r.get(section, "center", "0"), d, want=d)
            rad = r.number(section, "mollifier_radius", 1.0)
            u = mollified_distribution(dist, c, d, BumpSpec(radius=rad))
            spec.update(distribution=dist, center=c, mollifier_radius=rad)
        elif kind == "plane_wave":
            amp = r.get(section, "amplitude", "1")
            freq = r.get(section, "frequency", "1/eps")
            r.expr(section, "amplitude", amp, d)
            r.expr(section, "frequency", freq, d)
            th = r.vector(section, "direction", r.get(section, "direction", "1"), d, want=d)
            c = r.vector(section, "envelope_center", r.get(section, "envelope_center", ",".join(["0"] * d)), d, want=d)
            rad = r.number(section, "envelope_radius", 0.5)
            cvals = tuple(float(eval_scalar(parse(x, d), 0.5)) for x in c)
            u = plane_wave(amp, freq, th, BumpSpec(radius=rad, center=cvals), d)
            spec.update(amplitude=amp, frequency=freq, direction=th, envelope_center=list(cvals), envelope_radius=rad)
        elif kind == "bump":
            c = r.vector(section, "center", r.get(section, "center", "0"), d, want=d)
            rad = r.get(section, "radius", "1")
            r.expr(section, "radius", rad, d)
            u = BumpFamily(c, rad, d)
            spec.update(center=c, radius=rad)
        elif kind == "product":
            names = [n.strip() for n in r.get(section, "factors", required=True).split(",") if n.strip()]
            if len(names) < 2:
                raise ValidationError(f"{section}.factors", "a product needs at least two factors")
            facs = [_family(r, f"family:{n}", d, seen + (section,)) for n in names]
            u = facs[0][0]
            for v, _ in facs[1:]:
                u = product(u, v)
            spec["factors"] = [s for _, s in facs]
        else:
            raise ValidationError(f"{section}.kind", f"unknown family kind {kind!r}; expected one of {FAMILY_KINDS}")
        if r.has(section, "scale"):
            c = r.get(section, "scale")
            r.expr(section, "scale", c, d)
            u = scale(u, c)
            spec["scale"] = c
        if r.has(section, "translate"):
            y = r.vector(section, "translate", r.get(section, "translate"), d, want=d)
            u = translate(u, y)
            spec["translate"] = y
    except (ExprError, ValueError) as e:
        if isinstance(e, ScenarioError):
            raise
        raise ValidationError(section, str(e)) from None
    return u, spec


def _named(r: _Reader, section: str, d: int, grid: EpsilonGrid, cls):
    out = []
    if not r.has(section):
        return out
    for name in r.cp.options(section):
        text = r.cp.get(section, name)
        comps = r.vector(section, name, text, d, want=d)
        try:
            out.append(cls.from_exprs(comps, grid, label=name))
        except (ExprError, NotCompact, NotUnit, ZeroDivisionError, ValueError) as e:
            raise ValidationError(f"{section}.{name}", str(e)) from None
    return out


def _names(text: str | None) -> list:
    return [t.strip() for t in (text or "").split(",") if t.strip()]


def _params(r: _Reader, d: int) -> tuple[ScanParams, str]:
    M = r.number("test", "M_max", 6, int)
    N = r.number("test", "N_max", 10, int)
    A = r.number("test", "A_max", 4, int)
    rr = r.number("test", "r", 0.3)
    if not (1 <= M <= 12 and N >= 0 and 0 <= A <= 6 and 0 < rr <= 0.5):
        raise ValidationError("test", "need 1 <= M_max <= 12, N_max >= 0, 0 <= A_max <= 6, 0 < r <= 1/2")
    sched_text = r.get("test", "schedule", "default")
    if sched_text.lower() == "default":
        sched = default_schedule(M)
    else:
        node = r.expr("test", "schedule", sched_text, d)

        def sched(eps, node=node):
            k = int(math.floor(eval_scalar(node, eps)))
            if k < 1:
                raise ValidationError("test.schedule", f"cutoff order {k} < 1 at eps={eps!r}")
            return k
    return ScanParams(M_max=M, N_max=N, A_max=A, r=rr, schedule=sched,
                      res=DEFAULT_RESOLUTION), sched_text


def load_scenario(path, eps_floor: float | None = None, threads: int = 1) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e.strerror or e}") from None
    return parse_scenario(text, path, eps_floor, threads)


def parse_scenario(text: str, path: Path | None = None, eps_floor: float | None = None,
                   threads: int = 1) -> Scenario:
    lines = _Lines(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ParseError(getattr(e, "message", str(e)).splitlines()[0], getattr(e, "lineno", None)) from None
    r = _Reader(cp, lines)
    if not r.has("scenario"):
        raise ValidationError("scenario", "section missing")
    d = r.number("scenario", "dimension", 1, int)
    if d not in (1, 2):
        raise ValidationError("scenario.dimension", "only dimensions 1 and 2 are supported")
    name = r.get("scenario", "name", path.stem if path else "scenario")
    grid, grid_spec = _grid(r, eps_floor)
    fam, fam_spec = _family(r, "family", d)
    points = _named(r, "points", d, grid, GeneralizedPoint)
    dirs = _named(r, "directions", d, grid, GeneralizedDirection)
    mode = (r.get("test", "mode", "refined")).lower()
    if mode not in MODES:
        raise ValidationError("test.mode", f"expected one of {MODES}")
    params, sched_text = _params(r, d)
    params = ScanParams(**{**params.__dict__, "threads": max(1, int(threads))})
    fam_spec["_schedule"] = sched_text
    sc = Scenario(
        name=name, path=path, dimension=d, grid=grid, grid_spec=grid_spec,
        family=fam, family_spec=fam_spec, points=points, directions=dirs,
        mode=mode, params=params,
        x0=r.get("test", "x0"), xi0=r.get("test", "xi0"),
        extra_points=_names(r.get("test", "extra_points")),
        extra_directions=_names(r.get("test", "extra_directions")),
        description=r.get("scenario", "description", ""),
    )
    for nm in [sc.x0] + sc.extra_points:
        if nm:
            sc.point(nm)
    for nm in [sc.xi0] + sc.extra_directions:
        if nm:
            sc.direction(nm)
    if r.has("expect"):
        for key in cp.options("expect"):
            v = cp.get("expect", key).strip().lower()
            if v not in VERDICTS:
                raise ValidationError(f"expect.{key}", f"unknown verdict {v!r}")
            p, _, dname = key.partition("/")
            if key != "classical":
                sc.point(p.strip())
            if dname:
                sc.direction(dname.strip())
            sc.expect[key] = VERDICTS[v]
    return sc
