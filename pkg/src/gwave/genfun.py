"""Representatives of generalized functions and their pointwise tests.

A :class:`RepFamily` evaluates ``u_eps`` with exact derivatives (via
:class:`~gwave.jets.Jet`) at any ``eps``.  Families used with carriers
(plane waves) factor as ``envelope(x) * exp(i kappa(eps) . x)``; the
spectral code works on the envelope so that huge carrier frequencies stay
representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bump
from .jets import Jet, multi_indices
from .netcalc import (
    DimensionMismatch,
    EpsilonGrid,
    InsufficientData,
    ScalarNet,
    ScaleKind,
    ScaleVerdict,
    VectorNet,
    growth_exponent,
    is_moderate,
    is_negligible,
)
from .netexpr import ExprError, eval_jet, eval_scalar, parse, pretty, symbols
from .report import INCONCLUSIVE, REGULAR, SINGULAR, RegularityReport, Row

BALL_POINTS = 64
FEATURE_POINTS = 65
UNIT_TOL = 1e-12
GROWTH_SLOPE_LIMIT = 0.25


class OutOfDomain(ValueError):
    pass


class NotCompact(ValueError):
    pass


class NotUnit(ValueError):
    pass


def _node(expr, d: int = 1):
    return parse(expr, d) if isinstance(expr, str) else expr


def _box_intersect(a, b):
    if a is None:
        return b
    if b is None:
        return a
    lo = np.maximum(a[:, 0], b[:, 0])
    hi = np.minimum(a[:, 1], b[:, 1])
    return np.stack([lo, hi], axis=1)


def box_empty(box) -> bool:
    return box is not None and bool(np.any(box[:, 0] >= box[:, 1]))


# --- points and directions ---------------------------------------------------

class _EpsIndexed:
    """Vector nets that can be evaluated at grid eps or, from expressions, anywhere."""

    def __init__(self, net: VectorNet, exprs=None, label: str = ""):
        self.net = net
        self.exprs = exprs
        self.label = label
        self._index = {float(e): i for i, e in enumerate(net.grid.values)}

    @property
    def grid(self) -> EpsilonGrid:
        return self.net.grid

    @property
    def d(self) -> int:
        return self.net.dimension

    def at(self, eps: float) -> np.ndarray:
        i = self._index.get(float(eps))
        if i is not None:
            return self.net.at(i)
        if self.exprs is None:
            raise KeyError(f"eps={eps!r} is not on this net's grid")
        return self._eval(eps)

    def _eval(self, eps: float) -> np.ndarray:
        return np.array([eval_scalar(e, eps) for e in self.exprs])

    def on_grid(self, grid: EpsilonGrid):
        if grid == self.grid:
            return self
        if self.exprs is None:
            raise KeyError("net has no expressions to re-sample")
        return type(self).from_exprs(self.exprs, grid, label=self.label)

    def describe(self) -> dict:
        if self.exprs is not None:
            return {"label": self.label, "exprs": [pretty(e) for e in self.exprs]}
        return {"label": self.label, "samples": self.net.array()[-1].tolist()}


class GeneralizedPoint(_EpsIndexed):
    """A compactly supported point net with a bounding-box certificate."""

    def __init__(self, net: VectorNet, exprs=None, label: str = "", box=None):
        super().__init__(net, exprs, label)
        arr = net.array().real
        if not np.all(np.isfinite(arr)):
            raise NotCompact("point net has non-finite samples")
        hull = np.stack([arr.min(axis=0), arr.max(axis=0)], axis=1)
        if box is not None:
            box = np.asarray(box, dtype=float)
            if np.any(hull[:, 0] < box[:, 0]) or np.any(hull[:, 1] > box[:, 1]):
                raise NotCompact("point samples leave the declared box")
            self.box = box
        else:
            self.box = hull

    @classmethod
    def from_exprs(cls, exprs, grid: EpsilonGrid, label: str = "", box=None):
        nodes = [_node(e) for e in exprs]
        arr = np.array([[eval_scalar(n, e) for n in nodes] for e in grid.values])
        return cls(VectorNet.from_array(grid, arr), nodes, label, box)

    @classmethod
    def constant(cls, grid: EpsilonGrid, x, label: str = ""):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls.from_exprs([repr(float(v)) for v in x], grid, label)

    def _eval(self, eps):
        return np.array([eval_scalar(e, eps) for e in self.exprs])

    def shifted(self, y: "GeneralizedPoint", sign: float = -1.0) -> "GeneralizedPoint":
        arr = self.net.array().real + sign * y.on_grid(self.grid).net.array().real
        exprs = None
        if self.exprs is not None and y.exprs is not None:
            op = "-" if sign < 0 else "+"
            exprs = [parse(f"({pretty(a)}) {op} ({pretty(b)})", 1) for a, b in zip(self.exprs, y.exprs)]
        return GeneralizedPoint(VectorNet.from_array(self.grid, arr), exprs, self.label)


class GeneralizedDirection(_EpsIndexed):
    """Unit-norm direction net; expressions are normalized per eps."""

    def __init__(self, net: VectorNet, exprs=None, label: str = ""):
        super().__init__(net, exprs, label)
        norms = np.linalg.norm(net.array(), axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise NotUnit("direction samples are not unit vectors")

    @classmethod
    def from_exprs(cls, exprs, grid: EpsilonGrid, label: str = ""):
        nodes = [_node(e) for e in exprs]
        arr = np.array([_normalize([eval_scalar(n, e) for n in nodes]) for e in grid.values])
        return cls(VectorNet.from_array(grid, arr), nodes, label)

    @classmethod
    def constant(cls, grid: EpsilonGrid, v, label: str = ""):
        v = _normalize(np.atleast_1d(np.asarray(v, dtype=float)))
        return cls.from_exprs([repr(float(c)) for c in v], grid, label)

    def _eval(self, eps):
        return _normalize([eval_scalar(n, eps) for n in self.exprs])


def _normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not n > 0:
        raise NotUnit("zero direction")
    return v / n


def as_eps_fn(p, d: int):
    """Accept a GeneralizedPoint, expression list or constant vector."""
    if isinstance(p, _EpsIndexed):
        return p.at
    if isinstance(p, VectorNet):
        return _EpsIndexed(p).at
    items = list(p) if not isinstance(p, (str, int, float)) else [p]
    if len(items) != d:
        raise DimensionMismatch(f"expected {d} coordinates, got {len(items)}")
    nodes = [_node(e) if isinstance(e, str) else float(e) for e in items]
    return lambda eps: np.array(
        [eval_scalar(n, eps) if not isinstance(n, float) else n for n in nodes]
    )


# --- mollifier / envelope specs -------------------------------------------------

@dataclass(frozen=True)
class BumpSpec:
    """A scaled profile: ``amplitude * f((x - center) / radius)``.

    For mollifiers the profile is renormalized by ``radius^-d`` so the mass
    is ``amplitude`` times the base mass; it must equal 1.
    """

    radius: float = 1.0
    center: tuple = ()
    amplitude: float = 1.0

    def center_vec(self, d: int) -> np.ndarray:
        return np.zeros(d) if not self.center else np.asarray(self.center, dtype=float)


# --- families ---------------------------------------------------------------------

class RepFamily:
    d: int = 1
    provenance: str = ""
    domain = None  # box where the family may be evaluated; None = everywhere

    # evaluators -------------------------------------------------------
    def envelope_jet(self, eps: float, coords: list) -> Jet:
        raise NotImplementedError

    def carrier(self, eps: float) -> np.ndarray:
        return np.zeros(self.d)

    def jet(self, eps: float, coords: list) -> Jet:
        env = self.envelope_jet(eps, coords)
        k = self.carrier(eps)
        if not np.any(k):
            return env
        phase = sum(((1j * kj) * c for kj, c in zip(k, coords)), Jet.constant(self.d, coords[0].K, 0j, len(coords[0])))
        return env * phase.exp()

    def values(self, eps: float, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float).reshape(-1, self.d))
        return self.jet(eps, Jet.coordinates(x, 0)).value

    def envelope_values(self, eps: float, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float).reshape(-1, self.d))
        return self.envelope_jet(eps, Jet.coordinates(x, 0)).value

    # geometry -----------------------------------------------------------
    def support_box(self, eps: float):
        """Per-eps box containing supp u_eps, or None if unbounded."""
        return None

    def support_bound(self, grid: EpsilonGrid):
        """eps-independent box over a grid (None flags a non-compact family)."""
        boxes = [self.support_box(e) for e in grid.values]
        if any(b is None for b in boxes):
            return None
        boxes = [b for b in boxes if not box_empty(b)]
        if not boxes:
            return np.zeros((self.d, 2))
        arr = np.stack(boxes)
        return np.stack([arr[:, :, 0].min(axis=0), arr[:, :, 1].max(axis=0)], axis=1)

    def feature_scale(self, eps: float, box) -> float:
        """Smallest length scale of the envelope inside ``box``."""
        return math.inf

    def feature_points(self, eps: float) -> np.ndarray:
        return np.zeros((0, self.d))

    def fourier_oracle(self, eps: float, zeta: np.ndarray):
        """``u^_eps(carrier + zeta)`` in closed form, or None."""
        return None

    @property
    def has_oracle(self) -> bool:
        return False

    def describe(self) -> dict:
        return {"provenance": self.provenance, "d": self.d}


def _coords_minus(coords, c):
    return [x - float(cj) for x, cj in zip(coords, c)]


class SmoothFamily(RepFamily):
    def __init__(self, expr, d: int = 1, domain=None, scale: float = 1.0):
        self.node = _node(expr, d)
        self.d = d
        self.domain = None if domain is None else np.asarray(domain, dtype=float)
        self.scale = float(scale)
        self.provenance = "embed_smooth"

    def envelope_jet(self, eps, coords):
        return eval_jet(self.node, eps, coords)

    def feature_scale(self, eps, box):
        return self.scale

    def describe(self):
        return {"provenance": self.provenance, "d": self.d, "f": pretty(self.node)}


def embed_smooth(f, d: int = 1, domain=None, scale: float = 1.0) -> SmoothFamily:
    """Constant-in-eps representative of a smooth function of ``x1 .. xd``."""
    fam = SmoothFamily(f, d, domain, scale)
    if "eps" in symbols(fam.node):
        fam.provenance = "expression"  # allowed, but no longer an embedding
    return fam


class MollifiedFamily(RepFamily):
    """delta, its first derivative (along x1) or Heaviside, mollified at c(eps)."""

    def __init__(self, kind: str, center, d: int, mollifier: BumpSpec):
        if kind not in ("delta", "dirac_derivative", "heaviside"):
            raise ValueError(f"unknown distribution kind {kind!r}")
        if kind == "heaviside" and d != 1:
            raise DimensionMismatch("heaviside is one-dimensional")
        bump.check_mollifier(mollifier.amplitude * bump.psi_mass())
        self.kind = kind
        self.d = d
        self.center = as_eps_fn(center, d)
        self._center_desc = center
        self.R = float(mollifier.radius)
        self.amp = float(mollifier.amplitude)
        self.provenance = f"mollified_distribution:{kind}"

    def envelope_jet(self, eps, coords):
        c = self.center(eps)
        s = eps * self.R
        X = [(x - cj) * (1.0 / s) for x, cj in zip(coords, c)]
        if self.kind == "heaviside":
            return bump.psi_antiderivative_jet(X[0]) * self.amp
        out = None
        for j, Xj in enumerate(X):
            deriv = 1 if (self.kind == "dirac_derivative" and j == 0) else 0
            f = bump.psi_jet(Xj, deriv)
            out = f if out is None else out * f
        power = self.d + (1 if self.kind == "dirac_derivative" else 0)
        return out * (self.amp / s**power)

    def support_box(self, eps):
        c = self.center(eps)
        s = eps * self.R
        box = np.stack([c - s, c + s], axis=1)
        if self.kind == "heaviside":
            box[:, 1] = math.inf
        return box

    def support_bound(self, grid):
        if self.kind == "heaviside":
            return None
        return super().support_bound(grid)

    def feature_scale(self, eps, box):
        c = self.center(eps)
        s = eps * self.R
        core = np.stack([c - s, c + s], axis=1)
        if box is not None and box_empty(_box_intersect(core, box)):
            return math.inf
        return s

    def feature_points(self, eps):
        c = self.center(eps)
        s = eps * self.R
        t = np.linspace(-1.0, 1.0, FEATURE_POINTS)
        if self.d == 1:
            return (c[0] + s * t)[:, None]
        t2 = np.linspace(-1.0, 1.0, 17)
        g = np.stack(np.meshgrid(t2, t2, indexing="ij"), axis=-1).reshape(-1, 2)
        return c + s * g

    @property
    def has_oracle(self):
        return self.kind != "heaviside"

    def fourier_oracle(self, eps, zeta):
        if self.kind == "heaviside":
            return None
        xi = np.atleast_2d(zeta)
        c = self.center(eps)
        s = eps * self.R
        val = self.amp * np.exp(-1j * (xi @ c))
        for j in range(self.d):
            val = val * bump.psi_hat_fast(s * xi[:, j])
        if self.kind == "dirac_derivative":
            val = val * (1j * xi[:, 0])
        return val

    def describe(self):
        return {"provenance": self.provenance, "d": self.d, "center": _desc(self._center_desc)}


def _desc(v):
    if isinstance(v, _EpsIndexed):
        return v.describe()
    if isinstance(v, (list, tuple)):
        return [pretty(e) if not isinstance(e, (int, float, str)) else e for e in v]
    return v


def mollified_distribution(kind: str, center=0.0, d: int = 1, mollifier: BumpSpec = BumpSpec()) -> MollifiedFamily:
    if isinstance(center, (int, float, str)):
        center = [center] * d
    return MollifiedFamily(kind, center, d, mollifier)


class PlaneWave(RepFamily):
    """``a(eps) * env(x) * exp(i lambda(eps) x . theta(eps))``."""

    def __init__(self, amplitude, frequency, direction, envelope: BumpSpec, d: int):
        self.d = d
        self.a = _node(amplitude)
        self.lam = _node(frequency)
        self.theta = [_node(t) for t in direction] if not isinstance(direction, _EpsIndexed) else direction
        if len(self.theta if isinstance(self.theta, list) else range(direction.d)) != d:
            raise DimensionMismatch("direction has the wrong dimension")
        self.env = envelope
        self.c = envelope.center_vec(d)
        self.R = float(envelope.radius)
        self.provenance = "plane_wave"

    def direction(self, eps) -> np.ndarray:
        if isinstance(self.theta, _EpsIndexed):
            return self.theta.at(eps)
        return _normalize([eval_scalar(t, eps) for t in self.theta])

    def carrier(self, eps):
        lam = eval_scalar(self.lam, eps)
        if not lam > 0:
            raise ExprError("plane-wave frequency must be positive")
        return lam * self.direction(eps)

    def envelope_jet(self, eps, coords):
        X = [(x - cj) * (1.0 / self.R) for x, cj in zip(coords, self.c)]
        return bump.phi0_jet(X) * (eval_scalar(self.a, eps) * self.env.amplitude)

    def support_box(self, eps):
        return np.stack([self.c - self.R, self.c + self.R], axis=1)

    def feature_scale(self, eps, box):
        return self.R

    @property
    def has_oracle(self):
        return True

    def fourier_oracle(self, eps, zeta):
        z = np.atleast_2d(zeta)
        amp = eval_scalar(self.a, eps) * self.env.amplitude
        phase = np.exp(-1j * (z @ self.c))  # shift rule: u^(kappa + zeta) = a env^(zeta)
        if self.d == 1:
            prof = self.R * bump.phi0_hat_1d_fast(self.R * z[:, 0])
        else:
            prof = self.R**2 * bump.phi0_hat_2d_fast(self.R * np.linalg.norm(z, axis=1))
        return amp * phase * prof

    def describe(self):
        th = self.theta.describe() if isinstance(self.theta, _EpsIndexed) else [pretty(t) for t in self.theta]
        return {
            "provenance": self.provenance, "d": self.d, "amplitude": pretty(self.a),
            "frequency": pretty(self.lam), "direction": th,
            "envelope": {"center": self.c.tolist(), "radius": self.R},
        }


def plane_wave(amplitude="1", frequency="1/eps", direction=("1",), envelope: BumpSpec = BumpSpec(), d: int | None = None) -> PlaneWave:
    if d is None:
        d = direction.d if isinstance(direction, _EpsIndexed) else len(direction)
    return PlaneWave(amplitude, frequency, direction, envelope, d)


class BumpFamily(RepFamily):
    """``phi0((x - c(eps)) / r(eps))``: an eps-scaled plateau cutoff as a family."""

    def __init__(self, center, radius, d: int):
        self.d = d
        self.center = as_eps_fn(center, d)
        self.radius = _node(radius)
        self._desc = (center, radius)
        self.provenance = "bump"

    def _r(self, eps):
        r = eval_scalar(self.radius, eps)
        if not r > 0:
            raise ExprError("bump radius must be positive")
        return r

    def envelope_jet(self, eps, coords):
        r = self._r(eps)
        X = [(x - cj) * (1.0 / r) for x, cj in zip(coords, self.center(eps))]
        return bump.phi0_jet(X)

    def support_box(self, eps):
        c, r = self.center(eps), self._r(eps)
        return np.stack([c - r, c + r], axis=1)

    def feature_scale(self, eps, box):
        return self._r(eps)

    def describe(self):
        return {"provenance": self.provenance, "d": self.d, "radius": pretty(self.radius)}


class Product(RepFamily):
    def __init__(self, u: RepFamily, v: RepFamily):
        if u.d != v.d:
            raise DimensionMismatch("product of families of different dimension")
        self.u, self.v = u, v
        self.d = u.d
        self.domain = _box_intersect(u.domain, v.domain)
        self.provenance = "product"

    def envelope_jet(self, eps, coords):
        return self.u.envelope_jet(eps, coords) * self.v.envelope_jet(eps, coords)

    def carrier(self, eps):
        return self.u.carrier(eps) + self.v.carrier(eps)

    def support_box(self, eps):
        return _box_intersect(self.u.support_box(eps), self.v.support_box(eps))

    def support_bound(self, grid):
        return _box_intersect(self.u.support_bound(grid), self.v.support_bound(grid))

    def feature_scale(self, eps, box):
        return min(self.u.feature_scale(eps, box), self.v.feature_scale(eps, box))

    def feature_points(self, eps):
        return np.concatenate([self.u.feature_points(eps), self.v.feature_points(eps)])

    def describe(self):
        return {"provenance": self.provenance, "d": self.d, "factors": [self.u.describe(), self.v.describe()]}


def product(u: RepFamily, v: RepFamily) -> Product:
    return Product(u, v)


class Scaled(RepFamily):
    def __init__(self, u: RepFamily, c):
        self.u = u
        self.c = _node(c)
        self.d = u.d
        self.domain = u.domain
        self.provenance = "scale"

    def envelope_jet(self, eps, coords):
        return self.u.envelope_jet(eps, coords) * eval_scalar(self.c, eps)

    def carrier(self, eps):
        return self.u.carrier(eps)

    def support_box(self, eps):
        return self.u.support_box(eps)

    def support_bound(self, grid):
        return self.u.support_bound(grid)

    def feature_scale(self, eps, box):
        return self.u.feature_scale(eps, box)

    def feature_points(self, eps):
        return self.u.feature_points(eps)

    @property
    def has_oracle(self):
        return self.u.has_oracle

    def fourier_oracle(self, eps, zeta):
        base = self.u.fourier_oracle(eps, zeta)
        return None if base is None else eval_scalar(self.c, eps) * base

    def describe(self):
        return {"provenance": self.provenance, "d": self.d, "c": pretty(self.c), "of": self.u.describe()}


def scale(u: RepFamily, c) -> Scaled:
    return Scaled(u, c)


class Translated(RepFamily):
    """``u_eps(x - y_eps)``."""

    def __init__(self, u: RepFamily, y):
        self.u = u
        self.d = u.d
        self.y = as_eps_fn(y, u.d)
        self._y = y
        self.domain = None if u.domain is None else u.domain  # shifted per eps
        self.provenance = "translate"

    def jet(self, eps, coords):
        return self.u.jet(eps, _coords_minus(coords, self.y(eps)))

    def envelope_jet(self, eps, coords):
        y = self.y(eps)
        env = self.u.envelope_jet(eps, _coords_minus(coords, y))
        k = self.u.carrier(eps)
        if np.any(k):
            env = env * np.exp(-1j * float(k @ y))
        return env

    def carrier(self, eps):
        return self.u.carrier(eps)

    def support_box(self, eps):
        b = self.u.support_box(eps)
        return None if b is None else b + self.y(eps)[:, None]

    def feature_scale(self, eps, box):
        y = self.y(eps)
        return self.u.feature_scale(eps, None if box is None else box - y[:, None])

    def feature_points(self, eps):
        return self.u.feature_points(eps) + self.y(eps)

    @property
    def has_oracle(self):
        return self.u.has_oracle

    def fourier_oracle(self, eps, zeta):
        base = self.u.fourier_oracle(eps, zeta)
        if base is None:
            return None
        y = self.y(eps)
        k = self.u.carrier(eps)
        z = np.atleast_2d(zeta)
        return base * np.exp(-1j * (z @ y)) * np.exp(-1j * float(k @ y))

    def describe(self):
        return {"provenance": self.provenance, "d": self.d, "y": _desc(self._y), "of": self.u.describe()}


def translate(u: RepFamily, y) -> Translated:
    return Translated(u, y)


# --- validation -----------------------------------------------------------------

def check_derivatives(u: RepFamily, eps: float, points: np.ndarray, K: int = 2, h: float | None = None) -> float:
    """Worst relative disagreement between jet derivatives and central differences."""
    pts = np.atleast_2d(points)
    jet = u.jet(eps, Jet.coordinates(pts, K))
    if h is None:
        h = 1e-5 * min(1.0, u.feature_scale(eps, None))
    worst = 0.0
    for j in range(u.d):
        e = np.zeros(u.d)
        e[j] = h
        step = tuple(1 if i == j else 0 for i in range(u.d))
        for alpha in multi_indices(u.d, K - 1):
            up = u.jet(eps, Jet.coordinates(pts + e, K - 1)).derivative(alpha)
            dn = u.jet(eps, Jet.coordinates(pts - e, K - 1)).derivative(alpha)
            fd = (up - dn) / (2 * h)
            target = tuple(a + s for a, s in zip(alpha, step))
            exact = jet.derivative(target)
            scale_ = np.max(np.abs(exact)) + 1e-300
            worst = max(worst, float(np.max(np.abs(fd - exact)) / scale_))
    return worst


def check_support(u: RepFamily, grid: EpsilonGrid, n: int = 400, seed: int = 0) -> bool:
    """Sample outside the per-eps support box and confirm the family vanishes."""
    rng = np.random.default_rng(seed)
    for eps in grid.values:
        box = u.support_box(eps)
        if box is None or box_empty(box):
            continue
        box = box.copy()
        fin = np.isfinite(box)
        # half-infinite boxes: sample only beside the finite edge
        box[~fin[:, 0], 0] = box[~fin[:, 0], 1] - 1.0
        box[~fin[:, 1], 1] = box[~fin[:, 1], 0] + 1.0
        width = np.maximum(box[:, 1] - box[:, 0], 1e-300)
        lo = np.where(fin[:, 0], box[:, 0] - width, box[:, 0])
        hi = np.where(fin[:, 1], box[:, 1] + width, box[:, 1])
        pts = rng.uniform(lo, hi, size=(n, u.d))
        outside = np.any((pts < box[:, 0]) | (pts > box[:, 1]), axis=1)
        if np.any(u.values(eps, pts[outside]) != 0):
            return False
    return True


# --- pointwise tests -------------------------------------------------------------

def _check_domain(u: RepFamily, x: np.ndarray):
    if u.domain is not None and (np.any(x < u.domain[:, 0]) or np.any(x > u.domain[:, 1])):
        raise OutOfDomain(f"point {x.tolist()} lies outside the family's domain")


def eval_at_point(u: RepFamily, x0: GeneralizedPoint) -> ScalarNet:
    if x0.d != u.d:
        raise DimensionMismatch("point and family dimensions differ")
    vals = []
    for k, eps in enumerate(x0.grid.values):
        x = x0.net.at(k).real
        _check_domain(u, x)
        vals.append(u.values(eps, x[None, :])[0])
    return ScalarNet(x0.grid, np.array(vals))


def ball_sample(center: np.ndarray, radius: float, extra: np.ndarray | None = None) -> np.ndarray:
    """Uniform sample of a closed ball: BALL_POINTS per axis, centre, boundary."""
    d = center.size
    t = np.linspace(-1.0, 1.0, BALL_POINTS + 1)  # odd count keeps the centre
    if d == 1:
        pts = (center[0] + radius * t)[:, None]
    else:
        g = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
        g = g[np.linalg.norm(g, axis=1) <= 1.0]
        ang = np.linspace(0, 2 * math.pi, 4 * BALL_POINTS, endpoint=False)
        ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        pts = center + radius * np.concatenate([g, ring])
    if extra is not None and len(extra):
        inside = np.linalg.norm(extra - center, axis=1) <= radius
        pts = np.concatenate([pts, extra[inside]])
    return pts


def _ball_radius(eps: float, m: int) -> float:
    return eps ** (1.0 / m)


@dataclass
class LocalEquality:
    equal: bool
    rows: list
    verdict: ScaleVerdict

    def to_dict(self) -> dict:
        return {
            "equal": self.equal,
            "rows": [r.to_dict() for r in self.rows],
            "verdict": self.verdict.to_dict(),
        }


def _diff_family(u, v):
    return Sum(u, scale(v, "-1"))


class Sum(RepFamily):
    """Internal helper: pointwise sum (no carrier factoring)."""

    def __init__(self, u, v):
        if u.d != v.d:
            raise DimensionMismatch("sum of families of different dimension")
        self.u, self.v, self.d = u, v, u.d
        self.domain = _box_intersect(u.domain, v.domain)
        self.provenance = "sum"

    def envelope_jet(self, eps, coords):
        return self.u.jet(eps, coords) + self.v.jet(eps, coords)

    def support_box(self, eps):
        a, b = self.u.support_box(eps), self.v.support_box(eps)
        if a is None or b is None:
            return None
        if box_empty(a):
            return b
        if box_empty(b):
            return a
        return np.stack([np.minimum(a[:, 0], b[:, 0]), np.maximum(a[:, 1], b[:, 1])], axis=1)

    def feature_scale(self, eps, box):
        return min(self.u.feature_scale(eps, box), self.v.feature_scale(eps, box))

    def feature_points(self, eps):
        return np.concatenate([self.u.feature_points(eps), self.v.feature_points(eps)])


def local_equality_test(u: RepFamily, v: RepFamily, x0: GeneralizedPoint, M_max: int = 6) -> LocalEquality:
    """Per-m sup of |u - v| over balls of radius eps^(1/m) around x0."""
    if u.d != v.d or x0.d != u.d:
        raise DimensionMismatch("families and point must share a dimension")
    diff = _diff_family(u, v)
    grid = x0.grid
    rows = []
    for m in range(1, M_max + 1):
        sups = np.empty(len(grid))
        for k, eps in enumerate(grid.values):
            c = x0.net.at(k).real
            _check_domain(u, c)
            pts = ball_sample(c, _ball_radius(eps, m), diff.feature_points(eps))
            sups[k] = np.max(np.abs(diff.values(eps, pts)))
        net = ScalarNet(grid, sups)
        try:
            nv = is_negligible(net, M_max)
            passed = nv.order >= m
            fit = nv.fit_exponent
            order = nv.order
        except InsufficientData:
            passed, fit, order = None, math.nan, None
        rows.append(Row(m, grid.values, sups, fit, -float(m), passed,
                        margin=(m + fit) if np.isfinite(fit) else (math.inf if fit == math.inf else 0.0),
                        order=order, kind="local_equality"))
    equal = all(r.passed for r in rows)
    worst = min((r.order if r.order is not None else -1) for r in rows)
    verdict = ScaleVerdict(ScaleKind.NEGLIGIBLE if equal else ScaleKind.INDETERMINATE,
                           max(r.fitted_exponent for r in rows), 0.0, order=max(worst, 0))
    return LocalEquality(equal, rows, verdict)


# --- derivative bounds -------------------------------------------------------------

def _alpha_groups(d: int, A_max: int):
    idx = multi_indices(d, A_max)
    return {n: [i for i, a in enumerate(idx) if sum(a) == n] for n in range(A_max + 1)}


def _slope(xs, ys) -> float:
    pts = [(x, y) for x, y in zip(xs, ys) if np.isfinite(y)]
    if len(pts) < 2:
        return -math.inf if all(y == -math.inf for y in ys) else 0.0
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def _derivative_nets(u, x0: GeneralizedPoint, A_max: int, radii):
    """sup over ball samples of |d^alpha u|, grouped by |alpha| (max over the group)."""
    grid = x0.grid
    groups = _alpha_groups(u.d, A_max)
    out = np.empty((len(radii), A_max + 1, len(grid)))
    for k, eps in enumerate(grid.values):
        c = x0.net.at(k).real
        _check_domain(u, c)
        feats = u.feature_points(eps)
        for i, rad in enumerate(radii):
            r = rad(eps)
            pts = c[None, :] if r == 0 else ball_sample(c, r, feats)
            der = np.abs(u.jet(eps, Jet.coordinates(pts, A_max)).derivatives())
            colmax = der.max(axis=0)
            for n, cols in groups.items():
                out[i, n, k] = colmax[cols].max()
    return out


def _bound_rows(u, x0, nets, labels, N_max):
    grid = x0.grid
    rows = []
    for i, m in enumerate(labels):
        for n in range(nets.shape[1]):
            net = ScalarNet(grid, nets[i, n])
            try:
                a = growth_exponent(net)
                mv = is_moderate(net, N_max)
                order = mv.order if mv.kind is ScaleKind.MODERATE else None
            except InsufficientData:
                a, order = math.nan, None
            rows.append(Row(m, grid.values, nets[i, n], a, float(N_max), None,
                            order=order, alpha=n, kind="derivative_bound"))
    return rows


def _judge(rows, N_max: int, by_m: bool):
    """Single-N decision over a block of rows; returns (verdict, N, notes)."""
    exps = [r.fitted_exponent for r in rows]
    if any(math.isnan(e) for e in exps):
        return INCONCLUSIVE, None, "insufficient data"
    alpha_max = {}
    for r in rows:
        alpha_max[r.alpha] = max(alpha_max.get(r.alpha, -math.inf), r.fitted_exponent)
    slope_alpha = _slope(list(alpha_max), list(alpha_max.values()))
    slope_m = -math.inf
    if by_m:
        m_max = {}
        for r in rows:
            m_max[r.m] = max(m_max.get(r.m, -math.inf), r.fitted_exponent)
        slope_m = _slope(list(m_max), list(m_max.values()))
    top = max(exps)
    slope = max(slope_alpha, slope_m)
    orders = [r.order for r in rows]
    N = None if any(o is None for o in orders) else max(orders)
    if N is not None and N <= N_max and slope < GROWTH_SLOPE_LIMIT:
        return REGULAR, N, f"growth slope {slope:.3g}"
    if slope >= 2 * GROWTH_SLOPE_LIMIT or top >= N_max + 0.25 + 0.5:
        return SINGULAR, N, f"growth slope {slope:.3g}, max exponent {top:.3g}"
    return INCONCLUSIVE, N, f"growth slope {slope:.3g}, max exponent {top:.3g}"


def _subject(u, x0):
    return {"family": u.describe(), "x0": x0.describe()}


def derivative_bound_test(u: RepFamily, x0: GeneralizedPoint, N_max: int = 10, M_max: int = 6,
                          A_max: int = 4, quantifier: str = "uniform") -> RegularityReport:
    """Moderate bounds on sup |d^alpha u_eps| over balls of radius eps^(1/m).

    A single N must work for |alpha| <= A_max.  Because only finitely many
    alpha are tested, exponents that keep growing with |alpha| (slope at
    least 0.25 per order) count as "no N", even when each is below N_max.
    """
    if quantifier not in ("uniform", "per_m"):
        raise ValueError("quantifier must be 'uniform' or 'per_m'")
    radii = [(lambda eps, m=m: _ball_radius(eps, m)) for m in range(1, M_max + 1)]
    nets = _derivative_nets(u, x0, A_max, radii)
    rows = _bound_rows(u, x0, nets, list(range(1, M_max + 1)), N_max)
    table = {}
    if quantifier == "uniform":
        verdict, N, note = _judge(rows, N_max, by_m=True)
        table["N"] = N
    else:
        verdicts = []
        for m in range(1, M_max + 1):
            block = [r for r in rows if r.m == m]
            v, N, note = _judge(block, N_max, by_m=False)
            verdicts.append(v)
            table[str(m)] = N
        verdict = REGULAR if all(v == REGULAR for v in verdicts) else (
            SINGULAR if SINGULAR in verdicts else INCONCLUSIVE)
    for r in rows:
        r.passed = verdict == REGULAR if verdict != INCONCLUSIVE else None
    return RegularityReport(
        subject=_subject(u, x0), mode=f"derivative_bound:{quantifier}", rows=rows, verdict=verdict,
        diagnostics={"A_max": A_max, "N_max": N_max, "N_table": table, "note": note},
    )


def pointwise_ginf_test(u: RepFamily, x: GeneralizedPoint, N_max: int = 10, A_max: int = 4) -> RegularityReport:
    nets = _derivative_nets(u, x, A_max, [lambda eps: 0.0])
    rows = _bound_rows(u, x, nets, [0], N_max)
    verdict, N, note = _judge(rows, N_max, by_m=False)
    for r in rows:
        r.passed = verdict == REGULAR if verdict != INCONCLUSIVE else None
    return RegularityReport(
        subject=_subject(u, x), mode="pointwise", rows=rows, verdict=verdict,
        diagnostics={"A_max": A_max, "N_max": N_max, "N": N, "note": note},
    )
