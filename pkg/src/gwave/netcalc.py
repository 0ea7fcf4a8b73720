"""Nets indexed by a finite epsilon grid and their asymptotic classification.

A net ``(x_eps)`` is sampled along a strictly decreasing grid ``eps_k -> 0``.
Asymptotic statements ("for small eps") are checked on the tail of the grid
by least-squares fits of ``log|x_eps|`` against ``log(1/eps)``.

Samples may be NaN to mark grid points where a value could not be computed
(for instance a spectrum beyond the resolution budget); such points are
skipped by every fit.  ``+inf`` marks a magnitude overflow.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "AllZeroTail",
    "DimensionMismatch",
    "EpsilonGrid",
    "InsufficientData",
    "MixedGrid",
    "NetError",
    "ScalarNet",
    "ScaleKind",
    "ScaleParams",
    "ScaleVerdict",
    "VectorNet",
    "classify_scale",
    "fit_scale_exponent",
    "growth_exponent",
    "is_moderate",
    "is_negligible",
    "relate_points",
]

# Ratio bounds for consecutive grid values.
MIN_RATIO = 1.0 / 16.0
MAX_RATIO = 0.95


class NetError(ValueError):
    pass


class MixedGrid(NetError):
    pass


class DimensionMismatch(NetError):
    pass


class AllZeroTail(NetError):
    pass


class InsufficientData(NetError):
    """Fewer than four usable samples on the tail."""


@dataclass(frozen=True, eq=False)
class EpsilonGrid:
    """Strictly decreasing sample of the regularization parameter."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 8:
            raise NetError("an epsilon grid needs at least 8 values")
        if not np.all((v > 0) & (v < 1)):
            raise NetError("epsilon values must lie in (0, 1)")
        ratios = v[1:] / v[:-1]
        if not np.all(ratios < 1):
            raise NetError("epsilon grid must be strictly decreasing")
        if ratios.min() < MIN_RATIO or ratios.max() > MAX_RATIO:
            raise NetError(
                f"consecutive ratios must lie in [{MIN_RATIO}, {MAX_RATIO}]"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def geometric(cls, k_min: float, k_max: float, k_step: float = 1.0, base: float = 2.0):
        k = np.arange(k_min, k_max + k_step / 2, k_step)
        return cls(float(base) ** (-k))

    @classmethod
    def default(cls) -> "EpsilonGrid":
        """eps_k = 2^-k, k = 6..20."""
        return cls.geometric(6, 20)

    @classmethod
    def analysis(cls) -> "EpsilonGrid":
        """Grid used by the microlocal tests.

        Half-steps 2^-4 .. 2^-16 keep enough resolvable points where a
        spectrum has to resolve eps-sized features, and steps of 2^-2 down
        to 2^-128 reach the regime where super-polynomial decay is visible
        in double precision.
        """
        k = np.concatenate([np.arange(4, 16.25, 0.5), np.arange(18, 128.5, 2.0)])
        return cls(2.0 ** (-k))

    @classmethod
    def analysis_2d(cls) -> "EpsilonGrid":
        k = np.arange(4, 128.5, 4.0)
        return cls(2.0 ** (-k))

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values.tolist())

    def __getitem__(self, i):
        return self.values[i]

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, EpsilonGrid):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.all(self.values == other.values)
        )

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    @property
    def log_inv(self) -> np.ndarray:
        return -np.log(self.values)

    def tail_slice(self, tail_fraction: float = 0.5) -> slice:
        n = len(self)
        t = int(math.ceil(tail_fraction * n))
        return slice(n - t, n)

    def to_dict(self) -> dict:
        return {"values": [float(x) for x in self.values]}


def _same_grid(a: EpsilonGrid, b: EpsilonGrid) -> None:
    if a != b:
        raise MixedGrid("nets live on different epsilon grids")


@dataclass(frozen=True, eq=False)
class ScalarNet:
    grid: EpsilonGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (len(self.grid),):
            raise NetError(f"expected {len(self.grid)} samples, got shape {s.shape}")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, grid: EpsilonGrid, fn) -> "ScalarNet":
        return cls(grid, np.array([fn(e) for e in grid.values], dtype=complex))

    @classmethod
    def constant(cls, grid: EpsilonGrid, c: complex) -> "ScalarNet":
        return cls(grid, np.full(len(grid), c, dtype=complex))

    @classmethod
    def rho(cls, grid: EpsilonGrid) -> "ScalarNet":
        return cls(grid, grid.values.astype(complex))

    def _binary(self, other, op):
        if isinstance(other, ScalarNet):
            _same_grid(self.grid, other.grid)
            other = other.samples
        with np.errstate(all="ignore"):
            return ScalarNet(self.grid, op(self.samples, other))

    def __add__(self, o):
        return self._binary(o, np.add)

    __radd__ = __add__

    def __sub__(self, o):
        return self._binary(o, np.subtract)

    def __rsub__(self, o):
        return self._binary(o, lambda a, b: b - a)

    def __mul__(self, o):
        return self._binary(o, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self._binary(o, np.divide)

    def __rtruediv__(self, o):
        return self._binary(o, lambda a, b: b / a)

    def __pow__(self, p):
        return self._binary(p, np.power)

    def __neg__(self):
        return ScalarNet(self.grid, -self.samples)

    def __abs__(self):
        return ScalarNet(self.grid, np.abs(self.samples))

    def __len__(self):
        return len(self.grid)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.samples)


@dataclass(frozen=True, eq=False)
class VectorNet:
    coords: tuple

    def __post_init__(self):
        coords = tuple(self.coords)
        if not coords:
            raise DimensionMismatch("a vector net needs at least one coordinate")
        for c in coords[1:]:
            _same_grid(coords[0].grid, c.grid)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_array(cls, grid: EpsilonGrid, arr) -> "VectorNet":
        """``arr`` has shape (len(grid), d)."""
        arr = np.asarray(arr)
        if arr.ndim == 1:
            arr = arr[:, None]
        return cls(tuple(ScalarNet(grid, arr[:, j]) for j in range(arr.shape[1])))

    @classmethod
    def constant(cls, grid: EpsilonGrid, point) -> "VectorNet":
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(tuple(ScalarNet.constant(grid, c) for c in point))

    @property
    def grid(self) -> EpsilonGrid:
        return self.coords[0].grid

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        """Real samples, shape (len(grid), d)."""
        return np.stack([c.samples.real for c in self.coords], axis=1)

    def at(self, k: int) -> np.ndarray:
        return np.array([c.samples[k].real for c in self.coords])

    def __sub__(self, other: "VectorNet") -> "VectorNet":
        if self.dimension != other.dimension:
            raise DimensionMismatch("dimension mismatch")
        return VectorNet(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __add__(self, other: "VectorNet") -> "VectorNet":
        if self.dimension != other.dimension:
            raise DimensionMismatch("dimension mismatch")
        return VectorNet(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def norm(self) -> ScalarNet:
        arr = np.stack([c.samples for c in self.coords], axis=1)
        return ScalarNet(self.grid, np.sqrt(np.sum(np.abs(arr) ** 2, axis=1)))


class ScaleKind(str, enum.Enum):
    FAST_SCALE = "FastScale"
    SLOW_SCALE = "SlowScale"
    FAST_INFINITESIMAL = "FastInfinitesimal"
    SLOW_INFINITESIMAL = "SlowInfinitesimal"
    NEGLIGIBLE = "Negligible"
    MODERATE = "Moderate"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class ScaleParams:
    fast_threshold: float = 0.25
    residual_tol: float = 0.1
    tail_fraction: float = 0.5
    order_slack: float = 0.25
    # A trailing run of exact zeros at least this long (as a fraction of the
    # tail) counts as "identically zero for small eps".
    zero_run_fraction: float = 0.25
    # Growth above N by more than this, with an increasing tail, rejects N.
    bounded_tol: float = 0.02


DEFAULT_PARAMS = ScaleParams()


@dataclass(frozen=True)
class ScaleVerdict:
    kind: ScaleKind
    fit_exponent: float
    residual: float
    order: int | None = None
    note: str = ""

    @property
    def is_fast_scale(self) -> bool:
        return self.kind is ScaleKind.FAST_SCALE

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "fit_exponent": _finite_or_str(self.fit_exponent),
            "residual": _finite_or_str(self.residual),
            "order": self.order,
            "note": self.note,
        }


def _finite_or_str(x: float):
    if math.isfinite(x):
        return float(x)
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


@dataclass(frozen=True)
class _Tail:
    log_inv: np.ndarray  # log(1/eps) on usable tail points
    mag: np.ndarray  # |x| on usable tail points
    n_missing: int


def _tail(net: ScalarNet, tail_fraction: float) -> _Tail:
    if not 0 < tail_fraction <= 1:
        raise NetError("tail_fraction must lie in (0, 1]")
    mag = np.abs(net.samples)
    ok = ~np.isnan(mag)
    li = net.grid.log_inv[ok]
    mag = mag[ok]
    t = int(math.ceil(tail_fraction * mag.size))
    if t < 4:
        raise InsufficientData(f"only {t} usable tail points")
    return _Tail(li[-t:], mag[-t:], int((~ok).sum()))


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(r**2)))


def _trailing_zero_run(mag: np.ndarray) -> int:
    n = 0
    for v in mag[::-1]:
        if v != 0:
            break
        n += 1
    return n


def fit_scale_exponent(net: ScalarNet, tail_fraction: float = 0.5) -> tuple[float, float]:
    """Slope ``a`` of ``log|x|`` against ``log(1/eps)`` on the grid tail.

    ``x_eps = eps^-2`` gives ``a = 2``.  Returns ``(a, rms_residual)``.
    """
    tail = _tail(net, tail_fraction)
    if np.all(tail.mag == 0):
        raise AllZeroTail("net vanishes on the tail; use is_negligible")
    if np.any(np.isinf(tail.mag)):
        return math.inf, math.inf
    nz = tail.mag > 0
    if nz.sum() < 2:
        raise AllZeroTail("fewer than two nonzero tail samples")
    return _linfit(tail.log_inv[nz], np.log(tail.mag[nz]))


def _eventually_zero(tail: _Tail, params: ScaleParams) -> bool:
    run = _trailing_zero_run(tail.mag)
    return run == tail.mag.size or (
        run >= 2 and run >= params.zero_run_fraction * tail.mag.size
    )


def growth_exponent(net: ScalarNet, params: ScaleParams = DEFAULT_PARAMS) -> float:
    """Fitted growth exponent, ``-inf`` for eventually-zero nets."""
    tail = _tail(net, params.tail_fraction)
    if _eventually_zero(tail, params):
        return -math.inf
    if np.any(np.isinf(tail.mag)):
        return math.inf
    nz = tail.mag > 0
    if nz.sum() < 2:
        return -math.inf
    return _linfit(tail.log_inv[nz], np.log(tail.mag[nz]))[0]


def _monotone_trend(mag: np.ndarray) -> int:
    """+1 if the tail grows, -1 if it shrinks, 0 otherwise (ends compared)."""
    q = max(1, mag.size // 4)
    head, end = np.log(mag[:q]).mean(), np.log(mag[-q:]).mean()
    if end > head:
        return 1
    if end < head:
        return -1
    return 0


def classify_scale(net: ScalarNet, params: ScaleParams = DEFAULT_PARAMS) -> ScaleVerdict:
    """Place a net among the fast/slow scale and infinitesimal classes.

    Nets that fit no power law within ``residual_tol`` are Indeterminate,
    which is how the artifact reflects that these classes do not exhaust the
    generalized numbers.
    """
    tail = _tail(net, params.tail_fraction)
    if _eventually_zero(tail, params):
        return ScaleVerdict(ScaleKind.FAST_INFINITESIMAL, -math.inf, 0.0, note="zero tail")
    if np.any(tail.mag == 0) or np.any(np.isinf(tail.mag)):
        return ScaleVerdict(ScaleKind.INDETERMINATE, math.nan, math.inf, note="zeros or overflow on tail")
    a, res = _linfit(tail.log_inv, np.log(tail.mag))
    th = params.fast_threshold
    if res > params.residual_tol:
        return ScaleVerdict(ScaleKind.INDETERMINATE, a, res)
    if a >= th:
        return ScaleVerdict(ScaleKind.FAST_SCALE, a, res)
    if a <= -th:
        return ScaleVerdict(ScaleKind.FAST_INFINITESIMAL, a, res)
    trend = _monotone_trend(tail.mag)
    if trend > 0 and a > 0:
        return ScaleVerdict(ScaleKind.SLOW_SCALE, a, res)
    if trend < 0 and a < 0:
        return ScaleVerdict(ScaleKind.SLOW_INFINITESIMAL, a, res)
    return ScaleVerdict(ScaleKind.INDETERMINATE, a, res, note="bounded, not infinitesimal")


def is_negligible(net: ScalarNet, M_max: int = 6, params: ScaleParams = DEFAULT_PARAMS) -> ScaleVerdict:
    """Largest order ``m <= M_max`` with ``|x_eps| <= C eps^m`` on the tail.

    The returned verdict carries the verified order; ``order == M_max`` is
    read as "equal to zero".
    """
    if M_max < 1:
        raise NetError("M_max must be at least 1")
    tail = _tail(net, params.tail_fraction)
    if _eventually_zero(tail, params):
        return ScaleVerdict(ScaleKind.NEGLIGIBLE, -math.inf, 0.0, order=M_max, note="zero tail")
    if np.any(np.isinf(tail.mag)):
        return ScaleVerdict(ScaleKind.NEGLIGIBLE, math.inf, math.inf, order=0, note="overflow")
    nz = tail.mag > 0
    if nz.sum() < 2:
        return ScaleVerdict(ScaleKind.NEGLIGIBLE, -math.inf, 0.0, order=M_max, note="zero tail")
    a, res = _linfit(tail.log_inv[nz], np.log(tail.mag[nz]))
    decay = -a
    m_star = 0
    for m in range(1, M_max + 1):
        if decay >= m - params.order_slack:
            m_star = m
    return ScaleVerdict(ScaleKind.NEGLIGIBLE, a, res, order=m_star)


def is_moderate(net: ScalarNet, N_max: int = 10, params: ScaleParams = DEFAULT_PARAMS) -> ScaleVerdict:
    """Smallest ``N <= N_max`` with ``|x_eps| <= C eps^-N`` on the tail."""
    if N_max < 0:
        raise NetError("N_max must be nonnegative")
    tail = _tail(net, params.tail_fraction)
    if _eventually_zero(tail, params):
        return ScaleVerdict(ScaleKind.MODERATE, -math.inf, 0.0, order=0, note="zero tail")
    if np.any(np.isinf(tail.mag)):
        return ScaleVerdict(ScaleKind.INDETERMINATE, math.inf, math.inf, note="overflow")
    nz = tail.mag > 0
    if nz.sum() < 2:
        return ScaleVerdict(ScaleKind.MODERATE, -math.inf, 0.0, order=0, note="zero tail")
    li, mag = tail.log_inv[nz], tail.mag[nz]
    a, res = _linfit(li, np.log(mag))
    for N in range(0, N_max + 1):
        if a > N + params.order_slack:
            continue
        if a - N > params.bounded_tol:
            # Slow growth above eps^-N: reject N if the scaled tail increases.
            if _monotone_trend(mag * np.exp(-N * li)) > 0:
                continue
        return ScaleVerdict(ScaleKind.MODERATE, a, res, order=N)
    return ScaleVerdict(ScaleKind.INDETERMINATE, a, res, note=f"exceeds eps^-{N_max}")


def relate_points(x: VectorNet, y: VectorNet, params: ScaleParams = DEFAULT_PARAMS) -> ScaleVerdict:
    """Scale class of ``|x - y|``; FastInfinitesimal means ``x ~fast y``."""
    if x.dimension != y.dimension:
        raise DimensionMismatch("points have different dimensions")
    _same_grid(x.grid, y.grid)
    diff = (x - y).norm()
    if np.all(diff.samples == 0):
        return ScaleVerdict(ScaleKind.FAST_INFINITESIMAL, -math.inf, 0.0, note="identical")
    return classify_scale(diff, params)


def as_grid(values: Sequence[float] | EpsilonGrid) -> EpsilonGrid:
    return values if isinstance(values, EpsilonGrid) else EpsilonGrid(np.asarray(values))
