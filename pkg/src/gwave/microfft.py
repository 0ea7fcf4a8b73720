"""Scaled cutoffs, windowed transforms and frequency-region sups.

The transform of ``v = phi * u_eps`` is computed on the envelope of ``u``:
with ``u = E(x) exp(i kappa . x)``, ``v^(kappa + zeta) = (phi E)^(zeta)``, so
the lattice is ``kappa + zeta_q`` with ``zeta_q = q * 2 pi / L`` and carrier
frequencies far beyond any sampling rate stay exact.

Spectral values below ``flush * ||v||_1`` (an upper bound for ``|v^|``) are
set to exact zero; this is the numerical-zero convention the decay fits
rely on.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from . import bump
from .genfun import RepFamily, _box_intersect, as_eps_fn, box_empty
from .jets import Jet
from .netcalc import EpsilonGrid, ScalarNet


class ResolutionExceeded(RuntimeError):
    pass


class SupportClipped(RuntimeError):
    pass


class EmptyRegion(RuntimeError):
    pass


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class Resolution:
    points_per_scale: int = 192
    pad: float = 2.0
    max_1d: int = 2**18
    max_2d: int = 1024
    flush: float = 1e-10
    eps_floor: float = 0.0  # grid eps below this are not computed

    def budget(self, d: int) -> int:
        return self.max_1d if d == 1 else self.max_2d


DEFAULT_RESOLUTION = Resolution()


# --- cutoffs ------------------------------------------------------------------

def default_schedule(M_max: int):
    """k_eps = max(2M, floor(log log(1/eps)) + 2M)."""
    def k(eps: float) -> int:
        return max(2 * M_max, int(math.floor(math.log(math.log(1.0 / eps)))) + 2 * M_max)
    return k


class ScaledCutoff:
    """``phi0((x - x0_eps) / w_eps)`` with ``w_eps = eps^(1/k)`` or a fixed radius."""

    def __init__(self, center, d: int, *, order: int | None = None, schedule=None,
                 radius: float | None = None, label: str = ""):
        if sum(v is not None for v in (order, schedule, radius)) != 1:
            raise ValueError("give exactly one of order, schedule, radius")
        self.d = d
        self.center = as_eps_fn(center, d)
        self.order = order
        self.schedule = schedule
        self.radius = radius
        self.label = label

    @classmethod
    def of_order(cls, center, d, m: int):
        return cls(center, d, order=m)

    @classmethod
    def scheduled(cls, center, d, M_max: int = 6, schedule=None):
        return cls(center, d, schedule=schedule or default_schedule(M_max))

    @classmethod
    def standard(cls, center, d, r: float):
        return cls(center, d, radius=r)

    def k(self, eps: float):
        if self.order is not None:
            return self.order
        if self.schedule is not None:
            return self.schedule(eps)
        return None

    def width(self, eps: float) -> float:
        if self.radius is not None:
            return self.radius
        return eps ** (1.0 / self.k(eps))

    def width_net(self, grid: EpsilonGrid) -> ScalarNet:
        return ScalarNet(grid, np.array([self.width(e) for e in grid.values]))

    def values(self, eps: float, x: np.ndarray) -> np.ndarray:
        c, w = self.center(eps), self.width(eps)
        return bump.phi0((np.atleast_2d(x) - c) / w if self.d > 1 else (x.ravel() - c[0]) / w)

    def describe(self) -> dict:
        if self.radius is not None:
            return {"kind": "standard", "radius": self.radius}
        if self.order is not None:
            return {"kind": "order", "k": self.order}
        return {"kind": "schedule", "k": "max(2M, floor(log log(1/eps)) + 2M)"}


class CutoffFamily(RepFamily):
    """A cutoff viewed as a family (for the dilation identity)."""

    def __init__(self, cutoff: ScaledCutoff):
        self.cutoff = cutoff
        self.d = cutoff.d
        self.provenance = "cutoff"

    def envelope_jet(self, eps, coords):
        c, w = self.cutoff.center(eps), self.cutoff.width(eps)
        return bump.phi0_jet([(x - cj) * (1.0 / w) for x, cj in zip(coords, c)])

    def support_box(self, eps):
        c, w = self.cutoff.center(eps), self.cutoff.width(eps)
        return np.stack([c - w, c + w], axis=1)

    def feature_scale(self, eps, box):
        return self.cutoff.width(eps)


def dilation_oracle(eps: float, m2: int, zeta: np.ndarray, d: int) -> np.ndarray:
    """``eps^(d/m2) phi0^(eps^(1/m2) xi)`` for a cutoff centred at 0."""
    w = eps ** (1.0 / m2)
    z = np.atleast_2d(zeta)
    if d == 1:
        return w * bump.phi0_hat_1d_fast(w * z[:, 0])
    return w**2 * bump.phi0_hat_2d_fast(w * np.linalg.norm(z, axis=1))


# --- spectra --------------------------------------------------------------------

BLOCK_CELLS = {1: 256, 2: 32}
BLOCK_GROUP = 16


@dataclass
class SpectrumSlice:
    eps: float
    d: int
    carrier: np.ndarray
    spacing: float  # lattice step 2 pi / L
    n_fft: int
    dx: float
    x_start: np.ndarray
    n_samples: int
    values: np.ndarray  # complex, fftshifted, shape (n_fft,)*d
    l1: float
    parseval_rel: float
    flushed: int
    empty: bool = False
    normalization: dict = field(default_factory=dict)

    @property
    def halfwidth(self) -> float:
        return math.pi / self.dx if not self.empty else math.inf

    def axis(self) -> np.ndarray:
        q = np.arange(self.n_fft) - self.n_fft // 2
        return q * self.spacing

    def zeta(self) -> np.ndarray:
        """Lattice offsets from the carrier, shape (n_fft**d, d)."""
        a = self.axis()
        if self.d == 1:
            return a[:, None]
        g = np.meshgrid(a, a, indexing="ij")
        return np.stack([g[0].ravel(), g[1].ravel()], axis=1)

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def nonzero(self):
        """(zeta, |v^|) at the lattice points that survived the flush."""
        if getattr(self, "_nz", None) is None:
            flat = self.flat()
            idx = np.flatnonzero(flat)
            q = np.stack(np.unravel_index(idx, (self.n_fft,) * self.d), axis=1) - self.n_fft // 2
            self._nz = (q * self.spacing, np.abs(flat[idx]), q)
        return self._nz[:2]

    def blocks(self):
        """Nonzero points grouped into lattice blocks: (centres, radius, starts, order, max)."""
        if getattr(self, "_blocks", None) is None:
            self.nonzero()
            q = self._nz[2]
            if q.shape[0] == 0:
                self._blocks = (np.zeros((0, self.d)), 0.0, np.zeros(1, int), np.zeros(0, int), np.zeros(0))
                return self._blocks
            side = BLOCK_CELLS[self.d]
            b = np.floor_divide(q, side)
            key = b[:, 0] if self.d == 1 else b[:, 0] * (self.n_fft // side + 2) + b[:, 1]
            order = np.argsort(key, kind="stable")
            ks = key[order]
            starts = np.flatnonzero(np.r_[True, ks[1:] != ks[:-1]])
            centres = (b[order[starts]] + 0.5) * side * self.spacing - 0.5 * self.spacing
            radius = 0.5 * side * self.spacing * math.sqrt(self.d)
            bmax = np.maximum.reduceat(self._nz[1][order], starts)
            self._blocks = (centres, radius, np.r_[starts, ks.size], order, bmax)
        return self._blocks

    def dump_csv(self, path) -> None:
        """Columns: xi_1..xi_d (as carrier + offset), |v^|, phase."""
        z = self.zeta()
        v = self.flat()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"xi_{j + 1}" for j in range(self.d)] + ["abs", "phase"])
            for zi, vi in zip(z, v):
                w.writerow([repr(float(self.carrier[j] + zi[j])) for j in range(self.d)]
                           + [repr(float(abs(vi))), repr(float(np.angle(vi)))])


def _empty_slice(eps, d, carrier):
    return SpectrumSlice(eps, d, carrier, 1.0, 1, 1.0, np.zeros(d), 0,
                         np.zeros((1,) * d, dtype=complex), 0.0, 0.0, 0, empty=True,
                         normalization={"convention": "int v(x) exp(-i x.xi) dx", "note": "v = 0"})


def windowed_spectrum(u: RepFamily, cutoff: ScaledCutoff, eps: float,
                      res: Resolution = DEFAULT_RESOLUTION) -> SpectrumSlice:
    """Continuous-FT-normalized DFT of ``phi * u_eps`` (trapezoidal weights)."""
    d = u.d
    c, w = cutoff.center(eps), cutoff.width(eps)
    kappa = np.asarray(u.carrier(eps), dtype=float)
    wbox = np.stack([c - w, c + w], axis=1)
    sbox = u.support_box(eps)
    box = _box_intersect(wbox, sbox)
    if box_empty(box):
        if sbox is not None and np.all(np.isfinite(sbox)):
            mid = sbox.mean(axis=1)
            degenerate = np.any(sbox[:, 1] - sbox[:, 0] <= 16 * np.spacing(np.abs(sbox).max()))
            if degenerate and np.all((mid >= wbox[:, 0]) & (mid <= wbox[:, 1])):
                raise ResolutionExceeded(f"eps={eps:.3g}: support below coordinate precision")
        return _empty_slice(eps, d, kappa)
    if eps < res.eps_floor:
        raise ResolutionExceeded(f"eps={eps:.3g} below the eps floor")
    scale = min(w, u.feature_scale(eps, box))
    dx = scale / res.points_per_scale
    lengths = box[:, 1] - box[:, 0]
    if dx <= 16 * np.spacing(np.abs(box).max()):
        raise ResolutionExceeded(f"eps={eps:.3g}: sampling step below coordinate precision")
    n = int(math.ceil(lengths.max() / dx)) + 1
    n_fft = sfft.next_fast_len(int(math.ceil(res.pad * n)))
    if n_fft > res.budget(d) or not np.isfinite(n):
        raise ResolutionExceeded(f"eps={eps:.3g}: needs {n_fft} points per axis")
    x0 = box[:, 0]
    ax = [x0[j] + dx * np.arange(n) for j in range(d)]
    if d == 1:
        pts = ax[0][:, None]
    else:
        g = np.meshgrid(ax[0], ax[1], indexing="ij")
        pts = np.stack([g[0].ravel(), g[1].ravel()], axis=1)
    x_rel = [Jet.variable((pts[:, j] - c[j]) / w, j, d, 0) for j in range(d)]
    win = bump.phi0_jet(x_rel).value
    keep = win != 0
    v = np.zeros(pts.shape[0], dtype=complex)
    if np.any(keep):
        v[keep] = win[keep] * u.envelope_values(eps, pts[keep])
    v = v.reshape((n,) * d)
    cell = dx**d
    raw = sfft.fftshift(sfft.fftn(v, s=(n_fft,) * d)) * cell
    spacing = 2.0 * math.pi / (n_fft * dx)
    a = (np.arange(n_fft) - n_fft // 2) * spacing
    phase = np.exp(-1j * a * x0[0])
    if d == 1:
        raw = raw * phase
    else:
        raw = raw * np.outer(phase, np.exp(-1j * a * x0[1]))
    energy = cell * float(np.sum(np.abs(v) ** 2))
    spec_energy = float(np.sum(np.abs(raw) ** 2)) * (spacing / (2 * math.pi)) ** d
    parseval = abs(energy - spec_energy) / energy if energy > 0 else 0.0
    l1 = cell * float(np.sum(np.abs(v)))
    small = np.abs(raw) <= res.flush * l1
    raw[small] = 0
    return SpectrumSlice(
        eps=eps, d=d, carrier=kappa, spacing=spacing, n_fft=n_fft, dx=dx, x_start=x0,
        n_samples=n, values=raw, l1=l1, parseval_rel=parseval, flushed=int(small.sum()),
        normalization={
            "convention": "int v(x) exp(-i x.xi) dx",
            "quadrature": "trapezoidal (v vanishes at the box ends)",
            "phase": "exp(-i zeta x_start)",
            "flush": res.flush,
        },
    )


# --- regions ----------------------------------------------------------------------

def _norm(z):
    return np.sqrt(np.sum(z * z, axis=-1))


def direction_offsets(kappa: np.ndarray, zeta: np.ndarray, theta: np.ndarray):
    """``|xi|`` and ``|xi - |xi| theta|`` for ``xi = kappa + zeta``, cancellation-free."""
    lam = float(np.sqrt(kappa @ kappa))
    if lam == 0:
        r = _norm(zeta)
        return r, _norm(zeta - r[:, None] * theta)
    khat = kappa / lam
    diff = khat - theta
    r_minus_lam = (2 * (zeta @ kappa) + np.sum(zeta * zeta, axis=1))
    r = np.sqrt(np.sum((kappa + zeta) ** 2, axis=1))
    r_minus_lam = r_minus_lam / (r + lam)
    D = lam * diff + zeta - r_minus_lam[:, None] * theta
    return r, _norm(D)


class FrequencyRegion:
    kind = ""

    def params(self, eps: float):
        """(axis, angular radius, radial floor) at eps."""
        raise NotImplementedError

    def mask(self, zeta: np.ndarray, kappa: np.ndarray, eps: float, slack: float = 0.0,
             use_floor: bool = True, rho: float = 0.0) -> np.ndarray:
        """Membership of ``kappa + zeta``, dilated by ``slack``.

        ``rho > 0`` tests balls of that radius instead of points: moving xi
        by delta changes ``|xi - |xi| theta|`` by at most ``2 delta``.
        """
        theta, rad, floor = self.params(eps)
        r, off = direction_offsets(kappa, zeta, theta)
        ok = off <= rad * r + slack + (2.0 + rad) * rho
        if rho == 0.0:
            ok &= r > 0
        if use_floor:
            ok &= r >= floor - slack - rho
        return ok

    def contains(self, xi, eps: float) -> bool:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return bool(self.mask(xi, np.zeros(xi.shape[1]), eps)[0])

    def meets_ball(self, centre: np.ndarray, radius: float, eps: float) -> bool:
        """Does the region's axis ray come within ``radius`` of ``centre``?"""
        theta, rad, floor = self.params(eps)
        lam = float(np.sqrt(centre @ centre))
        s = float(centre @ theta)
        if s >= floor:
            if lam == 0:
                return True
            khat = centre / lam
            diff = khat - theta
            perp = lam * (diff - (diff @ theta) * theta)
            return float(np.sqrt(perp @ perp)) <= radius
        return float(np.sqrt(np.sum((centre - floor * theta) ** 2))) <= radius

    def describe(self, eps: float | None = None) -> dict:
        raise NotImplementedError


class StandardCone(FrequencyRegion):
    kind = "StandardCone"

    def __init__(self, axis, r: float, floor=None):
        a = np.atleast_1d(np.asarray(axis, dtype=float))
        self.axis = a / np.linalg.norm(a)
        self.r = float(r)
        self.floor = floor if floor is not None else (lambda eps: 0.0)

    def params(self, eps):
        return self.axis, self.r, float(self.floor(eps))

    def describe(self, eps=None):
        return {"kind": self.kind, "axis": self.axis.tolist(), "r": self.r}


class FastTube(FrequencyRegion):
    kind = "FastTube"

    def __init__(self, axis, m: int, d: int | None = None):
        if hasattr(axis, "at"):
            self._axis = axis.at
        else:
            a = np.atleast_1d(np.asarray(axis, dtype=float))
            a = a / np.linalg.norm(a)
            self._axis = lambda eps: a
        self.m = int(m)

    def params(self, eps):
        return np.asarray(self._axis(eps), dtype=float), eps ** (1.0 / self.m), eps ** (-1.0 / self.m)

    def describe(self, eps=None):
        return {"kind": self.kind, "m": self.m}


def region_membership(xi, eps: float, region: FrequencyRegion) -> bool:
    if not np.any(np.asarray(xi, dtype=float)):
        raise PreconditionViolated("|xi| must be positive")
    return region.contains(xi, eps)


@dataclass
class RegionSup:
    value: float
    status: str  # "ok", "empty-region", "zero-slice"
    in_band: int = 0


def region_sup(sl: SpectrumSlice, region: FrequencyRegion, weight_m: int | None = None,
               use_floor: bool = True, dilate: bool = True) -> RegionSup:
    """Max of |v^| (optionally times <xi>^m) over lattice points in the region.

    With ``dilate`` (default) lattice points within half a cell diagonal of
    the region count, since the transform of a function supported in the
    sampling box is smooth on the lattice scale; then every region whose axis
    crosses the band owns a lattice point and EmptyRegion cannot occur.  The
    outer ring of the band bounds everything beyond it.  Nonzero lattice
    points are grouped in blocks; blocks are visited by decreasing upper
    bound and skipped once they cannot raise the max.
    """
    if sl.empty:
        return RegionSup(0.0, "zero-slice")
    slack = 0.5 * sl.spacing * math.sqrt(sl.d) if dilate else 0.0
    z_all, mag_all = sl.nonzero()
    centres, rho, starts, order, bmax = sl.blocks()
    # broad phase: blocks that may meet the region (the ring ignores the floor)
    cand = np.flatnonzero(region.mask(centres, sl.carrier, sl.eps, slack, use_floor=False, rho=rho))
    ub = np.log(bmax[cand])
    if weight_m is not None:
        far = _norm(sl.carrier + centres[cand]) + rho
        ub = ub + 0.5 * weight_m * np.log1p(far * far)
    cand = cand[np.argsort(-ub, kind="stable")]
    ub = np.sort(ub)[::-1]
    best, n_in = -math.inf, 0
    for g0 in range(0, cand.size, BLOCK_GROUP):
        if ub[g0] <= best:
            break  # no remaining block can raise the max
        idx = np.concatenate([order[starts[i]:starts[i + 1]] for i in cand[g0:g0 + BLOCK_GROUP]])
        z, lm = z_all[idx], np.log(mag_all[idx])
        inside = region.mask(z, sl.carrier, sl.eps, slack, use_floor)
        ring = np.max(np.abs(z), axis=1) >= 0.9 * sl.halfwidth
        sel = inside | (ring & region.mask(z, sl.carrier, sl.eps, slack, use_floor=False))
        n_in += int(inside.sum())
        if not np.any(sel):
            continue
        if weight_m is not None:
            xi = sl.carrier + z[sel]
            lm = lm[sel] + 0.5 * weight_m * np.log1p(np.sum(xi * xi, axis=1))
        else:
            lm = lm[sel]
        best = max(best, float(lm.max()))
    with np.errstate(over="ignore"):
        val = float(np.exp(best))
    if not dilate and val == 0.0:
        full = region.mask(sl.zeta(), sl.carrier, sl.eps, 0.0, use_floor)
        if not np.any(full) and region.meets_ball(sl.carrier, sl.halfwidth * math.sqrt(sl.d), sl.eps):
            return RegionSup(math.nan, "empty-region")
    return RegionSup(val, "ok", n_in)


# --- scans ------------------------------------------------------------------------

@dataclass
class SliceSet:
    """One spectrum per grid eps (None where the resolution budget is exceeded)."""

    grid: EpsilonGrid
    slices: list
    errors: dict

    @property
    def ceilings(self) -> int:
        return len(self.errors)


def compute_slices(u: RepFamily, cutoff: ScaledCutoff, grid: EpsilonGrid,
                   res: Resolution = DEFAULT_RESOLUTION, executor=None) -> SliceSet:
    def one(eps):
        try:
            return windowed_spectrum(u, cutoff, float(eps), res), None
        except ResolutionExceeded as e:
            return None, str(e)

    mapper = executor.map if executor is not None else map
    out = list(mapper(one, grid.values))
    return SliceSet(grid, [s for s, _ in out], {i: e for i, (_, e) in enumerate(out) if e})


@dataclass
class ScanResult:
    net: ScalarNet
    empty: int
    ceilings: int

    def diagnostics(self) -> dict:
        return {"empty_region": self.empty, "resolution_ceilings": self.ceilings}


def scan_region(slices: SliceSet, region: FrequencyRegion, weight_m: int | None = None,
                use_floor: bool = True, dilate: bool = True) -> ScanResult:
    vals = np.full(len(slices.grid), np.nan)
    empty = 0
    for i, sl in enumerate(slices.slices):
        if sl is None:
            continue
        rs = region_sup(sl, region, weight_m, use_floor, dilate)
        vals[i] = rs.value
        empty += rs.status == "empty-region"
    return ScanResult(ScalarNet(slices.grid, vals), empty, slices.ceilings)


def region_decay_scan(u: RepFamily, cutoff: ScaledCutoff, region: FrequencyRegion, m: int,
                      grid: EpsilonGrid, res: Resolution = DEFAULT_RESOLUTION,
                      slices: SliceSet | None = None) -> ScanResult:
    """Sup-net ``S_m`` of |v^| over the region (floor included)."""
    slices = slices or compute_slices(u, cutoff, grid, res)
    return scan_region(slices, region)


def weighted_moderate_scan(u: RepFamily, cutoff: ScaledCutoff, region: FrequencyRegion, m: int,
                           N_max: int, grid: EpsilonGrid, res: Resolution = DEFAULT_RESOLUTION,
                           slices: SliceSet | None = None):
    """Moderate verdict on sup <xi>^m |v^| over the region's angular set."""
    from .netcalc import is_moderate

    slices = slices or compute_slices(u, cutoff, grid, res)
    scan = scan_region(slices, region, weight_m=m, use_floor=False)
    return is_moderate(scan.net, N_max), scan


# --- cone enlargement ---------------------------------------------------------------

def cone_enlargement_check(xi0, r, zeta, eta) -> tuple[bool, int | None]:
    """For every eps: |zeta/|zeta| - xi0| <= r and |zeta - eta| <= r|zeta|
    imply |eta/|eta| - xi0| <= 3r.  Returns (ok, first violating index)."""
    X = np.atleast_2d(np.asarray(xi0, dtype=float))
    Z = np.atleast_2d(np.asarray(zeta, dtype=float))
    E = np.atleast_2d(np.asarray(eta, dtype=float))
    R = np.broadcast_to(np.asarray(r, dtype=float), (Z.shape[0],))
    if np.any(R > 0.5):
        raise PreconditionViolated("r must not exceed 1/2")
    nz = _norm(Z)
    if np.any(nz == 0) or np.any(_norm(Z / nz[:, None] - X) > R):
        raise PreconditionViolated("zeta is not in the inner cone")
    if np.any(_norm(Z - E) > R * nz):
        raise PreconditionViolated("eta is not within r|zeta| of zeta")
    ne = _norm(E)
    bad = (ne == 0) | (_norm(E / np.where(ne > 0, ne, 1.0)[:, None] - X) > 3 * R)
    if np.any(bad):
        return False, int(np.argmax(bad))
    return True, None


# --- oracle and hygiene checks ------------------------------------------------------

ORACLE_SAMPLES = 4096


def oracle_window(u: RepFamily, eps: float) -> ScaledCutoff | None:
    """A standard cutoff whose plateau covers supp u_eps (so phi u = u)."""
    box = u.support_box(eps)
    if box is None or not np.all(np.isfinite(box)):
        return None
    c = box.mean(axis=1)
    half = 0.5 * float(np.linalg.norm(box[:, 1] - box[:, 0]))
    return ScaledCutoff.standard(c.tolist(), u.d, 2.0 * half * 1.0001)


def oracle_error(u: RepFamily, eps: float, res: Resolution = DEFAULT_RESOLUTION) -> float:
    """max |DFT - oracle| / max |oracle| over the resolved band."""
    cut = oracle_window(u, eps)
    if cut is None or not u.has_oracle:
        raise ValueError("family has no compactly supported closed-form transform")
    sl = windowed_spectrum(u, cut, eps, res)
    z = sl.zeta()
    v = sl.flat()
    if z.shape[0] > ORACLE_SAMPLES:
        step = z.shape[0] // ORACLE_SAMPLES + 1
        idx = np.union1d(np.arange(0, z.shape[0], step), [int(np.argmax(np.abs(v)))])
        z, v = z[idx], v[idx]
    o = u.fourier_oracle(eps, z)
    return float(np.max(np.abs(v - o)) / np.max(np.abs(o)))
