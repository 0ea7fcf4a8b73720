"""The fixed smooth profiles: a plateau bump and a unit-mass mollifier.

Both are built from the smooth step ``h`` of :mod:`gwave.jets`.

* ``phi0``: radial, equals 1 on ``|x| <= 1/2``, 0 on ``|x| >= 1``.
* ``psi``: ``psi(x) = h'((x + 1) / 2) / 2`` on ``[-1, 1]``; symmetric, unit
  mass, antiderivative ``h((x + 1) / 2)``.

Fourier transforms use the convention ``f^(xi) = int f(x) e^{-i x.xi} dx``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .jets import Jet, smoothstep_derivatives

MASS_TOL = 1e-10


class BadMollifier(ValueError):
    pass


# --- plateau bump --------------------------------------------------------

def phi0_jet(coords: list) -> Jet:
    """``phi0(X)`` for coordinate jets ``X`` (already centred and scaled)."""
    d, K = coords[0].d, coords[0].K
    n = len(coords[0])
    if d == 1:
        u = coords[0].value
        r0 = np.abs(u)
    else:
        r0 = np.sqrt(sum(c.value**2 for c in coords))
    out = np.zeros((n, coords[0].c.shape[1]))
    out[r0 <= 0.5, 0] = 1.0
    trans = (r0 > 0.5) & (r0 < 1.0)
    if np.any(trans):
        sub = [c.take(trans) for c in coords]
        r = sub[0].abs() if d == 1 else sum((c * c for c in sub[1:]), sub[0] * sub[0]).sqrt()
        hd = smoothstep_derivatives(2.0 * r.value - 1.0, K)
        scale = 2.0 ** np.arange(K + 1)
        out[trans] = -r.compose(hd * scale).c
        out[trans, 0] += 1.0
    return Jet(d, K, out)


def phi0(x: np.ndarray) -> np.ndarray:
    """Values of the plateau bump; ``x`` has shape (n,) or (n, d)."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if x.ndim == 1 else np.linalg.norm(x, axis=-1)
    return 1.0 - smoothstep_derivatives(2.0 * r.ravel() - 1.0, 0)[:, 0].reshape(r.shape)


def _phi0_radial(r: float) -> float:
    return 1.0 - float(smoothstep_derivatives([2.0 * r - 1.0], 0)[0, 0])


def phi0_hat_1d(xi) -> np.ndarray:
    """Quadrature oracle for the 1D transform of ``phi0``."""
    xi = np.atleast_1d(np.abs(np.asarray(xi, dtype=float)))
    out = np.empty_like(xi)
    for i, w in enumerate(xi):
        if w == 0:
            plateau = 0.5
            trans = integrate.quad(_phi0_radial, 0.5, 1.0, epsabs=1e-15, limit=200)[0]
        else:
            plateau = math.sin(0.5 * w) / w
            trans = integrate.quad(
                _phi0_radial, 0.5, 1.0, weight="cos", wvar=w, epsabs=1e-15, limit=200
            )[0]
        out[i] = 2.0 * (plateau + trans)
    return out


def phi0_hat_2d(rho) -> np.ndarray:
    """Hankel-transform oracle for the 2D radial transform of ``phi0``."""
    rho = np.atleast_1d(np.abs(np.asarray(rho, dtype=float)))
    out = np.empty_like(rho)
    for i, p in enumerate(rho):
        plateau = 0.125 if p == 0 else 0.5 * special.j1(0.5 * p) / p
        trans = integrate.quad(
            lambda r: _phi0_radial(r) * special.j0(p * r) * r,
            0.5, 1.0, epsabs=1e-15, limit=400,
        )[0]
        out[i] = 2.0 * math.pi * (plateau + trans)
    return out


def phi0_integral(d: int) -> float:
    return float(phi0_hat_1d([0.0])[0] if d == 1 else phi0_hat_2d([0.0])[0])


# --- mollifier -------------------------------------------------------------

def psi_jet(X: Jet, deriv: int = 0) -> Jet:
    """``psi^(deriv)`` composed with a 1D-coordinate jet."""
    K = X.K + deriv
    t = 0.5 * (X.value + 1.0)
    hd = smoothstep_derivatives(t, K + 1)[:, 1 + deriv:]
    inside = (X.value > -1.0) & (X.value < 1.0)
    hd[~inside] = 0.0
    scale = 0.5 ** np.arange(1 + deriv, K + 2)
    return X.compose(hd * scale)


def psi_antiderivative_jet(X: Jet) -> Jet:
    """``H(X) = h((X + 1) / 2)``, the primitive of ``psi``."""
    K = X.K
    hd = smoothstep_derivatives(0.5 * (X.value + 1.0), K)
    return X.compose(hd * 0.5 ** np.arange(K + 1))


def psi(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return psi_jet(Jet.variable(x, 0, 1, 0)).value


def psi_mass() -> float:
    return integrate.quad(lambda s: float(psi([s])[0]), -1.0, 1.0, epsabs=1e-14, limit=200)[0]


def check_mollifier(mass: float | None = None) -> float:
    m = psi_mass() if mass is None else mass
    if abs(m - 1.0) > MASS_TOL:
        raise BadMollifier(f"mollifier mass {m!r} differs from 1")
    return m


def psi_hat(xi) -> np.ndarray:
    """Quadrature oracle for the 1D transform of ``psi`` (real, even)."""
    xi = np.atleast_1d(np.abs(np.asarray(xi, dtype=float)))
    f = lambda s: float(psi([s])[0])
    out = np.empty_like(xi)
    for i, w in enumerate(xi):
        if w == 0:
            out[i] = 2.0 * integrate.quad(f, 0.0, 1.0, epsabs=1e-15, limit=200)[0]
        else:
            out[i] = 2.0 * integrate.quad(
                f, 0.0, 1.0, weight="cos", wvar=w, epsabs=1e-15, limit=200
            )[0]
    return out


# --- Gauss-Legendre evaluators (fast oracles, cross-checked against quad) ---

_GL_NODES = 1024


def _gl(a: float, b: float, n: int = _GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _chunked(fn, w: np.ndarray, chunk: int = 4096) -> np.ndarray:
    out = np.empty(w.shape, dtype=float)
    flat, res = w.ravel(), out.ravel()
    for i in range(0, flat.size, chunk):
        res[i:i + chunk] = fn(flat[i:i + chunk])
    return out


_PSI_NODES = None
_PHI_NODES = None


def _psi_nodes():
    global _PSI_NODES
    if _PSI_NODES is None:
        x, w = _gl(0.0, 1.0)
        _PSI_NODES = (x, 2.0 * w * psi(x))
    return _PSI_NODES


def _phi_nodes():
    global _PHI_NODES
    if _PHI_NODES is None:
        x, w = _gl(0.5, 1.0)
        _PHI_NODES = (x, w * phi0(x))
    return _PHI_NODES


def psi_hat_fast(xi) -> np.ndarray:
    xi = np.abs(np.asarray(xi, dtype=float))
    x, w = _psi_nodes()
    return _chunked(lambda v: np.cos(np.outer(v, x)) @ w, xi)


def phi0_hat_1d_fast(xi) -> np.ndarray:
    xi = np.abs(np.asarray(xi, dtype=float))
    x, w = _phi_nodes()

    def f(v):
        with np.errstate(invalid="ignore", divide="ignore"):
            plateau = np.where(v == 0, 0.5, np.sin(0.5 * v) / np.where(v == 0, 1.0, v))
        return 2.0 * (plateau + np.cos(np.outer(v, x)) @ w)

    return _chunked(f, xi)


def phi0_hat_2d_fast(rho) -> np.ndarray:
    rho = np.abs(np.asarray(rho, dtype=float))
    x, w = _phi_nodes()

    def f(v):
        with np.errstate(invalid="ignore", divide="ignore"):
            plateau = np.where(v == 0, 0.125, 0.5 * special.j1(0.5 * v) / np.where(v == 0, 1.0, v))
        return 2.0 * math.pi * (plateau + special.j0(np.outer(v, x)) @ (w * x))

    return _chunked(f, rho, chunk=1024)
