"""Truncated multivariate Taylor series ("jets") in one or two variables.

A jet of order K stores, for every sample point, the Taylor coefficients
``c_alpha`` with ``|alpha| <= K``; the partial derivative is
``d^alpha f = alpha! * c_alpha``.  Arithmetic and composition with
univariate functions propagate exact derivatives, which is how every
built-in family supplies its derivative evaluators.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def multi_indices(d: int, K: int) -> tuple:
    """Multi-indices with |alpha| <= K, graded then lexicographic."""
    if d == 1:
        return tuple((i,) for i in range(K + 1))
    if d == 2:
        return tuple((n - j, j) for n in range(K + 1) for j in range(n + 1))
    raise ValueError("only d in {1, 2} is supported")


@lru_cache(maxsize=None)
def _index_map(d: int, K: int) -> dict:
    return {a: i for i, a in enumerate(multi_indices(d, K))}


@lru_cache(maxsize=None)
def _mul_pairs(d: int, K: int) -> tuple:
    idx = multi_indices(d, K)
    pos = _index_map(d, K)
    pairs = []
    for ia, a in enumerate(idx):
        for ib, b in enumerate(idx):
            c = tuple(x + y for x, y in zip(a, b))
            if sum(c) <= K:
                pairs.append((ia, ib, pos[c]))
    return tuple(pairs)


@lru_cache(maxsize=None)
def _factorials(d: int, K: int) -> np.ndarray:
    return np.array(
        [math.prod(math.factorial(x) for x in a) for a in multi_indices(d, K)],
        dtype=float,
    )


class Jet:
    __slots__ = ("d", "K", "c")
    __array_priority__ = 100

    def __init__(self, d: int, K: int, coef: np.ndarray):
        self.d = d
        self.K = K
        self.c = coef

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, d: int, K: int, value, n: int | None = None) -> "Jet":
        value = np.asarray(value)
        if value.ndim == 0:
            value = np.full(n if n is not None else 1, value[()])
        c = np.zeros((value.size, len(multi_indices(d, K))), dtype=np.result_type(value, float))
        c[:, 0] = value
        return cls(d, K, c)

    @classmethod
    def variable(cls, values, axis: int, d: int, K: int) -> "Jet":
        values = np.asarray(values, dtype=float)
        c = np.zeros((values.size, len(multi_indices(d, K))))
        c[:, 0] = values
        if K >= 1:
            unit = tuple(1 if j == axis else 0 for j in range(d))
            c[:, _index_map(d, K)[unit]] = 1.0
        return cls(d, K, c)

    @classmethod
    def coordinates(cls, x: np.ndarray, K: int) -> list:
        """Jets of the coordinate functions at points ``x`` of shape (n, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x.shape[1]
        return [cls.variable(x[:, j], j, d, K) for j in range(d)]

    # access -------------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[:, 0]

    def derivative(self, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        i = _index_map(self.d, self.K)[alpha]
        return self.c[:, i] * _factorials(self.d, self.K)[i]

    def derivatives(self) -> np.ndarray:
        """All derivatives, shape (n, n_multi_indices)."""
        return self.c * _factorials(self.d, self.K)

    def __len__(self):
        return self.c.shape[0]

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.d != self.d or other.K != self.K:
                raise ValueError("jet shape mismatch")
            return other
        return Jet.constant(self.d, self.K, np.broadcast_to(np.asarray(other), (len(self),)))

    def __add__(self, other):
        o = self._coerce(other)
        return Jet(self.d, self.K, self.c + o.c)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Jet(self.d, self.K, self.c - o.c)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return Jet(self.d, self.K, -self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other)
            if other.ndim == 0:
                return Jet(self.d, self.K, self.c * other)
            return Jet(self.d, self.K, self.c * other[:, None])
        o = self._coerce(other)
        if self.K == 0:
            return Jet(self.d, 0, self.c * o.c)
        out = np.zeros(
            (max(len(self), len(o)), self.c.shape[1]),
            dtype=np.result_type(self.c, o.c),
        )
        for ia, ib, ic in _mul_pairs(self.d, self.K):
            out[:, ic] += self.c[:, ia] * o.c[:, ib]
        return Jet(self.d, self.K, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return (self.log() * p).exp()
        p = float(p)
        if p.is_integer() and p >= 0:
            out = Jet.constant(self.d, self.K, np.ones(len(self)))
            for _ in range(int(p)):
                out = out * self
            return out
        return self.power(p)

    # composition ----------------------------------------------------------
    def compose(self, derivs: np.ndarray) -> "Jet":
        """``f(self)`` given ``derivs[:, n] = f^(n)(self.value)`` for n <= K."""
        derivs = np.asarray(derivs)
        if derivs.ndim == 1:
            derivs = derivs[:, None]
        if self.K == 0:
            return Jet(self.d, 0, derivs[:, :1].astype(np.result_type(derivs, float)).copy())
        h = Jet(self.d, self.K, self.c.copy())
        h.c[:, 0] = 0
        dtype = np.result_type(derivs, self.c)
        out = np.zeros(self.c.shape, dtype=dtype)
        out[:, 0] = derivs[:, 0]
        power = h
        for n in range(1, self.K + 1):
            out += (derivs[:, n] / math.factorial(n))[:, None] * power.c
            if n < self.K:
                power = power * h
        return Jet(self.d, self.K, out)

    def map_value(self, fn) -> np.ndarray:
        return fn(self.value)

    def exp(self):
        e = np.exp(self.value)
        return self.compose(np.repeat(e[:, None], self.K + 1, axis=1))

    def log(self):
        u = self.value
        cols = [np.log(u)]
        for n in range(1, self.K + 1):
            cols.append((-1) ** (n - 1) * math.factorial(n - 1) / u**n)
        return self.compose(np.stack(cols, axis=1))

    def power(self, p: float):
        u = self.value
        cols = []
        coef = 1.0
        for n in range(self.K + 1):
            cols.append(coef * u ** (p - n))
            coef *= p - n
        return self.compose(np.stack(cols, axis=1))

    def reciprocal(self):
        return self.power(-1.0)

    def sqrt(self):
        return self.power(0.5)

    def sin(self):
        u = self.value
        cyc = [np.sin(u), np.cos(u), -np.sin(u), -np.cos(u)]
        return self.compose(np.stack([cyc[n % 4] for n in range(self.K + 1)], axis=1))

    def cos(self):
        u = self.value
        cyc = [np.cos(u), -np.sin(u), -np.cos(u), np.sin(u)]
        return self.compose(np.stack([cyc[n % 4] for n in range(self.K + 1)], axis=1))

    def abs(self):
        u = self.value
        cols = [np.abs(u), np.sign(u)] + [np.zeros_like(u)] * (self.K - 1)
        return self.compose(np.stack(cols[: self.K + 1], axis=1))

    def take(self, mask) -> "Jet":
        return Jet(self.d, self.K, self.c[mask])


def put(target: np.ndarray, mask, jet: Jet) -> None:
    target[mask] = jet.c


def _logistic_polys(K: int) -> list:
    """Polynomials P_n with L^(n)(s) = P_n(L(s)), L the logistic function."""
    polys = [np.polynomial.Polynomial([0.0, 1.0])]
    lp = np.polynomial.Polynomial([0.0, 1.0, -1.0])  # L(1 - L)
    for _ in range(K):
        polys.append(polys[-1].deriv() * lp)
    return polys


_LOGISTIC = _logistic_polys(12)


def logistic_derivatives(s: np.ndarray, K: int) -> np.ndarray:
    L = 0.5 * (1.0 + np.tanh(0.5 * s))  # overflow-free logistic
    return np.stack([_LOGISTIC[n](L) for n in range(K + 1)], axis=1)


def smoothstep_derivatives(t, K: int) -> np.ndarray:
    """Derivatives of h(t) = g(t) / (g(t) + g(1 - t)), g(t) = exp(-1/t).

    ``h`` is 0 for t <= 0, 1 for t >= 1 and smooth in between; returns an
    array of shape (n, K+1) with ``h^(k)(t)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((t.size, K + 1))
    out[t >= 1, 0] = 1.0
    # exp(-1/t) underflows well before 1e-3 relative to any polynomial factor
    inner = (t > 1e-3) & (t < 1 - 1e-3)
    out[((t > 0) & (t <= 1e-3)), 0] = 0.0
    out[((t >= 1 - 1e-3) & (t < 1)), 0] = 1.0
    if np.any(inner):
        tj = Jet.variable(t[inner], 0, 1, K)
        s = (1.0 - tj).reciprocal() - tj.reciprocal()
        h = s.compose(logistic_derivatives(s.value, K))
        out[inner] = h.derivatives()
    return out
