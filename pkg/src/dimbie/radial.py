"""Radial profiles of the free-space Green's functions and their r-derivatives.

Scalar kernels are ``g(r)``; vector (elastic) kernels are
``A(r) I + C(r) R R^T`` with ``R = x - y``.  Each profile is returned
together with its first two r-derivatives.

The elastodynamic profiles are built from ``psi = (g_T - g_L) / k_T^2``,
whose small-r expansion suffers cancellation.  For ``k_T r < SERIES_SWITCH``
they are evaluated from log-power series manipulated in coefficient space;
beyond that the closed forms are used.
"""

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from scipy.special import hankel1

SERIES_SWITCH = 2.0
N_TERMS = 40
EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class LogPowerSeries:
    """``sum_n r^n (a_n + b_n log r)`` for integer n in ``[n0, n0 + len(a))``."""
    n0: int
    a: np.ndarray
    b: np.ndarray

    def derivative(self):
        n = self.n0 + np.arange(len(self.a))
        return LogPowerSeries(self.n0 - 1, n * self.a + self.b, n * self.b)

    def shift(self, s: int):
        """Multiply by ``r^s``."""
        return LogPowerSeries(self.n0 + s, self.a, self.b)

    def scale(self, c):
        return LogPowerSeries(self.n0, c * self.a, c * self.b)

    def __add__(self, other):
        lo = min(self.n0, other.n0)
        hi = max(self.n0 + len(self.a), other.n0 + len(other.a))
        a = np.zeros(hi - lo, dtype=complex)
        b = np.zeros(hi - lo, dtype=complex)
        for s in (self, other):
            a[s.n0 - lo:s.n0 - lo + len(s.a)] += s.a
            b[s.n0 - lo:s.n0 - lo + len(s.b)] += s.b
        return LogPowerSeries(lo, a, b)

    def __sub__(self, other):
        return self + other.scale(-1)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        pa = np.zeros(r.shape, dtype=complex)
        pb = np.zeros(r.shape, dtype=complex)
        for k in range(len(self.a) - 1, -1, -1):  # Horner in r
            pa = pa * r + self.a[k]
            pb = pb * r + self.b[k]
        if not np.any(self.b):
            return r ** float(self.n0) * pa
        return r ** float(self.n0) * (pa + pb * np.log(r))


def helmholtz_series(k: float, d: int, n_terms: int = N_TERMS) -> LogPowerSeries:
    """Small-r expansion of the outgoing Helmholtz Green's function."""
    if d == 3:
        n = np.arange(n_terms)
        a = np.array([(1j * k) ** m / factorial(m) for m in n]) / (4 * np.pi)
        return LogPowerSeries(-1, a, np.zeros(n_terms, dtype=complex))
    m_max = n_terms // 2
    a = np.zeros(2 * m_max, dtype=complex)
    b = np.zeros(2 * m_max, dtype=complex)
    harmonic = 0.0
    c0 = np.log(k / 2) + EULER_GAMMA
    for m in range(m_max):
        if m > 0:
            harmonic += 1.0 / m
        t = (-1) ** m * (k / 2) ** (2 * m) / factorial(m) ** 2
        b[2 * m] = -t / (2 * np.pi)
        a[2 * m] = 0.25j * t - c0 * t / (2 * np.pi) + harmonic * t / (2 * np.pi)
    return LogPowerSeries(0, a, b)


def helmholtz_derivatives(k: float, d: int, r, order: int):
    """``[g, g', ..., g^(order)]`` of the Helmholtz Green's function (closed form)."""
    r = np.asarray(r, dtype=float)
    if d == 3:
        e = np.exp(1j * k * r) / (4 * np.pi)
        out = []
        for n in range(order + 1):
            s = sum(comb(n, m) * (1j * k) ** (n - m) * (-1) ** m * factorial(m) / r ** (m + 1)
                    for m in range(n + 1))
            out.append(e * s)
        return out
    # (i/4) H0(z), z = k r; track P(1/z) H0 + Q(1/z) H1 with P, Q polynomials in w = 1/z.
    z = k * r
    w = 1.0 / z
    h0, h1 = hankel1(0, z), hankel1(1, z)
    P, Q = np.array([1.0]), np.array([0.0])
    out = []
    for n in range(order + 1):
        val = np.polyval(P[::-1], w) * h0 + np.polyval(Q[::-1], w) * h1
        out.append(0.25j * k ** n * val)
        # d/dz of a polynomial in w: -w^2 dP/dw
        dP = -np.concatenate([[0, 0], np.arange(1, len(P)) * P[1:]]) if len(P) > 1 else np.zeros(1)
        dQ = -np.concatenate([[0, 0], np.arange(1, len(Q)) * Q[1:]]) if len(Q) > 1 else np.zeros(1)
        wQ = np.concatenate([[0], Q])
        size = max(len(dP), len(Q), len(dQ), len(P), len(wQ))
        pad = lambda v: np.pad(v, (0, size - len(v)))
        P, Q = pad(dP) + pad(Q), pad(dQ) - pad(P) - pad(wQ)
    return out


def _scalar_profile(pde, r):
    d, kind = pde.dim, pde.kind
    if kind == "laplace":
        if d == 2:
            return -np.log(r) / (2 * np.pi), -1 / (2 * np.pi * r), 1 / (2 * np.pi * r ** 2)
        return 1 / (4 * np.pi * r), -1 / (4 * np.pi * r ** 2), 2 / (4 * np.pi * r ** 3)
    return tuple(helmholtz_derivatives(pde.k, d, r, 2))


def _elastostatic_profile(pde, r):
    lam, mu = pde.lam, pde.mu
    if pde.dim == 2:
        den = 4 * np.pi * mu * (lam + 2 * mu)
        c1, c2 = (lam + 3 * mu) / den, (lam + mu) / den
        A = (-c1 * np.log(r), -c1 / r, c1 / r ** 2)
        C = (c2 / r ** 2, -2 * c2 / r ** 3, 6 * c2 / r ** 4)
    else:
        den = 8 * np.pi * mu * (lam + 2 * mu)
        c1, c2 = (lam + 3 * mu) / den, (lam + mu) / den
        A = (c1 / r, -c1 / r ** 2, 2 * c1 / r ** 3)
        C = (c2 / r ** 3, -3 * c2 / r ** 4, 12 * c2 / r ** 5)
    return A + C


def _elastodynamic_series(pde):
    d, kT, kL, mu = pde.dim, pde.k_T, pde.k_L, pde.mu
    psi = (helmholtz_series(kT, d) - helmholtz_series(kL, d)).scale(1 / kT ** 2)
    gT = helmholtz_series(kT, d)
    dpsi = psi.derivative()
    A = (gT + dpsi.shift(-1)).scale(1 / mu)
    C = (dpsi.derivative() - dpsi.shift(-1)).shift(-2).scale(1 / mu)
    A1, C1 = A.derivative(), C.derivative()
    return SeriesBundle.from_series((A, A1, A1.derivative(), C, C1, C1.derivative()), SERIES_SWITCH / kT)


@dataclass(frozen=True, eq=False)
class SeriesBundle:
    """Several log-power series on a common exponent range, evaluated together
    as one real matrix product against the powers ``r^n``."""
    n0: int
    coef: np.ndarray  # (4 m, K): real a, imag a, real b, imag b for each series
    count: int

    @classmethod
    def from_series(cls, series, r_max: float, rel_tol: float = 1e-18):
        lo = min(s.n0 for s in series)
        hi = max(s.n0 + len(s.a) for s in series)
        a = np.zeros((len(series), hi - lo), dtype=complex)
        b = np.zeros((len(series), hi - lo), dtype=complex)
        for i, s in enumerate(series):
            a[i, s.n0 - lo:s.n0 - lo + len(s.a)] = s.a
            b[i, s.n0 - lo:s.n0 - lo + len(s.b)] = s.b
        # drop trailing powers that stay negligible for r <= r_max
        size = np.abs(a) + np.abs(b) * max(1.0, abs(np.log(r_max)))
        size = size * r_max ** (lo + np.arange(hi - lo, dtype=float))
        keep = np.nonzero((size > rel_tol * size.max(axis=1, keepdims=True)).any(axis=0))[0]
        K = keep.max() + 1
        coef = np.vstack([a.real[:, :K], a.imag[:, :K], b.real[:, :K], b.imag[:, :K]])
        return cls(lo, coef, len(series))

    def __call__(self, r):
        r = np.asarray(r, dtype=float).ravel()
        K = self.coef.shape[1]
        powers = np.empty((K, r.size))
        powers[0] = r ** float(self.n0)
        for k in range(1, K):
            powers[k] = powers[k - 1] * r
        v = self.coef @ powers
        m = self.count
        logr = np.log(r)
        return [(v[i] + v[2 * m + i] * logr) + 1j * (v[m + i] + v[3 * m + i] * logr) for i in range(m)]


def _elastodynamic_closed(pde, r):
    d, kT, kL, mu = pde.dim, pde.k_T, pde.k_L, pde.mu
    gT = helmholtz_derivatives(kT, d, r, 4)
    gL = helmholtz_derivatives(kL, d, r, 4)
    p1, p2, p3, p4 = ((gT[n] - gL[n]) / kT ** 2 for n in range(1, 5))
    A = (gT[0] + p1 / r) / mu
    A1 = (gT[1] + p2 / r - p1 / r ** 2) / mu
    A2 = (gT[2] + p3 / r - 2 * p2 / r ** 2 + 2 * p1 / r ** 3) / mu
    C = (p2 - p1 / r) / (mu * r ** 2)
    C1 = (p3 / r ** 2 - 3 * p2 / r ** 3 + 3 * p1 / r ** 4) / mu
    C2 = (p4 / r ** 2 - 5 * p3 / r ** 3 + 12 * p2 / r ** 4 - 12 * p1 / r ** 5) / mu
    return A, A1, A2, C, C1, C2


def _elastodynamic_profile(pde, r):
    near = pde.k_T * r < SERIES_SWITCH
    out = [np.empty(r.shape, dtype=complex) for _ in range(6)]
    if np.any(near):
        for o, v in zip(out, pde.series_cache()(r[near])):
            o[near] = v
    if np.any(~near):
        for o, v in zip(out, _elastodynamic_closed(pde, r[~near])):
            o[~near] = v
    return tuple(out)


def radial_profile(pde, r):
    """Scalar: ``(g, g', g'')``.  Vector: ``(A, A', A'', C, C', C'')``."""
    r = np.asarray(r, dtype=float)
    if pde.kind in ("laplace", "helmholtz"):
        return _scalar_profile(pde, r)
    if pde.kind == "elastostatic":
        return _elastostatic_profile(pde, r)
    return _elastodynamic_profile(pde, r)
