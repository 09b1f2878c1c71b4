"""Boundary integral formulations, GMRES and error metrics.

Formulations (``phi`` is the unknown surface density):

* CFIE exterior Dirichlet:   ``phi/2 + V_{1, i k} phi = f``, field ``u = (D - i k S) phi``
* direct exterior Neumann:   ``-phi/2 + V_{1,0} phi = V_{0,-1} g``, ``phi`` the Dirichlet trace
* elastodynamic Neumann:     ``(i w / 2) phi + W_{1, i w} phi = h``, field ``u = (D - i w S) phi``
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

from .geometry import GlobalQuadrature
from .kernels import PdeKind, kernel_blocks, traction
from .operators import (FAMILY_KERNELS, DimContext, RegularizedOperator, evaluate_potential, far_products,
                        regularized_operator)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """GMRES failed to reach the requested tolerance."""

    def __init__(self, report):
        super().__init__(f"GMRES stopped after {report.iterations} iterations at "
                         f"relative residual {report.residual:.3e}")
        self.report = report


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    wall_time: float = 0.0
    history: list = field(default_factory=list)
    config: dict = field(default_factory=dict)


@dataclass
class LinearMap:
    """``x -> shift * x + apply(x)`` on vectors of length ``size``."""
    apply: object
    size: int
    shift: complex = 0.0
    diagonal: np.ndarray = None  # diagonal of ``apply`` (without the shift), if known

    def __call__(self, x):
        return self.shift * x + self.apply(x)


def gmres(A, b, tol: float = 1e-10, restart: int = 200, max_iter: int = 1000, precond: str = "none",
          x0=None, raise_on_failure: bool = False):
    """Restarted GMRES with modified Gram-Schmidt and one reorthogonalization pass.

    ``A`` is a :class:`LinearMap` or any callable.  The diagonal
    preconditioner is applied on the right, so the monitored residual is
    the true relative residual ``|b - A x| / |b|``.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=complex)
    n = b.size
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n, dtype=complex), SolveReport(0, 0.0, True, time.perf_counter() - t0)
    if precond == "diagonal":
        if not isinstance(A, LinearMap) or A.diagonal is None:
            raise ValueError("diagonal preconditioning needs a LinearMap with a known diagonal")
        dinv = 1.0 / (A.shift + A.diagonal)
    elif precond == "none":
        dinv = None
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")

    def op(v):
        return A(dinv * v if dinv is not None else v)

    y_total = np.zeros(n, dtype=complex)  # iterate in preconditioned variables
    if x0 is not None:
        y_total = np.asarray(x0, dtype=complex) / (dinv if dinv is not None else 1.0)
    history, its = [], 0
    r = b - op(y_total) if x0 is not None else b.copy()
    res = np.linalg.norm(r) / bnorm
    history.append(res)
    while res > tol and its < max_iter:
        m = min(restart, max_iter - its)
        V = np.zeros((m + 1, n), dtype=complex)
        H = np.zeros((m + 1, m), dtype=complex)
        cs = np.zeros(m, dtype=complex)
        sn = np.zeros(m, dtype=complex)
        beta = np.linalg.norm(r)
        V[0] = r / beta
        g = np.zeros(m + 1, dtype=complex)
        g[0] = beta
        k_used = 0
        for k in range(m):
            w = op(V[k])
            for _ in range(2):
                for j in range(k + 1):
                    h = np.vdot(V[j], w)
                    H[j, k] += h
                    w = w - h * V[j]
            H[k + 1, k] = np.linalg.norm(w)
            breakdown = H[k + 1, k] <= 1e-14 * np.abs(H[:k + 2, k]).max()
            if not breakdown:
                V[k + 1] = w / H[k + 1, k]
            for j in range(k):
                tmp = np.conj(cs[j]) * H[j, k] + np.conj(sn[j]) * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = tmp
            den = np.hypot(abs(H[k, k]), abs(H[k + 1, k]))
            cs[k] = H[k, k] / den if den else 1.0
            sn[k] = H[k + 1, k] / den if den else 0.0
            H[k, k] = np.conj(cs[k]) * H[k, k] + np.conj(sn[k]) * H[k + 1, k]
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = np.conj(cs[k]) * g[k]
            its += 1
            k_used = k + 1
            res = abs(g[k + 1]) / bnorm
            history.append(res)
            if res <= tol or breakdown:
                break
        yk = np.linalg.solve(np.triu(H[:k_used, :k_used]), g[:k_used])
        y_total = y_total + V[:k_used].T @ yk
        r = b - op(y_total)
        res = np.linalg.norm(r) / bnorm
        if k_used < m and res > tol and breakdown:
            log.warning("GMRES breakdown with residual %.2e", res)
            break
    x = dinv * y_total if dinv is not None else y_total
    report = SolveReport(its, float(res), bool(res <= tol), time.perf_counter() - t0, history)
    if raise_on_failure and not report.converged:
        raise SolverError(report)
    return x, report


# -- formulations -------------------------------------------------------------

@dataclass
class SystemConfig:
    tol: float = 1e-10
    restart: int = 200
    max_iter: int = 1000
    precond: str = "none"
    mode: str = "auto"
    t: float = 5.0
    L: int = 0


def _as_map(op: RegularizedOperator, shift, use_matrix: bool):
    diag = np.asarray(op.correction_sparse().diagonal())
    if use_matrix and op.far.dense:
        mat = op.matrix()
        return LinearMap(lambda x: mat @ x, op.size, shift, diag), mat
    return LinearMap(op.apply, op.size, shift, diag), None


def _report_config(pde, quad, ctx, cfg):
    return {**pde.describe(), "N": quad.N, "M": quad.n_patches, "L": ctx.sources.L, "t": ctx.sources.t,
            "tol": cfg.tol, "restart": cfg.restart, "precond": cfg.precond}


def solve_cfie_dirichlet(pde: PdeKind, quad: GlobalQuadrature, f, cfg: SystemConfig = SystemConfig(),
                         ctx: DimContext = None):
    """Density of ``u = (D - i k S) phi`` with Dirichlet trace ``f``.  Returns ``(phi, report, op)``."""
    if pde.kind != "helmholtz":
        raise ValueError("CFIE is formulated for the Helmholtz equation")
    ctx = ctx if ctx is not None else DimContext.build(pde, quad, cfg.t, cfg.L)
    op = regularized_operator(pde, quad, "V", 1.0, 1j * pde.k, cfg.mode, ctx)
    A, _ = _as_map(op, 0.5, True)
    phi, rep = gmres(A, np.asarray(f).reshape(-1), cfg.tol, cfg.restart, cfg.max_iter, cfg.precond)
    rep.config = _report_config(pde, quad, ctx, cfg)
    return phi, rep, op


def solve_direct_neumann(pde: PdeKind, quad: GlobalQuadrature, g, cfg: SystemConfig = SystemConfig(),
                         ctx: DimContext = None):
    """Dirichlet trace of the exterior field with Neumann trace ``g``.  Returns ``(phi, report)``."""
    if pde.kind == "laplace":
        log.warning("Laplace Neumann problems may be singular; check the solution")
    ctx = ctx if ctx is not None else DimContext.build(pde, quad, cfg.t, cfg.L)
    K = regularized_operator(pde, quad, "V", 1.0, 0.0, cfg.mode, ctx)
    S = with_coefficients(K, 0.0, -1.0)
    rhs = S.apply(np.asarray(g).reshape(-1))
    A, _ = _as_map(K, -0.5, True)
    phi, rep = gmres(A, rhs, cfg.tol, cfg.restart, cfg.max_iter, cfg.precond)
    rep.config = _report_config(pde, quad, ctx, cfg)
    return phi, rep


def solve_elastodynamic_neumann(pde: PdeKind, quad: GlobalQuadrature, h, cfg: SystemConfig = SystemConfig(),
                                ctx: DimContext = None):
    """Density of ``u = (D - i w S) phi`` with traction ``h``.  Returns ``(phi, report, op)``."""
    if pde.kind != "elastodynamic":
        raise ValueError("this formulation is for the elastodynamic equation")
    ctx = ctx if ctx is not None else DimContext.build(pde, quad, cfg.t, cfg.L)
    op = regularized_operator(pde, quad, "W", 1.0, 1j * pde.omega, cfg.mode, ctx)
    A, _ = _as_map(op, 0.5j * pde.omega, True)
    phi, rep = gmres(A, np.asarray(h).reshape(-1), cfg.tol, cfg.restart, cfg.max_iter, cfg.precond)
    rep.config = _report_config(pde, quad, ctx, cfg)
    return phi, rep, op


def combined_field(pde: PdeKind, quad: GlobalQuadrature, phi, targets, eta, near_regularize=False,
                   near_threshold=0.1, ctx=None):
    """``(D - i eta S) phi`` at off-surface targets."""
    phi = np.asarray(phi).reshape(-1)
    return evaluate_potential(pde, quad, -phi, -1j * eta * phi, targets, near_regularize, near_threshold, ctx)


def direct_neumann_field(pde: PdeKind, quad: GlobalQuadrature, phi, g, targets, near_regularize=False,
                         near_threshold=0.1, ctx=None):
    """Exterior field ``D phi - S g`` from the Cauchy data of the direct formulation."""
    phi, g = np.asarray(phi).reshape(-1), np.asarray(g).reshape(-1)
    return evaluate_potential(pde, quad, -phi, -g, targets, near_regularize, near_threshold, ctx)


# -- reference solutions and error metrics -------------------------------------

@dataclass(frozen=True)
class PointSource:
    """``u(r) = G(r, x_s) q``; ``q`` is the polarization (ignored for scalar PDEs)."""
    pde: PdeKind
    x_s: np.ndarray
    q: np.ndarray = None

    def _q(self):
        if not self.pde.is_vector:
            return np.ones(1)
        return np.asarray(self.q if self.q is not None else np.arange(1, self.pde.dim + 1), dtype=float)

    def value(self, r):
        S = kernel_blocks(self.pde, np.atleast_2d(r), self.x_s, which=("S",))["S"]
        return S @ self._q()

    def traction(self, r, n):
        A = kernel_blocks(self.pde, np.atleast_2d(r), self.x_s, nx=n, which=("ADL",))["ADL"]
        return A @ self._q()


def greens_identity_errors(pde: PdeKind, quad: GlobalQuadrature, source: PointSource, ctx: DimContext = None,
                           t: float = 5.0, L: int = 0, pointwise: bool = False):
    """``(E1, E2)``: max-norm errors of ``2(S v - K u)`` against ``u`` and of
    ``2(K' v - T u)`` against ``v``, for the traces ``u, v`` of an interior solution.

    Each family needs one sweep over the far part: the source traces that
    build ``Theta`` and the two densities are multiplied together.
    With ``pointwise`` the nodewise relative errors are returned instead.
    """
    ctx = ctx if ctx is not None else DimContext.build(pde, quad, t, L)
    u = source.value(quad.nodes).reshape(-1)
    v = source.traction(quad.nodes, quad.normals).reshape(-1)
    out = []
    for family, free, ref in (("V", ctx.B, u), ("W", ctx.C, v)):
        k0, k1 = FAMILY_KERNELS[family]
        ncol = ctx.B.shape[1]
        prods = far_products(pde, quad, {k0: np.column_stack([ctx.B, -u]), k1: np.column_stack([ctx.C, v])})
        theta = -0.5 * free - prods[k0][:, :ncol] + prods[k1][:, :ncol]
        far = prods[k0][:, ncol] + prods[k1][:, ncol]
        minus_first = RegularizedOperator(ctx, family, 1.0, 0.0, None, theta).correction(u)
        second = RegularizedOperator(ctx, family, 0.0, -1.0, None, theta).correction(v)
        approx = 2 * (far + second - minus_first)
        err = np.abs(approx - ref) / np.abs(ref).max()
        out.append(err if pointwise else float(err.max()))
    return tuple(out)


def with_coefficients(op: RegularizedOperator, alpha, beta) -> RegularizedOperator:
    """Same family, quadrature and ``Theta``; new ``(alpha, beta)``."""
    far = op.far.__class__(op.far.pde, op.far.quad, op.family, alpha, beta, op.far.matrices)
    return RegularizedOperator(op.ctx, op.family, alpha, beta, far, op.theta)


def far_field_targets(dim: int, n: int = 100, radius: float = 5.0):
    """``n`` deterministic points on the circle/sphere of ``radius`` about the origin."""
    if dim == 2:
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        return radius * np.column_stack([np.cos(th), np.sin(th)])
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + np.sqrt(5)) * k
    rho = np.sqrt(1 - z ** 2)
    return radius * np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def far_field_error(u_numeric, u_ref) -> float:
    """Max-norm relative error."""
    u_numeric, u_ref = np.asarray(u_numeric), np.asarray(u_ref)
    return float(np.abs(u_numeric - u_ref).max() / np.abs(u_ref).max())


@dataclass(frozen=True)
class SeriesSolution:
    """Sound-soft unit circle/sphere hit by the plane wave ``exp(i k x_1)``."""
    kind: str
    k: float
    order: int
    a: float = 1.0

    def incident(self, r):
        r = np.atleast_2d(r)
        return np.exp(1j * self.k * r[:, 0])

    def scattered(self, r):
        r = np.atleast_2d(r)
        rad = np.linalg.norm(r, axis=1)
        cos_t = r[:, 0] / rad
        ka, kr = self.k * self.a, self.k * rad
        n = np.arange(self.order + 1)
        if self.kind == "circle-series":
            theta = np.arctan2(r[:, 1], r[:, 0])
            eps = np.where(n == 0, 1.0, 2.0)
            coef = -eps * 1j ** n * sp.jv(n, ka) / sp.hankel1(n, ka)
            return (sp.hankel1(n[None, :], kr[:, None]) * np.cos(n[None, :] * theta[:, None])) @ coef
        hn = lambda m, z: sp.spherical_jn(m, z) + 1j * sp.spherical_yn(m, z)
        coef = -(2 * n + 1) * 1j ** n * sp.spherical_jn(n, ka) / hn(n, ka)
        return (hn(n[None, :], kr[:, None]) * sp.eval_legendre(n[None, :], cos_t[:, None])) @ coef


def reference_series(kind: str, k: float, a: float = 1.0, tail: float = 1e-12) -> SeriesSolution:
    """Truncated series for plane-wave scattering by a sound-soft circle or sphere.

    The order is the last index whose coefficient exceeds ``tail * 1e-4``; the
    tail is then below ``tail`` for all radii ``r >= a``.
    """
    if kind not in ("circle-series", "sphere-series"):
        raise ValueError(f"unknown series {kind!r}")
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    ka = k * a
    nmax = int(ka + 40 + 4 * ka ** (1 / 3))
    n = np.arange(nmax + 1)
    mag = np.abs(sp.jv(n, ka)) if kind == "circle-series" else np.abs(sp.spherical_jn(n, ka)) * (2 * n + 1)
    small = np.nonzero(mag > tail * 1e-4)[0]
    order = int(small.max()) + 2
    if order >= nmax:
        raise ValueError("series truncation did not converge")
    return SeriesSolution(kind, k, order, a)


def spectrum(matrix, budget: int = 4000):
    """All eigenvalues of a small dense system matrix."""
    matrix = np.asarray(matrix)
    if matrix.shape[0] > budget:
        raise ValueError(f"matrix of size {matrix.shape[0]} exceeds the dense eigenvalue budget {budget}")
    return np.linalg.eigvals(matrix)


def plane_p_wave(pde: PdeKind, direction):
    """Longitudinal plane wave ``d exp(i k_L d.x)`` with its traction, as callables."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    kL = pde.k_L

    def value(r):
        ph = np.exp(1j * kL * np.atleast_2d(r) @ d)
        return ph[:, None] * d

    def trac(r, n):
        ph = np.exp(1j * kL * np.atleast_2d(r) @ d)
        grad = 1j * kL * ph[:, None, None] * np.outer(d, d)
        return traction(pde, grad, n)

    return value, trac
