"""Free-space Green's functions and their Dirichlet/Neumann traces.

Conventions (``R = x - y``, ``G(x, y) = G(R)`` symmetric and even):

* traction of a vector field: ``t_i = lam div(u) n_i + mu sum_j (d_j u_i + d_i u_j) n_j``,
  which is the same as ``lam div(u) n + 2 mu du/dn + mu n x curl u``;
  for scalar PDEs the trace is the normal derivative;
* ``S``   kernel: ``G(x, y)``;
* ``DL``  kernel (of K):  ``(gamma_{1,y} G(x, y))^T`` with the normal at y;
* ``ADL`` kernel (of K'): ``gamma_{1,x} G(x, y)`` with the normal at x;
* ``HS``  kernel (of T):  ``gamma_{1,x} (gamma_{1,y} G(x, y))^T``.

All evaluators work on paired arrays of points and return ``(n, s, s)``
blocks with ``s`` the block size.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import radial

KINDS = ("laplace", "helmholtz", "elastostatic", "elastodynamic")
KERNELS = ("S", "DL", "ADL", "HS")


class SingularEvaluationError(ValueError):
    """Kernel evaluated at coincident points."""


@dataclass(frozen=True)
class PdeKind:
    """PDE and its physical parameters.  The Helmholtz wavenumber is ``omega / c``."""
    kind: str
    dim: int
    omega: float = 0.0
    c: float = 1.0
    lam: float = 1.0
    mu: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown PDE {self.kind!r}; choose from {KINDS}")
        if self.dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dim}")
        if self.c <= 0 or self.rho <= 0 or self.mu <= 0 or self.lam + 2 * self.mu <= 0:
            raise ValueError("need c > 0, rho > 0, mu > 0 and lam + 2 mu > 0")
        if self.omega < 0 or (self.kind in ("helmholtz", "elastodynamic") and self.omega == 0):
            raise ValueError(f"{self.kind} needs omega > 0 (use the static PDE for omega = 0)")

    @classmethod
    def laplace(cls, dim):
        return cls("laplace", dim)

    @classmethod
    def helmholtz(cls, dim, omega, c=1.0):
        return cls("helmholtz", dim, omega=omega, c=c)

    @classmethod
    def elastostatic(cls, dim, lam, mu):
        return cls("elastostatic", dim, lam=lam, mu=mu)

    @classmethod
    def elastodynamic(cls, dim, lam, mu, rho, omega):
        return cls("elastodynamic", dim, omega=omega, lam=lam, mu=mu, rho=rho)

    @property
    def sigma(self) -> int:
        return 1 if self.kind in ("laplace", "helmholtz") else self.dim

    @property
    def is_vector(self) -> bool:
        return self.sigma > 1

    @property
    def is_complex(self) -> bool:
        return self.kind in ("helmholtz", "elastodynamic")

    @property
    def k(self) -> float:
        return self.omega / self.c

    @property
    def k_L(self) -> float:
        return self.omega * np.sqrt(self.rho / (self.lam + 2 * self.mu))

    @property
    def k_T(self) -> float:
        return self.omega * np.sqrt(self.rho / self.mu)

    def series_cache(self):
        return _elastodynamic_series(self)

    def describe(self) -> dict:
        out = {"pde": self.kind, "dim": self.dim}
        if self.kind == "helmholtz":
            out.update(omega=self.omega, c=self.c)
        if self.is_vector:
            out.update(lam=self.lam, mu=self.mu)
        if self.kind == "elastodynamic":
            out.update(rho=self.rho, omega=self.omega)
        return out


@lru_cache(maxsize=32)
def _elastodynamic_series(pde):
    return radial._elastodynamic_series(pde)


def _unit(R):
    r = np.linalg.norm(R, axis=1)
    if np.any(r == 0):
        raise SingularEvaluationError("kernel evaluated at coincident points")
    return r, R / r[:, None]


def _dot(u, v):
    return np.einsum("ni,ni->n", u, v)


def _tensor(d, diag, terms):
    """``diag I + sum_t c_t u_t v_t^T`` -> ``(n, d, d)``.

    ``u_t``, ``v_t`` are component-major ``(d, n)``; terms sharing the same
    ``v`` are merged first, then each entry is one short sum of products.
    """
    groups = {}
    for c, u, v in terms:
        w = c * u
        if id(v) in groups:
            groups[id(v)][0] = groups[id(v)][0] + w
        else:
            groups[id(v)] = [w, v]
    n = diag.shape[0]
    dtype = np.result_type(diag, *(w for w, _ in groups.values()))
    out = np.empty((d, d, n), dtype=dtype)
    for i in range(d):
        for j in range(d):
            acc = diag.copy() if i == j else np.zeros(n, dtype=dtype)
            for w, v in groups.values():
                acc += w[i] * v[j]
            out[i, j] = acc
    return out.transpose(2, 0, 1)


def _scalar_kernels(pde, R, nx, ny, which):
    r, e = _unit(R)
    g0, g1, g2 = radial.radial_profile(pde, r)
    out = {}
    if "S" in which:
        out["S"] = g0
    if "DL" in which:
        out["DL"] = -g1 * _dot(e, ny)
    if "ADL" in which:
        out["ADL"] = g1 * _dot(e, nx)
    if "HS" in which:
        ex, ey = _dot(e, nx), _dot(e, ny)
        out["HS"] = -(g2 * ex * ey + g1 / r * (_dot(nx, ny) - ex * ey))
    return {k: v[:, None, None] for k, v in out.items()}


def _traction_terms(lam, mu, d, r, e, n, A1, C0, C1):
    """``gamma_{1,x} G`` for the tensor ``A I + C R R^T`` with normal ``n``,
    as ``(diag, terms)`` for :func:`_tensor` (``e``, ``n`` component-major)."""
    en = np.einsum("in,in->n", e, n)
    Cr = C0 * r
    div = A1 + C1 * r ** 2 + (d + 1) * C0 * r
    diag = mu * (A1 + Cr) * en
    terms = [(lam * div + 2 * mu * Cr, n, e), (2 * mu * C1 * r ** 2 * en, e, e), (mu * (Cr + A1), e, n)]
    return diag, terms


def _vector_kernels(pde, R, nx, ny, which):
    d, lam, mu = pde.dim, pde.lam, pde.mu
    r, e = _unit(R)
    A0, A1, A2, C0, C1, C2 = radial.radial_profile(pde, r)
    e = np.ascontiguousarray(e.T)
    nx = None if nx is None else np.ascontiguousarray(nx.T)
    ny = None if ny is None else np.ascontiguousarray(ny.T)
    out = {}
    if "S" in which:
        out["S"] = _tensor(d, A0, [(C0 * r ** 2, e, e)])
    if "ADL" in which:
        out["ADL"] = _tensor(d, *_traction_terms(lam, mu, d, r, e, nx, A1, C0, C1))
    if "DL" in which:
        diag, terms = _traction_terms(lam, mu, d, r, e, ny, A1, C0, C1)
        out["DL"] = _tensor(d, -diag, [(-c, v, u) for c, u, v in terms])
    if "HS" in which:
        a1, a2 = A2 - A1 / r, A1 / r
        c1, c2, c3, c4 = r ** 2 * C2 - r * C1, r * C1, r * C1, C0
        k1 = a1 + c1 + c2 + c3 * (d + 2)
        k2 = a2 + c3 + c4 * (d + 1)
        dot = lambda u, v: np.einsum("in,in->n", u, v)
        ex, ey, nxy = dot(e, nx), dot(e, ny), dot(nx, ny)
        m2 = mu ** 2
        # fourth-order part, collected on the outer-product basis
        diag = -m2 * ((a1 + 2 * c3 + c2) * ex * ey + 2 * (a2 + c4) * nxy)
        terms = [
            (m2 * (4 * c1 * ex * ey + (c2 + 2 * c3 + a1) * nxy), e, e),
            (m2 * 4 * c3 * ex, e, ny),
            (m2 * (2 * c3 + a1 + c2) * ex, ny, e),
            (m2 * (2 * c3 + c2 + a1) * ey, e, nx),
            (m2 * 4 * c3 * ey, nx, e),
            (m2 * 2 * (c4 + a2), ny, nx),
            (m2 * 4 * c4 + lam ** 2 * (k1 + d * k2) + 4 * mu * lam * k2, nx, ny),
            (2 * mu * lam * k1 * ey, nx, e),
            (2 * mu * lam * k1 * ex, e, ny),
        ]
        out["HS"] = _tensor(d, diag, [(-c, u, v) for c, u, v in terms])
    return out


def kernel_blocks(pde: PdeKind, x, y, nx=None, ny=None, which=KERNELS) -> dict:
    """Kernel blocks for paired points ``x[i], y[i]`` -> ``{name: (n, s, s)}``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    n = len(x)
    if nx is not None:
        nx = np.broadcast_to(np.atleast_2d(np.asarray(nx, dtype=float)), (n, pde.dim))
    if ny is not None:
        ny = np.broadcast_to(np.atleast_2d(np.asarray(ny, dtype=float)), (n, pde.dim))
    if ("ADL" in which or "HS" in which) and nx is None:
        raise ValueError("normal at x required")
    if ("DL" in which or "HS" in which) and ny is None:
        raise ValueError("normal at y required")
    R = x - y
    if pde.is_vector:
        return _vector_kernels(pde, R, nx, ny, which)
    return _scalar_kernels(pde, R, nx, ny, which)


def green(pde: PdeKind, r, rp):
    """``G(r, r')`` as an ``s x s`` block (a stack of blocks for point arrays)."""
    out = kernel_blocks(pde, r, rp, which=("S",))["S"]
    return out[0] if np.ndim(r) == 1 and np.ndim(rp) == 1 else out


def green_dl(pde: PdeKind, x, y, n_y):
    out = kernel_blocks(pde, x, y, ny=n_y, which=("DL",))["DL"]
    return out[0] if np.ndim(x) == 1 and np.ndim(y) == 1 else out


def green_adl(pde: PdeKind, x, y, n_x):
    out = kernel_blocks(pde, x, y, nx=n_x, which=("ADL",))["ADL"]
    return out[0] if np.ndim(x) == 1 and np.ndim(y) == 1 else out


def green_hs(pde: PdeKind, x, y, n_x, n_y):
    out = kernel_blocks(pde, x, y, nx=n_x, ny=n_y, which=("HS",))["HS"]
    return out[0] if np.ndim(x) == 1 and np.ndim(y) == 1 else out


def traction(pde: PdeKind, grad, n):
    """Neumann trace from a gradient ``grad[..., i, j] = d_j u_i`` (scalar: ``(..., 1, d)``)."""
    if not pde.is_vector:
        return np.einsum("...ij,...j->...i", grad, n)
    div = np.trace(grad, axis1=-2, axis2=-1)
    sym = grad + np.swapaxes(grad, -1, -2)
    return pde.lam * div[..., None] * n + pde.mu * np.einsum("...ij,...j->...i", sym, n)


def kernel_matrices(pde: PdeKind, x, y, nx=None, ny=None, which=KERNELS) -> dict:
    """Kernel matrices over all pairs ``(x[i], y[j])``, flattened so that
    block (i, j) occupies rows ``s*i:s*i+s`` and columns ``s*j:s*j+s``."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    nr, nc, s = len(x), len(y), pde.sigma
    xi = np.repeat(x, nc, axis=0)
    yj = np.tile(y, (nr, 1))
    nxi = None if nx is None else np.repeat(np.atleast_2d(nx), nc, axis=0)
    nyj = None if ny is None else np.tile(np.atleast_2d(ny), (nr, 1))
    blocks = kernel_blocks(pde, xi, yj, nxi, nyj, which)
    return {k: v.reshape(nr, nc, s, s).transpose(0, 2, 1, 3).reshape(nr * s, nc * s)
            for k, v in blocks.items()}
