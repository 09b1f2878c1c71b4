"""Regularized Nystrom discretization of the boundary integral operators.

Two operator families are handled::

    V_{alpha,beta} = alpha K - beta S       (K = V_{1,0},  S = V_{0,-1})
    W_{alpha,beta} = alpha T - beta K'      (T = W_{1,0},  K' = W_{0,-1})

Each discrete operator is split into a far part, i.e. plain quadrature
with every self-patch block set to zero, and a correction
``Theta[i, :] @ c_{m_i}`` driven by the patch interpolant coefficients.
``Theta`` does not depend on ``(alpha, beta)``::

    Theta_V = -B/2 - K_far B + S_far C
    Theta_W = -C/2 - T_far B + K'_far C

with ``B = G(y_i, z_l)`` and ``C = gamma_{1,x} G(y_i, z_l)``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import solve_triangular
from scipy.spatial import cKDTree

from .geometry import GlobalQuadrature
from .interpolant import (PatchInterpolant, SourceSet, assemble_interpolation_system, eval_interpolant,
                          factorize, solve_coefficients, solve_stacked, source_traces, sources_for)
from .kernels import PdeKind, kernel_blocks, kernel_matrices

log = logging.getLogger(__name__)

# kernels (applied to gamma_0-type data, applied to gamma_1-type data) of each family
FAMILY_KERNELS = {"V": ("DL", "S"), "W": ("HS", "ADL")}
DENSE_LIMIT = 6000  # about 0.6 GB per complex far matrix at the limit
CHUNK_ENTRIES = 3_000_000


def _check_family(family):
    if family not in FAMILY_KERNELS:
        raise ValueError(f"operator family must be 'V' or 'W', got {family!r}")


def _dtype(pde):
    return np.complex128 if pde.is_complex else np.float64


def _row_chunks(quad: GlobalQuadrature, sigma: int, chunk_entries: int = CHUNK_ENTRIES):
    step = max(1, chunk_entries // (quad.N * sigma * sigma))
    for i0 in range(0, quad.N, step):
        yield np.arange(i0, min(quad.N, i0 + step))


def far_row_block(pde: PdeKind, quad: GlobalQuadrature, rows, names) -> dict:
    """Weighted far-part rows ``{name: (len(rows) s, N s)}``; self-patch blocks are zero."""
    s, N, R = pde.sigma, quad.N, len(rows)
    near = (quad.patch_of[rows][:, None] == quad.patch_of[None, :]).ravel()
    x = np.repeat(quad.nodes[rows], N, axis=0)
    y = np.tile(quad.nodes, (R, 1))
    # self-patch pairs get a harmless stand-in source point and zero weight
    y[near] = x[near] + 1.0
    w = np.tile(quad.weights, R)
    w[near] = 0.0
    blocks = kernel_blocks(pde, x, y, np.repeat(quad.normals[rows], N, axis=0), np.tile(quad.normals, (R, 1)),
                           names)
    out = {}
    for name in names:
        blk = (blocks[name] * w[:, None, None]).reshape(R, N, s, s)
        out[name] = blk.transpose(0, 2, 1, 3).reshape(R * s, N * s)
    return out


def far_products(pde: PdeKind, quad: GlobalQuadrature, requests: dict) -> dict:
    """Matrix-free ``{name: K_far @ X}`` for ``requests = {name: X}``, one sweep over rows."""
    s = pde.sigma
    names = tuple(requests)
    out = {}
    for name, X in requests.items():
        X = np.asarray(X)
        out[name] = np.zeros((quad.N * s,) + X.shape[1:], dtype=np.result_type(X, _dtype(pde)))
    for rows in _row_chunks(quad, s):
        blk = far_row_block(pde, quad, rows, names)
        sl = slice(rows[0] * s, (rows[-1] + 1) * s)
        for name in names:
            out[name][sl] = blk[name] @ requests[name]
    return out


def far_dense(pde: PdeKind, quad: GlobalQuadrature, names) -> dict:
    """Dense weighted far matrices ``{name: (N s, N s)}``."""
    s, n = pde.sigma, quad.N * pde.sigma
    out = {name: np.empty((n, n), dtype=_dtype(pde)) for name in names}
    for rows in _row_chunks(quad, s):
        blk = far_row_block(pde, quad, rows, names)
        sl = slice(rows[0] * s, (rows[-1] + 1) * s)
        for name in names:
            out[name][sl] = blk[name]
    return out


@dataclass(eq=False)
class FarPart:
    """Far part of ``V_{alpha,beta}`` or ``W_{alpha,beta}``, dense or matrix-free."""
    pde: PdeKind
    quad: GlobalQuadrature
    family: str
    alpha: complex
    beta: complex
    matrices: dict = None  # dense mode: {kernel name: matrix}

    @property
    def coefficients(self) -> dict:
        k0, k1 = FAMILY_KERNELS[self.family]
        return {k0: self.alpha, k1: -self.beta}

    @property
    def dense(self) -> bool:
        return self.matrices is not None

    def apply(self, phi):
        coef = {k: v for k, v in self.coefficients.items() if v != 0}
        if not coef:
            return np.zeros_like(np.asarray(phi), dtype=np.result_type(phi, _dtype(self.pde)))
        if self.dense:
            return sum(c * (self.matrices[k] @ phi) for k, c in coef.items())
        prods = far_products(self.pde, self.quad, {k: phi for k in coef})
        return sum(c * prods[k] for k, c in coef.items())

    def matrix(self):
        if not self.dense:
            raise RuntimeError("far part is matrix-free")
        n = self.quad.N * self.pde.sigma
        dtype = np.result_type(_dtype(self.pde), np.asarray(self.alpha), np.asarray(self.beta))
        out = np.zeros((n, n), dtype=dtype)
        for k, c in self.coefficients.items():
            if c != 0:
                out += c * self.matrices[k]
        return out


def resolve_mode(pde: PdeKind, quad: GlobalQuadrature, mode: str = "auto") -> str:
    if mode == "auto":
        return "dense" if quad.N * pde.sigma <= DENSE_LIMIT else "matrix-free"
    if mode not in ("dense", "matrix-free"):
        raise ValueError(f"mode must be dense, matrix-free or auto, got {mode!r}")
    return mode


def assemble_far(pde: PdeKind, quad: GlobalQuadrature, family: str, alpha, beta, mode: str = "auto") -> FarPart:
    _check_family(family)
    mode = resolve_mode(pde, quad, mode)
    mats = far_dense(pde, quad, FAMILY_KERNELS[family]) if mode == "dense" else None
    return FarPart(pde, quad, family, alpha, beta, mats)


# -- interpolation context shared by all operators on one quadrature --------

@dataclass(eq=False)
class DimContext:
    """Sources, per-patch factorizations and source traces ``B``, ``C``."""
    pde: PdeKind
    quad: GlobalQuadrature
    sources: SourceSet
    systems: list
    B: np.ndarray
    C: np.ndarray

    @classmethod
    def build(cls, pde: PdeKind, quad: GlobalQuadrature, t: float = 5.0, L: int = 0, sources=None):
        sources = sources if sources is not None else sources_for(quad, t, L)
        B, C = source_traces(pde, quad.nodes, quad.normals, sources)
        s = pde.sigma
        systems = []
        for m in range(quad.n_patches):
            idx = quad.patch_indices(m)
            rows = (idx[:, None] * s + np.arange(s)).ravel()
            M = np.vstack([B[rows], C[rows]])
            systems.append(factorize(M, s, len(idx), m))
        return cls(pde, quad, sources, systems, B, C)

    def rows(self, m: int) -> np.ndarray:
        idx = self.quad.patch_indices(m)
        return (idx[:, None] * self.pde.sigma + np.arange(self.pde.sigma)).ravel()

    def coefficients(self, phi, alpha, beta) -> list:
        """Per-patch interpolant coefficients for the density ``phi`` (flat, length N s)."""
        out = []
        for m, sysm in enumerate(self.systems):
            b = phi[self.rows(m)]
            out.append(solve_stacked(sysm, np.concatenate([alpha * b, beta * b])))
        return out


def precompute_theta(ctx: DimContext, family: str, far: FarPart = None) -> np.ndarray:
    """``Theta`` (``N s x L s``) for the family; uses dense far matrices when available."""
    _check_family(family)
    k0, k1 = FAMILY_KERNELS[family]
    free = ctx.B if family == "V" else ctx.C
    if far is not None and far.dense:
        p0, p1 = far.matrices[k0] @ ctx.B, far.matrices[k1] @ ctx.C
    else:
        prods = far_products(ctx.pde, ctx.quad, {k0: ctx.B, k1: ctx.C})
        p0, p1 = prods[k0], prods[k1]
    return -0.5 * free - p0 + p1


@dataclass(eq=False)
class RegularizedOperator:
    ctx: DimContext
    family: str
    alpha: complex
    beta: complex
    far: FarPart
    theta: np.ndarray
    _sparse: object = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.ctx.quad.N * self.ctx.pde.sigma

    def correction(self, phi):
        out = np.zeros(self.size, dtype=np.result_type(phi, self.theta))
        for m, c in enumerate(self.ctx.coefficients(phi, self.alpha, self.beta)):
            rows = self.ctx.rows(m)
            out[rows] = self.theta[rows] @ c
        return out

    def apply(self, phi):
        phi = np.asarray(phi).reshape(-1)
        if phi.size != self.size:
            raise ValueError(f"density has length {phi.size}, operator expects {self.size}")
        return self.far.apply(phi) + self.correction(phi)

    __call__ = apply

    def correction_sparse(self):
        if self._sparse is None:
            self._sparse = assemble_correction_sparse(self)
        return self._sparse

    def matrix(self):
        """Dense system matrix (far + sparse correction); dense mode only."""
        out = self.far.matrix()
        out = out.astype(np.result_type(out, self.theta), copy=False)
        sp = self.correction_sparse().tocoo()
        np.add.at(out, (sp.row, sp.col), sp.data)
        return out


def regularized_operator(pde: PdeKind, quad: GlobalQuadrature, family: str, alpha, beta,
                         mode: str = "auto", ctx: DimContext = None, t: float = 5.0, L: int = 0,
                         far: FarPart = None) -> RegularizedOperator:
    _check_family(family)
    ctx = ctx if ctx is not None else DimContext.build(pde, quad, t, L)
    far = far if far is not None else assemble_far(pde, quad, family, alpha, beta, mode)
    theta = precompute_theta(ctx, family, far)
    return RegularizedOperator(ctx, family, alpha, beta, far, theta)


def assemble_correction_sparse(op: RegularizedOperator):
    """Block-diagonal correction ``((Theta_m Q_1^*) L^{-1}) D_{alpha,beta}`` per patch."""
    blocks = []
    for m, sysm in enumerate(op.ctx.systems):
        rows = op.ctx.rows(m)
        X = op.theta[rows] @ sysm.q1.conj().T
        Z = solve_triangular(sysm.lower, X.T, trans="T", lower=True, check_finite=False).T
        n = len(rows)
        blocks.append(op.alpha * Z[:, :n] + op.beta * Z[:, n:])
    return sparse.block_diag(blocks, format="csr")


def apply_naive(pde: PdeKind, quad: GlobalQuadrature, sources: SourceSet, alpha, beta, family: str, phi):
    """Node-by-node regularized quadrature: each node builds its patch interpolant and
    sums the interpolant-corrected integrand over all other patches."""
    _check_family(family)
    s = pde.sigma
    phi = np.asarray(phi).reshape(quad.N, s)
    out = np.zeros((quad.N, s), dtype=np.result_type(phi, _dtype(pde), complex(alpha), complex(beta)))
    interps = {}
    k0, k1 = FAMILY_KERNELS[family]
    for i in range(quad.N):
        m = quad.patch_of[i]
        if m not in interps:
            idx = quad.patch_indices(m)
            system = assemble_interpolation_system(pde, quad.nodes[idx], quad.normals[idx], sources, m)
            interps[m] = solve_coefficients(system, phi[idx], alpha, beta, pde, sources, check=False)
        interp = interps[m]
        J = quad.complement_indices(m)
        yi, ni = quad.nodes[i], quad.normals[i]
        g0 = eval_interpolant(interp, quad.nodes[J], "gamma0")
        g1 = eval_interpolant(interp, quad.nodes[J], "gamma1", quad.normals[J])
        acc = np.zeros(s, dtype=out.dtype)
        if len(J):
            kb = kernel_blocks(pde, yi, quad.nodes[J], ni, quad.normals[J], (k0, k1))
            d0 = alpha * phi[J] - g0
            d1 = beta * phi[J] - g1
            acc = np.einsum("j,jab,jb->a", quad.weights[J], kb[k0], d0) \
                - np.einsum("j,jab,jb->a", quad.weights[J], kb[k1], d1)
        if family == "V":
            own = eval_interpolant(interp, yi, "gamma0")[0]
        else:
            own = eval_interpolant(interp, yi, "gamma1", ni)[0]
        out[i] = acc - 0.5 * own
    return out.reshape(-1)


# -- layer potentials off the surface ---------------------------------------

class OnSurfaceTargetError(ValueError):
    """Potential requested at a quadrature node; use the boundary operators instead."""


def evaluate_potential(pde: PdeKind, quad: GlobalQuadrature, phi, psi, targets, near_regularize: bool = True,
                       near_threshold: float = 0.1, ctx: DimContext = None, chunk: int = 256):
    """``u(r) = S[psi](r) - D[phi](r)`` at off-surface targets.

    Targets closer than ``near_threshold`` to the nearest node are regularized
    with the interpolant of that node's patch matching ``(phi, psi)``.
    """
    s = pde.sigma
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    phi = np.asarray(phi).reshape(-1)
    psi = np.asarray(psi).reshape(-1)
    dist, near_node = cKDTree(quad.nodes).query(targets)
    if np.any(dist == 0):
        raise OnSurfaceTargetError("target coincides with a quadrature node; use the on-surface operators")
    dtype = np.result_type(phi, psi, _dtype(pde))
    out = np.zeros((len(targets), s), dtype=dtype)
    wrep = np.repeat(quad.weights, s)

    def direct(tg, dphi, dpsi):
        mats = kernel_matrices(pde, tg, quad.nodes, ny=quad.normals, which=("S", "DL"))
        return (mats["S"] @ (wrep * dpsi) - mats["DL"] @ (wrep * dphi)).reshape(len(tg), s)

    near = (dist < near_threshold) if near_regularize else np.zeros(len(targets), dtype=bool)
    far_idx = np.nonzero(~near)[0]
    for k in range(0, len(far_idx), chunk):
        sel = far_idx[k:k + chunk]
        out[sel] = direct(targets[sel], phi, psi)
    if np.any(near):
        ctx = ctx if ctx is not None else DimContext.build(pde, quad)
        patches = quad.patch_of[near_node]
        for m in np.unique(patches[near]):
            sel = np.nonzero(near & (patches == m))[0]
            rows = ctx.rows(m)
            c = solve_stacked(ctx.systems[m], np.concatenate([phi[rows], psi[rows]]))
            g0, g1 = ctx.B @ c, ctx.C @ c
            interp = PatchInterpolant(c, ctx.sources, pde, 0.0)
            val = direct(targets[sel], phi - g0, psi - g1)
            j = near_node[sel]
            inside = np.einsum("ni,ni->n", targets[sel] - quad.nodes[j], quad.normals[j]) < 0
            if np.any(inside):
                val[inside] += eval_interpolant(interp, targets[sel][inside])
            out[sel] = val
    return out
