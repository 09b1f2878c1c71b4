"""Collocation density interpolant built from exterior point sources.

For every patch ``m`` the interpolant is ``Phi_m(r) = sum_l G(r, z_l) c_{m,l}``,
with coefficients chosen so that ``gamma_0 Phi_m = alpha phi`` and
``gamma_1 Phi_m = beta phi`` at the patch's quadrature nodes.  The wide
collocation matrix ``M_m`` is factorized once as ``M_m = L Q_1`` and the
minimum-norm solution ``c_m = Q_1^* L^{-1} D b`` is obtained by a forward
substitution, never an explicit inverse.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from .kernels import PdeKind, kernel_matrices
from .quadrature import QuadratureError, lebedev, lebedev_counts

log = logging.getLogger(__name__)

RESIDUAL_FAIL = 1e-6
RANK_TOL = 1e-14


class InterpolationError(RuntimeError):
    """Collocation residual above tolerance on some patch."""

    def __init__(self, patch: int, residual: float):
        super().__init__(f"density interpolation failed on patch {patch}: relative residual {residual:.3e}")
        self.patch = patch
        self.residual = residual


def bounding_center_radius(nodes):
    """Center and half-diagonal of the axis-aligned bounding box of ``nodes``."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if nodes.size == 0:
        raise ValueError("empty node set")
    lo, hi = nodes.min(axis=0), nodes.max(axis=0)
    return 0.5 * (lo + hi), 0.5 * float(np.linalg.norm(hi - lo))


@dataclass(frozen=True, eq=False)
class SourceSet:
    points: np.ndarray
    center: np.ndarray
    R: float
    t: float
    requested_L: int

    @property
    def L(self) -> int:
        return len(self.points)


def default_source_count(dim: int, P: int) -> int:
    """Smallest admissible count >= 3P (Lebedev counts are quantized in 3D)."""
    want = max(3 * P, 2 * P + 1)
    if dim == 2:
        return want
    for n in lebedev_counts():
        if n >= want:
            return n
    raise QuadratureError(f"no Lebedev rule with at least {want} points")


def place_sources(dim: int, center, R: float, t: float = 5.0, L: int = 0) -> SourceSet:
    """``L`` sources on the circle/sphere of radius ``t R`` about ``center``.

    2D uses equispaced angles, 3D uses Lebedev nodes; a 3D request between
    tabulated counts is rounded up.
    """
    if t <= 1:
        raise ValueError(f"source multiplier t must exceed 1, got {t}")
    if L < 1:
        raise ValueError(f"need at least one source, got L={L}")
    center = np.asarray(center, dtype=float)
    rad = t * R
    if dim == 2:
        theta = 2 * np.pi * np.arange(L) / L
        pts = center + rad * np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        unit, _, _ = lebedev(L)
        if len(unit) != L:
            log.info("Lebedev source count rounded up from %d to %d", L, len(unit))
        pts = center + rad * unit
    return SourceSet(pts, center, float(R), float(t), int(L))


def sources_for(quad, t: float = 5.0, L: int = 0) -> SourceSet:
    """Source set surrounding the whole node cloud of ``quad``."""
    xc, R = bounding_center_radius(quad.nodes)
    if L <= 0:
        L = default_source_count(quad.dim, quad.max_nodes_per_patch)
    return place_sources(quad.dim, xc, R, t, L)


@dataclass(frozen=True, eq=False)
class InterpolationSystem:
    """``M = [gamma_0 rows; gamma_1 rows]`` and its factors ``M = lower @ q1``."""
    matrix: np.ndarray
    lower: np.ndarray
    q1: np.ndarray
    sigma: int
    P: int
    patch: int = -1

    def rhs(self, b, alpha, beta):
        """``D_{alpha,beta} b``."""
        b = np.asarray(b)
        return np.concatenate([alpha * b, beta * b])


def source_traces(pde: PdeKind, nodes, normals, sources: SourceSet):
    """``(B, C)``: ``G(y_i, z_l)`` and ``gamma_{1,x} G(y_i, z_l)`` with the node normals."""
    mats = kernel_matrices(pde, nodes, sources.points, nx=normals, which=("S", "ADL"))
    return mats["S"], mats["ADL"]


def assemble_interpolation_system(pde: PdeKind, nodes, normals, sources: SourceSet,
                                  patch: int = -1) -> InterpolationSystem:
    """Collocation matrix of one patch with its LQ factorization.

    The ``(alpha, beta)`` scaling enters only through the right-hand side,
    so one factorization serves every operator family.
    """
    P = len(nodes)
    if sources.L < 2 * P + 1:
        raise ValueError(f"need L >= 2P+1 = {2 * P + 1} sources, got {sources.L}")
    B, C = source_traces(pde, nodes, normals, sources)
    return factorize(np.vstack([B, C]), pde.sigma, P, patch)


def factorize(M, sigma: int, P: int, patch: int = -1) -> InterpolationSystem:
    """LQ factors of ``M`` from a Householder QR of ``M^*``."""
    qt, rt = qr(M.conj().T, mode="economic")
    lower = rt.conj().T
    diag = np.abs(np.diag(lower))
    scale = np.linalg.norm(M)
    if diag.min() < RANK_TOL * scale:
        log.warning("interpolation matrix of patch %d is numerically rank deficient "
                    "(min |L_ii| / |M| = %.2e)", patch, diag.min() / scale)
    return InterpolationSystem(M, lower, qt.conj().T, sigma, P, patch)


@dataclass(frozen=True, eq=False)
class PatchInterpolant:
    coefficients: np.ndarray  # (sigma L,) flattened: entry sigma*l + a
    sources: SourceSet
    pde: PdeKind
    residual: float


def solve_stacked(system: InterpolationSystem, rhs) -> np.ndarray:
    """Minimum-norm solution of ``M c = rhs`` (rhs of length ``2 sigma P``, or a matrix)."""
    y = solve_triangular(system.lower, rhs, lower=True, check_finite=False)
    return system.q1.conj().T @ y


def solve_coefficients(system: InterpolationSystem, b, alpha=1.0, beta=0.0, pde=None,
                       sources=None, check: bool = True) -> PatchInterpolant:
    """Interpolant whose traces match ``(alpha b, beta b)`` at the patch nodes.

    ``b`` holds the density at the patch nodes, flattened as ``sigma*r + a``.
    """
    b = np.asarray(b).reshape(-1)
    rhs = system.rhs(b, alpha, beta)
    c = solve_stacked(system, rhs)
    scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
    res = float(np.abs(system.matrix @ c - rhs).max(initial=0.0)) / scale
    if check and res > RESIDUAL_FAIL:
        raise InterpolationError(system.patch, res)
    return PatchInterpolant(c, sources, pde, res)


def eval_interpolant(interp: PatchInterpolant, r, trace: str = "field", normal=None):
    """``Phi(r)`` (``field``/``gamma0``) or its Neumann trace (``gamma1``, needs ``normal``)
    at points ``r``; returns ``(n, sigma)``."""
    r = np.atleast_2d(r)
    pde, s = interp.pde, interp.pde.sigma
    if trace in ("field", "gamma0"):
        K = kernel_matrices(pde, r, interp.sources.points, which=("S",))["S"]
    elif trace == "gamma1":
        if normal is None:
            raise ValueError("gamma1 trace needs normals")
        K = kernel_matrices(pde, r, interp.sources.points, nx=normal, which=("ADL",))["ADL"]
    else:
        raise ValueError(f"unknown trace {trace!r}")
    return (K @ interp.coefficients).reshape(len(r), s)
