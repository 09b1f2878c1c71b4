"""Boundary representation as non-overlapping patches.

A patch is a smooth map from a reference domain (interval, square or
triangle) into R^d.  Every map returns both the points and the tangent
vectors (Jacobian columns), from which the surface measure and the unit
normal are derived.  Closed curves are traversed counter-clockwise and
closed surfaces are parametrized so that ``t_u x t_v`` points outward.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .quadrature import QuadratureRule, gauss_legendre, tensor_gauss_legendre, triangle_rule


class GeometryError(ValueError):
    """Invalid geometric input (bad patch count, degenerate Jacobian...)."""


# -- patch maps -------------------------------------------------------------

class PatchMap:
    """Maps reference coordinates ``(n, r)`` to ``(points (n, d), tangents (n, d, r))``."""

    dim: int
    domain: str

    def __call__(self, ref):
        raise NotImplementedError


@dataclass(frozen=True)
class CurveSegment(PatchMap):
    """Sub-arc ``[t0, t1]`` of a closed parametric curve, reference domain [-1, 1]."""
    curve: "ParametricCurve"
    t0: float
    t1: float
    dim: int = 2
    domain: str = "interval"

    def __call__(self, ref):
        u = np.asarray(ref, dtype=float).reshape(-1)
        half = 0.5 * (self.t1 - self.t0)
        t = self.t0 + (u + 1.0) * half
        x, dx = self.curve.evaluate(t)
        return x, (dx * half)[:, :, None]


@dataclass(frozen=True)
class ParametricCurve:
    """Closed curve ``t -> x(t)`` for t in [0, 2pi) given with its derivative."""
    name: str
    position: object
    velocity: object

    def evaluate(self, t):
        return np.column_stack(self.position(t)), np.column_stack(self.velocity(t))


KITE = ParametricCurve(
    "kite2d",
    lambda t: (np.cos(t) + 0.65 * np.cos(2 * t) - 0.65, 1.5 * np.sin(t)),
    lambda t: (-np.sin(t) - 1.3 * np.sin(2 * t), 1.5 * np.cos(t)),
)
CIRCLE = ParametricCurve(
    "circle2d",
    lambda t: (np.cos(t), np.sin(t)),
    lambda t: (-np.sin(t), np.cos(t)),
)

# Cube-face frames (normal, e1, e2) with e1 x e2 = normal.
_CUBE_FACES = [
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((-1, 0, 0), (0, 0, 1), (0, 1, 0)),
    ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
    ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
    ((0, 0, -1), (0, 1, 0), (1, 0, 0)),
]


def _sphere_identity(s):
    n = len(s)
    return s, np.broadcast_to(np.eye(3), (n, 3, 3))


def _bean(s):
    s1, s2, s3 = s.T
    q1 = np.sqrt(1 - 0.1 * s3)
    q2 = np.sqrt(1 - 0.3 * s3)
    x = np.column_stack([0.8 * q1 * s1, -0.4 * s3 + 0.8 * q2 * s2, s3])
    J = np.zeros((len(s), 3, 3))
    J[:, 0, 0] = 0.8 * q1
    J[:, 0, 2] = 0.8 * s1 * (-0.05 / q1)
    J[:, 1, 1] = 0.8 * q2
    J[:, 1, 2] = -0.4 + 0.8 * s2 * (-0.15 / q2)
    J[:, 2, 2] = 1.0
    return x, J


def _acorn(s):
    s3 = s[:, 2]
    inner = 4.25 + 2 * (4 * s3 ** 3 - 3 * s3)
    rho = 0.6 * np.sqrt(inner)
    drho = 0.6 * (12 * s3 ** 2 - 3) / np.sqrt(inner)
    J = rho[:, None, None] * np.eye(3)
    J[:, :, 2] += s * drho[:, None]
    return rho[:, None] * s, J


# Smooth maps of the unit sphere onto star-shaped surfaces, with their
# 3x3 Jacobians (applied to tangents of the sphere).
SPHERE_MAPS = {"sphere3d-quadpatch": _sphere_identity, "bean3d": _bean, "acorn3d": _acorn}


@dataclass(frozen=True)
class CubeSpherePatch(PatchMap):
    """Equiangular cube-face cell ``[a0, a1] x [b0, b1]`` (within [-1, 1]^2) projected on
    the unit sphere and then pushed through ``shape``."""
    face: int
    a0: float
    a1: float
    b0: float
    b1: float
    shape: str = "sphere3d-quadpatch"
    dim: int = 3
    domain: str = "square"

    def __call__(self, ref):
        ref = np.atleast_2d(ref)
        ha, hb = 0.5 * (self.a1 - self.a0), 0.5 * (self.b1 - self.b0)
        a = self.a0 + (ref[:, 0] + 1) * ha
        b = self.b0 + (ref[:, 1] + 1) * hb
        nrm, e1, e2 = (np.array(v, dtype=float) for v in _CUBE_FACES[self.face])
        ta, tb = np.tan(np.pi * a / 4), np.tan(np.pi * b / 4)
        c = nrm + ta[:, None] * e1 + tb[:, None] * e2
        cn = np.linalg.norm(c, axis=1)
        s = c / cn[:, None]
        dca = (np.pi / 4) / np.cos(np.pi * a / 4) ** 2 * ha
        dcb = (np.pi / 4) / np.cos(np.pi * b / 4) ** 2 * hb

        def dsphere(dc):
            return (dc - s * np.sum(s * dc, axis=1, keepdims=True)) / cn[:, None]

        dsa = dsphere(dca[:, None] * e1)
        dsb = dsphere(dcb[:, None] * e2)
        x, J = SPHERE_MAPS[self.shape](s)
        tu = np.einsum("nij,nj->ni", J, dsa)
        tv = np.einsum("nij,nj->ni", J, dsb)
        return x, np.stack([tu, tv], axis=2)


@dataclass(frozen=True)
class TorusPatch(PatchMap):
    """Cell of the torus ``((R0 + a cos v) cos u, (R0 + a cos v) sin u, a sin v)``."""
    u0: float
    u1: float
    v0: float
    v1: float
    R0: float = 0.75
    a: float = 0.25
    dim: int = 3
    domain: str = "square"

    def __call__(self, ref):
        ref = np.atleast_2d(ref)
        hu, hv = 0.5 * (self.u1 - self.u0), 0.5 * (self.v1 - self.v0)
        u = self.u0 + (ref[:, 0] + 1) * hu
        v = self.v0 + (ref[:, 1] + 1) * hv
        rr = self.R0 + self.a * np.cos(v)
        x = np.column_stack([rr * np.cos(u), rr * np.sin(u), self.a * np.sin(v)])
        tu = np.column_stack([-rr * np.sin(u), rr * np.cos(u), np.zeros_like(u)]) * hu
        tv = self.a * np.column_stack([-np.sin(v) * np.cos(u), -np.sin(v) * np.sin(u), np.cos(v)]) * hv
        return x, np.stack([tu, tv], axis=2)


# Reference node layouts of Lagrange elements in Gmsh ordering.
LAGRANGE_LAYOUTS = {
    ("triangle", 1): np.array([[0, 0], [1, 0], [0, 1]], dtype=float),
    ("triangle", 2): np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]]),
    ("triangle", 3): np.array([[0, 0], [1, 0], [0, 1],
                               [1 / 3, 0], [2 / 3, 0], [2 / 3, 1 / 3], [1 / 3, 2 / 3],
                               [0, 2 / 3], [0, 1 / 3], [1 / 3, 1 / 3]]),
    ("square", 1): np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float),
    ("square", 2): np.array([[-1, -1], [1, -1], [1, 1], [-1, 1],
                             [0, -1], [1, 0], [0, 1], [-1, 0], [0, 0]], dtype=float),
}


def _monomial_exponents(domain, order):
    if domain == "triangle":
        return [(i, j) for i in range(order + 1) for j in range(order + 1 - i)]
    return [(i, j) for i in range(order + 1) for j in range(order + 1)]


def _monomials(ref, exps):
    u, v = ref[:, 0], ref[:, 1]
    val = np.column_stack([u ** i * v ** j for i, j in exps])
    du = np.column_stack([i * u ** max(i - 1, 0) * v ** j for i, j in exps])
    dv = np.column_stack([j * u ** i * v ** max(j - 1, 0) for i, j in exps])
    return val, du, dv


@dataclass(frozen=True, eq=False)
class LagrangePatch(PatchMap):
    """Nodal Lagrange map of a mesh element.  ``flipped`` swaps the reference
    coordinates, which reverses the orientation of the element."""
    nodes: np.ndarray
    domain: str
    order: int
    flipped: bool = False
    dim: int = 3
    _coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        layout = LAGRANGE_LAYOUTS[(self.domain, self.order)]
        if len(layout) != len(self.nodes):
            raise GeometryError(f"{self.domain} of order {self.order} needs {len(layout)} nodes")
        exps = _monomial_exponents(self.domain, self.order)
        V, _, _ = _monomials(layout, exps)
        object.__setattr__(self, "_coef", np.linalg.solve(V, self.nodes))
        object.__setattr__(self, "dim", self.nodes.shape[1])

    def with_flip(self, flipped):
        return LagrangePatch(self.nodes, self.domain, self.order, flipped)

    def __call__(self, ref):
        ref = np.atleast_2d(np.asarray(ref, dtype=float))
        if self.flipped:
            ref = ref[:, ::-1]
        exps = _monomial_exponents(self.domain, self.order)
        val, du, dv = _monomials(ref, exps)
        x = val @ self._coef
        tu, tv = du @ self._coef, dv @ self._coef
        if self.flipped:
            tu, tv = tv, tu
        return x, np.stack([tu, tv], axis=2)


@dataclass(frozen=True)
class Patch:
    mapping: PatchMap
    kind: str  # "curve-segment" | "quadrilateral" | "triangle"
    order: int = 0  # geometric order of meshed elements, 0 for analytic maps

    @property
    def dim(self) -> int:
        return self.mapping.dim

    @property
    def domain(self) -> str:
        return {"curve-segment": "interval", "quadrilateral": "square", "triangle": "triangle"}[self.kind]

    def evaluate(self, ref):
        """Points, unit normals and surface metric factor at reference coordinates."""
        x, tang = self.mapping(ref)
        if self.dim == 2:
            t = tang[:, :, 0]
            jac = np.linalg.norm(t, axis=1)
            normal = np.column_stack([t[:, 1], -t[:, 0]])
        else:
            cr = np.cross(tang[:, :, 0], tang[:, :, 1])
            jac = np.linalg.norm(cr, axis=1)
            normal = cr
        with np.errstate(divide="ignore", invalid="ignore"):
            normal = normal / jac[:, None]
        return x, normal, jac

    def sample_reference(self, n: int = 7):
        """Reference points on a regular grid including the corners."""
        if self.domain == "interval":
            return np.linspace(-1, 1, n)
        g = np.linspace(-1, 1, n) if self.domain == "square" else np.linspace(0, 1, n)
        u, v = np.meshgrid(g, g, indexing="ij")
        ref = np.column_stack([u.ravel(), v.ravel()])
        if self.domain == "triangle":
            ref = ref[ref.sum(axis=1) <= 1 + 1e-12]
        return ref

    def diameter(self) -> float:
        x, _, _ = self.evaluate(self.sample_reference())
        return float(np.linalg.norm(x.max(axis=0) - x.min(axis=0)))


# -- analytic shapes ----------------------------------------------------------

SHAPES = ("kite2d", "circle2d", "sphere3d-quadpatch", "bean3d", "acorn3d", "torus3d")


def arclength_breaks(curve, M: int, n_gauss: int = 64):
    """Parameters ``0 = t_0 < ... < t_M = 2 pi`` splitting ``curve`` into arcs of equal length."""
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    grid = np.linspace(0, 2 * np.pi, 4 * n_gauss + 1)

    def length(a, b):
        t = 0.5 * (a + b) + 0.5 * (b - a) * x
        return 0.5 * (b - a) * w @ np.linalg.norm(curve.evaluate(t)[1], axis=1)

    cum = np.concatenate([[0.0], np.cumsum([length(a, b) for a, b in zip(grid[:-1], grid[1:])])])
    breaks = [0.0]
    for m in range(1, M):
        target = cum[-1] * m / M
        j = np.searchsorted(cum, target) - 1
        breaks.append(brentq(lambda t: cum[j] + length(grid[j], t) - target, grid[j], grid[j + 1]))
    return np.array(breaks + [2 * np.pi])


def _curve_patches(curve, M, split="arclength"):
    if split == "arclength":
        t = arclength_breaks(curve, M)
    elif split == "parameter":
        t = np.linspace(0, 2 * np.pi, M + 1)
    else:
        raise GeometryError(f"split must be 'arclength' or 'parameter', got {split!r}")
    return [Patch(CurveSegment(curve, t[m], t[m + 1]), "curve-segment") for m in range(M)]


def _cube_sphere_patches(shape, M):
    n = int(round(np.sqrt(M / 6)))
    if M < 6 or 6 * n * n != M:
        raise GeometryError(f"{shape} needs M = 6 n^2 patches, got {M}")
    edges = np.linspace(-1, 1, n + 1)
    return [Patch(CubeSpherePatch(f, edges[i], edges[i + 1], edges[j], edges[j + 1], shape), "quadrilateral")
            for f in range(6) for i in range(n) for j in range(n)]


def _torus_patches(M, R0=0.75, a=0.25):
    n = int(round(np.sqrt(M / 2)))
    if M < 2 or 2 * n * n != M:
        raise GeometryError(f"torus3d needs M = 2 n^2 patches, got {M}")
    u = np.linspace(0, 2 * np.pi, 2 * n + 1)
    v = np.linspace(0, 2 * np.pi, n + 1)
    return [Patch(TorusPatch(u[i], u[i + 1], v[j], v[j + 1], R0, a), "quadrilateral")
            for i in range(2 * n) for j in range(n)]


def analytic_shape(name: str, M: int, **options) -> list:
    """Patches covering a named curve or surface.

    kite2d, circle2d : M arcs of equal length (option ``split="parameter"``
    uses equal parameter intervals instead).
    sphere3d-quadpatch, bean3d, acorn3d : M = 6 n^2 equiangular cube-sphere cells.
    torus3d : M = 2 n^2 cells (2n around the axis, n around the tube);
    options ``R0`` and ``a`` set the radii.
    """
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise GeometryError(f"patch count must be a positive integer, got {M!r}")
    if name == "kite2d":
        return _curve_patches(KITE, M, **options)
    if name == "circle2d":
        return _curve_patches(CIRCLE, M, **options)
    if name in SPHERE_MAPS:
        return _cube_sphere_patches(name, M)
    if name == "torus3d":
        return _torus_patches(M, **options)
    raise GeometryError(f"unknown shape {name!r}; available: {', '.join(SHAPES)}")


# -- global quadrature --------------------------------------------------------

@dataclass(frozen=True)
class RuleSpec:
    """Quadrature choice per patch kind: Gauss order ``p`` for curves and
    quadrilaterals, node count ``P`` for triangles."""
    p: int = 4
    P_triangle: int = 6

    def rule_for(self, kind: str) -> QuadratureRule:
        if kind == "curve-segment":
            return gauss_legendre(self.p)
        if kind == "quadrilateral":
            return tensor_gauss_legendre(self.p)
        if kind == "triangle":
            return triangle_rule(self.P_triangle)
        raise GeometryError(f"unknown patch kind {kind!r}")


@dataclass(frozen=True, eq=False)
class GlobalQuadrature:
    """All surface nodes.  Nodes of patch ``m`` occupy ``offsets[m]:offsets[m+1]``."""
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    patch_of: np.ndarray
    offsets: np.ndarray
    patches: tuple
    diameters: np.ndarray

    @property
    def N(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_patches(self) -> int:
        return len(self.offsets) - 1

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def max_nodes_per_patch(self) -> int:
        return int(np.diff(self.offsets).max())

    def patch_indices(self, m: int) -> np.ndarray:
        """I(m)."""
        return np.arange(self.offsets[m], self.offsets[m + 1])

    def complement_indices(self, m: int) -> np.ndarray:
        """The complement of I(m) in {0..N-1}."""
        return np.concatenate([np.arange(self.offsets[m]), np.arange(self.offsets[m + 1], self.N)])


def build_global_quadrature(patches, rules: RuleSpec = RuleSpec()) -> GlobalQuadrature:
    """Map each patch's reference rule to the surface and aggregate."""
    if not patches:
        raise GeometryError("no patches given")
    nodes, weights, normals, owner, counts = [], [], [], [], []
    for m, patch in enumerate(patches):
        rule = rules.rule_for(patch.kind)
        x, n, jac = patch.evaluate(rule.nodes)
        if not np.all(jac > 0):
            raise GeometryError(f"non-positive Jacobian on patch {m}")
        nodes.append(x)
        normals.append(n)
        weights.append(rule.weights * jac)
        owner.append(np.full(len(jac), m))
        counts.append(len(jac))
    return GlobalQuadrature(
        nodes=np.vstack(nodes),
        weights=np.concatenate(weights),
        normals=np.vstack(normals),
        patch_of=np.concatenate(owner),
        offsets=np.concatenate([[0], np.cumsum(counts)]),
        patches=tuple(patches),
        diameters=np.array([p.diameter() for p in patches]),
    )
