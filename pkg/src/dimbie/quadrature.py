"""Reference-domain quadrature rules.

Three reference domains are used:

* ``interval``  : [-1, 1]                      (measure 2)
* ``square``    : [-1, 1]^2                    (measure 4)
* ``triangle``  : {u >= 0, v >= 0, u + v <= 1} (measure 1/2)

All nodes lie strictly inside their domain, which the density interpolation
requires (every node must belong to exactly one patch).
"""

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from numpy.polynomial.legendre import leggauss

DOMAIN_MEASURE = {"interval": 2.0, "square": 4.0, "triangle": 0.5}


class QuadratureError(ValueError):
    """Unsupported quadrature request."""


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (P,) for interval, (P, 2) otherwise
    weights: np.ndarray
    domain: str
    degree: int

    @property
    def count(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return 1 if self.domain == "interval" else 2


def gauss_legendre(p: int) -> QuadratureRule:
    """``p``-point Gauss-Legendre rule on [-1, 1], exact to degree 2p-1."""
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= 64:
        raise QuadratureError(f"Gauss-Legendre order must be in [1, 64], got {p!r}")
    x, w = leggauss(int(p))
    return QuadratureRule(x, w, "interval", 2 * int(p) - 1)


def tensor_gauss_legendre(p: int) -> QuadratureRule:
    """``p x p`` tensor-product rule on [-1, 1]^2."""
    r = gauss_legendre(p)
    u, v = np.meshgrid(r.nodes, r.nodes, indexing="ij")
    w = np.outer(r.weights, r.weights)
    return QuadratureRule(np.column_stack([u.ravel(), v.ravel()]), w.ravel(), "square", r.degree)


def _s21(a):
    return [(a, a), (1 - 2 * a, a), (a, 1 - 2 * a)]


def _s111(a, b):
    c = 1 - a - b
    return [(a, b), (b, a), (b, c), (c, b), (a, c), (c, a)]


# Symmetric Gauss rules of the Cowper/Dunavant family, refined to full double
# precision by Gauss-Newton on the moment equations.  Orbit weights are already
# scaled to the reference area 1/2.
_TRIANGLE_ORBITS = {
    1: (1, [("s3", 0.5)]),
    3: (2, [("s21", 1.0 / 6.0, 1.0 / 6.0)]),
    6: (4, [("s21", 0.44594849091596488632, 0.11169079483900573285),
            ("s21", 0.09157621350977074346, 0.054975871827660933819)]),
    12: (6, [("s21", 0.24928674517091042129, 0.058393137863189683013),
             ("s21", 0.06308901449150222834, 0.02542245318510340846),
             ("s111", 0.053145049844816947353, 0.31035245103378440542, 0.041425537809186787597)]),
}


def triangle_rule(P: int) -> QuadratureRule:
    """Interior-node Gauss rule with ``P`` nodes on the reference triangle."""
    if P not in _TRIANGLE_ORBITS:
        raise QuadratureError(
            f"no tabulated triangle rule with {P} nodes; available: {sorted(_TRIANGLE_ORBITS)}")
    degree, orbits = _TRIANGLE_ORBITS[P]
    pts, ws = [], []
    for orb in orbits:
        if orb[0] == "s3":
            pts.append((1 / 3, 1 / 3))
            ws.append(orb[1])
        elif orb[0] == "s21":
            pts += _s21(orb[1])
            ws += [orb[2]] * 3
        else:
            pts += _s111(orb[1], orb[2])
            ws += [orb[3]] * 6
    return QuadratureRule(np.array(pts, dtype=float), np.array(ws), "triangle", degree)


def available_triangle_rules():
    return sorted(_TRIANGLE_ORBITS)


# -- Lebedev nodes on the unit sphere ---------------------------------------

@lru_cache(maxsize=None)
def _lebedev_table():
    text = resources.files("dimbie").joinpath("data/lebedev.txt").read_text()
    rows = np.array([[float(t) for t in ln.split()] for ln in text.splitlines()
                     if ln.strip() and not ln.startswith("#")])
    table = {}
    for deg in np.unique(rows[:, 0]).astype(int):
        sel = rows[rows[:, 0] == deg]
        table[len(sel)] = (int(deg), sel[:, 1:4].copy(), sel[:, 4].copy())
    return table


def lebedev_counts():
    return sorted(_lebedev_table())


def lebedev(L: int, round_up: bool = True):
    """Lebedev nodes/weights with ``L`` points (rounded up to the next
    tabulated count when ``round_up``).  Returns ``(points, weights, degree)``."""
    counts = lebedev_counts()
    if L in counts:
        n = L
    elif round_up and L <= counts[-1]:
        n = next(c for c in counts if c >= L)
    else:
        raise QuadratureError(f"no Lebedev rule with {L} points; tabulated counts: {counts}")
    deg, x, w = _lebedev_table()[n]
    return x.copy(), w.copy(), deg
