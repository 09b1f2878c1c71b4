"""Cylindrical Bessel and Hankel functions of orders 0 and 1.

The AMOS-based scipy routines are used throughout; the Cephes ``j0``/``y0``
lose about three digits for arguments in the thousands.
"""

import numpy as np
from scipy import special as sp

_FUNCS = {
    "J0": lambda z: sp.jv(0, z),
    "J1": lambda z: sp.jv(1, z),
    "Y0": lambda z: sp.yv(0, z),
    "Y1": lambda z: sp.yv(1, z),
    "H0": lambda z: sp.hankel1(0, z),
    "H1": lambda z: sp.hankel1(1, z),
}


def bessel_hankel(kind: str, z):
    """Evaluate ``kind`` in {J0, J1, Y0, Y1, H0, H1} (H = first-kind Hankel) at z > 0."""
    if kind not in _FUNCS:
        raise ValueError(f"unknown Bessel kind {kind!r}; choose from {sorted(_FUNCS)}")
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0) or not np.all(np.isfinite(z)):
        raise ValueError("Bessel/Hankel argument must be a positive finite real")
    return _FUNCS[kind](z)
