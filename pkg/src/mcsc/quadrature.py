"""Fixed quadrature rules on [-1, 1]: Gauss-Kronrod 7/15 and Gauss-Jacobi."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

# Kronrod 15-point nodes (non-negative half) and weights; odd-indexed nodes
# (0-based) are the embedded 7-point Gauss nodes.
_XK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

KRONROD_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
# positions of the Gauss nodes inside KRONROD_NODES and their weights
GAUSS_INDEX = np.array([1, 3, 5, 7, 9, 11, 13])
GAUSS_WEIGHTS = np.concatenate([_WG[:-1], _WG[::-1]])


@lru_cache(maxsize=64)
def gauss_jacobi(n: int, end_exponent: float, start_exponent: float = 0.0):
    """Nodes and weights for weight ``(1 - x)**end_exponent (1 + x)**start_exponent``."""
    x, w = roots_jacobi(n, end_exponent, start_exponent)
    return x, w
