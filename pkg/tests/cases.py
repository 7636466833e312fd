"""Shared test domains, mapping specs and independent oracles."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import beta as beta_fn
from scipy.special import ellipk

from mcsc.domain import CircularDomain
from mcsc.prefactor import GammaSet, find_gamma
from mcsc.prime import PrimeEvaluator
from mcsc.scmap import MappingSpec
from mcsc.slitmaps import SlitMapKind

ECCENTRIC = CircularDomain((0.25 + 0.2j,), (0.2,))
SYMMETRIC = CircularDomain((0.4, -0.4), (0.1, 0.1))
REAL_M1 = CircularDomain((0.5,), (0.2,))
SIMPLE = CircularDomain()

SQUARE_ANGLES = tuple(k * np.pi / 2 for k in range(4))
# prevertex angles of the closed M=1 and M=2 test specs (from close_polygons)
M1_ANGLES = (
    tuple(0.3 + k * np.pi / 2 for k in range(4)),
    (0.137144058658047, 1.748726854183689, 3.3, 4.9),
)
M2_ANGLES = (
    tuple(0.3 + k * np.pi / 2 for k in range(4)),
    (0.18054139385538368, 1.745446585918616, 3.3, 4.9),
    (0.30789642373651455, 2.424225501377258, 4.5),
)
M1_BETAS = ((-0.5,) * 4, (0.5,) * 4)
M2_BETAS = ((-0.5,) * 4, (0.5,) * 4, (2 / 3,) * 3)


@lru_cache(maxsize=None)
def evaluator(domain: CircularDomain, level: int) -> PrimeEvaluator:
    return PrimeEvaluator(domain, level)


@lru_cache(maxsize=None)
def gammas(domain: CircularDomain, level: int, kind: SlitMapKind | None = None) -> GammaSet:
    return find_gamma(evaluator(domain, level), kind or SlitMapKind.half_plane())


def square_spec(**changes) -> MappingSpec:
    """The M=0 square with ``dz/dzeta = (1 - zeta**4)**(-1/2)``."""
    spec = MappingSpec(
        SIMPLE, (SQUARE_ANGLES,), ((-0.5,) * 4,), GammaSet(SlitMapKind.half_plane(), {}), B=0.5j
    )
    return spec.replace(**changes) if changes else spec


def unbounded_spec() -> MappingSpec:
    """M=0 exterior-type spec with ``zeta_inf = 0.3``."""
    return MappingSpec(
        SIMPLE,
        (SQUARE_ANGLES,),
        ((0.5,) * 4,),
        GammaSet(SlitMapKind.half_plane(), {}),
        bounded=False,
        zeta_inf=0.3,
    )


def m1_spec(level: int = 12) -> MappingSpec:
    return MappingSpec(ECCENTRIC, M1_ANGLES, M1_BETAS, gammas(ECCENTRIC, level))


def m2_spec(level: int = 8) -> MappingSpec:
    return MappingSpec(SYMMETRIC, M2_ANGLES, M2_BETAS, gammas(SYMMETRIC, level))


# -- oracles ---------------------------------------------------------------------------


def annulus_omega(z, a, q, terms: int = 60):
    """Prime function of the concentric annulus ``q < |z| < 1`` from its q-product."""
    z, a = np.asarray(z, dtype=complex), np.asarray(a, dtype=complex)
    n = np.arange(1, terms + 1)[:, None]
    q2n = q ** (2 * n)
    c2 = np.prod(1 - q2n, axis=0) ** 2
    prod = np.prod((1 - q2n * z / a) * (1 - q2n * a / z), axis=0)
    return (z - a) * prod / c2


def annulus_omega_deriv(z, a, q, terms: int = 60):
    z, a = np.asarray(z, dtype=complex), np.asarray(a, dtype=complex)
    n = np.arange(1, terms + 1)[:, None]
    q2n = q ** (2 * n)
    c2 = np.prod(1 - q2n, axis=0) ** 2
    f1, f2 = 1 - q2n * z / a, 1 - q2n * a / z
    prod = np.prod(f1 * f2, axis=0)
    logd = np.sum(-q2n / a / f1 + q2n * a / z**2 / f2, axis=0)
    return prod / c2 + (z - a) * prod * logd / c2


def square_z1() -> tuple[float, float]:
    """``int_0^1 (1 - t**4)**(-1/2) dt`` by two routes: QUADPACK and the Beta function."""
    val = quad(lambda t: (1 + t) ** -0.5 * (1 + t * t) ** -0.5, 0, 1, weight="alg",
               wvar=(0, -0.5), epsabs=1e-14, epsrel=1e-13)[0]
    return val, beta_fn(0.25, 0.5) / 4


def rectangle_cross_ratio(aspect: float = 2.0) -> float:
    """Cross ratio of the prevertices of a rectangle, long side first.

    The upper half-plane map ``int dt / sqrt((1 - t**2)(1 - k**2 t**2))``
    sends ``-1/k, -1, 1, 1/k`` to a rectangle with side ratio
    ``2 K(k) / K'(k)``; ``k`` is found by root finding.
    """
    def ratio(k):
        return 2 * ellipk(k * k) / ellipk(1 - k * k) - aspect

    k = brentq(ratio, 1e-6, 1 - 1e-12, xtol=1e-15)
    x = np.array([-1.0, 1.0, 1 / k, -1 / k])
    # same ordering convention as mcsc.scmap.cross_ratio
    a, b, c, d = x
    return float((a - c) * (b - d) / ((a - d) * (b - c)))
