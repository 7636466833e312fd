import numpy as np
import pytest

from mcsc.domain import boundary_points
from mcsc.slitmaps import (
    PoleError,
    SlitMapKind,
    arg_spread,
    bounded_radial_slit,
    circular_slit_disc,
    halfplane_slit,
    halfplane_slit_deriv,
    modulus_spread,
    slit_map,
    slit_map_deriv,
    strip_map,
    unbounded_radial_slit,
)

from cases import ECCENTRIC, SYMMETRIC, evaluator

SAMPLES = 400
T = 2 * np.pi * (np.arange(SAMPLES) + 0.37) / SAMPLES
DOMAINS = [(ECCENTRIC, 8), (SYMMETRIC, 8)]


@pytest.mark.parametrize("domain,level", DOMAINS)
def test_bounded_radial_slit_arguments(domain, level):
    p = evaluator(domain, level)
    for j in range(domain.M + 1):
        z1, z2 = boundary_points(domain, j, np.array([0.4, 2.5]))
        for l in range(domain.M + 1):
            vals = bounded_radial_slit(p, boundary_points(domain, l, T), z1, z2, j)
            assert arg_spread(vals, modulo_pi=(l == j)) < 1e-6


@pytest.mark.parametrize("domain,level", DOMAINS)
def test_unbounded_radial_slit_arguments(domain, level):
    p = evaluator(domain, level)
    zero, pole = 0.1 - 0.5j, -0.1 + 0.6j
    for l in range(domain.M + 1):
        vals = unbounded_radial_slit(p, boundary_points(domain, l, T), zero, pole)
        assert arg_spread(vals) < 1e-6


@pytest.mark.parametrize("domain,level", DOMAINS)
def test_halfplane_boundary_images(domain, level):
    p = evaluator(domain, level)
    lam = halfplane_slit(p, boundary_points(domain, 0, T))
    assert np.max(np.abs(lam.imag) / np.maximum(1.0, np.abs(lam))) < 1e-8
    for j in range(1, domain.M + 1):
        assert arg_spread(halfplane_slit(p, boundary_points(domain, j, T))) < 1e-6


@pytest.mark.parametrize("domain,level", DOMAINS)
def test_circular_slit_disc_modulus(domain, level):
    p = evaluator(domain, level)
    zero = -0.1 + 0.5j
    on0 = circular_slit_disc(p, boundary_points(domain, 0, T), zero)
    assert np.max(np.abs(np.abs(on0) - 1)) < 1e-8
    for j in range(1, domain.M + 1):
        vals = circular_slit_disc(p, boundary_points(domain, j, T), zero)
        assert modulus_spread(vals) < 1e-8
        assert np.all(np.abs(vals) < 1)


def test_derivatives_match_finite_differences():
    p = evaluator(SYMMETRIC, 6)
    z, h = 0.05 + 0.55j, 1e-5
    for kind in (SlitMapKind.half_plane(), SlitMapKind.unbounded(0.1 - 0.5j, -0.1 + 0.6j)):
        fd = (slit_map(p, kind, z + h) - slit_map(p, kind, z - h)) / (2 * h)
        assert abs(fd / slit_map_deriv(p, kind, z) - 1) < 1e-8
    kind = SlitMapKind.disc(-0.1 + 0.5j)
    eta = lambda w: np.log(slit_map(p, kind, w))
    fd = (eta(z + h) - eta(z - h)) / (2 * h)
    assert abs(fd / slit_map_deriv(p, kind, z) - 1) < 1e-8
    assert abs(halfplane_slit_deriv(p, z) - slit_map_deriv(p, SlitMapKind.half_plane(), z)) == 0


def test_poles_raise():
    p = evaluator(ECCENTRIC, 4)
    with pytest.raises(PoleError):
        halfplane_slit(p, -1.0)
    with pytest.raises(PoleError):
        unbounded_radial_slit(p, -0.5j, 0.3, -0.5j)


def test_strip_map_is_a_logarithm():
    p = evaluator(ECCENTRIC, 6)
    zero = -0.3 - 0.2j
    z = -0.2 + 0.6j
    s = strip_map(p, z, zero)
    assert abs(np.exp(s) - circular_slit_disc(p, z, zero)) < 1e-12
    # real part is constant (zero) on the unit circle
    assert abs(strip_map(p, np.exp(0.3j), zero, path=[1.0, 0.9, 0.9 * np.exp(0.3j), np.exp(0.3j)]).real) < 1e-10


def test_kind_json_round_trip():
    for kind in (SlitMapKind.half_plane(), SlitMapKind.disc(0.1j), SlitMapKind.unbounded(0.1, -0.2j)):
        assert SlitMapKind.from_json(kind.to_json()) == kind
