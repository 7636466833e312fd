import numpy as np
import pytest

from mcsc.domain import CircularDomain, DomainError, boundary_points
from mcsc.identities import interior_samples
from mcsc.prefactor import (
    GammaRootError,
    GammaSet,
    find_gamma,
    prefactor,
    prefactor_disc,
    prefactor_halfplane,
    prefactor_unbounded_radial,
)
from mcsc.slitmaps import PoleError, SlitMapKind, slit_map_deriv

from cases import ECCENTRIC, REAL_M1, SYMMETRIC, evaluator, gammas

HALF = SlitMapKind.half_plane()


def conjugate_mismatch(g: GammaSet) -> float:
    pts = g.points()
    return float(max(np.min(np.abs(np.conj(z) - pts)) for z in pts))


def test_two_roots_per_required_circle():
    p = evaluator(SYMMETRIC, 8)
    for kind, circles in ((HALF, [1, 2]), (SlitMapKind.unbounded(0.1j, -0.6j), [0, 1, 2])):
        g = find_gamma(p, kind)
        assert sorted(g.roots) == circles
        for j, (a, b) in g.roots.items():
            delta, q = SYMMETRIC.circle(j)
            assert abs(abs(a - delta) - q) < 1e-14 and abs(abs(b - delta) - q) < 1e-14
            assert abs(a - b) > 1e-3


def test_roots_are_zeros_of_the_derivative():
    p = evaluator(ECCENTRIC, 12)
    for kind in (HALF, SlitMapKind.disc(-0.3 + 0.1j), SlitMapKind.unbounded(0.1j, -0.6j)):
        g = find_gamma(p, kind)
        assert g.residual < 1e-10
        assert np.max(np.abs(slit_map_deriv(p, kind, g.points()))) == pytest.approx(g.residual)


@pytest.mark.parametrize("domain,level", [(REAL_M1, 12), (SYMMETRIC, 8)])
def test_conjugate_symmetry(domain, level):
    p = evaluator(domain, level)
    for kind in (HALF, SlitMapKind.disc(0.1), SlitMapKind.unbounded(0.05, -0.6)):
        assert conjugate_mismatch(find_gamma(p, kind)) < 1e-10


def test_real_domain_halfplane_roots():
    # centre 0.5, radius 0.2: the slit ends come from the two real points
    g = gammas(REAL_M1, 12)
    assert np.allclose(sorted(g.points().real), [0.3, 0.7], atol=1e-12)


def test_gamma_json_round_trip():
    g = gammas(ECCENTRIC, 8)
    assert GammaSet.from_json(g.to_json()) == g


def test_kind_mismatch_rejected():
    p = evaluator(ECCENTRIC, 6)
    with pytest.raises(DomainError):
        prefactor_disc(p, 0.1j, gammas(ECCENTRIC, 6), 0.2)


def test_wrong_root_count_reported():
    p = evaluator(ECCENTRIC, 6)
    with pytest.raises(GammaRootError) as info:
        find_gamma(p, HALF, samples=1)
    assert info.value.circle == 1


def grid(domain, n=200, seed=5):
    return interior_samples(domain, n, np.random.default_rng(seed), 0.02)


def relative_spread(values):
    values = np.asarray(values)
    mean = np.mean(values)
    return float(np.max(np.abs(values - mean)) / abs(mean))


@pytest.fixture(scope="module")
def eccentric_sets():
    p = evaluator(ECCENTRIC, 12)
    return p, {
        "half": find_gamma(p, HALF),
        "disc_a": find_gamma(p, SlitMapKind.disc(-0.3 + 0.1j)),
        "disc_b": find_gamma(p, SlitMapKind.disc(0.5 - 0.4j)),
        "unb_a": find_gamma(p, SlitMapKind.unbounded(0.1j, -0.6j)),
        "unb_b": find_gamma(p, SlitMapKind.unbounded(-0.5 + 0.2j, 0.6 - 0.3j)),
    }


def test_prefactor_ratios_are_constant(eccentric_sets):
    p, g = eccentric_sets
    z = grid(ECCENTRIC)
    half = prefactor_halfplane(p, g["half"], z)
    disc_a = prefactor_disc(p, -0.3 + 0.1j, g["disc_a"], z)
    disc_b = prefactor_disc(p, 0.5 - 0.4j, g["disc_b"], z)
    unb_a = prefactor_unbounded_radial(p, 0.1j, -0.6j, g["unb_a"], z)
    unb_b = prefactor_unbounded_radial(p, -0.5 + 0.2j, 0.6 - 0.3j, g["unb_b"], z)
    assert relative_spread(disc_a / half) < 1e-6
    assert relative_spread(unb_a / half) < 1e-6
    assert relative_spread(disc_a / disc_b) < 1e-6
    assert relative_spread(unb_a / unb_b) < 1e-6


def test_prefactor_is_finite_near_gamma(eccentric_sets):
    p, g = eccentric_sets
    g0 = g["half"].roots[1][0]
    delta, _ = ECCENTRIC.circle(1)
    out = (g0 - delta) / abs(g0 - delta)
    far = prefactor_halfplane(p, g["half"], g0 + 1e-2 * out)
    values = [prefactor_halfplane(p, g["half"], g0 + r * out) for r in (1e-3, 1e-5, 1e-7, 1e-9, 1e-12)]
    assert all(np.isfinite(v) for v in values)
    assert max(abs(v) for v in values) < 10 * abs(far)
    assert abs(values[-1] - values[-2]) / abs(values[-1]) < 1e-6
    with pytest.raises(PoleError):
        prefactor_halfplane(p, g["half"], g0)


def test_prefactor_dispatch_with_zeta_inf(eccentric_sets):
    p, g = eccentric_sets
    z = np.array([-0.5 + 0.1j, 0.1 - 0.6j])
    zi = -0.2 - 0.3j
    pair = p.omega(z, zi) * p.omega(z, 1 / np.conj(zi))
    assert np.allclose(prefactor(p, g["half"], z, zi) * pair**2, prefactor(p, g["half"], z))
    with pytest.raises(PoleError):
        prefactor(p, g["half"], zi, zi)


def test_simple_domain_prefactor():
    p = evaluator(CircularDomain(), 0)
    g = find_gamma(p, HALF)
    z = np.array([0.3, -0.2j])
    # omega = z - a: S = (z + 1) - (z - 1) = 2
    assert np.allclose(prefactor(p, g, z), 2.0)
