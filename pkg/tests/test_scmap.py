import numpy as np
import pytest

from mcsc.paths import polyline
from mcsc.prefactor import GammaSet
from mcsc.scmap import (
    MappingSpec,
    SpecError,
    close_polygons,
    cross_ratio,
    local_exponent,
    map_along,
    map_point,
    map_points,
    period,
    polygon_betas,
    polygon_residuals,
    solve_m0,
    trace_boundary,
    traces_to_csv,
    zlambda,
    zprime,
    zprime_modulus,
)
from mcsc.slitmaps import PoleError, SlitMapKind, halfplane_slit_deriv

from cases import (
    ECCENTRIC,
    M1_ANGLES,
    M1_BETAS,
    SIMPLE,
    evaluator,
    gammas,
    m1_spec,
    square_spec,
    square_z1,
    unbounded_spec,
)

P0 = evaluator(SIMPLE, 0)
EMPTY = GammaSet(SlitMapKind.half_plane(), {})


# -- spec validation --------------------------------------------------------------


def test_spec_rejects_bad_beta_sum():
    with pytest.raises(SpecError) as info:
        MappingSpec(SIMPLE, ((0, 1, 2, 3),), ((-0.5, -0.5, -0.5, -0.4),), EMPTY)
    assert "sum" in str(info.value)


def test_spec_rejects_misordered_and_out_of_range():
    with pytest.raises(SpecError):
        MappingSpec(SIMPLE, ((0, 2, 1, 3),), ((-0.5,) * 4,), EMPTY)
    with pytest.raises(SpecError):
        MappingSpec(SIMPLE, ((0, 1, 2),), ((-1.0, -0.5, -0.5),), EMPTY)


def test_spec_unbounded_rules():
    with pytest.raises(SpecError):
        MappingSpec(SIMPLE, ((0, 1, 2, 3),), ((0.5,) * 4,), EMPTY, bounded=False)
    with pytest.raises(SpecError):
        MappingSpec(SIMPLE, ((0, 1, 2, 3),), ((-0.5,) * 4,), EMPTY, zeta_inf=0.3)
    with pytest.raises(SpecError):
        MappingSpec(SIMPLE, ((0, 1, 2, 3),), ((0.5,) * 4,), EMPTY, bounded=False, zeta_inf=0.0)


def test_spec_needs_gammas_for_inner_circles():
    with pytest.raises(SpecError) as info:
        MappingSpec(ECCENTRIC, M1_ANGLES, M1_BETAS, EMPTY)
    assert "gamma" in str(info.value)


def test_spec_json_round_trip():
    spec = m1_spec(8)
    again = MappingSpec.from_json(spec.to_json())
    assert again == spec
    data = square_spec().to_json()
    data["prevertices"][0][1] = {"point": [0.0, 1.0], "beta": -0.5}
    assert MappingSpec.from_json(data).angles == square_spec().angles
    data["prevertices"][0][1] = {"point": [0.0, 1.1], "beta": -0.5}
    with pytest.raises(SpecError):
        MappingSpec.from_json(data)


def test_base_point_moves_off_prevertex():
    assert square_spec().base == pytest.approx(1 - 1e-3)
    assert m1_spec(8).base == 1.0


# -- derivative ---------------------------------------------------------------------


def test_square_derivative():
    spec = square_spec()
    rng = np.random.default_rng(0)
    z = np.sqrt(rng.uniform(0, 0.95, 30)) * np.exp(2j * np.pi * rng.uniform(size=30))
    got = np.array([zprime(spec, P0, w) for w in z])
    assert np.max(np.abs(got * np.sqrt(1 - z**4) - 1)) < 1e-12
    assert np.allclose(zprime_modulus(spec, P0, z), np.abs(got), rtol=1e-13)


def test_zprime_at_prevertex_raises():
    with pytest.raises(PoleError):
        zprime(square_spec(), P0, 1j)


def test_zlambda_matches_chain_rule():
    spec = m1_spec(8)
    p = evaluator(ECCENTRIC, 8)
    for z in (-0.3 + 0.4j, 0.6 - 0.3j):
        ratio = zlambda(spec, p, z) * halfplane_slit_deriv(p, z) / zprime(spec, p, z)
        assert abs(ratio - 1) < 1e-10


def test_local_exponent_on_known_power():
    f = lambda z: (z - 0.5) ** 0.25 * (1 + z)
    assert local_exponent(f, 0.5, 1j) == pytest.approx(0.25, abs=1e-4)


def test_unbounded_double_pole():
    spec = unbounded_spec()
    e = local_exponent(lambda z: zprime(spec, P0, z), 0.3, 1j)
    assert e == pytest.approx(-2, abs=1e-3)
    with pytest.raises(PoleError):
        map_point(spec, P0, 0.3)


# -- integration -------------------------------------------------------------------


def test_square_map_value():
    spec = square_spec(base_point=0j)
    ref, ref2 = square_z1()
    assert abs(map_point(spec, P0, 1.0) - ref) < 1e-12
    assert abs(ref - ref2) < 1e-13
    # symmetry of the square about its centre
    assert abs(map_point(spec, P0, 1j) - 1j * ref) < 1e-12


def test_path_independence():
    spec = m1_spec(8)
    p = evaluator(ECCENTRIC, 8)
    z = -0.5 - 0.3j
    direct = map_point(spec, p, z)
    # a homotopic detour below the hole
    detour = [spec.base, 0.6 - 0.5j, -0.2 - 0.7j, z]
    via = map_point(spec, p, z, path=detour)
    assert abs(direct - via) < 1e-10
    assert map_point(spec, p, z, path=polyline(detour)) == via


def test_map_along_agrees_with_map_points():
    spec = m1_spec(8)
    p = evaluator(ECCENTRIC, 8)
    pts = -0.6 + 0.1j + 0.1 * np.arange(5)
    assert np.allclose(map_along(spec, p, pts), map_points(spec, p, pts), atol=1e-10)


def test_closed_spec_has_zero_period():
    spec = m1_spec(12)
    per, mono = period(spec, evaluator(ECCENTRIC, 12), 1)
    assert abs(per) < 1e-10
    assert abs(mono - 1) < 1e-10


def test_close_polygons_recovers_stored_angles():
    spec = m1_spec(12)
    start = spec.replace(angles=(spec.angles[0], (0.1, 1.7, 3.3, 4.9)))
    closed = close_polygons(start, evaluator(ECCENTRIC, 12), {1: (0, 1)})
    assert np.allclose(closed.angles[1], M1_ANGLES[1], atol=1e-9)


# -- tracing ----------------------------------------------------------------------


def test_square_trace():
    tr = trace_boundary(square_spec(), P0, 0)
    assert np.allclose(tr.side_lengths, tr.side_lengths[0], rtol=1e-12)
    assert np.allclose(tr.turning_angles, np.pi / 2, atol=1e-12)
    assert np.allclose(tr.measured_betas, -0.5)
    assert tr.closure < 1e-12 and tr.straightness < 1e-10
    csv = traces_to_csv([tr]).splitlines()
    assert csv[0] == "circle,t,re_z,im_z"
    assert len(csv) == len(tr.z) + 1
    assert len(csv[5].split(",")[2].replace("-", "").replace(".", "").split("e")[0]) >= 15


def test_trace_rejects_too_few_samples():
    with pytest.raises(ValueError):
        trace_boundary(square_spec(), P0, 0, samples=8)


def test_m1_residuals():
    rep = polygon_residuals(m1_spec(12), evaluator(ECCENTRIC, 12))
    assert rep.max_closure < 1e-10
    assert rep.max_turning_defect < 1e-8
    js = rep.to_json()
    assert set(js) >= {"closure", "turning_defects", "side_lengths"}


# -- simply connected parameter problem ------------------------------------------------


def test_polygon_betas_and_cross_ratio():
    assert np.allclose(polygon_betas([0, 1, 1 + 1j, 1j]), -0.5)
    assert cross_ratio(0, 1, 2, 3) == pytest.approx((0 - 2) * (1 - 3) / ((0 - 3) * (1 - 2)))


def test_solve_m0_square():
    sol = solve_m0([0, 1, 1 + 1j, 1j])
    assert sol.residual < 1e-10
    gaps = np.diff(np.append(sol.spec.angles[0], sol.spec.angles[0][0] + 2 * np.pi))
    assert np.allclose(gaps, np.pi / 2, atol=1e-9)


def test_solve_m0_rejects_bad_targets():
    with pytest.raises(ValueError):
        solve_m0([0, 1j, 1 + 1j, 1])  # clockwise
    with pytest.raises(ValueError):
        solve_m0([0, 1])
    with pytest.raises(ValueError):
        solve_m0([0, 2, 1j, 2 + 1j])  # self-intersecting
