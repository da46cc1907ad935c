import numpy as np
import pytest
from hypothesis import given, strategies as st

from invasion_lab.errors import ConstraintViolation, DisconnectedDomain, FeatureUnresolved, ProfileViolation
from invasion_lab.geometry import (MirroredProfile, NarrowNeck, Omega3Spec, PeriodSpec, RectHole,
                                   SawtoothProfile, StarHole, build_lattice_domain, build_omega3,
                                   build_sawtooth_cylinder, check_exterior_ball, check_sliding_condition,
                                   cutoff_chi, slidable_set, star_lattice_period)


@pytest.fixture(scope="module")
def omega3_admissible():
    spec = Omega3Spec(0.5, 4.0, 1.0)  # kappa >= 4R and R <= 1/(2 eps)
    return spec, build_omega3(spec, 8, window=(1, 1))


def face_length(mask, d):
    hx, hy = mask.spacing
    return hy if d in ("E", "W") else hx


# -- PeriodSpec / lattice ------------------------------------------------------

def test_period_resolution_floor():
    with pytest.raises(ValueError):
        PeriodSpec((1.0, 1.0), 4)
    with pytest.raises(ValueError):
        PeriodSpec((-1.0, 1.0), 8)


def test_hole_free_window_all_inside():
    m = build_lattice_domain(None, PeriodSpec((1.0, 1.0), 8), window=3)
    assert m.inside.all()
    assert m.n_inside == 24 * 24
    assert not any(f.kind == "wall" for f in m.boundary_faces)


def test_square_hole_area():
    m = build_lattice_domain(RectHole((0.5, 0.5), (0.5, 0.5)), PeriodSpec((1.0, 1.0), 32))
    h = 1 / 32
    # one cell layer along the perimeter
    assert abs(m.inside_fraction() - 0.75) <= 2.0 * h


def test_star_lattice_periodicity_bit_exact():
    star = StarHole.star(5, 1.0, 0.45)
    L = star_lattice_period(star, 1.85)
    assert L == pytest.approx(2 * star.diameter + 2 * 1.85 + 1)
    star = star.recentered((L / 2, L / 2))
    m = build_lattice_domain(star, PeriodSpec((L, L), 8), window=2)
    n = m.period.cells
    ins = m.inside
    assert np.array_equal(ins[:, : n[0]], ins[:, n[0]:])
    assert np.array_equal(ins[: n[1], :], ins[n[1]:, :])
    assert star.is_star_shaped()


def test_star_diameter_bounds():
    star = StarHole.star(5, 1.0, 0.45)
    assert 1.9 <= star.diameter <= 2.0


def test_feature_unresolved():
    with pytest.raises(FeatureUnresolved):
        build_lattice_domain(NarrowNeck(0.25, 3.0, 8.0), PeriodSpec((8.0, 8.0), 8))


def test_disconnected_domain():
    hole = RectHole((0.5, 0.5), (0.25, 0.999))
    with pytest.raises(DisconnectedDomain):
        build_lattice_domain(hole, PeriodSpec((1.0, 1.0), 32), periodic=False)
    # with wrap-around the two sides reconnect
    build_lattice_domain(hole, PeriodSpec((1.0, 1.0), 32), periodic=(True, False))


def test_hole_must_fit_period_cell():
    with pytest.raises(ValueError):
        build_lattice_domain(RectHole((0.1, 0.5), (0.5, 0.5)), PeriodSpec((1.0, 1.0), 32))


@pytest.mark.parametrize("hole", [RectHole((0.5, 0.5), (0.5, 0.3)), StarHole.star(5, 0.35, 0.2, (0.5, 0.5))])
def test_face_normals_unit_outward_and_balanced(hole):
    m = build_lattice_domain(hole, PeriodSpec((1.0, 1.0), 64))
    cells, dirs, normals, kinds = m._faces
    assert np.allclose(np.hypot(normals[:, 0], normals[:, 1]), 1.0, atol=1e-12)
    wall = kinds == "wall"
    ny, nx = m.shape
    for (j, i), n in zip(cells[wall], normals[wall]):
        assert m.inside[j, i]
        assert not m.inside[(j + int(n[1])) % ny, (i + int(n[0])) % nx]
    total = np.zeros(2)
    for d, n in zip(dirs[wall], normals[wall]):
        total += face_length(m, d) * n
    assert np.all(np.abs(total) < 1e-9)


@given(st.integers(0, 10 ** 6))
def test_grid_roundtrip(seed):
    m = build_lattice_domain(RectHole((0.5, 0.5), (0.5, 0.5)), PeriodSpec((1.0, 1.0), 16), window=2)
    v = np.random.default_rng(seed).uniform(size=m.n_inside)
    assert np.array_equal(m.from_grid(m.to_grid(v)), v)


# -- sawtooth cylinder ---------------------------------------------------------

def test_sawtooth_neck_resolution_and_midpoint():
    m = build_sawtooth_cylinder(0.3, 40.0, 40, neck=0.1, window=1)
    p = m.descriptor.profile
    hx, hy = m.spacing
    assert 2 * p.neck / hy >= 4
    half = m.inside.sum(axis=0) * hy / 2
    i = np.argmin(np.abs(m.x - 20.0))
    assert abs(half[i] - 1.0) <= hy


def test_sawtooth_slope_scan():
    p = SawtoothProfile(40.0, 0.1)
    s = np.linspace(2, 40, 200001)
    slope = np.diff(p(s)) / np.diff(s)
    assert slope.max() <= 2 / (40 - 4) + 1e-6
    assert slope.min() >= -1e-12
    assert float(p(20.0)) == pytest.approx(1.0, abs=1e-12)
    assert not p.violations()


def test_sawtooth_neck_area_within_two_cells():
    m = build_sawtooth_cylinder(0.61, 16.0, 16, window=1)
    p = m.descriptor.profile
    hx, hy = m.spacing
    cols = (m.x >= 1) & (m.x <= 2)
    area = m.inside[:, cols].sum() * hx * hy
    assert abs(area - p.neck_area()) <= 2 * hx * hy


def test_sawtooth_errors():
    with pytest.raises(ValueError):
        build_sawtooth_cylinder(0.6, 4.0, 16)
    with pytest.raises(ProfileViolation):
        build_sawtooth_cylinder(0.05, 16.0, 16)


def test_mirrored_profile():
    p = SawtoothProfile(16.0, 0.25)
    q = MirroredProfile(p)
    s = np.linspace(0, 16, 101)
    np.testing.assert_array_equal(q(s), p(16.0 - s))
    np.testing.assert_array_equal(q.slope(s), -p.slope(16.0 - s))


def test_mirrored_mask_is_reflection():
    a = build_sawtooth_cylinder(0.61, 16.0, 16, window=1)
    b = build_sawtooth_cylinder(0.61, 16.0, 16, window=1, mirror=True)
    assert np.array_equal(a.inside, b.inside[:, ::-1])


# -- Omega3 ----------------------------------------------------------------------

def test_omega3_profile_values():
    spec = Omega3Spec(0.4, 2.0, 1.0, enforce=False)
    e = spec.eps
    assert float(spec.h(0.0)) == pytest.approx(2 * e)
    s = np.linspace(1, 1 / e ** 2, 50)
    np.testing.assert_allclose(spec.h(s), e)
    assert float(spec.h(3 / e ** 2 + spec.kappa)) == pytest.approx(1 + spec.kappa)
    assert 1 + spec.kappa == pytest.approx(spec.L2 / 2)
    assert spec.L1 == pytest.approx(2 * (3 / e ** 2 + 2.0))


def test_omega3_constraints():
    with pytest.raises(ConstraintViolation):
        Omega3Spec(0.4, 2.0, 1.0)  # kappa < 4R
    with pytest.raises(ConstraintViolation):
        Omega3Spec(0.5, 10.0, 2.0)  # R > 1/(2 eps)
    assert Omega3Spec(0.4, 2.0, 1.0, enforce=False).violations()


def test_cutoff_chi_shape():
    s = np.linspace(0, 1, 10001)
    c = cutoff_chi(s)
    assert c[0] == 0.0 and c[-1] == 1.0
    assert np.all(np.diff(c) >= 0)
    # flat at 0, steep at 1
    assert cutoff_chi(0.05) < 1e-8
    assert (cutoff_chi(1.0) - cutoff_chi(1 - 1e-8)) / 1e-8 > 1e3


# -- geometric conditions -------------------------------------------------------

def test_exterior_ball_flat_and_corner():
    m = build_lattice_domain(RectHole((0.5, 0.5), (0.5, 0.5)), PeriodSpec((1.0, 1.0), 32))
    assert check_exterior_ball(m, (0.5, 0.25), 0.1)
    assert check_exterior_ball(m, (0.5, 0.25), 0.2)
    assert not check_exterior_ball(m, (0.25, 0.25), 0.2)


def test_exterior_ball_omega3(omega3_admissible):
    spec, m = omega3_admissible
    s = np.linspace(2 / spec.eps ** 2, spec.L1 / 2 - 0.02, 40)
    assert all(check_exterior_ball(m, (si, float(spec.h(si))), spec.R ** 2) for si in s)


def test_sliding_vacuous_ball():
    m = build_lattice_domain(RectHole((0.5, 0.5), (0.25, 0.25)), PeriodSpec((1.0, 1.0), 32), window=3)
    assert check_sliding_condition(m, (0.05, 0.05), 0.1)


def test_sliding_along_omega3_axis(omega3_admissible):
    spec, m = omega3_admissible
    for lam in np.linspace(2 * spec.R, 3 / spec.eps ** 2 - spec.R, 12):
        assert check_sliding_condition(m, (lam, 0.0), spec.R)


def test_sliding_fails_before_mirrored_opening():
    m = build_sawtooth_cylinder(0.6, 16.0, 16, window=2, mirror=True)
    H = m.period.lengths[1]
    assert not check_sliding_condition(m, (16 - 1 - 0.1, H / 2), 1.0)
    s = build_sawtooth_cylinder(0.6, 16.0, 16, window=2)
    assert check_sliding_condition(s, (2.5, H / 2), 1.0)


def test_sliding_shrinking_vacuous_ball(rng):
    m = build_lattice_domain(RectHole((0.5, 0.5), (0.25, 0.25)), PeriodSpec((1.0, 1.0), 32), window=3)
    pts, _ = m.boundary_samples
    for _ in range(50):
        z = rng.uniform(0, 3, 2)
        R = rng.uniform(0.05, 0.6)
        dmin = np.min(np.hypot(*(pts - z).T))
        if check_sliding_condition(m, z, R):
            r_small = rng.uniform(0, min(R, dmin))
            assert check_sliding_condition(m, z, r_small)


def test_slidable_set(omega3_admissible):
    spec, m = omega3_admissible
    S = slidable_set(m, spec.R)
    X, Y = m.centers
    hx, hy = m.spacing
    on_axis = (np.abs(Y) <= hy / 2 + 1e-12) & (X >= 2 * spec.R + hx) & (X <= spec.L1 - hx)
    assert S[on_axis & m.inside].all()
    jj, ii = np.nonzero(S)
    for k in range(0, jj.size, max(1, jj.size // 100)):
        assert check_sliding_condition(m, (X[jj[k], ii[k]], Y[jj[k], ii[k]]), spec.R)


def test_slidable_set_union_with_vertical_translate(omega3_admissible):
    from scipy import ndimage
    spec, m = omega3_admissible
    S = slidable_set(m, spec.R)
    # stack S and its translate by L2 e2: the copies meet along the channel axis
    both = np.vstack([S, S])
    _, n = ndimage.label(both)
    assert n == 1
