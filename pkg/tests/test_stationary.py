import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invasion_lab.errors import NoPositiveSolution, ResidualPositive
from invasion_lab.geometry import PeriodSpec, RectHole, build_lattice_domain
from invasion_lab.reaction import cubic, combustion_plateau, make_shifted_minorant
from invasion_lab.solver import Coefficients, Stepper, auto_dt, radial_field
from invasion_lab.stationary import (ParaboloidSubsolution, ball_cells, collar_profile, discrete_dirichlet_steady,
                                     discrete_radial_steady,
                                     energy, evolve_ball_dirichlet, exact_cubic_front, find_min_R,
                                     front_profile_1d, minimize_energy, paraboloid_eta,
                                     paraboloid_subsolution, solve_radial_dirichlet)
from invasion_lab.geometry import SawtoothProfile

F = cubic(0.25)
F16 = cubic(0.25, rate=16.0)


@pytest.fixture(scope="module")
def u30():
    return solve_radial_dirichlet(F, 30.0, n_samples=30001)


@pytest.fixture(scope="module")
def u9():
    return solve_radial_dirichlet(F, 9.0)


@pytest.fixture(scope="module")
def front():
    return front_profile_1d(F)


@pytest.fixture(scope="module")
def shifted_front():
    # front of the perturbed nonlinearity joining 1 - mu to -mu
    return front_profile_1d(make_shifted_minorant(F, 0.05))


@pytest.fixture(scope="module")
def energy_mask():
    return build_lattice_domain(None, PeriodSpec((24.0, 24.0), 8))


# -- radial Dirichlet solutions --------------------------------------------------------

def test_radial_solution_shape(u30):
    u = u30.u
    assert 0.25 < u30.center_value < 1
    assert abs(u[-1]) <= 1e-8
    assert np.all(np.diff(u) <= 0)
    assert np.all((u[:-1] > 0) & (u[:-1] < 1))
    assert u30.M == pytest.approx(float(u30(1.0)))
    assert u30.M_prime == u30.center_value


def test_radial_ode_residual(u30):
    r, u = u30.r, u30.u
    h = r[1] - r[0]
    i = np.arange(1, r.size - 1)
    res = (u[i + 1] - 2 * u[i] + u[i - 1]) / h ** 2 + (u[i + 1] - u[i - 1]) / (2 * h * r[i]) + F(u[i])
    assert np.abs(res).max() < 1e-6


def test_radial_below_threshold():
    with pytest.raises(NoPositiveSolution):
        solve_radial_dirichlet(F, 7.0)


def test_radial_sampling_refinement(u9):
    fine = solve_radial_dirichlet(F, 9.0, n_samples=4001)
    assert abs(fine.center_value - u9.center_value) < 1e-4
    np.testing.assert_allclose(fine(u9.r), u9.u, atol=1e-4)


def test_radial_rate_scaling(u9):
    # f -> k f shrinks lengths by sqrt(k)
    s = solve_radial_dirichlet(F16, 9.0 / 4)
    assert s.center_value == pytest.approx(u9.center_value, abs=1e-8)


def test_find_min_R_monotone_and_self_consistent():
    R1 = find_min_R(F16, 0.9, 0.5, rtol=1e-2)
    R2 = find_min_R(F16, 0.9, 1.0, rtol=1e-2)
    assert R1 < R2
    assert float(solve_radial_dirichlet(F16, R2)(1.0)) > 0.9
    # just below the returned radius the bound fails (or no solution exists)
    try:
        below = float(solve_radial_dirichlet(F16, R2 * 0.97)(1.0))
    except NoPositiveSolution:
        below = 0.0
    assert below <= 0.9


def test_2d_injection_is_discrete_subsolution():
    s = solve_radial_dirichlet(F16, 9.0 / 4, n_samples=40001)
    m = build_lattice_domain(None, PeriodSpec((5.0, 5.0), 128))
    u = radial_field(m, (2.5, 2.5), s).values
    co = Coefficients(m)
    st_ = Stepper(m, co, F16, co.cfl_limit())
    assert (u - st_(u)).max() <= 1e-8


@pytest.mark.parametrize("scheme", ["explicit", "imex"])
def test_discrete_steady_grows_monotonically(scheme):
    s = solve_radial_dirichlet(F16, 9.0 / 4)
    m = build_lattice_domain(RectHole((1.0, 1.0), (0.5, 0.5)), PeriodSpec((8.0, 8.0), 16))
    co = Coefficients(m)
    u = discrete_dirichlet_steady(m, (4.5, 4.0), s, co).values
    assert u.min() >= 0 and u.max() > 0.9
    step = Stepper(m, co, F16, auto_dt(co, F16, scheme), scheme)
    for _ in range(100):
        nxt = step(u)
        assert (nxt - u).min() >= -1e-10
        u = nxt


# -- ball evolution ------------------------------------------------------------------

@pytest.fixture(scope="module")
def ball(u9):
    return evolve_ball_dirichlet(u9, 12.0, 60.0)


def test_ball_exceeds_center_value(ball):
    assert ball.exceeds
    assert ball.inner_min > ball.M_prime


def test_ball_monotone_in_time(ball):
    assert np.all(np.diff(ball.profiles, axis=0) >= -1e-10)


def test_ball_radially_decreasing(ball):
    assert np.all(np.diff(ball.profiles, axis=1) <= 1e-12)


def test_discrete_steady_is_fixed_point(u9):
    v = discrete_radial_steady(F, u9, 9.0 / 450)
    assert np.abs(v - u9(np.arange(v.size) * 9.0 / 450)).max() < 1e-3


def test_ball_requires_larger_radius(u9):
    with pytest.raises(ValueError):
        evolve_ball_dirichlet(u9, 8.0, 1.0)


# -- energy -----------------------------------------------------------------------

def test_energy_of_zero(energy_mask):
    assert energy(np.zeros(energy_mask.n_inside), energy_mask, 6.0, 1.0, F) == 0.0


def test_energy_collar_bound(energy_mask):
    m = energy_mask
    for r in (6.0, 10.0):
        E = energy(collar_profile(m, r), m, r, 1.0, F)
        X, Y = m.inside_centers()
        d = np.hypot(X - 12, Y - 12)
        a = m.cell_area
        inner = (d < r - 1).sum() * a
        collar = ((d < r) & (d >= r - 1)).sum() * a
        Fmin = F.primitive(np.linspace(0, 1, 1001)).min()
        assert E <= 0.5 * collar - F.primitive(1.0) * inner - Fmin * collar


def test_energy_quadrature_converges():
    def smooth(m, r):
        X, Y = m.inside_centers()
        d = np.hypot(X - 6, Y - 6)
        return np.where(d < r, np.cos(0.5 * np.pi * d / r) ** 2, 0.0)
    vals = []
    for res in (16, 32):
        m = build_lattice_domain(None, PeriodSpec((12.0, 12.0), res))
        vals.append(energy(smooth(m, 5.0), m, 5.0, 1.0, F))
    assert abs(vals[1] / vals[0] - 1) < 0.005


def test_energy_rejects_support_outside_ball(energy_mask):
    with pytest.raises(ValueError):
        energy(np.ones(energy_mask.n_inside), energy_mask, 3.0, 1.0, F)


def test_minimize_small_radius_collapses(energy_mask):
    rep = minimize_energy(energy_mask, 4.0, 1.0, F, starts=("collar", "zero", "random", "random"))
    assert rep.trivial and rep.energy == 0.0
    assert all(b["max_value"] < 1e-4 for b in rep.basins)


def test_minimize_large_radius(energy_mask):
    m = energy_mask
    rep = minimize_energy(m, 10.0, 1.0, F)
    assert rep.energy < 0 and not rep.trivial
    assert rep.max_value < 1
    assert np.all(rep.minimizer.values[~ball_cells(m, 10.0)] == 0)
    assert rep.energy <= energy(collar_profile(m, 10.0), m, 10.0, 1.0, F)
    assert np.all(np.diff(rep.history) <= 1e-12 * np.maximum(1, np.abs(rep.history[1:])))
    d = rep.to_dict()
    assert d["trivial"] is False and len(d["basins"]) == 3


# -- fronts -------------------------------------------------------------------------

def test_exact_cubic_front_residual():
    # phi = 1/(1 + e^{z/sqrt2}) with c = (1 - 2 theta)/sqrt2
    for theta in (0.1, 0.25, 0.4):
        phi, c = exact_cubic_front(theta)
        z = np.linspace(-20, 20, 2001)
        p = phi(z)
        d1 = -p * (1 - p) / np.sqrt(2)
        d2 = -(1 - 2 * p) * d1 / np.sqrt(2)
        f = cubic(theta)
        assert np.abs(d2 + c * d1 + f(p)).max() < 1e-10


def test_front_speed_cubic(front):
    _, c = exact_cubic_front(0.25)
    assert front.c == pytest.approx(c, abs=1e-4)
    assert front.c == pytest.approx(0.3535533906, abs=1e-8)


def test_front_profile_monotone_tails(front):
    assert np.all(np.diff(front.phi) < 0)
    assert front.phi[0] > 1 - 1e-6 and front.phi[-1] < 1e-6
    phi, _ = exact_cubic_front(0.25)
    np.testing.assert_allclose(front(front.z), phi(front.z), atol=1e-5)


def test_front_balanced_and_reversed():
    assert abs(front_profile_1d(cubic(0.5)).c) < 1e-4
    assert front_profile_1d(cubic(0.75)).c < 0


@settings(max_examples=3)
@given(st.floats(0.1, 0.45))
def test_front_speed_reflection_antisymmetric(theta):
    # -f(1 - s) for the cubic with threshold theta is the cubic with threshold 1 - theta
    c1 = front_profile_1d(cubic(theta)).c
    c2 = front_profile_1d(cubic(1 - theta)).c
    assert abs(c1 + c2) < 2e-4


def test_front_combustion():
    c = front_profile_1d(combustion_plateau()).c
    assert c > 0


# -- paraboloid subsolution ------------------------------------------------------------

def test_paraboloid_interior_residual(shifted_front):
    fr = shifted_front
    c = 0.8 * fr.c
    psi = paraboloid_subsolution(fr, c, paraboloid_eta(fr.c, c, 0.05), f=F)
    assert psi.verify_interior(n_samples=100000) <= 1e-6


def test_paraboloid_needs_perturbed_front(front):
    # with the unperturbed front the curvature term is not absorbed
    c = 0.8 * front.c
    psi = paraboloid_subsolution(front, c, paraboloid_eta(front.c, c, 0.05), f=F)
    with pytest.raises(ResidualPositive):
        psi.verify_interior(n_samples=100000)


def test_paraboloid_planar_is_exact(front):
    psi = ParaboloidSubsolution(front, front.c, 0.0)
    rng = np.random.default_rng(0)
    z = rng.uniform(front.z[0], front.z[-1], 10000)
    res = psi.residual(0.0, z, np.zeros_like(z))
    assert np.abs(res).max() < 1e-6


def test_paraboloid_cylinder_boundary(shifted_front):
    fr = shifted_front
    c = 0.8 * fr.c
    eta = paraboloid_eta(fr.c, c, 0.05)
    psi = paraboloid_subsolution(fr, c, eta, f=F)
    prof = SawtoothProfile(400.0, 0.25)
    assert -2 / (400 - 4) + 2 * eta * float(prof(2.0)) > 0
    assert psi.verify_cylinder_boundary(prof) <= 1e-12
    # a short period has slopes too steep for this eta
    with pytest.raises(ResidualPositive):
        psi.verify_cylinder_boundary(SawtoothProfile(16.0, 0.25))


def test_paraboloid_speed_must_be_below_front(front):
    with pytest.raises(ValueError):
        paraboloid_subsolution(front, front.c, 0.1)
