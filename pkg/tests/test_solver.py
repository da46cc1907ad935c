import numpy as np
import pytest
from hypothesis import given, strategies as st

from invasion_lab.errors import CflViolation, NonFiniteValue
from invasion_lab.geometry import PeriodSpec, RectHole, StarHole, build_lattice_domain
from invasion_lab.reaction import cubic, tabulated
from invasion_lab.solver import (Coefficients, Field, FrontPosition, GlobalMax, GlobalMin, Mass, RegionMax,
                                 RegionMin, SolverConfig, Stepper, assemble_operator, make_bump,
                                 make_front_like, radial_field, rightmost_crossing, run, step)

ZERO = tabulated([0.0, 1.0], [0.0, 0.0])


@pytest.fixture(scope="module")
def perforated():
    return build_lattice_domain(RectHole((0.5, 0.5), (0.5, 0.25)), PeriodSpec((1.0, 1.0), 16), window=2)


def heat_error(N, scheme):
    m = build_lattice_domain(None, PeriodSpec((1.0,), N))
    X, _ = m.inside_centers()
    u0 = Field(0.5 + 0.1 * np.cos(2 * np.pi * X), m)
    dt = "auto" if scheme == "explicit" else 1.0 / N ** 2
    tr = run(u0, Coefficients(m), ZERO, SolverConfig(0.1, dt=dt, scheme=scheme))
    exact = 0.5 + 0.1 * np.exp(-(2 * np.pi) ** 2 * 0.1) * np.cos(2 * np.pi * X)
    return np.abs(tr.final.values - exact).max(), tr.final.values


# -- exactness and conservation -----------------------------------------------------

@pytest.mark.parametrize("scheme", ["explicit", "imex"])
def test_constant_state_is_steady(perforated, scheme):
    u = Field(np.full(perforated.n_inside, 0.37), perforated)
    for _ in range(5):
        u = step(u, Coefficients(perforated), ZERO, 5e-4, scheme)
    assert np.all(u.values == 0.37) or np.allclose(u.values, 0.37, atol=1e-15, rtol=0)


def test_heat_mode_amplitude():
    # Fourier mode decays like exp(-(2 pi / L)^2 t) at dx = L / 256 over t = 0.1 L^2
    _, u = heat_error(256, "explicit")
    amp = 0.5 * (u.max() - u.min())
    assert amp == pytest.approx(0.1 * np.exp(-(2 * np.pi) ** 2 * 0.1), rel=0.01)


@pytest.mark.parametrize("scheme", ["explicit", "imex"])
def test_heat_mode_second_order(scheme):
    e = [heat_error(N, scheme)[0] for N in (32, 64, 128)]
    assert 3.5 <= e[0] / e[1] <= 4.5
    assert 3.5 <= e[1] / e[2] <= 4.5


@pytest.mark.parametrize("scheme", ["explicit", "imex"])
def test_mass_conservation_neumann(perforated, scheme, rng):
    u = Field(rng.uniform(0, 1, perforated.n_inside), perforated)
    coeff = Coefficients(perforated)
    area = perforated.cell_area
    m0 = u.values.sum() * area
    for _ in range(10):
        u = step(u, coeff, ZERO, 5e-4, scheme)
        assert abs(u.values.sum() * area - m0) <= 1e-10


def test_uniform_threshold_is_equilibrium(perforated):
    f = cubic(0.25)
    u0 = Field(np.full(perforated.n_inside, 0.25), perforated)
    tr = run(u0, Coefficients(perforated), f, SolverConfig(2.0), [GlobalMax()])
    assert np.all(np.abs(tr.probe("max") - 0.25) <= 1e-9)


def test_operator_rows_sum_to_zero(perforated):
    Ld, Lq = assemble_operator(perforated, Coefficients(perforated, q=(0.3, -0.2)))
    assert np.abs(np.asarray(Ld.sum(axis=1))).max() < 1e-9
    assert np.abs(np.asarray(Lq.sum(axis=1))).max() < 1e-9
    assert abs(Ld - Ld.T).max() < 1e-9


# -- comparison, range, periodicity ----------------------------------------------

@pytest.mark.parametrize("scheme", ["explicit", "imex"])
def test_comparison_principle_random_pairs(perforated, scheme, rng):
    f = cubic(0.25)
    coeff = Coefficients(perforated, q=(0.2, 0.1))
    st_ = Stepper(perforated, coeff, f, 0.2 * coeff.cfl_limit() if scheme == "explicit" else 0.02, scheme)
    n = perforated.n_inside
    for _ in range(100):
        u = rng.uniform(0, 1, n)
        v = np.minimum(1.0, u + rng.uniform(0, 0.3, n) * (rng.uniform(size=n) < 0.5))
        for _ in range(10):
            u, v = st_(u), st_(v)
            assert np.all(u <= v + 1e-12)


@pytest.mark.parametrize("scheme", ["explicit", "imex"])
def test_range_preservation(perforated, scheme, rng):
    f = cubic(0.25)
    coeff = Coefficients(perforated)
    st_ = Stepper(perforated, coeff, f, coeff.cfl_limit() if scheme == "explicit" else 0.05, scheme)
    for _ in range(20):
        u = rng.uniform(0, 1, perforated.n_inside)
        for _ in range(20):
            u = st_(u)
            assert u.min() >= -1e-12 and u.max() <= 1 + 1e-12


def test_periodicity_preserved(rng):
    m = build_lattice_domain(StarHole.star(5, 0.3, 0.15, (0.5, 0.5)), PeriodSpec((1.0, 1.0), 32), window=2)
    n = m.period.cells
    base = rng.uniform(0, 1, (n[1], n[0]))
    g = np.tile(base, (2, 2))
    u = Field(m.from_grid(g), m)
    for _ in range(20):
        u = step(u, Coefficients(m), cubic(0.25), 1e-4)
    G = m.to_grid(u.values)
    assert np.abs(G[:, : n[0]] - G[:, n[0]:]).max() <= 1e-12
    assert np.abs(G[: n[1]] - G[n[1]:]).max() <= 1e-12


# -- errors --------------------------------------------------------------------

def test_cfl_violation(perforated):
    coeff = Coefficients(perforated)
    with pytest.raises(CflViolation):
        Stepper(perforated, coeff, cubic(0.25), 2 * coeff.cfl_limit())


def test_cfl_formula(perforated):
    coeff = Coefficients(perforated, q=(0.5, 0.0))
    h = perforated.min_spacing
    assert coeff.cfl_limit() == pytest.approx(0.9 * h * h / (4 + 0.5 * h))


def test_non_finite_value(perforated):
    u = Field(np.full(perforated.n_inside, np.nan), perforated)
    with pytest.raises(NonFiniteValue):
        step(u, Coefficients(perforated), cubic(0.25), 1e-4)


def test_ellipticity_required(perforated):
    with pytest.raises(ValueError):
        Coefficients(perforated, A=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_drift_flags(perforated):
    flags = Coefficients(perforated, q=0.0).drift_flags()
    assert all(flags.values())
    flags = Coefficients(perforated, q=(1.0, 0.0)).drift_flags()
    assert not flags["zero_mean"] and not flags["no_flux"]


# -- initial data ----------------------------------------------------------------

def test_front_like_tails_and_monotone():
    m = build_lattice_domain(None, PeriodSpec((20.0,), 8), periodic=False)
    u = make_front_like(m, (1.0,), shift=10.0, width=2.0).values
    X, _ = m.inside_centers()
    assert np.all(u[X < 8] == 1.0) and np.all(u[X > 12] == 0.0)
    assert np.all(np.diff(u) <= 0)
    step_ = make_front_like(m, (1.0,), shift=10.0, width=0.0).values
    np.testing.assert_array_equal(step_, (X < 10).astype(float))


def test_bump_plateau_support_range():
    m = build_lattice_domain(None, PeriodSpec((4.0, 4.0), 8))
    u = make_bump(m, (2.0, 2.0), 1.0, 0.6).values
    X, Y = m.inside_centers()
    r = np.hypot(X - 2, Y - 2)
    assert np.all(u[r < 1 - 1 / 8] == 0.6)
    assert np.all(u[r > 1 + 1 / 8] == 0.0)
    assert u.min() >= 0 and u.max() <= 0.6
    with pytest.raises(ValueError):
        make_bump(m, (2.0, 2.0), 1.0, 1.5)


# -- probes and runs -------------------------------------------------------------

def test_probes(perforated, rng):
    u = rng.uniform(0, 1, perforated.n_inside)
    probes = [GlobalMax(), GlobalMin(), Mass(), RegionMin("rmin", (0, 1, 0, 1)), RegionMax("rmax", (0, 1, 0, 1))]
    for p in probes:
        p.prepare(perforated)
    assert probes[0](u) == u.max() and probes[1](u) == u.min()
    assert probes[2](u) == pytest.approx(u.sum() * perforated.cell_area)
    X, Y = perforated.inside_centers()
    sel = (X < 1) & (Y < 1)
    assert probes[3](u) == u[sel].min() and probes[4](u) == u[sel].max()


def test_rightmost_crossing_interpolates():
    pos = np.arange(5.0)
    vals = np.array([1.0, 1.0, 0.8, 0.2, 0.0])
    assert rightmost_crossing(vals, pos, 0.5) == pytest.approx(2.5)
    assert np.isnan(rightmost_crossing(np.zeros(5), pos, 0.5))


def test_front_advances_in_bistable_medium():
    m = build_lattice_domain(None, PeriodSpec((40.0,), 8), periodic=False)
    u0 = make_front_like(m, (1.0,), shift=10.0)
    tr = run(u0, Coefficients(m), cubic(0.25), SolverConfig(20.0, scheme="imex", dt=0.05),
             [FrontPosition("front", (1.0,))])
    x = tr.probe("front")
    assert np.all(np.diff(x[5:]) > 0)


def test_ordered_runs_stay_ordered(perforated, rng):
    f = cubic(0.25)
    coeff = Coefficients(perforated)
    u = rng.uniform(0, 0.5, perforated.n_inside)
    v = u + 0.3
    a = run(Field(u, perforated), coeff, f, SolverConfig(1.0, snapshot_every=0.1))
    b = run(Field(v, perforated), coeff, f, SolverConfig(1.0, snapshot_every=0.1))
    for (_, x), (_, y) in zip(a.snapshots, b.snapshots):
        assert np.all(x <= y + 1e-12)


@given(st.floats(0.0, 1.0))
def test_radial_field_matches_profile(c):
    m = build_lattice_domain(None, PeriodSpec((4.0, 4.0), 8))
    u = radial_field(m, (2.0, 2.0), lambda r: np.exp(-c * r)).values
    X, Y = m.inside_centers()
    np.testing.assert_allclose(u, np.exp(-c * np.hypot(X - 2, Y - 2)))
