"""Named experiments: domain, medium, datum, horizon and the expected verdict.

Every builder returns a :class:`Scenario`; ``Scenario.run`` integrates it
and classifies the outcome.  The default parameters are tuned so that each
run fits in a few minutes on one core.  Reaction rates are scaled (lengths
go like 1/sqrt(rate)) so that critical radii are commensurate with
geometric features that a grid of at least eight cells per unit resolves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .analysis import DELTA_BLK, Verdict, classify, compact_probes, measure_speed, w_star, _fit
from .errors import ConfigError, LevelNeverCrossed
from .geometry import (NarrowNeck, Omega3Spec, PeriodSpec, RectHole, StarHole, build_lattice_domain,
                       build_omega3, build_sawtooth_cylinder, smoothstep, star_lattice_period)
from .reaction import Reaction, combustion_plateau, compute_theta, cubic, reaction_from_config
from .solver import (Coefficients, Field, FrontPosition, GlobalMax, RegionMax, RegionMin, SolverConfig,
                     Trajectory, make_bump, make_front_like, radial_field, run)
from .stationary import find_min_R, solve_radial_dirichlet


@dataclass
class Scenario:
    """A fully specified run plus the classification settings."""

    name: str
    mask: object
    coeff: Coefficients
    reaction: Reaction
    u0: Field
    horizon: float
    probes: list
    classify_kw: dict = dc_field(default_factory=dict)
    expected: str | None = None
    scheme: str = "explicit"
    dt: object = "auto"
    record_every: float | None = None
    snapshot_every: float | None = None
    params: dict = dc_field(default_factory=dict)
    post: object = None  # optional callable(result) adding extras

    def config(self):
        return SolverConfig(t_end=self.horizon, dt=self.dt, scheme=self.scheme,
                            record_every=self.record_every or self.horizon / 200,
                            snapshot_every=self.snapshot_every)

    def run(self, callback=None) -> "ScenarioResult":
        t0 = time.perf_counter()
        traj = run(self.u0, self.coeff, self.reaction, self.config(), self.probes, callback)
        verdict = classify(traj, **self.classify_kw)
        res = ScenarioResult(self, traj, verdict, {}, time.perf_counter() - t0)
        if self.post is not None:
            self.post(res)
        return res


@dataclass
class ScenarioResult:
    scenario: Scenario
    trajectory: Trajectory
    verdict: Verdict
    extras: dict
    wall_time: float

    @property
    def matches(self):
        exp = self.scenario.expected
        if exp is None:
            return True
        return all(self.verdict.has(k) for k in exp.split("+"))

    def summary(self):
        out = self.verdict.to_dict()
        out.update({"scenario": self.scenario.name, "expected": self.scenario.expected,
                    "matches": self.matches, "wall_time": self.wall_time})
        out.update({k: v for k, v in self.extras.items() if np.isscalar(v) or isinstance(v, (list, dict))})
        return out


def _rate_R(f, eta=0.5):
    """Smallest radius whose Dirichlet solution exceeds eta at the center."""
    return find_min_R(f, eta, 0.0, rtol=1e-3)


def _cell_box(L, i, j):
    return (i * L[0], (i + 1) * L[0], j * L[1], (j + 1) * L[1])


# ---------------------------------------------------------------------------
# star-shaped holes

def scenario_omega1(star: StarHole | None = "default", L=None, f=None, resolution=8, eta=0.5,
                    bump_height=None, horizon=20.0, window=3, expected=None) -> Scenario:
    """Lattice of star-shaped holes with period 2 diam + 2R + 1.

    The datum is the Dirichlet solution u_R centered at a lattice
    translate of (L/2, 0), midway between two holes.  ``star=None`` gives
    the hole-free control.  With ``bump_height`` a flat bump of that
    height and radius R replaces u_R (used for sub-threshold data).
    """
    f = f if f is not None else cubic(0.25, rate=16.0)
    if isinstance(star, str):
        star = StarHole.star(5, r_outer=1.0, r_inner=0.45)
    theta = compute_theta(f)
    homogeneous_bistable = f.kind == "Bistable" and not f.x_dependent
    R = _rate_R(f, eta) if homogeneous_bistable else 2.0
    if L is None:
        L = star_lattice_period(star, R) if star is not None else 2 * R + 5.0
    hole = star.recentered((L / 2, L / 2)) if star is not None else None
    mask = build_lattice_domain(hole, PeriodSpec((L, L), resolution), window=window)
    z = (L * (window // 2) + L / 2, L * (window // 2))
    if bump_height is None:
        uR = solve_radial_dirichlet(f, R)
        u0 = radial_field(mask, z, uR)
    else:
        u0 = make_bump(mask, z, R, bump_height)
    W = L * window
    probes = [GlobalMax()] + compact_probes({"home": (0, W, 0, W)})
    if expected is None:
        expected = "Blocking" if (bump_height is not None and bump_height < theta) else "Invasion"
    return Scenario("omega1", mask, Coefficients(mask), f, u0, horizon, probes,
                    {"compacts": ("home",)}, expected,
                    params={"L": L, "R": R, "eta": eta, "resolution": resolution, "window": window,
                            "star": star.describe() if star is not None else None,
                            "bump_height": bump_height, "reaction": f.to_dict()})


# ---------------------------------------------------------------------------
# narrow necks

NECK_PERIOD = 8.0
NECK_CHAMBER = 3.0
NECK_RATE = 16.0
NECK_APERTURES = (0.375, 0.5, 0.625, 0.75, 1.0, 1.5)


def scenario_blocking(neck_eps=0.375, f=None, resolution=12, period=NECK_PERIOD, chamber=NECK_CHAMBER,
                      horizon=20.0, datum="chamber", window=3, expected=None) -> Scenario:
    """Chambers joined by corridors of width ``neck_eps``.

    ``datum='chamber'`` fills one chamber with 1 (the largest datum
    supported in it); ``datum='front'`` fills the first column of period
    cells and closes the window in x so that the far edge is watched.
    """
    f = f if f is not None else cubic(0.25, rate=NECK_RATE)
    L, c = float(period), float(chamber)
    front = datum == "front"
    win = (max(window, 5), 1) if front else window
    mask = build_lattice_domain(NarrowNeck(neck_eps, c, L), PeriodSpec((L, L), resolution),
                                window=win, periodic=(not front, True))
    X, Y = mask.inside_centers()

    def chamber_at(i, j):
        return (i * L - c, i * L + c, j * L - c, j * L + c)

    def in_chambers(Xa, Ya):
        dx = Xa - np.round(Xa / L) * L
        dy = Ya - np.round(Ya / L) * L
        return (np.abs(dx) <= c) & (np.abs(dy) <= c)

    if front:
        W = L * win[0]
        home = chamber_at(0, 0)
        u0 = Field(np.where(X < L / 2, 1.0, 0.0), mask)
        far = lambda Xa, Ya: in_chambers(Xa, Ya) & (Xa > 1.5 * L)
        edge = (W - 2 * L, W, 0, L)
        regions = {"home": lambda Xa, Ya: in_chambers(Xa, Ya) & (Xa < L / 2), "far": far, "edge": edge}
    else:
        i0 = window // 2
        home = chamber_at(i0, i0)
        sel = (X >= home[0]) & (X <= home[1]) & (Y >= home[2]) & (Y <= home[3])
        u0 = Field(sel.astype(float), mask)
        far = lambda Xa, Ya: in_chambers(Xa, Ya) & (np.hypot(Xa - i0 * L, Ya - i0 * L) > 0.8 * L)
        regions = {"home": home, "far": far}
    probes = [GlobalMax()] + compact_probes(regions)
    kw = {"compacts": ("home",), "far": ("far",)}
    return Scenario("blocking", mask, Coefficients(mask), f, u0, horizon, probes, kw, expected,
                    params={"aperture": neck_eps, "period": L, "chamber": c, "resolution": resolution,
                            "datum": datum, "reaction": f.to_dict()})


def aperture_sweep(apertures=NECK_APERTURES, **kw):
    """Run the narrow-neck scenario over apertures; returns [(aperture, result)]."""
    return [(a, scenario_blocking(a, **kw).run()) for a in apertures]


# ---------------------------------------------------------------------------
# sawtooth cylinder

CYL_RATE = 4.0


def scenario_cylinder(eps=0.61, L=16.0, f=None, resolution=16, window=8, horizon=200.0, mirror=False,
                      shift_periods=0, expected="OrientedInvasion") -> Scenario:
    """Sawtooth cylinder closed at both window ends; bump in the second period.

    The datum is a height-1 bump of radius R (the smallest radius with a
    Dirichlet solution above 1/2 at the center) at x1 = L + L/2.  The left
    region is everything one unit or more to the left of the bump's neck.
    With ``mirror`` the geometry is reflected and the roles of left and
    right swap.
    """
    f = f if f is not None else cubic(0.25, rate=CYL_RATE)
    mask = build_sawtooth_cylinder(eps, L, resolution, window=window, periodic=False, mirror=mirror)
    Hy = mask.period.lengths[1]
    W = L * window
    R = _rate_R(f)
    k = 1 + shift_periods
    if not mirror:
        x0 = k * L + L / 2
        e, origin = (1.0, 0.0), (0.0, Hy / 2)
        left = (0.0, k * L, 0.0, Hy)
    else:
        x0 = W - (k * L + L / 2)
        e, origin = (-1.0, 0.0), (W - 1e-9, Hy / 2)
        left = (W - k * L, W, 0.0, Hy)
    u0 = make_bump(mask, (x0, Hy / 2), R, 1.0)
    home = (x0 - 0.5, x0 + 0.5, Hy / 2 - 0.5, Hy / 2 + 0.5)
    probes = [GlobalMax(), FrontPosition("front:right", e, origin=origin), RegionMax("max:left", left),
              *compact_probes({"home": home})]
    return Scenario("cylinder", mask, Coefficients(mask), f, u0, horizon, probes,
                    {"compacts": ("home",)}, expected, scheme="imex", dt=0.05,
                    params={"eps": eps, "L": L, "neck": mask.descriptor.profile.neck, "R": R,
                            "resolution": resolution, "window": window, "mirror": mirror,
                            "shift_periods": shift_periods, "reaction": f.to_dict()})


# ---------------------------------------------------------------------------
# asymmetric lattice

OMEGA3_DEFAULT = Omega3Spec(eps=0.4, kappa=2.0, R=1.0, enforce=False)


def scenario_omega3(spec: Omega3Spec = OMEGA3_DEFAULT, f=None, resolution=8, window=9, horizon=1300.0,
                    dt=0.2, bump_radius=4.0, shift_periods=0, level_M=0.5,
                    expected="OrientedInvasion") -> Scenario:
    """Channels narrowing abruptly leftward and opening slowly rightward.

    The window is closed in x and periodic in y.  The datum is a height-1
    bump in the width-2 part of the channel of the second period cell.
    Occupancy probes record the minimum over each period cell; the times
    at which they exceed ``level_M`` give the period T of the invasion.
    """
    f = f if f is not None else cubic(0.25, rate=1.0)
    mask = build_omega3(spec, resolution, window=(window, 1), periodic=(False, True))
    L1, L2 = spec.L1, spec.L2
    k = 1 + shift_periods
    x0 = k * L1 + 2.5 / spec.eps ** 2
    u0 = make_bump(mask, (x0, 0.0), bump_radius, 1.0)
    left = (0.0, k * L1 - 1.0, 0.0, L2)
    home = lambda X, Y, x0=x0: (np.abs(X - x0) <= 0.5) & (np.minimum(Y, L2 - Y) <= 0.5)
    cells = {f"cell{a}": (a * L1 + 2.0 * spec.R, (a + 1) * L1 + 2.0 * spec.R, 0.0, L2)
             for a in range(k, window - 1)}
    probes = [GlobalMax(), FrontPosition("front:right", (1.0, 0.0), origin=(0.0, 0.5 / resolution)),
              RegionMax("max:left", left), RegionMin("min:home", home), RegionMax("max:home", home)]
    probes += [RegionMin(f"min:{n}", r) for n, r in cells.items()]

    def post(res):
        times = res.trajectory.times
        occ = []
        for a in range(k, window - 1):
            m = res.trajectory.probe(f"min:cell{a}")
            hit = np.flatnonzero(m > level_M)
            occ.append(float(times[hit[0]]) if hit.size else float("nan"))
        occ = np.array(occ)
        res.extras["occupancy_times"] = occ.tolist()
        ok = np.isfinite(occ)
        if ok.sum() >= 2:
            idx = np.arange(occ.size)[ok]
            T, _ = _fit(idx.astype(float), occ[ok])
            res.extras["period_T"] = T
            res.extras["occupancy_speed"] = L1 / T

    return Scenario("omega3", mask, Coefficients(mask), f, u0, horizon, probes, {"compacts": ("home",)},
                    expected, scheme="imex", dt=dt, record_every=horizon / 400,
                    params={"eps": spec.eps, "kappa": spec.kappa, "R": spec.R, "L1": L1, "L2": L2,
                            "resolution": resolution, "window": window, "bump_radius": bump_radius,
                            "shift_periods": shift_periods, "reaction": f.to_dict()},
                    post=post)


# ---------------------------------------------------------------------------
# speed bound

def inward_drift(strength, core=2.0, width=1.0):
    """q = -strength x/|x| outside a core, switched on smoothly."""
    def q(X, Y):
        r = np.hypot(X, Y)
        s = strength * smoothstep((r - core) / width) / np.maximum(r, 1e-12)
        return -s * X, -s * Y
    return q


def scenario_speed_bound(f=None, lam=1.0, Lam=1.0, drift=0.0, cells=256, resolution=8, horizon=40.0,
                         bump_radius=4.0, n_rays=5) -> Scenario:
    """Radial spreading in a homogeneous medium, measured against the explicit bound.

    Only the quarter plane is simulated: its walls are symmetry planes
    for A = diag(Lam, lam) and a radial drift, so the rays at angles
    k pi/8 (k = 0..4) cover the eight principal directions of the full
    plane.
    """
    f = f if f is not None else combustion_plateau(0.25, (0.3, 0.9), 0.1)
    side = cells / resolution
    mask = build_lattice_domain(None, PeriodSpec((side, side), resolution), periodic=False)
    A = np.array([[Lam, 0.0], [0.0, lam]]) if lam != Lam else Lam
    coeff = Coefficients(mask, A=A, q=inward_drift(drift) if drift else 0.0)
    u0 = make_bump(mask, (0.0, 0.0), bump_radius, 1.0)
    angles = np.linspace(0, np.pi / 2, n_rays)
    probes = [GlobalMax()] + [FrontPosition(f"front:{k}", (np.cos(a), np.sin(a)), origin=(0.0, 0.0))
                              for k, a in enumerate(angles)]
    probes += compact_probes({"home": (0, bump_radius, 0, bump_radius)})
    ws = w_star(f, lam, Lam, -drift)

    def post(res):
        speeds = []
        for k in range(n_rays):
            try:
                speeds.append(measure_speed(res.trajectory, probe=f"front:{k}"))
            except LevelNeverCrossed:
                speeds.append((float("nan"), float("nan")))
        res.extras["ray_speeds"] = [s for s, _ in speeds]
        res.extras["ray_r2"] = [r for _, r in speeds]
        res.extras["min_speed"] = float(np.nanmin([s for s, _ in speeds]))
        res.extras["w_star"] = ws
        res.extras["ratio"] = res.extras["min_speed"] / ws

    return Scenario("speed_bound", mask, coeff, f, u0, horizon, probes, {"compacts": ("home",)},
                    "Invasion", params={"lam": lam, "Lam": Lam, "drift": drift, "cells": cells,
                                        "resolution": resolution, "reaction": f.to_dict()},
                    post=post)


# ---------------------------------------------------------------------------
# persistence

def default_persistence_reaction(rate=16.0, mean=0.3, amplitude=0.15, period=4.0):
    th = lambda X, Y: mean + amplitude * np.cos(2 * np.pi * X / period) * np.cos(2 * np.pi * Y / period)
    return cubic(th, rate=rate, period=(period, period), theta_range=(mean - amplitude, mean + amplitude))


def scenario_persistence(f=None, mask=None, resolution=8, period=4.0, eta=0.5, horizon=20.0,
                         window=3) -> Scenario:
    """x-dependent bistable medium on a perforated lattice, q = 0.

    The bump is the Dirichlet solution of the homogeneous minorant
    s -> min_x f(x, s), whose radius comes from the center-value search.
    """
    from .reaction import check_mean_positive

    f = f if f is not None else default_persistence_reaction(period=period)
    if mask is None:
        mask = build_lattice_domain(RectHole((period / 2, period / 2), (1.0, 1.0)),
                                    PeriodSpec((period, period), resolution), window=window)
    mean = check_mean_positive(f, mask)
    if mean <= 0:
        raise ConfigError("the mean of F(x, 1) over the period cell is not positive", field="reaction")
    theta_hi = f.params["theta_range"][1] if f.x_dependent else compute_theta(f)
    fmin = cubic(float(theta_hi), rate=f.params.get("rate", 1.0))
    R = _rate_R(fmin, eta)
    uR = solve_radial_dirichlet(fmin, R)
    Lw = period * window
    z = (period * (window // 2), period * (window // 2))
    u0 = radial_field(mask, z, uR)
    home = (z[0] - 0.5, z[0] + 0.5, z[1] - 0.5, z[1] + 0.5)
    probes = [GlobalMax()] + compact_probes({"home": home, "window": (0, Lw, 0, Lw)})
    return Scenario("persistence", mask, Coefficients(mask), f, u0, horizon, probes,
                    {"compacts": ("home",)}, "Persistence",
                    params={"mean_F1": mean, "R": R, "eta": eta, "resolution": resolution,
                            "period": period, "reaction": f.to_dict()})


# ---------------------------------------------------------------------------
# config entry point

SCENARIOS = {
    "omega1": scenario_omega1,
    "blocking": scenario_blocking,
    "cylinder": scenario_cylinder,
    "omega3": scenario_omega3,
    "speed_bound": scenario_speed_bound,
    "persistence": scenario_persistence,
}


def scenario_from_config(cfg: dict, resolution_mult=1.0) -> Scenario:
    """Build a scenario from a parsed config table.

    Keys: ``scenario`` (name), ``params`` (builder keywords), optional
    ``reaction`` table, ``expected`` and ``horizon``.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a table", field="<root>")
    name = cfg.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}", field="scenario")
    params = dict(cfg.get("params", {}))
    if not isinstance(params, dict):
        raise ConfigError("must be a table", field="params")
    if "reaction" in cfg:
        params["f"] = reaction_from_config(cfg["reaction"])
    if name == "omega3" and "spec" in params:
        sp = params.pop("spec")
        try:
            params["spec"] = Omega3Spec(float(sp["eps"]), float(sp["kappa"]), float(sp.get("R", 1.0)),
                                        enforce=bool(sp.get("enforce", False)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field="params.spec") from exc
    builder = SCENARIOS[name]
    import inspect

    allowed = inspect.signature(builder).parameters
    for k in params:
        if k not in allowed:
            raise ConfigError(f"unknown parameter for scenario {name!r}", field=f"params.{k}")
    if resolution_mult != 1.0:
        key = "cells" if name == "speed_bound" else "resolution"
        base = params.get(key, allowed[key].default)
        params[key] = int(round(base * resolution_mult))
    try:
        sc = builder(**params)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="params") from exc
    if "expected" in cfg:
        sc.expected = cfg["expected"]
    if "horizon" in cfg:
        sc.horizon = float(cfg["horizon"])
    return sc
