"""Long-time verdicts, spreading speeds and the explicit speed-bound certificate."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import BetaSearchFailed, LevelNeverCrossed, NotApplicable, RhoTooSmall
from .reaction import Reaction, compute_R
from .solver import GlobalMax, Ray, RegionMax, RegionMin, Trajectory, rightmost_crossing

KINDS = ("Blocking", "Persistence", "Invasion", "OrientedInvasion", "Inconclusive")

EPS_INV = 0.05
DELTA_BLK = 0.2
PERSIST_FLOOR = 1e-3
DRIFT_TOL = 0.02


# ---------------------------------------------------------------------------
# verdicts

@dataclass
class Verdict:
    """Finite-horizon surrogate of the asymptotic behaviour of one solution.

    ``persistent`` records the persistence test separately because a
    blocked solution may also persist.
    """

    kind: str
    sup_tail: float
    compact_min_tail: float
    speed_right: float | None = None
    r2_right: float | None = None
    speed_left: float | None = None
    r2_left: float | None = None
    persistent: bool = False
    blocked_by: str | None = None
    drift: float = 0.0
    thresholds: dict = dc_field(default_factory=dict)
    diagnostics: dict = dc_field(default_factory=dict)
    reason: str = ""

    def has(self, kind):
        """True if ``kind`` holds, counting Persistence alongside Blocking."""
        if kind == "Persistence":
            return self.persistent or self.kind == "Persistence"
        return self.kind == kind

    @property
    def label(self):
        if self.kind == "Blocking" and self.persistent:
            return "Blocking+Persistence"
        return self.kind

    def to_dict(self):
        keys = ("kind", "sup_tail", "compact_min_tail", "speed_right", "r2_right", "speed_left",
                "r2_left", "persistent", "blocked_by", "drift", "thresholds", "reason")
        out = {k: getattr(self, k) for k in keys}
        out["label"] = self.label
        return out


def compact_probes(compacts: dict):
    """RegionMin and RegionMax probes named 'min:<key>' and 'max:<key>'."""
    out = []
    for k, region in compacts.items():
        out.append(RegionMin(f"min:{k}", region))
        out.append(RegionMax(f"max:{k}", region))
    return out


def _tail(times, frac):
    return times >= times[0] + (1 - frac) * (times[-1] - times[0])


def _drift(values, times, frac=0.2, floor=DELTA_BLK):
    """Relative change between the two halves of the trailing window."""
    sel = np.flatnonzero(_tail(times, frac))
    if sel.size < 4:
        return 0.0
    a, b = np.array_split(values[sel], 2)
    scale = max(abs(b.mean()), floor)
    return float(abs(b.mean() - a.mean()) / scale)


def classify(traj: Trajectory, compacts=("home",), far=(), eps_inv=EPS_INV, delta_blk=DELTA_BLK,
             tail=0.2, right="front:right", left="max:left", edge="max:edge",
             persist_floor=PERSIST_FLOOR, drift_tol=DRIFT_TOL) -> Verdict:
    """Decide the behaviour of a recorded run from its probe histories.

    Parameters
    ----------
    compacts : names of compacts whose 'min:<name>' histories test
        persistence and invasion.
    far : names of compacts away from the initial support; a tail maximum
        below ``delta_blk`` there, on a stationary run, counts as blocking
        even when the global supremum is close to 1 (a solution confined
        to its chamber).
    right, left, edge : probe names for the front position, the maximum on
        the opposite half-line and the maximum near a non-periodic window
        edge; each is optional.
    """
    t = traj.times
    P = traj.probes
    sel = _tail(t, tail)
    sup = P["max"]
    sup_tail = float(sup[sel].max())
    mins = [P[f"min:{c}"] for c in compacts if f"min:{c}" in P]
    cmin = float(min(m[sel].min() for m in mins)) if mins else float("nan")
    thresholds = {"eps_inv": eps_inv, "delta_blk": delta_blk, "tail": tail,
                  "persist_floor": persist_floor, "drift_tol": drift_tol}
    series = [sup] + mins + [P[f"max:{c}"] for c in far if f"max:{c}" in P]
    drift = max(_drift(s, t, tail) for s in series)
    v = Verdict("Inconclusive", sup_tail, cmin, drift=drift, thresholds=thresholds)
    v.diagnostics = {"times": t, **{k: np.asarray(val) for k, val in P.items()}}

    if right in P:
        try:
            v.speed_right, v.r2_right = measure_speed(traj, probe=right)
        except LevelNeverCrossed:
            pass
    if "front:left" in P:
        try:
            v.speed_left, v.r2_left = measure_speed(traj, probe="front:left")
        except LevelNeverCrossed:
            pass

    v.persistent = bool(mins) and cmin > persist_floor
    far_max = max((float(P[f"max:{c}"][sel].max()) for c in far if f"max:{c}" in P), default=None)
    if sup_tail < 1 - delta_blk:
        v.blocked_by = "sup"
    elif far_max is not None and far_max < delta_blk and drift <= drift_tol:
        v.blocked_by = "far"
    left_ok = left in P and float(P[left][t >= t[0] + 0.05 * (t[-1] - t[0])].max()) < delta_blk

    if (v.speed_right is not None and v.speed_right > 0 and v.r2_right > 0.99 and left_ok):
        v.kind, v.reason = "OrientedInvasion", "positive rightward fit, left region stays low"
    elif v.blocked_by is None and mins and cmin > 1 - eps_inv:
        v.kind, v.reason = "Invasion", "compacts converge to 1"
    elif drift > drift_tol:
        v.kind, v.reason = "Inconclusive", f"trailing statistics drift by {drift:.3f}"
    elif v.blocked_by is not None:
        v.kind, v.reason = "Blocking", f"blocked ({v.blocked_by} test)"
    elif v.persistent:
        v.kind, v.reason = "Persistence", "compact minimum stays positive"
    else:
        v.reason = "no test decided"

    if v.kind in ("Blocking", "Persistence") and edge in P and float(P[edge].max()) >= delta_blk:
        v.kind, v.reason = "Inconclusive", "solution reached a non-periodic window edge"
    return v


# ---------------------------------------------------------------------------
# speeds

def _fit(times, pos):
    A = np.column_stack([times, np.ones_like(times)])
    coef, *_ = np.linalg.lstsq(A, pos, rcond=None)
    pred = A @ coef
    ss = np.sum((pos - pos.mean()) ** 2)
    r2 = 1.0 - np.sum((pos - pred) ** 2) / ss if ss > 0 else 1.0
    return float(coef[0]), float(r2)


def front_positions(traj: Trajectory, level=0.5, direction=(1.0, 0.0), origin=None):
    """Rightmost level crossing along a ray, from the recorded snapshots."""
    if not traj.snapshots:
        raise LevelNeverCrossed("no snapshots recorded and no position probe given")
    mask = traj.mask
    if origin is None:
        b = mask.window_bounds
        origin = (b[0][0],) if mask.ndim == 1 else (b[0][0], 0.5 * (b[1][0] + b[1][1]))
    ray = Ray(mask, origin, direction)
    idx = ray.index
    times, pos = [], []
    for t, u in traj.snapshots:
        vals = np.where(idx >= 0, u[np.maximum(idx, 0)], np.nan)
        times.append(t)
        pos.append(rightmost_crossing(vals, ray.pos, level))
    return np.array(times), np.array(pos), float(np.nanmax(ray.pos))


def measure_speed(traj: Trajectory, level=0.5, direction=(1.0, 0.0), probe=None, trailing=0.5,
                  origin=None):
    """Least-squares slope of the front position over the trailing window.

    Positions pinned at the far end of the ray (the front left the window)
    are discarded.

    Returns
    -------
    speed, r2 : float
    """
    if probe is not None:
        times, pos = traj.times, traj.probe(probe)
        pinned = np.isinf(pos)
    else:
        times, pos, end = front_positions(traj, level, direction, origin)
        pinned = pos >= end - 1e-12
    ok = np.isfinite(pos) & ~pinned
    if ok.sum() < 3:
        raise LevelNeverCrossed(f"level {level} crossed at fewer than three recorded times")
    t, p = times[ok], pos[ok]
    keep = t >= t[0] + (1 - trailing) * (t[-1] - t[0])
    if keep.sum() < 3:
        raise LevelNeverCrossed("too few crossings in the trailing window")
    return _fit(t[keep], p[keep])


def w_star(f, lam=1.0, Lam=1.0, q_radial_limsup=0.0, R=None):
    """Explicit invasion speed lower bound (lam/sqrt(Lam)) sqrt(R(f)) - limsup q.x/|x|.

    Non-positive values are returned as they are with a NotApplicable warning.
    """
    R = float(compute_R(f)) if R is None else float(R)
    w = lam / np.sqrt(Lam) * np.sqrt(R) - q_radial_limsup
    if w <= 0:
        warnings.warn(f"speed bound {w:.4g} is not positive; the drift beats diffusion", NotApplicable)
    return float(w)


# ---------------------------------------------------------------------------
# explicit monotone subsolution profile

@dataclass
class SubsolutionProfile:
    """h = H on z <= 0, H - gamma z^2/2 on [0, z1], K((z2 - z)/delta)^beta on [z1, z2], 0 beyond.

    ``mu`` is stored through its logarithm because it under- or
    overflows for large beta; K (t/delta)^beta equals mu t^beta.
    """

    H: float
    K: float
    gamma: float
    z1: float
    z2: float
    delta: float
    beta: float
    log_mu: float
    B_bar: float
    lam: float
    Lam: float
    m: float

    @property
    def mu(self):
        return float(np.exp(self.log_mu))

    @property
    def L(self):
        return self.z2

    def _pieces(self, z):
        z = np.asarray(z, float)
        s = np.clip((self.z2 - z) / self.delta, 0.0, None)
        quad = z <= self.z1
        return z, s, quad

    def __call__(self, z):
        z, s, quad = self._pieces(z)
        h = np.where(quad, self.H - 0.5 * self.gamma * np.clip(z, 0, None) ** 2,
                     self.K * s ** self.beta)
        h = np.where(z <= 0, self.H, h)
        return np.where(z >= self.z2, 0.0, h)

    def d1(self, z):
        z, s, quad = self._pieces(z)
        d = np.where(quad, -self.gamma * z, -self.K * self.beta / self.delta * s ** (self.beta - 1))
        return np.where((z <= 0) | (z >= self.z2), 0.0, d)

    def d2(self, z):
        z, s, quad = self._pieces(z)
        b = self.beta
        d = np.where(quad, -self.gamma, self.K * b * (b - 1) / self.delta ** 2 * s ** (b - 2))
        return np.where((z <= 0) | (z >= self.z2), 0.0, d)

    def relations(self):
        """Residuals of the five algebraic constraints (inequalities as min(0, .))."""
        g, z1, D, b, K, H = self.gamma, self.z1, self.delta, self.beta, self.K, self.H
        return np.array([
            min(0.0, self.lam * (b - 1) - self.B_bar * D) / max(1.0, self.lam * b),
            min(0.0, self.m - g * (self.Lam + self.B_bar * z1)) / max(self.m, 1e-300),
            (0.5 * g * z1 ** 2 - (H - K)) / (H - K),
            np.expm1(self.log_mu + b * np.log(D) - np.log(K)),
            (g * z1 - K * b / D) / (K * b / D),
        ])

    def to_dict(self):
        return {"H": self.H, "K": self.K, "gamma": self.gamma, "z1": self.z1, "delta": self.delta,
                "beta": self.beta, "log_mu": self.log_mu, "L": self.L, "B_bar": self.B_bar}


def _profile_for_beta(K, H, m, B_bar, lam, Lam, beta):
    gamma = (B_bar * beta * K / (lam * np.sqrt(2 * (H - K)) * (beta - 1))) ** 2
    z1 = np.sqrt(2 * (H - K) / gamma)
    delta = beta * K / np.sqrt(2 * gamma * (H - K))
    log_mu = 0.5 * beta * np.log(2 * gamma * (H - K)) - beta * np.log(beta) - (beta - 1) * np.log(K)
    return SubsolutionProfile(H, K, gamma, z1, z1 + delta, delta, beta, log_mu, B_bar, lam, Lam, m)


def build_propdim_profile(f, lam=1.0, Lam=1.0, beta="auto", s_step=1e-3, rect=None) -> SubsolutionProfile:
    """Closed-form profile for the travelling lower barrier.

    (K, H) realise the largest rectangle under the graph of f. With
    ``beta='auto'`` beta doubles from 4 until gamma (Lam + B z1) <= min f on [K, H].
    """
    rect = rect or compute_R(f, s_step=s_step)
    R, K, H = float(rect.value), float(rect.K), float(rect.H)
    if R <= 0:
        raise ValueError("the rectangle area must be positive")
    m = R / (H - K)
    B_bar = lam / np.sqrt(Lam) * np.sqrt(R)
    if beta != "auto":
        return _profile_for_beta(K, H, m, B_bar, lam, Lam, float(beta))
    beta = 4.0
    while beta <= 2.0 ** 16:
        p = _profile_for_beta(K, H, m, B_bar, lam, Lam, beta)
        if p.gamma * (Lam + B_bar * p.z1) <= m:
            return p
        beta *= 2
    raise BetaSearchFailed("no beta up to 2^16 satisfies the curvature constraint")


def verify_propdim(profile: SubsolutionProfile, f, lam=None, Lam=None, B=None, n_samples=10000):
    """Minimum of A h'' + B h' + f(h) over sampled z in [0, L] and A in {lam, Lam}."""
    lam = profile.lam if lam is None else lam
    Lam = profile.Lam if Lam is None else Lam
    B = profile.B_bar if B is None else B
    fs = f.bind() if isinstance(f, Reaction) else f
    z = np.linspace(0.0, profile.L, n_samples)
    h, d1, d2 = profile(z), profile.d1(z), profile.d2(z)
    fh = fs(h)
    return float(min(np.min(A * d2 + B * d1 + fh) for A in (lam, Lam)))


class RadialExpandingSubsolution:
    """v(t, x) = h(|x| - c t - rho), a lower barrier expanding at speed c."""

    def __init__(self, profile: SubsolutionProfile, c_bar, rho, N=2, q_radial_limsup=0.0):
        self.profile = profile
        self.c = float(c_bar)
        self.rho = float(rho)
        self.N = N
        self.q = float(q_radial_limsup)
        lhs = N * profile.Lam / rho + c_bar + q_radial_limsup
        if not lhs < profile.B_bar:
            raise RhoTooSmall(f"N Lam/rho + c + q = {lhs:.4g} is not below {profile.B_bar:.4g}")

    def radius(self, t):
        return self.rho + self.c * t

    def __call__(self, t, r):
        return self.profile(np.asarray(r, float) - self.c * t - self.rho)

    def residual(self, t, r, f, a=1.0, q_radial=0.0):
        """d_t v - a Lap v - q_r d_r v - f(v) for A = a I and a radial drift q_r."""
        p = self.profile
        z = np.asarray(r, float) - self.c * t - self.rho
        d1, d2 = p.d1(z), p.d2(z)
        fs = f.bind() if isinstance(f, Reaction) else f
        return -self.c * d1 - a * (d2 + (self.N - 1) / r * d1) - q_radial * d1 - fs(p(z))

    def verify(self, f, n_samples=100000, t_max=50.0, a=1.0, q_radial=0.0, seed=0, tol=1e-6):
        rng = np.random.default_rng(seed)
        t = rng.uniform(0, t_max, n_samples)
        z = rng.uniform(0, self.profile.L, n_samples)
        r = z + self.c * t + self.rho
        res = self.residual(t, r, f, a, q_radial)
        return float(res.max())


def radial_expanding_subsolution(profile, c_bar, rho, N=2, q_radial_limsup=0.0):
    return RadialExpandingSubsolution(profile, c_bar, rho, N, q_radial_limsup)
