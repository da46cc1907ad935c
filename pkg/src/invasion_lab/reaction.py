"""Nonlinearities f(x, s), their primitives and the scalars derived from them.

All reactions vanish at s = 0 and s = 1.  Outside [0, 1] they are
continued by the fixed negative Lipschitz extension

    f(x, s) = -lip * (s - 1)   for s > 1,
    f(x, s) =  lip * s         for s < 0,

so that 0 and 1 bound every solution starting in [0, 1].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EpsTooLarge, NoZeroFound

KINDS = ("Monostable", "Combustion", "Bistable", "Custom")


class Reaction:
    """A nonlinearity f(x, s) on [0, 1] with its negative extension.

    Parameters
    ----------
    func : callable
        ``func(s, x, y)`` evaluated for s in [0, 1]; arguments broadcast.
        Homogeneous reactions may ignore ``x`` and ``y``.
    lipschitz : float
        Bound on |f(x, s) - f(x, s')| / |s - s'|.
    kind : str
        One of Monostable, Combustion, Bistable, Custom.
    theta_param : float, optional
        Closed-form threshold, for documentation and quick checks.
    x_dependent : bool
        Whether ``func`` actually depends on position.
    period : tuple of float, optional
        Period cell of the spatial dependence; used to build the default
        sample set for minima over x.
    primitive : callable, optional
        Closed form of s -> int_0^s f on [0, 1], same signature as func.
    params : dict
        Serializable description.
    """

    def __init__(self, func, lipschitz, kind="Custom", theta_param=None,
                 x_dependent=False, period=None, primitive=None, params=None):
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        self.func = func
        self.lipschitz = float(lipschitz)
        self.kind = kind
        self.theta_param = theta_param
        self.x_dependent = bool(x_dependent)
        self.period = period
        self.periodic = True
        self._primitive = primitive
        self.params = dict(params or {})

    def __repr__(self):
        return f"Reaction(kind={self.kind!r}, params={self.params})"

    # evaluation -----------------------------------------------------------
    def __call__(self, s, x=0.0, y=0.0):
        s = np.asarray(s, dtype=float)
        core = self.func(np.clip(s, 0.0, 1.0), x, y)
        lip = self.lipschitz
        out = np.where(s > 1.0, -lip * (s - 1.0), core)
        return np.where(s < 0.0, lip * s, out)

    def bind(self, x=0.0, y=0.0):
        """Freeze the spatial argument; returns a function of s only.

        Spatial coefficients are evaluated once, which keeps time stepping
        cheap for x-dependent reactions that expose ``bind_core``.
        """
        if hasattr(self.func, "bind_core") and self.x_dependent:
            core = self.func.bind_core(x, y)
        elif self.x_dependent:
            x = np.asarray(x, float)
            y = np.asarray(y, float)

            def core(s):
                return self.func(s, x, y)
        else:
            def core(s):
                return self.func(s, 0.0, 0.0)
        lip = self.lipschitz

        def f(s):
            c = core(np.clip(s, 0.0, 1.0))
            out = np.where(s > 1.0, -lip * (s - 1.0), c)
            return np.where(s < 0.0, lip * s, out)

        return f

    def primitive(self, s, x=0.0, y=0.0):
        """F(x, s) = int_0^s f(x, r) dr, including the extension."""
        s = np.asarray(s, dtype=float)
        sc = np.clip(s, 0.0, 1.0)
        if self._primitive is not None:
            core = self._primitive(sc, x, y)
            F1 = self._primitive(np.ones_like(sc), x, y)
        else:
            core = _gauss_primitive(self.func, sc, x, y)
            F1 = _gauss_primitive(self.func, np.ones_like(sc), x, y)
        lip = self.lipschitz
        out = np.where(s > 1.0, F1 - 0.5 * lip * (s - 1.0) ** 2, core)
        return np.where(s < 0.0, 0.5 * lip * s * s, out)

    # spatial envelopes ----------------------------------------------------
    def sample_points(self, n=24):
        """Default sample of positions over one period cell."""
        if not self.x_dependent:
            return np.zeros((1, 2))
        L = self.period or (1.0, 1.0)
        L = tuple(L) + (1.0,) * (2 - len(L))
        gx = np.arange(n) * L[0] / n
        gy = np.arange(n) * L[1] / n
        X, Y = np.meshgrid(gx, gy)
        return np.column_stack([X.ravel(), Y.ravel()])

    def envelope(self, s, points=None, side="min"):
        """min_x f(x, s) (or max) over sample points."""
        s = np.asarray(s, dtype=float)
        if not self.x_dependent:
            return self(s)
        pts = self.sample_points() if points is None else np.asarray(points, float)
        vals = self(s[None, ...], pts[:, 0].reshape((-1,) + (1,) * s.ndim),
                    pts[:, 1].reshape((-1,) + (1,) * s.ndim))
        return vals.min(axis=0) if side == "min" else vals.max(axis=0)

    def to_dict(self):
        return dict(self.params)


def _gauss_primitive(func, s, x, y, n=48):
    t, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    s = np.asarray(s, float)
    shape = (n,) + (1,) * s.ndim
    vals = func(t.reshape(shape) * s[None, ...], x, y)
    return s * np.tensordot(w, vals, axes=(0, 0))


# ---------------------------------------------------------------------------
# constructors

def _cubic_lip(theta):
    th = np.atleast_1d(np.asarray(theta, float))
    cand = [np.abs(th), np.abs(1 - th), np.abs((1 + th) ** 2 / 3 - th)]
    return float(np.max(cand))


class _CubicCore:
    """s(1-s)(s-a(x)) with a possibly position-dependent threshold."""

    def __init__(self, theta, rate):
        self.theta = theta
        self.rate = rate

    def _a(self, x, y):
        return self.theta(x, y) if callable(self.theta) else self.theta

    def __call__(self, s, x, y):
        return self.rate * s * (1 - s) * (s - self._a(np.asarray(x, float), np.asarray(y, float)))

    def bind_core(self, x, y):
        a = self._a(np.asarray(x, float), np.asarray(y, float))
        r = self.rate
        return lambda s: r * s * (1 - s) * (s - a)

    def primitive(self, s, x, y):
        a = self._a(np.asarray(x, float), np.asarray(y, float))
        return self.rate * (-s ** 4 / 4 + (1 + a) * s ** 3 / 3 - a * s ** 2 / 2)


def cubic(theta=0.25, rate=1.0, period=None, theta_range=None):
    """Bistable cubic rate * s (1 - s) (s - theta).

    ``theta`` may be a callable ``theta(x, y)`` for a heterogeneous medium;
    ``theta_range`` (lo, hi) then bounds its values for the Lipschitz
    constant, and ``period`` gives its period cell.
    """
    core = _CubicCore(theta, rate)
    if callable(theta):
        lo, hi = theta_range if theta_range is not None else (0.0, 1.0)
        lip = rate * max(_cubic_lip(lo), _cubic_lip(hi), _cubic_lip(np.linspace(lo, hi, 101)))
        params = {"tag": "cubic", "theta": "x-dependent", "theta_range": [lo, hi], "rate": rate}
        return Reaction(core, lip, kind="Bistable", x_dependent=True,
                        period=period, primitive=core.primitive, params=params)
    kind = "Bistable" if theta > 0 else "Monostable"
    params = {"tag": "cubic", "theta": float(theta), "rate": float(rate)}
    return Reaction(core, rate * _cubic_lip(theta), kind=kind, theta_param=float(theta),
                    primitive=core.primitive, params=params)


def kpp(rate=1.0):
    """Monostable logistic nonlinearity rate * s (1 - s)."""
    core = lambda s, x, y: rate * s * (1 - s)
    prim = lambda s, x, y: rate * (s ** 2 / 2 - s ** 3 / 3)
    return Reaction(core, rate, kind="Monostable", theta_param=0.0, primitive=prim,
                    params={"tag": "kpp", "rate": rate})


class _Tabulated:
    def __init__(self, s, v):
        self.s = np.asarray(s, float)
        self.v = np.asarray(v, float)
        ds = np.diff(self.s)
        self.cum = np.concatenate([[0.0], np.cumsum(0.5 * ds * (self.v[1:] + self.v[:-1]))])

    def __call__(self, s, x, y):
        return np.interp(s, self.s, self.v)

    def primitive(self, s, x, y):
        s = np.asarray(s, float)
        k = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.s) - 2)
        s0, v0 = self.s[k], self.v[k]
        slope = (self.v[k + 1] - v0) / (self.s[k + 1] - s0)
        d = s - s0
        return self.cum[k] + v0 * d + 0.5 * slope * d * d


def tabulated(s, values, kind="Custom", params=None):
    """Piecewise-linear nonlinearity through the points (s_k, values_k)."""
    s = np.asarray(s, float)
    v = np.asarray(values, float)
    if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
        raise ValueError("tabulation nodes must increase from 0 to 1")
    if abs(v[0]) > 0 or abs(v[-1]) > 0:
        raise ValueError("tabulated reaction must vanish at 0 and 1")
    core = _Tabulated(s, v)
    lip = float(np.max(np.abs(np.diff(v) / np.diff(s))))
    p = {"tag": "tabulated", "s": s.tolist(), "values": v.tolist()}
    p.update(params or {})
    return Reaction(core, max(lip, 1e-12), kind=kind, primitive=core.primitive, params=p)


def combustion_plateau(ignition=0.25, plateau=(0.3, 0.9), level=0.1):
    """Trapezoid: 0 on [0, ignition], ramps to ``level`` over [ignition, plateau[0]],
    stays there until plateau[1], and returns linearly to 0 at 1."""
    a, (b, c) = ignition, plateau
    if not 0 <= a < b <= c < 1:
        raise ValueError("need 0 <= ignition < plateau start <= plateau end < 1")
    nodes = [0.0, a, b, c, 1.0] if a > 0 else [0.0, b, c, 1.0]
    vals = [0.0, 0.0, level, level, 0.0] if a > 0 else [0.0, level, level, 0.0]
    r = tabulated(nodes, vals, kind="Combustion",
                  params={"tag": "combustion_plateau", "ignition": a,
                          "plateau": [b, c], "level": level})
    r.theta_param = float(a)
    return r


# ---------------------------------------------------------------------------
# derived scalars

def compute_theta(f: Reaction, grid_step=1e-3, points=None) -> float:
    """Largest zero in [0, 1) of g(s) = min_x f(x, s).

    Sign scan on a grid of step ``grid_step`` from the top, then bisection
    to ``grid_step * 1e-3``.  If g > 0 at every interior sample a
    ``NoZeroFound`` warning is issued and 0 is returned.
    """
    n = int(round(1.0 / grid_step))
    s = np.linspace(0.0, 1.0, n + 1)[:-1]  # [0, 1)
    g = f.envelope(s, points)
    nonpos = np.flatnonzero(g[1:] <= 0.0) + 1
    if nonpos.size == 0:
        warnings.warn("min_x f is positive on the sampled open interval", NoZeroFound)
        return 0.0
    k = nonpos[-1]
    lo = s[k]
    hi = s[k + 1] if k + 1 < s.size else 1.0
    gfun = lambda t: float(f.envelope(np.array([t]), points)[0])
    if hi >= 1.0:
        return float(lo)
    # g(lo) <= 0 < g(s) on (lo, hi]; shrink to the last non-positive point
    tol = grid_step * 1e-3
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gfun(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return float(lo)


def _largest_rectangle(s, g):
    """max over i <= j of (s_j - s_i) * min(g[i..j]) by a monotone stack.

    Returns (area, i, j).  Equal to the brute-force value exactly: every
    candidate is an exact brute-force candidate, and the optimum extends to
    a maximal interval with the same minimum.
    """
    n = g.size
    left = np.empty(n, int)
    right = np.empty(n, int)
    stack = []
    for k in range(n):
        while stack and g[stack[-1]] >= g[k]:
            stack.pop()
        left[k] = stack[-1] + 1 if stack else 0
        stack.append(k)
    stack = []
    for k in range(n - 1, -1, -1):
        while stack and g[stack[-1]] >= g[k]:
            stack.pop()
        right[k] = stack[-1] - 1 if stack else n - 1
        stack.append(k)
    areas = (s[right] - s[left]) * g
    k = int(np.argmax(areas))
    return float(areas[k]), int(left[k]), int(right[k])


@dataclass(frozen=True)
class RectangleResult:
    value: float
    K: float
    H: float

    def __float__(self):
        return self.value

    def __iter__(self):
        return iter((self.value, self.K, self.H))


def compute_R(f, s_step=1e-3, points=None) -> RectangleResult:
    """Largest rectangle under g(s) = min_x f(x, s) with base in (0, 1).

    ``f`` may also be an array of g values sampled at s_k = k * s_step,
    k = 1 .. n-1.
    """
    n = int(round(1.0 / s_step))
    s = np.arange(1, n) * s_step
    if isinstance(f, Reaction):
        g = f.envelope(s, points)
    else:
        g = np.asarray(f, float)
        if g.size != s.size:
            raise ValueError("sampled g must live on the interior s-grid")
    if not np.any(g > 0):
        return RectangleResult(0.0, float("nan"), float("nan"))
    area, i, j = _largest_rectangle(s, g)
    if area <= 0:
        return RectangleResult(0.0, float("nan"), float("nan"))
    return RectangleResult(area, float(s[i]), float(s[j]))


def _period_cells(mask):
    """Cell centers and areas of the first full period cell of a mask."""
    n = mask.period.cells
    ins = mask.inside[: (n[1] if mask.ndim > 1 else 1), : n[0]]
    X, Y = mask.centers
    X = X[: ins.shape[0], : n[0]]
    Y = Y[: ins.shape[0], : n[0]]
    return X[ins], Y[ins], mask.cell_area


def check_mean_positive(f: Reaction, mask, n_s=200) -> float:
    """Midpoint rule for the integral of f over (period cell) x (0, 1)."""
    xs, ys, area = _period_cells(mask)
    s = (np.arange(n_s) + 0.5) / n_s
    if f.x_dependent:
        vals = f(s[None, :], xs[:, None], ys[:, None])
        return float(vals.mean(axis=1).sum() * area)
    return float(f(s).mean() * xs.size * area)


def check_strict_gap(f: Reaction, points=None, n_s=1000) -> bool:
    """Sampled check of F(x, s) < F(x, 1) for s in [0, 1)."""
    pts = f.sample_points() if points is None else np.asarray(points, float)
    s = np.linspace(0.0, 1.0, n_s + 1)[:-1]
    F = f.primitive(s[None, :], pts[:, 0:1], pts[:, 1:2])
    F1 = f.primitive(np.ones((1, 1)), pts[:, 0:1], pts[:, 1:2])
    return bool(np.all(F < F1))


@dataclass(frozen=True)
class EnvelopeScalars:
    theta: float
    mean_F: float
    R_of_f: float
    F_gap_ok: bool
    K: float = float("nan")
    H: float = float("nan")


def envelope_scalars(f: Reaction, mask=None, step=1e-3, points=None, richardson=True):
    """theta, mean of f, R(f) and the strict primitive gap in one record.

    With ``richardson`` the grid computations are repeated at half the step
    and a warning is issued if they move by more than 1%.
    """
    theta = compute_theta(f, step, points)
    R = compute_R(f, step, points)
    if richardson:
        th2 = compute_theta(f, step / 2, points)
        R2 = compute_R(f, step / 2, points)
        if abs(th2 - theta) > 0.01 * max(abs(theta), step) or \
                abs(R2.value - R.value) > 0.01 * max(R.value, 1e-12):
            warnings.warn("grid quantities changed by more than 1% under step halving")
    if mask is not None:
        mean = check_mean_positive(f, mask)
    else:
        s = (np.arange(200) + 0.5) / 200
        pts = f.sample_points() if points is None else points
        mean = float(np.mean(f(s[None, :], pts[:, 0:1], pts[:, 1:2])))
    return EnvelopeScalars(theta, mean, R.value, check_strict_gap(f, points), R.K, R.H)


# ---------------------------------------------------------------------------
# minorants

class _MinorantCore:
    def __init__(self, f, start, mu, points):
        self.f = f
        self.start = start
        self.mu = mu
        self.points = points
        s = np.linspace(start, 1.0, 2001)
        g = f.envelope(s, points)
        self.slope = max(float(np.max(g)), 1e-12) / max(1.0 - start, 1e-12)

    def __call__(self, s, x, y):
        s = np.asarray(s, float)
        g = self.f.envelope(np.clip(s, 0, 1), self.points)
        tent = self.slope * np.maximum(s - self.start, 0.0)
        out = np.minimum(g, tent) / (1.0 + self.mu)
        return np.where(s <= self.start, 0.0, np.maximum(out, 0.0))


def make_combustion_minorant(f: Reaction, eps, mu=0.05, points=None, theta=None) -> Reaction:
    """x-independent combustion nonlinearity below min_x f / (1 + mu).

    Zero on [0, theta + eps]; on (theta + eps, 1) it is the minimum of a
    linear ramp starting at theta + eps and of min_x f / (1 + mu), hence
    positive there.
    """
    theta = compute_theta(f, points=points) if theta is None else theta
    start = theta + eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    if start >= 1.0:
        raise EpsTooLarge(f"theta + eps = {start} >= 1")
    core = _MinorantCore(f, start, mu, points)
    lip = max(f.lipschitz, core.slope) / (1 + mu)
    r = Reaction(core, lip, kind="Combustion", theta_param=start,
                 params={"tag": "combustion_minorant", "eps": eps, "mu": mu, "of": f.to_dict()})
    return r


class _ShiftedCore:
    def __init__(self, f, mu):
        self.f = f
        self.mu = mu

    def __call__(self, s, x, y):
        s = np.asarray(s, float)
        f0 = lambda t: np.where(t < 0, 0.0, self.f.envelope(np.clip(t, 0, 1)))
        m = np.minimum(f0(s), f0(s + self.mu))
        return np.where(m < 0, (1 + self.mu) * m, m / (1 + self.mu))


class ShiftedMinorant:
    """Perturbed nonlinearity vanishing at -mu and 1 - mu.

    f~(s) = (1+mu) m(s) where m < 0 and m(s) / (1+mu) where m >= 0, with
    m(s) = min(f0(s), f0(s+mu)) and f0 the envelope extended by 0 below 0.
    It lies strictly below f on (-mu, theta), is positive on (theta, 1-mu)
    and bounded there by f / (1+mu).
    """

    def __init__(self, f: Reaction, mu=0.05):
        self.f = f
        self.mu = float(mu)
        self.core = _ShiftedCore(f, mu)
        self.lipschitz = (1 + mu) * f.lipschitz
        self.lower = -self.mu
        self.upper = 1.0 - self.mu

    def __call__(self, s):
        s = np.asarray(s, float)
        out = self.core(s, 0.0, 0.0)
        lip = self.lipschitz
        out = np.where(s > self.upper, -lip * (s - self.upper), out)
        return np.where(s < self.lower, lip * (s - self.lower), out)

    def integral(self, n=20001):
        s = np.linspace(self.lower, self.upper, n)
        return float(np.trapezoid(self(s), s))


def make_shifted_minorant(f: Reaction, mu=0.05) -> ShiftedMinorant:
    m = ShiftedMinorant(f, mu)
    if m.integral() <= 0:
        raise ValueError("the shifted minorant has non-positive mass; decrease mu")
    return m


# ---------------------------------------------------------------------------
# spatially uniform envelopes

def ode_envelope(f: Reaction, z0, t_end, side="min", dt=1e-2, points=None):
    """RK4 trajectory of dz/dt = min_x f(x, z) (or max).

    Returns ``(t, z)`` arrays.
    """
    if side not in ("min", "max"):
        raise ValueError("side must be 'min' or 'max'")
    rhs = lambda z: float(f.envelope(np.array([z]), points, side=side)[0])
    n = max(1, int(np.ceil(t_end / dt)))
    h = t_end / n
    t = np.linspace(0.0, t_end, n + 1)
    z = np.empty(n + 1)
    z[0] = z0
    for k in range(n):
        zk = z[k]
        k1 = rhs(zk)
        k2 = rhs(zk + 0.5 * h * k1)
        k3 = rhs(zk + 0.5 * h * k2)
        k4 = rhs(zk + h * k3)
        z[k + 1] = zk + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return t, z


def reaction_from_config(cfg: dict) -> Reaction:
    """Build a reaction from a config table (tag + parameters)."""
    from .errors import ConfigError

    tag = cfg.get("tag")
    try:
        if tag == "cubic":
            return cubic(float(cfg.get("theta", 0.25)), float(cfg.get("rate", 1.0)))
        if tag == "kpp":
            return kpp(float(cfg.get("rate", 1.0)))
        if tag == "combustion_plateau":
            return combustion_plateau(float(cfg.get("ignition", 0.25)),
                                      tuple(cfg.get("plateau", (0.3, 0.9))),
                                      float(cfg.get("level", 0.1)))
        if tag == "tabulated":
            if "csv" in cfg:
                data = np.loadtxt(cfg["csv"], delimiter=",", ndmin=2)
                return tabulated(data[:, 0], data[:, 1])
            return tabulated(cfg["s"], cfg["values"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc), field="reaction") from exc
    raise ConfigError(f"unknown reaction tag {tag!r}", field="reaction.tag")
