"""Stationary objects: radial Dirichlet solutions, their parabolic
evolution in larger balls, the truncated energy and its discrete
minimizers, and one-dimensional travelling fronts.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .errors import NoFrontFound, NoPositiveSolution, NotConverged, ResidualPositive
from .reaction import Reaction, compute_theta
from .solver import Coefficients, Field, assemble_operator, radial_field


def _scalar_f(f):
    """Homogeneous nonlinearity as a function of s only."""
    if isinstance(f, Reaction):
        if f.x_dependent:
            raise ValueError("a homogeneous reaction is required")
        return f.bind()
    return f


def _fprime(fs, s, ds=1e-7):
    return (fs(s + ds) - fs(s - ds)) / (2 * ds)


# ---------------------------------------------------------------------------
# radial Dirichlet problem

@dataclass
class RadialSolution:
    """Positive radially decreasing solution of -Lap u = f(u) in B_R, u = 0 on the sphere."""

    R: float
    r: np.ndarray
    u: np.ndarray
    N: int
    center_value: float
    M: float
    M_prime: float
    reaction: object = None

    def __call__(self, rr):
        rr = np.asarray(rr, float)
        return np.where(rr < self.R, np.interp(rr, self.r, self.u), 0.0)

    def to_csv_rows(self):
        return np.column_stack([self.r, self.u])


def _w_source(fs):
    """g(w) = f(1 - w), accurate for tiny w through a quadratic expansion at 1."""
    e = 1e-4
    f1 = fs(np.array([1.0, 1.0 - e, 1.0 - 2 * e]))
    d1 = (3 * f1[0] - 4 * f1[1] + f1[2]) / (2 * e)     # f'(1), one sided
    d2 = (f1[0] - 2 * f1[1] + f1[2]) / e ** 2           # f''(1)
    cut = 1e-6

    def g(w):
        w = np.asarray(w, float)
        near = -d1 * w + 0.5 * d2 * w * w
        return np.where(w < cut, near, fs(1.0 - np.minimum(w, 2.0)))
    return g


def _shoot_batch(g, deltas, r_end, N, h=None):
    """Fixed-step RK4 for W = (1 - u)/delta over many centre values at once.

    Returns the touchdown radius (u = 0) for each delta, or inf when u
    turns upward or survives beyond ``r_end``.
    """
    d = np.asarray(deltas, float)
    h = h or min(0.02, r_end / 1000)
    r = h
    g0 = g(d) / d
    W = 1.0 + g0 * r * r / (2 * N)
    P = g0 * r / N
    out = np.full(d.shape, np.inf)
    alive = np.ones(d.shape, bool)

    def rhs(r, W, P):
        return P, g(d * W) / d - (N - 1) / r * P

    while r < r_end and alive.any():
        k1w, k1p = rhs(r, W, P)
        k2w, k2p = rhs(r + h / 2, W + h / 2 * k1w, P + h / 2 * k1p)
        k3w, k3p = rhs(r + h / 2, W + h / 2 * k2w, P + h / 2 * k2p)
        k4w, k4p = rhs(r + h, W + h * k3w, P + h * k3p)
        Wn = W + h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        Pn = P + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        hit = alive & (d * Wn >= 1.0)
        frac = (1.0 / d[hit] - W[hit]) / (Wn[hit] - W[hit])
        out[hit] = r + frac * h
        alive &= ~hit & (Pn > 0)
        W, P = np.where(alive, Wn, W), np.where(alive, Pn, P)
        r += h
    return out


def _shoot(g, delta, r_end, N):
    """Adaptive shot in W = (1 - u)/delta with dense output, for the final profile."""
    d = float(delta)
    g0 = g(d).item() / d
    r0 = min(1e-6, 1e-8 * r_end)
    y0 = [1.0 + g0 * r0 * r0 / (2 * N), g0 * r0 / N]

    def rhs(r, y):
        return [y[1], g(d * y[0]).item() / d - (N - 1) / r * y[1]]

    def touch(r, y):
        return d * y[0] - 1.0
    touch.terminal = True
    touch.direction = 1

    sol = solve_ivp(rhs, (r0, r_end), y0, method="DOP853", events=(touch,),
                    rtol=1e-12, atol=1e-12, dense_output=True)
    rho = float(sol.t_events[0][0]) if sol.t_events[0].size else np.inf
    return rho, sol


def _polish_touchdown(g, R, N, a, b, xtol=1e-14):
    """Root of rho(delta) = R in log10 delta with the adaptive integrator.

    ``a`` < ``b`` bracket the root for the fixed-step shots; the bracket is
    widened until the adaptive shots straddle R, then Brent's method is used.
    """
    def miss(logd):
        rho, _ = _shoot(g, 10 ** logd, R * 1.5, N)
        return (rho if np.isfinite(rho) else 2 * R) - R

    lo, hi = a, b
    flo, fhi = miss(lo), miss(hi)
    width = max(b - a, 1e-6)
    for _ in range(60):
        if flo > 0 and fhi < 0:
            return brentq(miss, lo, hi, xtol=xtol)
        if flo <= 0:
            lo -= width
            flo = miss(lo)
        if fhi >= 0:
            hi = min(hi + width, 0.0)
            fhi = miss(hi)
        width *= 2
    return b


def solve_radial_dirichlet(f, R, N=2, n_samples=2001, theta=None, tol=1e-10) -> RadialSolution:
    """Shooting on u(0) for u'' + (N-1)/r u' + f(u) = 0, u'(0) = 0, u(R) = 0.

    The largest admissible u(0) is selected: the touchdown radius grows to
    infinity as u(0) -> 1, so bisection between the last centre value whose
    solution touches zero before R and the next one that does not yields
    the upper (stable) branch.

    Raises
    ------
    NoPositiveSolution
        If no centre value in (theta, 1) produces a touchdown by R.
    """
    fs = _scalar_f(f)
    g = _w_source(fs)
    if theta is None:
        theta = compute_theta(f) if isinstance(f, Reaction) else 0.0
    R = float(R)
    r_end = R * (1 + 1e-9)
    # log10 of delta = 1 - u(0), from deep to shallow
    top = np.log10(max(1.0 - theta - 1e-9, 1e-12))
    grid = np.concatenate([np.linspace(-250.0, -3.0, 120), np.log10(np.linspace(1e-3, 10 ** top, 40))[1:]])
    touched = np.isfinite(_shoot_batch(g, 10 ** grid, r_end, N))
    if not touched.any():
        raise NoPositiveSolution(f"no positive radial solution on a ball of radius {R}")
    k = int(np.argmax(touched))
    if k == 0:
        raise NoPositiveSolution("centre value indistinguishable from 1 in double precision")
    a, b = grid[k - 1], grid[k]
    while b - a > tol * max(1.0, abs(b)):
        cand = np.linspace(a, b, 34)[1:-1]
        hit = np.isfinite(_shoot_batch(g, 10 ** cand, r_end, N))
        j = int(np.argmax(hit)) if hit.any() else cand.size
        a = cand[j - 1] if j > 0 else a
        b = cand[j] if j < cand.size else b
    # the fixed-step bracket is only as accurate as RK4; polish on the adaptive shot
    logd = _polish_touchdown(g, R, N, a, b)
    delta = 10 ** logd
    rho, sol = _shoot(g, delta, r_end * 1.05, N)
    if not np.isfinite(rho):
        rho = R
    r = np.linspace(0.0, R, n_samples)
    rs = np.clip(r * rho / R, sol.t[0], rho)
    u = 1.0 - delta * sol.sol(rs)[0]
    u[0] = 1.0 - delta
    u[-1] = 0.0
    u = np.minimum.accumulate(np.maximum(u, 0.0))
    M = float(np.interp(min(1.0, R), r, u))
    return RadialSolution(R, r, u, N, float(u[0]), M, float(u[0]), f)


def find_min_R(f, eta, r, N=2, R_start=None, rtol=1e-3):
    """Smallest R (to relative tolerance) with min over [0, r] of u_R above eta."""
    def ok(R):
        try:
            sol = solve_radial_dirichlet(f, R, N)
        except NoPositiveSolution:
            return False
        return float(sol(np.array(r))) > eta if r > 0 else sol.center_value > eta

    R = R_start or max(2.0 * r, 1.0)
    lo = 0.0
    while not ok(R):
        lo = R
        R *= 2
        if R > 1e4:
            raise NoPositiveSolution("no radius up to 1e4 satisfies the bound")
    hi = R
    lo = max(lo, r)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# radial parabolic problem in a larger ball

def _radial_operator(dr, K, N):
    """Banded (l=u=1) conservative radial Laplacian on nodes 0..K-1, zero at node K."""
    r = np.arange(K + 1) * dr
    faces = (r[:-1] + 0.5 * dr) ** (N - 1)  # face between i and i+1
    vol = ((r + 0.5 * dr) ** N - np.maximum(r - 0.5 * dr, 0.0) ** N) / N
    vol = vol[:K]
    up = faces[:K] / (dr * vol)            # coefficient of v_{i+1}
    lo = np.concatenate([[0.0], faces[: K - 1]]) / (dr * vol)  # coefficient of v_{i-1}
    diag = -(up + lo)
    return lo, diag, up


def _apply(lo, diag, up, v):
    out = diag * v
    out[1:] += lo[1:] * v[:-1]
    out[:-1] += up[:-1] * v[1:]
    return out


def discrete_radial_steady(f, uR: RadialSolution, dr, maxit=50):
    """Newton solve of the discrete radial Dirichlet problem near u_R."""
    fs = _scalar_f(f)
    m = int(round(uR.R / dr))
    lo, diag, up = _radial_operator(dr, m, uR.N)
    v = uR(np.arange(m) * dr)
    for _ in range(maxit):
        res = _apply(lo, diag, up, v) + fs(v)
        if np.max(np.abs(res)) < 1e-13:
            break
        J = np.zeros((3, m))
        J[0, 1:] = up[:-1]
        J[1] = diag + _fprime(fs, v)
        J[2, :-1] = lo[1:]
        v = v - solve_banded((1, 1), J, res)
    return v


def discrete_dirichlet_steady(mask, center, uR: RadialSolution, coeff=None, f=None, maxit=30,
                              tol=1e-11) -> Field:
    """Discrete Dirichlet steady state on the cells of B_R(center), zero elsewhere.

    Newton iteration on L v + f(v) = 0 over the ball cells, started from
    the sampled u_R.  With zero outside, L v >= 0 there, so the result is
    an exact subsolution of the explicit and IMEX steps (up to ``tol``).
    """
    f = f if f is not None else uR.reaction
    coeff = coeff if coeff is not None else Coefficients(mask)
    Ld, Lq = assemble_operator(mask, coeff)
    L = (Ld + Lq).tocsr()
    v = radial_field(mask, center, uR).values.copy()
    ball = np.flatnonzero(v > 0)
    X, Y = mask.inside_centers()
    fb = f.bind(X[ball], Y[ball]) if isinstance(f, Reaction) else f
    Lb = L[ball][:, ball].tocsc()
    w = v[ball]
    for _ in range(maxit):
        res = Lb @ w + fb(w)
        if np.max(np.abs(res)) < tol:
            break
        d = 1e-7
        fp = (fb(w + d) - fb(w - d)) / (2 * d)
        w = w - spsolve((Lb + _sp_diag(fp)).tocsc(), res)
    else:
        raise NotConverged(f"discrete Dirichlet problem: residual {np.max(np.abs(res)):.3e}")
    if w.min() < 0:
        raise NotConverged("Newton iterate left the nonnegative cone")
    out = np.zeros_like(v)
    out[ball] = w
    return Field(out, mask)


def _sp_diag(d):
    from scipy.sparse import diags

    return diags(d)


@dataclass
class BallEvolution:
    r: np.ndarray
    times: np.ndarray
    profiles: np.ndarray
    inner_radius: float
    inner_min: float
    M_prime: float

    @property
    def exceeds(self):
        return self.inner_min > self.M_prime


def evolve_ball_dirichlet(uR: RadialSolution, R_prime, t_end, f=None, dr=None, dt=0.05,
                          record_every=None) -> BallEvolution:
    """Run v_t = v_rr + (N-1)/r v_r + f(v) in B_{R'} with v = 0 on the sphere.

    The initial datum is the discrete steady state on B_R (vertex grid
    aligned with R) extended by zero, which is an exact discrete
    subsolution, so the computed v is nondecreasing in time.
    """
    f = f if f is not None else uR.reaction
    fs = _scalar_f(f)
    if R_prime <= uR.R:
        raise ValueError("R' must exceed R")
    dr = dr or uR.R / max(200, int(np.ceil(uR.R / 0.02)))
    m = int(round(uR.R / dr))
    dr = uR.R / m
    K = int(np.ceil(R_prime / dr - 1e-9))
    v = np.zeros(K)
    v[:m] = discrete_radial_steady(f, uR, dr)
    lo, diag, up = _radial_operator(dr, K, uR.N)
    lip = f.lipschitz if isinstance(f, Reaction) else 1.0
    dt = min(dt, 0.5 / lip)
    nsteps = max(1, int(np.ceil(t_end / dt)))
    dt = t_end / nsteps
    M = np.zeros((3, K))
    M[0, 1:] = -dt * up[:-1]
    M[1] = 1 - dt * diag
    M[2, :-1] = -dt * lo[1:]
    stride = max(1, int(round((record_every or t_end / 50) / dt)))
    times, profs = [0.0], [v.copy()]
    for k in range(1, nsteps + 1):
        v = solve_banded((1, 1), M, v + dt * fs(v))
        if k % stride == 0 or k == nsteps:
            times.append(k * dt)
            profs.append(v.copy())
    r = np.arange(K) * dr
    inner = R_prime - uR.R
    inner_min = float(v[r <= inner + 1e-12].min())
    return BallEvolution(r, np.array(times), np.array(profs), inner, inner_min, uR.M_prime)


# ---------------------------------------------------------------------------
# truncated energy

def _coefficients(mask, A):
    if isinstance(A, Coefficients):
        return A
    return Coefficients(mask, A=A, q=0.0)


def ball_cells(mask, r, center=None):
    """Boolean vector over inside cells whose center lies in the open ball."""
    X, Y = mask.inside_centers()
    c = center if center is not None else _window_center(mask)
    return np.hypot(X - c[0], Y - c[1]) < r


def _window_center(mask):
    (x0, x1), (y0, y1) = mask.window_bounds[:2]
    return (0.5 * (x0 + x1), 0.5 * (y0 + y1))


def collar_profile(mask, r, center=None) -> Field:
    """1 on B_{r-1}, linear down to 0 on the collar, 0 outside B_r."""
    X, Y = mask.inside_centers()
    c = center if center is not None else _window_center(mask)
    d = np.hypot(X - c[0], Y - c[1])
    return Field(np.clip(r - d, 0.0, 1.0), mask)


class _EnergyModel:
    def __init__(self, mask, r, A, f, center):
        self.mask = mask
        coeff = _coefficients(mask, A)
        self.Ld, _ = assemble_operator(mask, coeff)
        self.free = ball_cells(mask, r, center)
        self.area = mask.cell_area
        X, Y = mask.inside_centers()
        self.X, self.Y = X, Y
        self.f = f.bind(X, Y)
        self.F = lambda s: f.primitive(s, X, Y) if f.x_dependent else f.primitive(s)
        self.Lam = coeff.Lam
        self.lip = f.lipschitz

    def value(self, phi):
        return float(self.area * (-0.5 * phi @ (self.Ld @ phi) - np.sum(self.F(phi))))

    def grad(self, phi):
        g = self.area * (-(self.Ld @ phi) - self.f(phi))
        return np.where(self.free, g, 0.0)


def energy(phi: Field, mask, r, A, f, center=None) -> float:
    """Discrete E_r(phi) = sum over faces of the Dirichlet form minus sum of F(x, phi)."""
    model = _EnergyModel(mask, r, A, f, center)
    vals = phi.values if isinstance(phi, Field) else np.asarray(phi, float)
    if np.any(vals[~model.free] != 0):
        raise ValueError("phi must vanish outside the ball")
    return model.value(vals)


@dataclass
class EnergyReport:
    r: float
    minimizer: Field
    energy: float
    max_value: float
    basins: list = dc_field(default_factory=list)
    iterations: int = 0
    history: list = dc_field(default_factory=list)

    @property
    def trivial(self):
        return self.max_value < 1e-6

    def to_dict(self):
        return {"r": self.r, "energy": self.energy, "max_value": self.max_value,
                "trivial": self.trivial, "iterations": self.iterations,
                "basins": [{k: v for k, v in b.items() if k != "minimizer"} for b in self.basins]}


def _projected_descent(model, x0, iters, rtol=1e-10, gtol=1e-9):
    """Projected gradient on [0, 1] with Barzilai-Borwein steps and Armijo backtracking."""
    free = model.free
    x = np.clip(np.where(free, x0, 0.0), 0.0, 1.0)
    E = model.value(x)
    g = model.grad(x)
    hx, hy = model.mask.spacing
    alpha = 1.0 / (model.area * (2 * model.Lam * (1 / hx ** 2 + 1 / hy ** 2) * 2 + model.lip))
    hist = [E]
    small = 0
    last_rel = np.inf
    for it in range(1, iters + 1):
        a = alpha
        while True:
            xn = np.clip(x - a * g, 0.0, 1.0)
            En = model.value(xn)
            if En <= E + 1e-4 * g @ (xn - x) or a < 1e-30:
                break
            a *= 0.5
        if En > E + 1e-12 * max(1.0, abs(E)):
            raise AssertionError("energy increased during projected descent")
        gn = model.grad(xn)
        s = xn - x
        y = gn - g
        sy = s @ y
        alpha = (s @ s) / sy if sy > 0 else alpha * 2
        dE = E - En
        x, E, g = xn, En, gn
        hist.append(E)
        last_rel = dE / max(1.0, abs(E))
        pg = np.max(np.abs(x - np.clip(x - g / model.area, 0.0, 1.0))) if x.size else 0.0
        small = small + 1 if last_rel < rtol else 0
        if pg < gtol or small >= 20:
            return x, E, it, hist, last_rel
    return x, E, iters, hist, last_rel


def minimize_energy(mask, r, A, f, iters=20000, center=None, starts=("collar", "zero", "random"),
                    seed=0, strict=True) -> EnergyReport:
    """Global-minimum search for the discrete truncated energy over [0, 1]-valued fields.

    Each start is descended independently; the lowest basin is reported.
    """
    model = _EnergyModel(mask, r, A, f, center)
    rng = np.random.default_rng(seed)
    basins = []
    for st in starts:
        if st == "collar":
            x0 = collar_profile(mask, r, center).values
        elif st == "zero":
            x0 = np.zeros(mask.n_inside)
        elif st == "random":
            x0 = rng.uniform(0.0, 1.0, mask.n_inside)
        else:
            x0 = np.asarray(st, float)
            st = "given"
        x, E, it, hist, rel = _projected_descent(model, x0, iters)
        if strict and it >= iters and rel > 1e-8:
            raise NotConverged(f"relative energy decrease {rel:.2e} after {iters} iterations")
        basins.append({"start": st, "energy": E, "max_value": float(x.max()) if x.size else 0.0,
                       "iterations": it, "minimizer": x, "history": hist})
    best = min(basins, key=lambda b: b["energy"])
    return EnergyReport(float(r), Field(best["minimizer"], mask), float(best["energy"]),
                        float(best["max_value"]), basins, best["iterations"], best["history"])


@dataclass
class EnergyThreshold:
    """Bracket [r_small, r_big] of the radius where the minimizer stops being zero."""

    r_small: float
    r_big: float
    small: EnergyReport
    big: EnergyReport
    sweep: list = dc_field(default_factory=list)


def energy_threshold(mask, A, f, r_lo, r_hi, tol=0.25, **kw) -> EnergyThreshold:
    """Bisect on r between a trivial and a nontrivial energy minimizer.

    ``r_lo`` must give the zero minimizer and ``r_hi`` a minimizer with
    negative energy; the bracket is refined until its width is below ``tol``.
    """
    lo = minimize_energy(mask, r_lo, A, f, **kw)
    hi = minimize_energy(mask, r_hi, A, f, **kw)
    sweep = [(r_lo, lo.energy, lo.max_value), (r_hi, hi.energy, hi.max_value)]
    if not lo.trivial or hi.trivial:
        raise ValueError("radii do not bracket the onset of a nontrivial minimizer")
    while hi.r - lo.r > tol:
        mid = minimize_energy(mask, 0.5 * (lo.r + hi.r), A, f, **kw)
        sweep.append((mid.r, mid.energy, mid.max_value))
        if mid.trivial:
            lo = mid
        else:
            hi = mid
    return EnergyThreshold(lo.r, hi.r, lo, hi, sorted(sweep))


# ---------------------------------------------------------------------------
# travelling fronts

@dataclass
class FrontProfile:
    """Monotone front D phi'' + c phi' + f(phi) = 0 joining ``upper`` to ``lower``."""

    z: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    c: float
    f_used: object
    upper: float = 1.0
    lower: float = 0.0
    D: float = 1.0

    def __call__(self, z):
        z = np.asarray(z, float)
        out = np.interp(z, self.z, self.phi)
        out = np.where(z < self.z[0], self.upper, out)
        return np.where(z > self.z[-1], self.lower, out)

    def derivative(self, z):
        z = np.asarray(z, float)
        out = np.interp(z, self.z, self.dphi)
        return np.where((z < self.z[0]) | (z > self.z[-1]), 0.0, out)

    def second_derivative(self, z):
        """From the profile equation rather than by differencing."""
        p = self(z)
        return (-self.c * self.derivative(z) - _scalar_f(self.f_used)(p)) / self.D


def _front_shot(fs, c, upper, lower, D, d0=1e-8, z_max=4000.0, dense=False):
    fp = _fprime(fs, np.array(upper)).item()
    if fp >= 0:
        raise NoFrontFound("upper state is not stable")
    mu = (-c + np.sqrt(c * c - 4 * D * fp)) / (2 * D)
    y0 = [upper - d0, -mu * d0]

    def rhs(z, y):
        return [y[1], (-c * y[1] - fs(np.array(y[0])).item()) / D]

    def below(z, y):
        return y[0] - lower
    below.terminal = True
    below.direction = -1

    def turn(z, y):
        return y[1]
    turn.terminal = True
    turn.direction = 1

    sol = solve_ivp(rhs, (0.0, z_max), y0, method="DOP853", events=(below, turn),
                    rtol=1e-12, atol=1e-14, dense_output=dense)
    if sol.t_events[0].size:
        return "over", sol
    if sol.t_events[1].size:
        return "under", sol
    phi, p = sol.y[0, -1], sol.y[1, -1]
    if c > 0 and phi + D * p / c < lower:
        return "over", sol
    return ("under" if c > 0 else "over"), sol


def front_profile_1d(f, tol=1e-10, D=1.0, upper=None, lower=None, n_samples=4001) -> FrontProfile:
    """Front speed by bisection on c and the profile at the accepted speed.

    Leaving the upper saddle along its unstable manifold, a too slow front
    crosses below the lower state ("over"), a too fast one turns back
    ("under").
    """
    fs = _scalar_f(f)
    upper = getattr(f, "upper", 1.0) if upper is None else upper
    lower = getattr(f, "lower", 0.0) if lower is None else lower
    lip = getattr(f, "lipschitz", 1.0)
    bound = 3.0 * np.sqrt(D * lip)
    a, b = -bound, bound
    if _front_shot(fs, a, upper, lower, D)[0] != "over" or _front_shot(fs, b, upper, lower, D)[0] != "under":
        raise NoFrontFound("cannot bracket the front speed")
    while b - a > tol:
        mid = 0.5 * (a + b)
        if _front_shot(fs, mid, upper, lower, D)[0] == "over":
            a = mid
        else:
            b = mid
    c = 0.5 * (a + b)
    # profile: follow the trajectory until it is within 1e-7 of the lower state
    _, sol = _front_shot(fs, c, upper, lower, D, dense=True)
    zz = np.linspace(sol.t[0], sol.t[-1], 20 * n_samples)
    Y = sol.sol(zz)
    phi, dphi = Y
    keep = (phi - lower > 1e-7) & (dphi < 0)
    last = np.argmin(keep) if not keep.all() else keep.size
    zz, phi, dphi = zz[:last], phi[:last], dphi[:last]
    half = 0.5 * (upper + lower)
    z0 = np.interp(-half, -phi, zz)
    idx = np.linspace(0, zz.size - 1, min(n_samples, zz.size)).astype(int)
    return FrontProfile(zz[idx] - z0, phi[idx], dphi[idx], float(c), f, upper, lower, D)


def exact_cubic_front(theta):
    """Closed-form front of s(1-s)(s-theta): phi(z) = 1/(1+exp(z/sqrt 2))."""
    c = (1.0 - 2.0 * theta) / np.sqrt(2.0)
    phi = lambda z: 1.0 / (1.0 + np.exp(np.asarray(z, float) / np.sqrt(2.0)))
    return phi, c


# ---------------------------------------------------------------------------
# paraboloid subsolution

def paraboloid_eta(c_front, c, mu, N=2):
    return min((c_front - c) / (2 * (N - 1)), np.sqrt(mu) / 4)


class ParaboloidSubsolution:
    """psi(t, x1, x2) = phi(x1 + eta x2^2 - c t) built on a front of speed c' > c.

    ``f`` is the nonlinearity of the evolution problem, continued by 0
    below 0 where psi may be negative.
    """

    def __init__(self, front: FrontProfile, c, eta, f=None, N=2):
        self.front = front
        self.c = float(c)
        self.eta = float(eta)
        self.N = N
        self.f = _scalar_f(f if f is not None else front.f_used)

    def argument(self, t, x1, x2):
        return x1 + self.eta * np.asarray(x2) ** 2 - self.c * t

    def __call__(self, t, x1, x2):
        return self.front(self.argument(t, x1, x2))

    def residual(self, t, x1, x2):
        """d_t psi - Lap psi - f(psi) (non-positive for a subsolution)."""
        xi = self.argument(t, x1, x2)
        p = self.front(xi)
        d1 = self.front.derivative(xi)
        d2 = self.front.second_derivative(xi)
        x2 = np.asarray(x2, float)
        lap = d2 * (1 + 4 * self.eta ** 2 * x2 ** 2) + 2 * self.eta * (self.N - 1) * d1
        fp = np.where(p < 0, 0.0, self.f(np.maximum(p, 0.0)))
        return -self.c * d1 - lap - fp

    def verify_interior(self, n_samples=100000, x2_max=2.0, t_max=10.0, tol=1e-6, seed=0):
        rng = np.random.default_rng(seed)
        z = self.front.z
        t = rng.uniform(0, t_max, n_samples)
        x2 = rng.uniform(-x2_max, x2_max, n_samples)
        xi = rng.uniform(z[0] - 1, z[-1] + 1, n_samples)
        x1 = xi - self.eta * x2 ** 2 + self.c * t
        res = self.residual(t, x1, x2)
        k = int(np.argmax(res))
        if res[k] > tol:
            raise ResidualPositive(f"interior residual {res[k]:.3e} > {tol}", res[k],
                                   (t[k], x1[k], x2[k]))
        return float(res[k])

    def verify_cylinder_boundary(self, profile, n_samples=20000, tol=1e-12):
        """Sign of the conormal derivative on |x2| = v(x1), times |(-v', 1)|."""
        s = np.linspace(0.0, profile.L, n_samples)
        v = profile(s)
        dv = profile.slope(s)
        xi = np.linspace(self.front.z[0], self.front.z[-1], 257)
        dphi = self.front.derivative(xi)
        vals = (-dv[:, None] + 2 * self.eta * v[:, None]) * dphi[None, :]
        k = np.unravel_index(np.argmax(vals), vals.shape)
        worst = float(vals[k])
        if worst > tol:
            raise ResidualPositive(f"boundary flux {worst:.3e} > 0 at x1={s[k[0]]:.4g}", worst, s[k[0]])
        return worst


def paraboloid_subsolution(front: FrontProfile, c, eta, f=None, N=2) -> ParaboloidSubsolution:
    if c >= front.c:
        raise ValueError("the paraboloid speed must be below the front speed")
    return ParaboloidSubsolution(front, c, eta, f, N)
