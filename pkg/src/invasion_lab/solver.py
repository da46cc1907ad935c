"""Monotone finite-volume stepping for

    du/dt = div(A grad u) + q . grad u + f(x, u)

on a masked grid with zero flux through every face between an inside and
an outside cell.  Diffusion uses two-point fluxes with harmonic face
averages, drift is upwinded, so the explicit scheme is monotone under the
CFL bound and the implicit diffusion solve is an M-matrix solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized

from .errors import CflViolation, NonFiniteValue
from .geometry import DomainMask, smoothstep

CFL_SAFETY = 0.9
SCHEMES = {"explicit": "explicit", "ExplicitEuler": "explicit",
           "imex": "imex", "IMEXDiffusion": "imex"}


def _cellwise(value, X, Y, ncomp):
    if callable(value):
        out = value(X, Y)
        out = out if isinstance(out, tuple) else (out,)
        return tuple(np.broadcast_to(np.asarray(o, float), X.shape).copy() for o in out)
    arr = np.asarray(value, float)
    if arr.ndim == 0:
        vals = (float(arr),) * ncomp if ncomp == 2 else (float(arr),)
    else:
        vals = tuple(arr.ravel())
    return tuple(np.full(X.shape, v) for v in vals)


class Coefficients:
    """Diffusion matrix A(x) and drift q(x) sampled at cell centers.

    Parameters
    ----------
    mask : DomainMask
    A : float, 2x2 array or callable
        Scalar (isotropic), constant matrix, or ``A(X, Y) -> (axx, axy, ayy)``.
    q : float, pair or callable
        Constant drift or ``q(X, Y) -> (qx, qy)``.
    cross_terms : bool
        Discretize the off-diagonal part of A.  Those terms are not
        monotone in general; disable them when comparison tests fail.
    """

    def __init__(self, mask: DomainMask, A=1.0, q=0.0, cross_terms=True):
        self.mask = mask
        X, Y = mask.centers
        if callable(A):
            axx, axy, ayy = _cellwise(A, X, Y, 3)
        else:
            a = np.asarray(A, float)
            if a.ndim == 0:
                axx = np.full(X.shape, float(a))
                ayy = axx.copy()
                axy = np.zeros(X.shape)
            else:
                axx = np.full(X.shape, a[0, 0])
                axy = np.full(X.shape, 0.5 * (a[0, 1] + a[1, 0]))
                ayy = np.full(X.shape, a[1, 1])
        if callable(q):
            qx, qy = _cellwise(q, X, Y, 2)
        else:
            qa = np.asarray(q, float)
            if qa.ndim == 0:
                qx = np.full(X.shape, float(qa))
                qy = np.full(X.shape, float(qa))
            else:
                qx = np.full(X.shape, qa[0])
                qy = np.full(X.shape, qa[1] if qa.size > 1 else 0.0)
        if mask.ndim == 1:
            axy = np.zeros_like(axx)
            ayy = np.zeros_like(axx)
            qy = np.zeros_like(qx)
        self.axx, self.axy, self.ayy = axx, axy, ayy
        self.qx, self.qy = qx, qy
        self.cross_terms = bool(cross_terms) and mask.ndim == 2 and np.any(axy != 0)
        self.params = {"A": A if not callable(A) and np.ndim(A) == 0 else "field",
                       "q": q if not callable(q) and np.ndim(q) == 0 else "field"}

        ins = mask.inside
        if mask.ndim == 1:
            ev = axx[ins]
            self.lam, self.Lam = float(ev.min()), float(ev.max())
        else:
            tr = 0.5 * (axx + ayy)
            disc = np.sqrt(0.25 * (axx - ayy) ** 2 + axy ** 2)
            self.lam = float((tr - disc)[ins].min())
            self.Lam = float((tr + disc)[ins].max())
        if self.lam <= 0:
            raise ValueError("diffusion matrix must be uniformly positive definite")
        self.q_inf = float(np.max(np.hypot(qx, qy)[ins])) if ins.any() else 0.0

    def cfl_limit(self):
        """Largest explicit time step allowed by the CFL rule."""
        h = self.mask.min_spacing
        N = self.mask.ndim
        return CFL_SAFETY * h * h / (2 * N * self.Lam + self.q_inf * h)

    def drift_flags(self, tol=1e-10):
        """Discrete checks of divergence-free, zero-mean and no-flux drift."""
        m = self.mask
        hx, hy = m.spacing
        ins = m.inside
        qx, qy = self.qx * ins, self.qy * ins
        div = (np.roll(qx, -1, 1) - np.roll(qx, 1, 1)) / (2 * hx)
        if m.ndim == 2:
            div = div + (np.roll(qy, -1, 0) - np.roll(qy, 1, 0)) / (2 * hy)
        interior = ins & np.roll(ins, 1, 1) & np.roll(ins, -1, 1)
        if m.ndim == 2:
            interior &= np.roll(ins, 1, 0) & np.roll(ins, -1, 0)
        cells, dirs, normals, kinds = m._faces
        w = kinds == "wall"
        qn = qx[cells[w, 0], cells[w, 1]] * normals[w, 0] + qy[cells[w, 0], cells[w, 1]] * normals[w, 1]
        return {
            "divergence_free": bool(np.all(np.abs(div[interior]) <= tol)),
            "zero_mean": bool(abs(qx[ins].mean()) <= tol and abs(qy[ins].mean()) <= tol),
            "no_flux": bool(np.all(np.abs(qn) <= tol)),
        }


def _neighbor_index(mask, gi, d):
    """Index grid of the neighbour in direction d (-1 where none)."""
    ny, nx = gi.shape
    if d == "E":
        nb = np.roll(gi, -1, axis=1)
        if not mask.periodic[0]:
            nb[:, -1] = -1
    elif d == "W":
        nb = np.roll(gi, 1, axis=1)
        if not mask.periodic[0]:
            nb[:, 0] = -1
    elif d == "N":
        nb = np.roll(gi, -1, axis=0)
        if mask.ndim == 1 or not mask.periodic[1]:
            nb[-1, :] = -1
    else:
        nb = np.roll(gi, 1, axis=0)
        if mask.ndim == 1 or not mask.periodic[1]:
            nb[0, :] = -1
    if mask.ndim == 1 and d in "NS":
        nb[:] = -1
    return nb


def index_grid(mask):
    gi = np.full(mask.shape, -1, dtype=np.int64)
    gi.ravel()[mask.flat_index] = np.arange(mask.n_inside)
    return gi


def assemble_operator(mask: DomainMask, coeff: Coefficients):
    """Sparse diffusion and drift operators acting on inside-cell vectors.

    Returns ``(Ld, Lq)`` in CSR format.  Rows of both sum to zero, the
    off-diagonal entries of Lq are non-negative, and so are those of Ld
    when cross terms are off.
    """
    n = mask.n_inside
    gi = index_grid(mask)
    hx, hy = mask.spacing
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    # two-point diffusive fluxes
    for d, a, h in (("E", coeff.axx, hx), ("N", coeff.ayy, hy)):
        if mask.ndim == 1 and d == "N":
            continue
        nb = _neighbor_index(mask, gi, d)
        shift = (0, -1) if d == "E" else (-1, 0)
        a_nb = np.roll(a, shift, axis=(0, 1))
        sel = (gi >= 0) & (nb >= 0)
        P, Q = gi[sel], nb[sel]
        aP, aQ = a[sel], a_nb[sel]
        w = 2 * aP * aQ / (aP + aQ) / (h * h)
        add(P, Q, w)
        add(Q, P, w)
        add(P, P, -w)
        add(Q, Q, -w)

    # symmetric cross differences for the off-diagonal part
    if coeff.cross_terms:
        nbE = _neighbor_index(mask, gi, "E")
        nbN = _neighbor_index(mask, gi, "N")
        nbS = _neighbor_index(mask, gi, "S")
        nbW = _neighbor_index(mask, gi, "W")

        def at(grid_idx, nb):
            out = np.full_like(grid_idx, -1)
            ok = grid_idx >= 0
            flat = nb.ravel()
            # map a flat inside index back to its grid neighbour
            inv = mask.flat_index
            out[ok] = flat[inv[grid_idx[ok]]]
            return out

        axy = coeff.axy
        axy_E = np.roll(axy, -1, axis=1)
        axy_N = np.roll(axy, -1, axis=0)
        # x-faces carry axy * du/dy
        P = gi
        Q = nbE
        PN, PS = nbN, nbS
        QN, QS = at(Q, nbN), at(Q, nbS)
        sel = (P >= 0) & (Q >= 0) & (PN >= 0) & (PS >= 0) & (QN >= 0) & (QS >= 0)
        af = 0.5 * (axy + axy_E)[sel] / (4 * hx * hy)
        for idx, sgn in ((PN[sel], 1), (QN[sel], 1), (PS[sel], -1), (QS[sel], -1)):
            add(P[sel], idx, sgn * af)
            add(Q[sel], idx, -sgn * af)
        # y-faces carry axy * du/dx
        Q = nbN
        PE, PW = nbE, nbW
        QE, QW = at(Q, nbE), at(Q, nbW)
        sel = (P >= 0) & (Q >= 0) & (PE >= 0) & (PW >= 0) & (QE >= 0) & (QW >= 0)
        af = 0.5 * (axy + axy_N)[sel] / (4 * hx * hy)
        for idx, sgn in ((PE[sel], 1), (QE[sel], 1), (PW[sel], -1), (QW[sel], -1)):
            add(P[sel], idx, sgn * af)
            add(Q[sel], idx, -sgn * af)

    Ld = sp.csr_matrix((np.concatenate(vals) if vals else np.zeros(0),
                        (np.concatenate(rows) if rows else np.zeros(0, int),
                         np.concatenate(cols) if cols else np.zeros(0, int))), shape=(n, n))

    # upwind drift
    rows, cols, vals = [], [], []
    for comp, h, fwd, bwd in ((coeff.qx, hx, "E", "W"), (coeff.qy, hy, "N", "S")):
        if mask.ndim == 1 and fwd == "N":
            continue
        for d, sgn in ((fwd, 1.0), (bwd, -1.0)):
            nb = _neighbor_index(mask, gi, d)
            sel = (gi >= 0) & (nb >= 0) & (sgn * comp > 0)
            w = np.abs(comp[sel]) / h
            add(gi[sel], nb[sel], w)
            add(gi[sel], gi[sel], -w)
    Lq = sp.csr_matrix((np.concatenate(vals) if vals else np.zeros(0),
                        (np.concatenate(rows) if rows else np.zeros(0, int),
                         np.concatenate(cols) if cols else np.zeros(0, int))), shape=(n, n))
    Ld.sum_duplicates()
    Lq.sum_duplicates()
    return Ld, Lq


@dataclass
class Field:
    """Values at the inside cells of a mask, at a given time."""

    values: np.ndarray
    mask: DomainMask
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mask.n_inside,):
            raise ValueError("field size does not match the number of inside cells")

    def grid(self, fill=0.0):
        return self.mask.to_grid(self.values, fill)

    def copy(self):
        return Field(self.values.copy(), self.mask, self.time)


@dataclass
class SolverConfig:
    """Time-stepping parameters; ``dt='auto'`` picks a safe step."""

    t_end: float
    dt: float | str = "auto"
    scheme: str = "explicit"
    record_every: float | None = None
    snapshot_every: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        self.scheme = SCHEMES[self.scheme]


class Stepper:
    """Assembled one-step map u -> u(t + dt) for fixed data."""

    def __init__(self, mask, coeff, f, dt, scheme="explicit", check_cfl=True):
        scheme = SCHEMES[scheme]
        self.mask, self.coeff, self.reaction = mask, coeff, f
        self.dt = float(dt)
        self.scheme = scheme
        Ld, Lq = assemble_operator(mask, coeff)
        X, Y = mask.inside_centers()
        self.f = f.bind(X, Y)
        if scheme == "explicit":
            limit = coeff.cfl_limit()
            if check_cfl and self.dt > limit * (1 + 1e-12):
                raise CflViolation(f"dt={self.dt:.3g} exceeds the CFL limit {limit:.3g}")
            self.L = (Ld + Lq).tocsr()
        else:
            n = mask.n_inside
            M = (sp.identity(n, format="csc") - self.dt * (Ld + Lq)).tocsc()
            self.solve = factorized(M)

    def __call__(self, u):
        dt = self.dt
        if self.scheme == "explicit":
            return u + dt * (self.L @ u + self.f(u))
        return self.solve(u + dt * self.f(u))


def auto_dt(coeff, f, scheme):
    """Default time step: CFL-limited for explicit, reaction-limited for IMEX."""
    if SCHEMES[scheme] == "explicit":
        return min(coeff.cfl_limit(), 0.5 / max(f.lipschitz, 1e-12))
    return min(0.05, 0.2 / max(f.lipschitz, 1e-12))


_STEPPERS: dict = {}


def step(u: Field, coeff: Coefficients, f, dt, scheme="explicit") -> Field:
    """Advance a field by one time step."""
    key = (id(coeff), id(f), float(dt), SCHEMES[scheme])
    st = _STEPPERS.get(key)
    if st is None or st.coeff is not coeff or st.reaction is not f:
        if len(_STEPPERS) > 8:
            _STEPPERS.clear()
        st = Stepper(u.mask, coeff, f, dt, scheme)
        _STEPPERS[key] = st
    v = st(u.values)
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue(f"non-finite value at t={u.time + dt:.6g}")
    return Field(v, u.mask, u.time + dt)


# ---------------------------------------------------------------------------
# probes

class Probe:
    name = "probe"

    def prepare(self, mask):
        pass

    def __call__(self, u):
        raise NotImplementedError


class GlobalMax(Probe):
    def __init__(self, name="max"):
        self.name = name

    def __call__(self, u):
        return float(u.max())


class GlobalMin(Probe):
    def __init__(self, name="min"):
        self.name = name

    def __call__(self, u):
        return float(u.min())


class Mass(Probe):
    def __init__(self, name="mass"):
        self.name = name

    def prepare(self, mask):
        self.area = mask.cell_area

    def __call__(self, u):
        return float(u.sum() * self.area)


def region_selector(mask, region):
    """Boolean vector over inside cells for a box, grid mask or predicate."""
    X, Y = mask.inside_centers()
    if callable(region):
        sel = np.asarray(region(X, Y), bool)
    elif isinstance(region, np.ndarray) and region.dtype == bool:
        sel = mask.from_grid(region) > 0.5 if region.shape == mask.shape else region
    else:
        x0, x1, y0, y1 = region
        sel = (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
    return np.asarray(sel, bool)


class RegionMin(Probe):
    def __init__(self, name, region):
        self.name = name
        self.region = region

    def prepare(self, mask):
        self.sel = region_selector(mask, self.region)
        if not self.sel.any():
            raise ValueError(f"probe region {self.name!r} contains no cell")

    def __call__(self, u):
        return float(u[self.sel].min())


class RegionMax(RegionMin):
    def __call__(self, u):
        return float(u[self.sel].max())


class Ray:
    """Inside cells met by a ray, ordered by their projected coordinate."""

    def __init__(self, mask, origin, direction):
        e = np.zeros(2)
        e[: len(direction)] = direction
        e = e / np.linalg.norm(e)
        o = np.zeros(2)
        o[: len(origin)] = origin
        (x0, x1), (y0, y1) = mask.window_bounds[:2]
        hx, hy = mask.spacing
        length = np.hypot(x1 - x0, y1 - y0)
        ds = 0.25 * min(hx, hy) if mask.ndim == 2 else 0.25 * hx
        s = np.arange(0.0, length, ds)
        px, py = o[0] + s * e[0], o[1] + s * e[1]
        if mask.ndim == 1:
            py = np.zeros_like(px)
        inwin = (px >= x0) & (px < x1) & (py >= y0) & (py < y1) if mask.ndim == 2 else (px >= x0) & (px < x1)
        first_out = np.flatnonzero(~inwin)
        if first_out.size:
            px, py = px[: first_out[0]], py[: first_out[0]]
        i = np.floor((px - x0) / hx).astype(int)
        j = np.floor((py - y0) / hy).astype(int) if mask.ndim == 2 else np.zeros_like(i)
        cell = j * mask.shape[1] + i
        keep = np.concatenate([[True], cell[1:] != cell[:-1]]) if cell.size else cell.astype(bool)
        cell = cell[keep]
        gi = index_grid(mask).ravel()
        X, Y = mask.centers
        self.index = gi[cell]
        self.pos = (X.ravel()[cell] - o[0]) * e[0] + (Y.ravel()[cell] - o[1]) * e[1]
        self.origin = o
        self.direction = e


def rightmost_crossing(values, pos, level):
    """Position of the last downward crossing of ``level`` along a profile.

    Linear interpolation between the straddling samples; NaN samples (cells
    outside the domain) are skipped.  Returns NaN if the level is never
    reached and the last position if the profile ends above the level.
    """
    valid = np.isfinite(values)
    v = values[valid]
    p = pos[valid]
    above = np.flatnonzero(v >= level)
    if above.size == 0:
        return float("nan")
    k = above[-1]
    if k == v.size - 1:
        return float(p[k])
    v0, v1 = v[k], v[k + 1]
    return float(p[k] + (v0 - level) / (v0 - v1) * (p[k + 1] - p[k]))


class FrontPosition(Probe):
    """Rightmost crossing of ``level`` along a ray from ``origin``.

    Records +inf once the profile ends above the level.
    """

    def __init__(self, name, direction=(1.0, 0.0), origin=None, level=0.5):
        self.name = name
        self.direction = direction
        self.origin = origin
        self.level = level

    def prepare(self, mask):
        origin = self.origin
        if origin is None:
            (x0, _), (y0, y1) = mask.window_bounds[:2]
            origin = (x0, 0.5 * (y0 + y1))
        self.ray = Ray(mask, origin, self.direction)

    def __call__(self, u):
        idx = self.ray.index
        vals = np.where(idx >= 0, u[np.maximum(idx, 0)], np.nan)
        last = vals[np.isfinite(vals)]
        if last.size and last[-1] >= self.level:
            return float("inf")  # the front has left the window
        return rightmost_crossing(vals, self.ray.pos, self.level)


@dataclass
class Trajectory:
    """Probe histories, optional snapshots and the final field of a run."""

    mask: DomainMask
    times: np.ndarray
    probes: dict
    snapshots: list = dc_field(default_factory=list)
    final: Field | None = None
    dt: float = float("nan")
    scheme: str = "explicit"
    wall_time: float = 0.0

    def probe(self, name):
        return np.asarray(self.probes[name])


def run(u0: Field, coeff: Coefficients, f, cfg: SolverConfig, probes=(),
        callback: Callable | None = None) -> Trajectory:
    """Integrate from u0 to cfg.t_end, sampling probes every record_every."""
    import time as _time

    t0 = _time.perf_counter()
    mask = u0.mask
    dt = auto_dt(coeff, f, cfg.scheme) if cfg.dt in (None, "auto") else float(cfg.dt)
    nsteps = max(1, int(np.ceil(cfg.t_end / dt - 1e-9)))
    dt = cfg.t_end / nsteps
    stepper = Stepper(mask, coeff, f, dt, cfg.scheme)
    rec = cfg.record_every or cfg.t_end / 100
    rec_stride = max(1, int(round(rec / dt)))
    snap_stride = max(1, int(round(cfg.snapshot_every / dt))) if cfg.snapshot_every else None
    for p in probes:
        p.prepare(mask)

    u = u0.values.copy()
    times = [u0.time]
    hist = {p.name: [p(u)] for p in probes}
    snaps = [(u0.time, u.copy())] if snap_stride else []
    t = u0.time
    for k in range(1, nsteps + 1):
        u = stepper(u)
        t = u0.time + k * dt
        if k % rec_stride == 0 or k == nsteps:
            if not np.all(np.isfinite(u)):
                raise NonFiniteValue(f"non-finite value at t={t:.6g}")
            times.append(t)
            for p in probes:
                hist[p.name].append(p(u))
            if callback is not None:
                callback(t, u)
        if snap_stride and (k % snap_stride == 0 or k == nsteps):
            snaps.append((t, u.copy()))
    return Trajectory(mask, np.asarray(times), {k: np.asarray(v) for k, v in hist.items()},
                      snaps, Field(u, mask, t), dt, cfg.scheme, _time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# initial data

def _displacement(mask, center):
    X, Y = mask.inside_centers()
    dx = X - center[0]
    dy = Y - (center[1] if len(center) > 1 else 0.0)
    L = mask.period.lengths
    if mask.periodic[0]:
        W = L[0] * mask.window[0]
        dx = dx - W * np.round(dx / W)
    if mask.ndim == 2 and mask.periodic[1]:
        W = L[1] * mask.window[1]
        dy = dy - W * np.round(dy / W)
    if mask.ndim == 1:
        dy = np.zeros_like(dx)
    return dx, dy


def make_front_like(mask, e=(1.0, 0.0), shift=0.0, width=1.0) -> Field:
    """Smooth ramp in x.e from 1 (behind) to 0 (ahead) centered at ``shift``."""
    e = np.asarray(e, float)
    e = e / np.linalg.norm(e)
    X, Y = mask.inside_centers()
    z = X * e[0] + (Y * e[1] if e.size > 1 else 0.0) - shift
    if width <= 0:
        u = np.where(z < 0, 1.0, np.where(z > 0, 0.0, 0.5))
    else:
        u = 1.0 - smoothstep(z / width + 0.5)
    return Field(u, mask)


def make_bump(mask, center, radius, height=1.0) -> Field:
    """Plateau of ``height`` on the ball, with a one-cell linear edge."""
    if not 0 < height <= 1:
        raise ValueError("height must lie in (0, 1]")
    dx, dy = _displacement(mask, center)
    r = np.hypot(dx, dy)
    h = mask.min_spacing
    u = height * np.clip((radius - r) / h + 0.5, 0.0, 1.0)
    return Field(u, mask)


def radial_field(mask, center, profile) -> Field:
    """u(x) = profile(|x - center|) using minimum-image distances."""
    dx, dy = _displacement(mask, center)
    return Field(np.asarray(profile(np.hypot(dx, dy)), float), mask)
