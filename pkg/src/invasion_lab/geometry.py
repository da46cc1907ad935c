"""Periodic perforated domains discretized as masked Cartesian grids.

A cell belongs to the domain when its center does (ties count as inside).
Holes are described by a continuous level function ``phi`` which is
positive in the open domain and negative inside the obstacle; the
continuous description is kept next to the mask so that geometric
conditions (tangent discs, sliding of balls) can be checked without
staircase artifacts.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import (
    ConstraintViolation,
    DisconnectedDomain,
    FeatureUnresolved,
    NotConnected,
    ProfileViolation,
)

MIN_RESOLUTION = 8
MIN_FEATURE_CELLS = 4

# face directions: east, west, north, south
DIRECTIONS = ("E", "W", "N", "S")
_DIR_STEP = {"E": (0, 1), "W": (0, -1), "N": (1, 0), "S": (-1, 0)}
_DIR_NORMAL = {"E": (1.0, 0.0), "W": (-1.0, 0.0), "N": (0.0, 1.0), "S": (0.0, -1.0)}

BoundaryFace = namedtuple("BoundaryFace", "cell direction normal kind")


@dataclass(frozen=True)
class PeriodSpec:
    """Period lengths of the lattice and the grid resolution.

    Parameters
    ----------
    lengths : tuple of float
        Period along each axis (one or two axes).
    resolution : int
        Target number of cells per unit length.  The actual cell size on
        axis ``i`` is ``lengths[i] / round(lengths[i] * resolution)`` so
        that one period is an integer number of cells.
    """

    lengths: tuple
    resolution: int = 16

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        if len(lengths) not in (1, 2):
            raise ValueError("only one or two space dimensions are supported")
        if any(not np.isfinite(v) or v <= 0 for v in lengths):
            raise ValueError(f"period lengths must be positive, got {lengths}")
        if int(self.resolution) != self.resolution or self.resolution < MIN_RESOLUTION:
            raise ValueError(f"resolution must be an integer >= {MIN_RESOLUTION}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "resolution", int(self.resolution))

    @property
    def ndim(self):
        return len(self.lengths)

    @property
    def cells(self):
        return tuple(max(1, int(round(L * self.resolution))) for L in self.lengths)

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.lengths))


# ---------------------------------------------------------------------------
# smooth building blocks

def smoothstep(t):
    """C1 monotone step from 0 to 1 on [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def rounded_ramp(t, delta):
    """Linear ramp from 0 to 1 on [0, 1] whose two corners are rounded.

    The derivative rises linearly on [0, delta], stays at 1/(1-delta) and
    falls back to 0 on [1-delta, 1], so the maximal slope is 1/(1-delta).
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    if delta <= 0:
        return t
    m = 1.0 / (1.0 - delta)
    out = m * (t - 0.5 * delta)
    lo = t < delta
    hi = t > 1.0 - delta
    out = np.where(lo, m * t * t / (2 * delta), out)
    out = np.where(hi, 1.0 - m * (1.0 - t) ** 2 / (2 * delta), out)
    return out


def rounded_ramp_slope(t, delta):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    if delta <= 0:
        return np.ones_like(t)
    m = 1.0 / (1.0 - delta)
    out = np.full_like(t, m)
    out = np.where(t < delta, m * t / delta, out)
    out = np.where(t > 1.0 - delta, m * (1.0 - t) / delta, out)
    return out


def cutoff_chi(s):
    """Flat-at-zero, vertical-at-one cutoff: (1 - sqrt(1-s)) * exp(1 - 1/s)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    out = np.where(s >= 1.0, 1.0, out)
    mid = (s > 0) & (s < 1)
    sm = s[mid]
    out[mid] = (1.0 - np.sqrt(1.0 - sm)) * np.exp(1.0 - 1.0 / sm)
    return out


def _box_sdf(x, y, cx, cy, hx, hy):
    qx = np.abs(x - cx) - hx
    qy = np.abs(y - cy) - hy
    outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
    inside = np.minimum(np.maximum(qx, qy), 0.0)
    return outside + inside


# ---------------------------------------------------------------------------
# hole descriptors.  ``phi`` works in base-cell coordinates [0, L1) x [0, L2).

class HoleGeometry:
    """Base class: the hole-free medium."""

    tag = "None"
    lattice_hole = True  # hole must sit strictly inside one period cell

    def phi(self, x, y):
        return np.ones(np.broadcast(x, y).shape)

    def features(self):
        """List of (name, width) pairs that must be resolved by the grid."""
        return []

    def bbox(self):
        return None

    def reduce(self, x, y, lengths):
        """Map global coordinates to the base cell."""
        x = np.mod(x, lengths[0])
        if len(lengths) > 1:
            y = np.mod(y, lengths[1])
        return x, y

    def describe(self):
        return {"tag": self.tag}


NoHole = HoleGeometry


class RectHole(HoleGeometry):
    """Axis-aligned rectangular obstacle."""

    tag = "RectHole"

    def __init__(self, center, size):
        self.center = tuple(float(c) for c in center)
        size = np.broadcast_to(np.asarray(size, dtype=float), (2,))
        self.size = tuple(size)

    def phi(self, x, y):
        return _box_sdf(x, y, self.center[0], self.center[1],
                        self.size[0] / 2, self.size[1] / 2)

    def features(self):
        return [("hole width", min(self.size))]

    def bbox(self):
        cx, cy = self.center
        return (cx - self.size[0] / 2, cx + self.size[0] / 2,
                cy - self.size[1] / 2, cy + self.size[1] / 2)

    def describe(self):
        return {"tag": self.tag, "center": list(self.center), "size": list(self.size)}


def _polygon_sdf(x, y, verts):
    """Signed distance to a closed polygon, positive outside."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d2 = np.full(np.broadcast(x, y).shape, np.inf)
    inside = np.zeros(d2.shape, dtype=bool)
    n = len(verts)
    for k in range(n):
        ax, ay = verts[k]
        bx, by = verts[(k + 1) % n]
        ex, ey = bx - ax, by - ay
        wx, wy = x - ax, y - ay
        t = np.clip((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0, 1.0)
        dx, dy = wx - t * ex, wy - t * ey
        d2 = np.minimum(d2, dx * dx + dy * dy)
        # even-odd crossing rule
        cond = (ay > y) != (by > y)
        xint = ax + (y - ay) * ex / np.where(ey == 0, 1.0, ey)
        inside ^= cond & (x < xint)
    d = np.sqrt(d2)
    return np.where(inside, -d, d)


class StarHole(HoleGeometry):
    """Polygonal obstacle, star-shaped with respect to ``center``."""

    tag = "StarHole"

    def __init__(self, vertices, center):
        self.vertices = np.asarray(vertices, dtype=float)
        self.center = tuple(float(c) for c in center)
        if not self.is_star_shaped():
            raise ValueError("polygon is not star-shaped with respect to its center")

    @classmethod
    def star(cls, n_points=5, r_outer=1.0, r_inner=0.45, center=(0.0, 0.0), rotation=0.0):
        ang = rotation + np.pi / 2 + np.arange(2 * n_points) * np.pi / n_points
        rad = np.where(np.arange(2 * n_points) % 2 == 0, r_outer, r_inner)
        verts = np.column_stack([center[0] + rad * np.cos(ang),
                                 center[1] + rad * np.sin(ang)])
        return cls(verts, center)

    def is_star_shaped(self, samples=64):
        # every segment from the center to a vertex (and to edge points)
        # must stay inside the closed polygon
        c = np.asarray(self.center)
        n = len(self.vertices)
        targets = [self.vertices]
        for k in range(n):
            a, b = self.vertices[k], self.vertices[(k + 1) % n]
            t = np.linspace(0, 1, 9)[1:-1, None]
            targets.append(a + t * (b - a))
        targets = np.vstack(targets)
        s = np.linspace(0.0, 1.0, samples)[:, None, None]
        pts = c + s * (targets[None, :, :] - c)
        d = _polygon_sdf(pts[..., 0], pts[..., 1], self.vertices)
        scale = np.ptp(self.vertices, axis=0).max()
        return bool(np.all(d <= 1e-9 * scale))

    @property
    def diameter(self):
        v = self.vertices
        return float(np.max(np.hypot(v[:, None, 0] - v[None, :, 0],
                                     v[:, None, 1] - v[None, :, 1])))

    def phi(self, x, y):
        return _polygon_sdf(x, y, self.vertices)

    def features(self):
        # narrowest arm: smallest distance between non-adjacent edges is
        # hard to get in general; the inner radius is a fair proxy
        c = np.asarray(self.center)
        r = np.hypot(*(self.vertices - c).T)
        return [("star inner radius", 2 * r.min())]

    def bbox(self):
        v = self.vertices
        return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())

    def recentered(self, center):
        shift = np.asarray(center) - np.asarray(self.center)
        return StarHole(self.vertices + shift, tuple(center))

    def describe(self):
        return {"tag": self.tag, "center": list(self.center),
                "vertices": self.vertices.tolist()}


def star_lattice_period(hole: StarHole, R: float) -> float:
    """Period making the sliding argument work: 2 diam(K) + 2R + 1."""
    return 2.0 * hole.diameter + 2.0 * R + 1.0


class NarrowNeck(HoleGeometry):
    """Square lattice of chambers joined by narrow corridors.

    Chambers are squares of half-side ``chamber`` centered at the lattice
    points; neighbouring chambers are joined by straight corridors of
    width ``aperture`` running along the cell edges.  The obstacle is the
    square ``[a/2, L-a/2]^2`` with its four corners cut away.
    """

    tag = "NarrowNeck"

    def __init__(self, aperture, chamber, period):
        self.aperture = float(aperture)
        self.chamber = float(chamber)
        self.period = float(period)
        a, c, L = self.aperture, self.chamber, self.period
        if not (0 < a / 2 < c and 2 * c < L):
            raise ValueError("need 0 < aperture/2 < chamber < period/2")

    def phi(self, x, y):
        a, c, L = self.aperture, self.chamber, self.period
        block = _box_sdf(x, y, L / 2, L / 2, L / 2 - a / 2, L / 2 - a / 2)
        rooms = np.full(np.broadcast(x, y).shape, np.inf)
        for cx in (0.0, L):
            for cy in (0.0, L):
                rooms = np.minimum(rooms, _box_sdf(x, y, cx, cy, c, c))
        return np.maximum(block, -rooms)

    def features(self):
        return [("corridor width", self.aperture),
                ("wall thickness", self.period - 2 * self.chamber)]

    def bbox(self):
        a, L = self.aperture, self.period
        return (a / 2, L - a / 2, a / 2, L - a / 2)

    def describe(self):
        return {"tag": self.tag, "aperture": self.aperture, "chamber": self.chamber,
                "period": self.period}


class SawtoothProfile:
    """Half-width of the sawtooth cylinder as a function of x1 in [0, L).

    Equal to 2 on [0, 1]; drops to ``neck`` on [1, 1+drop] and stays there
    until x1 = 2; rises with rounded corners to 1 at L/2 and to 2 at L.
    """

    def __init__(self, L, neck, drop=0.05):
        if L <= 4:
            raise ValueError("the cylinder period must exceed 4")
        if not 0 < neck < 1:
            raise ValueError("neck half-width must lie in (0, 1)")
        self.L = float(L)
        self.neck = float(neck)
        self.drop = float(drop)
        self.delta_up = min(0.25, self.neck)
        self.delta_top = min(0.25, 4.0 / self.L)

    def __call__(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.L)
        L, nk = self.L, self.neck
        out = np.full_like(s, 2.0)
        m = (s > 1) & (s <= 2)
        out = np.where(m, 2.0 - (2.0 - nk) * smoothstep((s - 1) / self.drop), out)
        m = (s > 2) & (s <= L / 2)
        out = np.where(m, nk + (1 - nk) * rounded_ramp((s - 2) / (L / 2 - 2), self.delta_up), out)
        m = s > L / 2
        out = np.where(m, 1.0 + rounded_ramp((s - L / 2) / (L / 2), self.delta_top), out)
        return out

    def slope(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.L)
        L, nk = self.L, self.neck
        out = np.zeros_like(s)
        t = np.clip((s - 1) / self.drop, 0, 1)
        out = np.where((s > 1) & (s <= 2), -(2.0 - nk) * 6 * t * (1 - t) / self.drop, out)
        w = L / 2 - 2
        out = np.where((s > 2) & (s <= L / 2),
                       (1 - nk) / w * rounded_ramp_slope((s - 2) / w, self.delta_up), out)
        out = np.where(s > L / 2, rounded_ramp_slope((s - L / 2) / (L / 2), self.delta_top) / (L / 2), out)
        return out

    def neck_area(self):
        """Area of the cross-section integrated over x1 in [1, 2]."""
        s = np.linspace(1, 2, 20001)
        return float(np.trapezoid(2 * self(s), s))

    def violations(self, n=20001):
        L = self.L
        issues = []
        s = np.linspace(1, 2, n)
        if np.any(np.diff(self(s)) > 1e-12):
            issues.append("profile increases on [1, 2]")
        s = np.linspace(2, L, n)
        sl = self.slope(s)
        if sl.min() < -1e-12:
            issues.append("profile decreases on [2, L]")
        if sl.max() > 2.0 / (L - 4) + 1e-12:
            issues.append("slope on [2, L] exceeds 2/(L-4)")
        if abs(float(self(L / 2)) - 1.0) > 1e-12:
            issues.append("profile is not 1 at L/2")
        if np.any(np.abs(self(np.linspace(0, 1, 101)) - 2.0) > 1e-12):
            issues.append("profile is not 2 on [0, 1]")
        return issues


class MirroredProfile:
    """The profile read right to left: v(L - s)."""

    def __init__(self, profile):
        self.base = profile
        self.L = profile.L
        self.neck = profile.neck
        self.drop = profile.drop

    def __call__(self, s):
        return self.base(self.L - np.asarray(s, dtype=float))

    def slope(self, s):
        return -self.base.slope(self.L - np.asarray(s, dtype=float))


class SawtoothCylinder(HoleGeometry):
    """The cylinder {|x2 - H/2| <= v(x1)} periodic in x1 only."""

    tag = "SawtoothCylinder"
    lattice_hole = False

    def __init__(self, profile: SawtoothProfile, height):
        self.profile = profile
        self.height = float(height)

    def phi(self, x, y):
        return self.profile(x) - np.abs(y - self.height / 2)

    def reduce(self, x, y, lengths):
        return np.mod(x, lengths[0]), y

    def features(self):
        return [("neck width", 2 * self.profile.neck)]

    def describe(self):
        p = self.profile
        return {"tag": self.tag, "L": p.L, "neck": p.neck, "drop": p.drop, "height": self.height}


@dataclass(frozen=True)
class Omega3Spec:
    """Parameters of the asymmetric lattice: neck eps, ramp kappa, radius R.

    With ``enforce=True`` the admissibility inequalities kappa >= 4R and
    R <= 1/(2 eps) are checked at construction.
    """

    eps: float
    kappa: float
    R: float
    enforce: bool = True

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.kappa <= 0 or self.R <= 0:
            raise ValueError("kappa and R must be positive")
        if self.enforce and self.violations():
            raise ConstraintViolation("; ".join(self.violations()))

    def violations(self):
        out = []
        if self.kappa < 4 * self.R:
            out.append(f"kappa={self.kappa} < 4R={4 * self.R}")
        if self.R > 1 / (2 * self.eps):
            out.append(f"R={self.R} > 1/(2 eps)={1 / (2 * self.eps)}")
        return out

    @property
    def L1(self):
        return 2.0 * (3.0 / self.eps ** 2 + self.kappa)

    @property
    def L2(self):
        return 2.0 * (1.0 + self.kappa)

    def h(self, s):
        """Half-width of the channel at abscissa s in [0, L1/2]."""
        e, k = self.eps, self.kappa
        s = np.asarray(s, dtype=float)
        a, b, c = 1 / e ** 2, 2 / e ** 2, 3 / e ** 2
        out = np.full(s.shape, e)
        out = np.where(s < 1, 2 * e - e * smoothstep(s), out)
        delta = min(e, 0.25)
        out = np.where((s > a) & (s < b), e + (1 - e) * rounded_ramp((s - a) / (b - a), delta), out)
        out = np.where((s >= b) & (s <= c), 1.0, out)
        out = np.where(s > c, 1.0 + k * cutoff_chi((s - c) / k), out)
        return out

    def h_slope(self, s, ds=1e-7):
        s = np.asarray(s, dtype=float)
        return (self.h(s + ds) - self.h(s - ds)) / (2 * ds)


class Omega3(HoleGeometry):
    """Lattice whose channels narrow abruptly to the left and open slowly to the right.

    In base-cell coordinates the channel runs along y = 0 (mod L2) and the
    obstacle occupies x1 in [0, L1/2] outside |y| < h(x1).
    """

    tag = "Omega3"
    lattice_hole = False

    def __init__(self, spec: Omega3Spec):
        self.spec = spec

    def phi(self, x, y):
        L1, L2 = self.spec.L1, self.spec.L2
        xr = np.where(x <= L1 / 2, x, x - L1)
        yr = np.where(y < L2 / 2, y, y - L2)
        hx = self.spec.h(np.clip(xr, 0, L1 / 2))
        return np.where(xr >= 0, np.maximum(hx - np.abs(yr), -xr), -xr)

    def features(self):
        return [("neck width", 2 * self.spec.eps)]

    def describe(self):
        s = self.spec
        return {"tag": self.tag, "eps": s.eps, "kappa": s.kappa, "R": s.R,
                "L1": s.L1, "L2": s.L2}


# ---------------------------------------------------------------------------
# masks

class DomainMask:
    """A window of whole period cells of a perforated domain on a grid.

    Attributes
    ----------
    period : PeriodSpec
    window : tuple of int
        Number of period cells along each axis.
    origin : tuple of int
        Index of the first period cell along each axis.
    periodic : tuple of bool
        Whether the window wraps around along each axis; otherwise the
        window edge is a zero-flux wall.
    inside : ndarray of bool, shape (ny, nx)
    descriptor : HoleGeometry
    """

    def __init__(self, period, window, origin, periodic, inside, descriptor):
        self.period = period
        self.window = tuple(window)
        self.origin = tuple(origin)
        self.periodic = tuple(bool(p) for p in periodic)
        self.inside = inside
        self.inside.setflags(write=False)
        self.descriptor = descriptor

    # basic grid data
    @property
    def ndim(self):
        return self.period.ndim

    @property
    def shape(self):
        return self.inside.shape

    @property
    def spacing(self):
        if self.ndim == 1:
            return (self.period.spacing[0], 1.0)
        return self.period.spacing

    @property
    def cell_area(self):
        hx, hy = self.spacing
        return hx * hy

    @property
    def min_spacing(self):
        return min(self.period.spacing)

    @cached_property
    def x(self):
        L = self.period.lengths[0]
        n = self.period.cells[0]
        i = np.arange(self.shape[1])
        return self.origin[0] * L + (i + 0.5) * (L / n)

    @cached_property
    def y(self):
        if self.ndim == 1:
            return np.zeros(1)
        L = self.period.lengths[1]
        n = self.period.cells[1]
        j = np.arange(self.shape[0])
        return self.origin[1] * L + (j + 0.5) * (L / n)

    @cached_property
    def centers(self):
        """Cell center coordinate grids (X, Y), each of shape ``self.shape``."""
        X, Y = np.meshgrid(self.x, self.y)
        return X, Y

    @cached_property
    def flat_index(self):
        """Flat indices (row-major) of inside cells."""
        return np.flatnonzero(self.inside.ravel())

    @property
    def n_inside(self):
        return int(self.flat_index.size)

    def inside_centers(self):
        X, Y = self.centers
        idx = self.flat_index
        return X.ravel()[idx], Y.ravel()[idx]

    def to_grid(self, values, fill=0.0):
        out = np.full(self.inside.size, fill, dtype=float)
        out[self.flat_index] = values
        return out.reshape(self.shape)

    def from_grid(self, grid):
        return np.asarray(grid, dtype=float).ravel()[self.flat_index]

    @property
    def window_bounds(self):
        """((x0, x1), (y0, y1)) physical extent of the window."""
        out = []
        for a in range(self.ndim):
            L = self.period.lengths[a]
            out.append((self.origin[a] * L, (self.origin[a] + self.window[a]) * L))
        if self.ndim == 1:
            out.append((-0.5, 0.5))
        return tuple(out)

    # continuous description
    def phi(self, x, y=0.0):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        xb, yb = self.descriptor.reduce(x, y, self.period.lengths)
        return self.descriptor.phi(xb, yb)

    def contains(self, x, y=0.0):
        return self.phi(x, y) >= 0

    def normal(self, x, y=0.0, step=None):
        """Outward unit normal of the domain from the level function gradient."""
        step = step or 1e-6 * self.min_spacing
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        gx = (self.phi(x + step, y) - self.phi(x - step, y)) / (2 * step)
        gy = (self.phi(x, y + step) - self.phi(x, y - step)) / (2 * step)
        nrm = np.hypot(gx, gy)
        nrm = np.where(nrm == 0, 1.0, nrm)
        return -gx / nrm, -gy / nrm

    # faces
    @cached_property
    def _faces(self):
        ny, nx = self.shape
        ins = self.inside
        cells, dirs, kinds = [], [], []
        dir_list = ("E", "W") if self.ndim == 1 else DIRECTIONS
        for d in dir_list:
            dj, di = _DIR_STEP[d]
            nb = np.roll(ins, shift=(-dj, -di), axis=(0, 1))
            # cells on the window edge in this direction
            edge = np.zeros_like(ins)
            if d == "E":
                edge[:, -1] = True
            elif d == "W":
                edge[:, 0] = True
            elif d == "N":
                edge[-1, :] = True
            else:
                edge[0, :] = True
            periodic = self.periodic[0] if d in "EW" else self.periodic[1]
            wall = ins & ~nb & ~edge
            if periodic:
                wall |= ins & ~nb & edge
                per = ins & nb & edge
            else:
                per = np.zeros_like(ins)
                wall_edge = ins & edge
            for mask_kind, kind in ((wall, "wall"), (per, "periodic")):
                jj, ii = np.nonzero(mask_kind)
                cells.append(np.column_stack([jj, ii]))
                dirs.extend([d] * jj.size)
                kinds.extend([kind] * jj.size)
            if not periodic:
                jj, ii = np.nonzero(wall_edge)
                cells.append(np.column_stack([jj, ii]))
                dirs.extend([d] * jj.size)
                kinds.extend(["edge"] * jj.size)
        cells = np.vstack(cells) if cells else np.zeros((0, 2), int)
        normals = np.array([_DIR_NORMAL[d] for d in dirs]).reshape(-1, 2)
        return cells, np.array(dirs), normals, np.array(kinds)

    @property
    def boundary_faces(self):
        cells, dirs, normals, kinds = self._faces
        return [BoundaryFace((int(c[0]), int(c[1])), d, (float(n[0]), float(n[1])), k)
                for c, d, n, k in zip(cells, dirs, normals, kinds)]

    def face_centers(self, kinds=("wall",)):
        cells, dirs, normals, fk = self._faces
        sel = np.isin(fk, kinds)
        hx, hy = self.spacing
        px = self.x[cells[sel, 1]] + 0.5 * hx * normals[sel, 0]
        py = self.y[cells[sel, 0]] + 0.5 * hy * normals[sel, 1]
        return px, py, normals[sel], dirs[sel]

    @cached_property
    def boundary_samples(self):
        """Boundary points projected on the continuous boundary, with normals."""
        px, py, _, _ = self.face_centers()
        if px.size == 0:
            return np.zeros((0, 2)), np.zeros((0, 2))
        step = 1e-6 * self.min_spacing
        for _ in range(4):
            p = self.phi(px, py)
            gx = (self.phi(px + step, py) - self.phi(px - step, py)) / (2 * step)
            gy = (self.phi(px, py + step) - self.phi(px, py - step)) / (2 * step)
            g2 = gx * gx + gy * gy
            ok = g2 > 1e-12
            corr = np.where(ok, p / np.where(ok, g2, 1.0), 0.0)
            # projections never move by more than a cell
            corr = np.clip(corr, -self.min_spacing, self.min_spacing)
            px = px - corr * gx
            py = py - corr * gy
        nx_, ny_ = self.normal(px, py)
        return np.column_stack([px, py]), np.column_stack([nx_, ny_])

    @cached_property
    def _boundary_tree(self):
        pts, _ = self.boundary_samples
        return cKDTree(pts) if len(pts) else None

    def inside_fraction(self):
        return float(self.inside.mean())

    def describe(self):
        return {
            "lengths": list(self.period.lengths),
            "resolution": self.period.resolution,
            "window": list(self.window),
            "origin": list(self.origin),
            "periodic": list(self.periodic),
            "shape": list(self.shape),
            "hole": self.descriptor.describe(),
        }


def _label_periodic(mask, periodic):
    """Edge-connected labels with wrap-around along periodic axes."""
    labels, n = ndimage.label(mask)
    if n <= 1:
        return labels, n
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    pairs = []
    if periodic[0]:
        pairs.append((labels[:, 0], labels[:, -1]))
    if len(periodic) > 1 and periodic[1]:
        pairs.append((labels[0, :], labels[-1, :]))
    for a, b in pairs:
        for la, lb in zip(a, b):
            if la and lb:
                ra, rb = find(la), find(lb)
                if ra != rb:
                    parent[ra] = rb
    roots = np.array([find(k) for k in range(n + 1)])
    roots[0] = 0
    uniq = np.unique(roots[1:])
    remap = np.zeros(n + 1, int)
    remap[uniq] = np.arange(1, uniq.size + 1)
    return remap[roots][labels], uniq.size


def build_lattice_domain(hole, period: PeriodSpec, window=1, origin=0,
                         periodic=True, check=True) -> DomainMask:
    """Discretize a lattice of holes on a window of whole period cells.

    Parameters
    ----------
    hole : HoleGeometry or None
    period : PeriodSpec
    window, origin : int or tuple of int
        Number of period cells represented, and the index of the first one.
    periodic : bool or tuple of bool
        Wrap-around per axis; non-periodic window edges are zero-flux walls.
    check : bool
        Run the resolution and connectivity checks.
    """
    hole = hole if hole is not None else HoleGeometry()
    nd = period.ndim
    window = tuple(int(w) for w in np.broadcast_to(window, (nd,)))
    origin = tuple(int(o) for o in np.broadcast_to(origin, (nd,)))
    periodic = tuple(bool(p) for p in np.broadcast_to(periodic, (nd,)))
    if any(w < 1 for w in window):
        raise ValueError("window must hold at least one period cell per axis")

    h = period.spacing
    if check:
        for name, width in hole.features():
            if width < MIN_FEATURE_CELLS * min(h) * (1 - 1e-9):
                raise FeatureUnresolved(
                    f"{name} = {width:.4g} spans {width / min(h):.2f} cells (< {MIN_FEATURE_CELLS})")
        box = hole.bbox()
        if hole.lattice_hole and box is not None:
            L = period.lengths + ((np.inf,) if nd == 1 else ())
            if not (box[0] > 0 and box[1] < L[0] and box[2] > 0 and box[3] < L[1]):
                raise ValueError("hole does not fit strictly inside one period cell")

    # evaluate on one period cell, then tile: bit-exact periodicity
    n = period.cells
    xb = (np.arange(n[0]) + 0.5) * h[0]
    if nd == 1:
        base = (hole.phi(xb, np.zeros_like(xb)) >= 0)[None, :]
        inside = np.tile(base, (1, window[0]))
    else:
        yb = (np.arange(n[1]) + 0.5) * h[1]
        Xb, Yb = np.meshgrid(xb, yb)
        base = hole.phi(Xb, Yb) >= 0
        inside = np.tile(base, (window[1], window[0]))

    mask = DomainMask(period, window, origin, periodic, inside, hole)
    if check:
        _, ncomp = _label_periodic(inside, periodic)
        if ncomp != 1:
            raise DisconnectedDomain(f"domain has {ncomp} edge-connected components")
    return mask


def build_sawtooth_cylinder(eps, L, resolution, neck=None, drop=None, window=3,
                            origin=0, periodic=True, check=True, mirror=False) -> DomainMask:
    """Periodic cylinder whose cross-section drops abruptly and widens slowly.

    ``eps`` bounds the cross-section area over x1 in [1, 2].  When ``neck``
    is not given, the widest neck compatible with that bound, rounded down
    to whole cells, is used.  ``drop`` defaults to one cell width.
    ``mirror`` reflects the profile so that the abrupt side faces right.
    """
    if L <= 4:
        raise ValueError("L must exceed 4")
    if drop is None:
        drop = 1.0 / resolution  # one cell: the drop column is then sampled exactly
    if neck is None:
        neck = (eps - 2 * drop) / (2 - drop)
        # snap to whole cells so the masked cross-section matches the profile
        neck = np.floor(neck * resolution + 1e-9) / resolution
        if neck <= 0:
            raise ProfileViolation("aperture bound too small for the chosen drop length")
        neck = min(neck, 0.999)
    prof = SawtoothProfile(L, neck, drop)
    issues = prof.violations()
    if prof.neck_area() > eps * (1 + 1e-9):
        issues.append(f"neck area {prof.neck_area():.4g} exceeds {eps}")
    height = 2 * 2.0 + 4.0 / resolution * 2
    period = PeriodSpec((L, height), resolution)
    hole = SawtoothCylinder(MirroredProfile(prof) if mirror else prof, period.lengths[1])
    mask = build_lattice_domain(hole, period, window=(window, 1), origin=(origin, 0),
                                periodic=(periodic, False), check=check)
    # discretized half-widths must follow the profile within one cell
    hx, hy = mask.spacing
    half = mask.inside[:, : period.cells[0]].sum(axis=0) * hy / 2
    if np.max(np.abs(half - hole.profile(mask.x[: period.cells[0]]))) > hy:
        issues.append("discretized cross-section departs from the profile by more than a cell")
    if issues:
        raise ProfileViolation("; ".join(issues))
    return mask


def build_omega3(spec: Omega3Spec, resolution, window=(3, 1), origin=(0, 0),
                 periodic=True, check=True) -> DomainMask:
    """Discretize the asymmetric lattice described by ``spec``."""
    period = PeriodSpec((spec.L1, spec.L2), resolution)
    return build_lattice_domain(Omega3(spec), period, window=window, origin=origin,
                                periodic=periodic, check=check)


# ---------------------------------------------------------------------------
# geometric conditions

def check_exterior_ball(mask: DomainMask, x, radius) -> bool:
    """True iff a disc of ``radius`` touching the boundary at ``x`` avoids the domain.

    The disc center is placed along the outward normal of the continuous
    boundary; its interior is sampled at cell resolution.
    """
    x = np.asarray(x, dtype=float)
    nx_, ny_ = mask.normal(x[0], x[1])
    c = x + radius * np.array([float(nx_), float(ny_)])
    ds = min(mask.min_spacing, radius / 4)
    g = np.arange(-radius, radius + ds / 2, ds)
    GX, GY = np.meshgrid(c[0] + g, c[1] + g)
    in_disc = (GX - c[0]) ** 2 + (GY - c[1]) ** 2 <= radius ** 2
    far = np.hypot(GX - x[0], GY - x[1]) > ds
    sel = in_disc & far
    return bool(np.all(mask.phi(GX[sel], GY[sel]) < 1e-9))


def check_sliding_condition(mask: DomainMask, z, R, tol=1e-9) -> bool:
    """True iff (z - x) . nu(x) <= tol for every boundary point x in the closed ball."""
    tree = mask._boundary_tree
    if tree is None:
        return True
    pts, nrm = mask.boundary_samples
    idx = tree.query_ball_point(np.asarray(z, float), R)
    if not idx:
        return True
    d = (np.asarray(z, float)[None, :] - pts[idx]) * nrm[idx]
    return bool(np.all(d.sum(axis=1) <= tol))


def _sliding_many(mask, Z, R, tol=1e-9):
    tree = mask._boundary_tree
    ok = np.ones(len(Z), dtype=bool)
    if tree is None:
        return ok
    pts, nrm = mask.boundary_samples
    for k, idx in enumerate(tree.query_ball_point(Z, R)):
        if idx:
            d = ((Z[k][None, :] - pts[idx]) * nrm[idx]).sum(axis=1)
            ok[k] = np.all(d <= tol)
    return ok


def distance_to_boundary(mask: DomainMask):
    """Approximate distance from each cell center to the domain boundary."""
    ins = mask.inside
    pad = [(0, 0), (0, 0)]
    ny, nx = ins.shape
    if mask.periodic[0]:
        pad[1] = (nx, nx)
    if mask.ndim > 1 and mask.periodic[1]:
        pad[0] = (ny, ny)
    big = np.pad(ins, pad, mode="wrap") if any(p != (0, 0) for p in pad) else ins
    if not (mask.periodic[0]):
        big = np.pad(big, [(0, 0), (1, 1)], constant_values=True)
    hx, hy = mask.spacing
    d = ndimage.distance_transform_edt(big, sampling=(hy, hx))
    if not mask.periodic[0]:
        d = d[:, 1:-1]
    d = d[pad[0][0]: pad[0][0] + ny, pad[1][0]: pad[1][0] + nx]
    return np.where(ins, d - 0.5 * min(hx, hy), 0.0)


def slidable_set(mask: DomainMask, R) -> np.ndarray:
    """Cells of the three-region template where a radius-R ball may slide.

    Returns a boolean array over the mask.  Raises ``NotConnected`` if the
    set is not edge-connected.
    """
    desc = mask.descriptor
    if not isinstance(desc, Omega3):
        raise TypeError("slidable_set needs an Omega3 domain")
    spec = desc.spec
    L1, L2 = spec.L1, spec.L2
    X, Y = mask.centers
    hx, hy = mask.spacing
    Yr = np.mod(Y + L2 / 2, L2) - L2 / 2
    ins = mask.inside
    C = (X >= 2 * R) & (X <= L1 + 2 * R)
    seg = (np.abs(Yr) <= hy / 2 + 1e-12) & (X >= 2 * R) & (X <= L1) & ins
    dist = distance_to_boundary(mask)
    mid = ins & (X >= 3 / spec.eps ** 2 - R) & (X <= L1 - 2 * R) & (dist >= 1.0)
    cap = ins & (np.hypot(X - L1, Yr) >= 3 * R) & (X >= L1 - 2 * R) & (X <= L1)
    template = C & (seg | mid | cap)
    jj, ii = np.nonzero(template)
    Z = np.column_stack([X[jj, ii], Y[jj, ii]])
    ok = _sliding_many(mask, Z, R)
    S = np.zeros_like(ins)
    S[jj[ok], ii[ok]] = True
    _, n = ndimage.label(S)
    if n != 1:
        raise NotConnected(f"slidable set has {n} components")
    return S
