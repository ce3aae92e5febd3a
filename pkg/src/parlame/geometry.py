"""Space-time cylinders, boundary parametrizations, and quadrature rules.

The shape catalogue is deliberately small: intervals in 1D, and in 2D
star-shaped domains given by a polar radius function about a center (disks,
disks with a smooth cap attached to an arc) plus annuli (which exist mostly
so that nested-domain validation can reject them).  Boundary normals and
surface measures are analytic, which removes a quadrature error source.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvariantViolation

_TWO_PI = 2.0 * np.pi


def _gl(n: int, _cache={}):
    if n not in _cache:
        _cache[n] = np.polynomial.legendre.leggauss(n)
    return _cache[n]


def _wrap_angle(theta):
    """Wrap to [0, 2*pi)."""
    return np.mod(theta, _TWO_PI)


def _angle_dist(theta, theta0):
    """Signed angular offset in (-pi, pi]."""
    d = np.mod(theta - theta0 + np.pi, _TWO_PI) - np.pi
    return d


class SpatialDomain:
    """Base class for the shape catalogue."""

    dim: int
    has_hole: bool = False

    def area(self) -> float:
        raise NotImplementedError

    def contains(self, pts) -> np.ndarray:
        raise NotImplementedError

    def signed_distance(self, pts) -> np.ndarray:
        """Negative inside, positive outside; approximate near curved parts."""
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(SpatialDomain):
    a: float
    b: float
    dim: int = 1

    def __post_init__(self):
        if not self.a < self.b:
            raise ConfigurationError(f"need a < b, got ({self.a}, {self.b})")

    def area(self):
        return self.b - self.a

    def contains(self, pts):
        x = np.atleast_2d(np.asarray(pts, dtype=float))[:, 0]
        return (x > self.a) & (x < self.b)

    def signed_distance(self, pts):
        x = np.atleast_2d(np.asarray(pts, dtype=float))[:, 0]
        return np.maximum(self.a - x, x - self.b)

    def diameter(self):
        return self.b - self.a

    def boundary_points(self):
        """Endpoint positions, outward normals, unit counting weights."""
        pts = np.array([[self.a], [self.b]])
        normals = np.array([[-1.0], [1.0]])
        weights = np.ones(2)
        params = np.array([0.0, 1.0])
        return pts, normals, weights, params


class PolarDomain(SpatialDomain):
    """Star-shaped 2D domain r < rho(theta) about a center.

    Subclasses provide ``rho`` and ``drho``; the boundary parametrization is
    gamma(theta) = center + rho(theta) (cos theta, sin theta).
    """

    dim = 2

    def __init__(self, center=(0.0, 0.0)):
        self.center = np.asarray(center, dtype=float)

    def rho(self, theta):
        raise NotImplementedError

    def drho(self, theta):
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Parameter values where the radius function loses smoothness."""
        return np.array([0.0])

    def _polar(self, pts):
        d = np.atleast_2d(np.asarray(pts, dtype=float)) - self.center
        r = np.hypot(d[:, 0], d[:, 1])
        theta = _wrap_angle(np.arctan2(d[:, 1], d[:, 0]))
        return r, theta

    def contains(self, pts):
        r, theta = self._polar(pts)
        return r < self.rho(theta)

    def signed_distance(self, pts):
        r, theta = self._polar(pts)
        rho = self.rho(theta)
        drho = self.drho(theta)
        # first-order correction of the radial gap toward true distance
        return (r - rho) * rho / np.sqrt(rho * rho + drho * drho)

    def boundary_point(self, theta):
        """Positions, outward unit normals and speeds |gamma'| at parameters."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        rho = self.rho(theta)
        drho = self.drho(theta)
        c, s = np.cos(theta), np.sin(theta)
        pts = self.center + np.column_stack([rho * c, rho * s])
        speed = np.sqrt(rho * rho + drho * drho)
        normals = np.column_stack([drho * s + rho * c, -drho * c + rho * s])
        normals /= speed[:, None]
        return pts, normals, speed

    def area(self):
        u, w = _gl(64)
        total = 0.0
        bps = np.sort(_wrap_angle(self.breakpoints()))
        segs = np.concatenate([bps, [bps[0] + _TWO_PI]])
        for lo, hi in zip(segs[:-1], segs[1:]):
            th = lo + (hi - lo) * 0.5 * (u + 1.0)
            total += 0.5 * (hi - lo) * 0.5 * np.sum(w * self.rho(th) ** 2)
        return float(total)

    def max_radius(self):
        th = np.linspace(0.0, _TWO_PI, 721)
        return float(np.max(self.rho(th)))

    def diameter(self):
        return 2.0 * self.max_radius()


class Disk(PolarDomain):
    def __init__(self, center=(0.0, 0.0), radius=1.0):
        super().__init__(center)
        if radius <= 0:
            raise ConfigurationError("disk radius must be positive")
        self.radius = float(radius)

    def rho(self, theta):
        return np.full_like(np.asarray(theta, dtype=float), self.radius)

    def drho(self, theta):
        return np.zeros_like(np.asarray(theta, dtype=float))

    def area(self):
        return np.pi * self.radius**2

    def signed_distance(self, pts):
        r, _ = self._polar(pts)
        return r - self.radius

    def diameter(self):
        return 2.0 * self.radius


class CapDomain(PolarDomain):
    """Disk with a smooth radial bump attached across an arc.

    rho(theta) = radius + height * (1 - s^2)^3 with s = offset/half_width on
    the arc |offset| < half_width about ``cap_center``; C^2 at the arc ends.
    Models the union of a base disk, an open boundary arc, and a cap region
    glued across that arc.
    """

    def __init__(self, center=(0.0, 0.0), radius=1.0, cap_center=0.0,
                 cap_half_width=np.pi / 4, cap_height=0.5):
        super().__init__(center)
        if radius <= 0 or cap_height < 0:
            raise ConfigurationError("radius must be positive, height nonnegative")
        if not 0 < cap_half_width < np.pi:
            raise ConfigurationError("cap half width must be in (0, pi)")
        self.radius = float(radius)
        self.cap_center = float(cap_center)
        self.cap_half_width = float(cap_half_width)
        self.cap_height = float(cap_height)

    def _s(self, theta):
        return _angle_dist(theta, self.cap_center) / self.cap_half_width

    def rho(self, theta):
        s = self._s(np.asarray(theta, dtype=float))
        bump = np.where(np.abs(s) < 1.0, (1.0 - s * s) ** 3, 0.0)
        return self.radius + self.cap_height * bump

    def drho(self, theta):
        s = self._s(np.asarray(theta, dtype=float))
        inside = np.abs(s) < 1.0
        dbump = np.where(inside, -6.0 * s * (1.0 - s * s) ** 2, 0.0)
        return self.cap_height * dbump / self.cap_half_width

    def breakpoints(self):
        return _wrap_angle(np.array([self.cap_center - self.cap_half_width,
                                     self.cap_center,
                                     self.cap_center + self.cap_half_width]))


@dataclass(frozen=True)
class Annulus(SpatialDomain):
    center: tuple[float, float]
    r_inner: float
    r_outer: float
    dim: int = 2
    has_hole: bool = True

    def __post_init__(self):
        if not 0 < self.r_inner < self.r_outer:
            raise ConfigurationError("need 0 < r_inner < r_outer")

    def _r(self, pts):
        d = np.atleast_2d(np.asarray(pts, dtype=float)) - np.asarray(self.center)
        return np.hypot(d[:, 0], d[:, 1])

    def area(self):
        return np.pi * (self.r_outer**2 - self.r_inner**2)

    def contains(self, pts):
        r = self._r(pts)
        return (r > self.r_inner) & (r < self.r_outer)

    def signed_distance(self, pts):
        r = self._r(pts)
        return np.maximum(self.r_inner - r, r - self.r_outer)

    def diameter(self):
        return 2.0 * self.r_outer


@dataclass(frozen=True)
class Cylinder:
    base: SpatialDomain
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ConfigurationError("need t_start < t_end")

    @property
    def duration(self):
        return self.t_end - self.t_start


@dataclass(frozen=True)
class LateralPatch:
    """Relatively open part of the boundary, in boundary-parameter terms.

    For 2D shapes ``arcs`` is a list of (lo, hi) parameter intervals with
    lo < hi (possibly describing an arc through 0 after wrapping); for
    intervals it is a list of endpoint parameter values from {0.0, 1.0}.
    """

    parent: SpatialDomain
    arcs: tuple

    def __post_init__(self):
        if self.parent.dim == 1:
            ids = tuple(float(a) for a in self.arcs)
            if not ids or any(a not in (0.0, 1.0) for a in ids):
                raise ConfigurationError("1D patch must list endpoints 0.0/1.0")
            if len(set(ids)) == 2:
                raise ConfigurationError(
                    "patch covering the whole boundary leaves no complement")
            object.__setattr__(self, "arcs", tuple(sorted(set(ids))))
        else:
            arcs = tuple((float(lo), float(hi)) for lo, hi in self.arcs)
            total = sum(hi - lo for lo, hi in arcs)
            if any(hi <= lo for lo, hi in arcs):
                raise ConfigurationError("patch arcs need lo < hi")
            if total >= _TWO_PI - 1e-12:
                raise ConfigurationError(
                    "patch covering the whole boundary leaves no complement")
            object.__setattr__(self, "arcs", arcs)

    def contains_param(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.parent.dim == 1:
            return np.isin(theta, np.asarray(self.arcs))
        mask = np.zeros(theta.shape, dtype=bool)
        for lo, hi in self.arcs:
            d = _wrap_angle(theta - lo)
            mask |= d < (hi - lo)
        return mask

    def endpoints(self):
        """Flat list of arc endpoint parameters (2D only)."""
        out = []
        for lo, hi in self.arcs:
            out.extend([lo, hi])
        return _wrap_angle(np.array(out))


@dataclass(frozen=True)
class NestedCylinders:
    """Inner cylinder compactly inside an outer one over the same times.

    Validation is structural over the shape catalogue: inner shapes with a
    hole are rejected (their complement inside the outer shape has a compact
    component); anything outside the catalogue needs ``attested=True``.
    """

    inner: Cylinder
    outer: Cylinder
    attested: bool = False

    def __post_init__(self):
        if (abs(self.inner.t_start - self.outer.t_start) > 1e-12
                or abs(self.inner.t_end - self.outer.t_end) > 1e-12):
            raise InvariantViolation("nested cylinders must share time interval")
        if self.attested:
            return
        ib, ob = self.inner.base, self.outer.base
        if ib.dim != ob.dim:
            raise InvariantViolation("dimension mismatch")
        if ib.has_hole:
            raise InvariantViolation(
                "inner shape with a hole creates a compact complement "
                "component; pass attested=True to override")
        if ib.dim == 1:
            if not (isinstance(ib, Interval) and isinstance(ob, Interval)):
                raise InvariantViolation("unsupported 1D nesting; attest to override")
            if not (ob.a < ib.a and ib.b < ob.b):
                raise InvariantViolation("inner interval closure not inside outer")
            return
        if not isinstance(ib, (Disk, PolarDomain)) or not isinstance(ob, PolarDomain):
            raise InvariantViolation("shape pair outside catalogue; attest to override")
        theta = np.linspace(0.0, _TWO_PI, 720, endpoint=False)
        if isinstance(ib, PolarDomain):
            pts, _, _ = ib.boundary_point(theta)
        else:
            pts = np.asarray(ib.center) + ib.radius * np.column_stack(
                [np.cos(theta), np.sin(theta)])
        if np.any(ob.signed_distance(pts) >= -1e-12):
            raise InvariantViolation("inner base closure not inside outer base")


@dataclass(frozen=True)
class QuadratureSpec:
    """Orders and panel counts for volume, boundary and time rules."""

    volume_angular_order: int = 8
    volume_angular_panels: int = 6      # per smooth boundary piece
    volume_radial_order: int = 10
    boundary_order: int = 8
    boundary_panels: int = 4            # per smooth arc
    time_order: int = 6
    time_panels: int = 8
    singular_split: float = 1e-3

    def __post_init__(self):
        orders = (self.volume_angular_order, self.volume_radial_order,
                  self.boundary_order, self.time_order)
        if any(o < 2 for o in orders):
            raise ConfigurationError("all quadrature orders must be >= 2")
        if self.time_panels < 1 or self.volume_angular_panels < 1 \
                or self.boundary_panels < 1:
            raise ConfigurationError("panel counts must be >= 1")
        if self.singular_split <= 0:
            raise ConfigurationError("singular_split must be positive")


class TimeRule:
    """Composite Gauss-Legendre rule on (t0, t1) with panel interpolation."""

    def __init__(self, t0: float, t1: float, panels: int, order: int):
        self.t0, self.t1 = float(t0), float(t1)
        self.order = int(order)
        self.edges = np.linspace(t0, t1, panels + 1)
        u, w = _gl(order)
        widths = np.diff(self.edges)
        self.nodes = (self.edges[:-1, None]
                      + widths[:, None] * 0.5 * (u + 1.0)).ravel()
        self.weights = (widths[:, None] * 0.5 * w).ravel()
        # barycentric weights of the reference Gauss nodes
        ref = 0.5 * (u + 1.0)
        lam = np.array([1.0 / np.prod(ref[j] - np.delete(ref, j))
                        for j in range(order)])
        self._ref, self._lam = ref, lam

    @property
    def n_nodes(self):
        return len(self.nodes)

    def interp_matrix(self, t_query) -> np.ndarray:
        """Rows map node samples to values at query times (panel-wise)."""
        t_query = np.atleast_1d(np.asarray(t_query, dtype=float))
        P = len(self.edges) - 1
        mat = np.zeros((len(t_query), self.n_nodes))
        idx = np.clip(np.searchsorted(self.edges, t_query, side="right") - 1,
                      0, P - 1)
        for r, (t, p) in enumerate(zip(t_query, idx)):
            lo, hi = self.edges[p], self.edges[p + 1]
            s = (t - lo) / (hi - lo)
            d = s - self._ref
            hit = np.abs(d) < 1e-14
            row = np.zeros(self.order)
            if np.any(hit):
                row[np.argmax(hit)] = 1.0
            else:
                row = self._lam / d
                row /= row.sum()
            mat[r, p * self.order:(p + 1) * self.order] = row
        return mat


@dataclass
class BoundaryRule:
    """Spatial quadrature on a 2D boundary curve (or 1D endpoint pair)."""

    points: np.ndarray      # (M, dim)
    weights: np.ndarray     # (M,) include |gamma'|
    normals: np.ndarray     # (M, dim)
    params: np.ndarray      # (M,) boundary parameter
    edges: np.ndarray       # panel edges in parameter (2D) or [] (1D)
    order: int


def build_boundary_rule(shape: SpatialDomain, spec: QuadratureSpec,
                        extra_breakpoints=()) -> BoundaryRule:
    if shape.dim == 1:
        pts, normals, weights, params = shape.boundary_points()
        return BoundaryRule(pts, weights, normals, params,
                            np.array([]), order=1)
    if not isinstance(shape, PolarDomain):
        raise ConfigurationError(f"unsupported boundary shape {type(shape).__name__}")
    bps = _wrap_angle(np.concatenate([shape.breakpoints(),
                                      np.asarray(extra_breakpoints, dtype=float)]))
    bps = np.unique(np.round(np.sort(bps), 14))
    # deduplicate near-coincident breakpoints
    keep = [bps[0]]
    for t in bps[1:]:
        if t - keep[-1] > 1e-12:
            keep.append(t)
    bps = np.array(keep)
    segs = np.concatenate([bps, [bps[0] + _TWO_PI]])
    # panel count per smooth piece proportional to its parameter length,
    # with boundary_panels panels per quarter circle as the target density
    target = 0.5 * np.pi / spec.boundary_panels
    edges = []
    for lo, hi in zip(segs[:-1], segs[1:]):
        n = max(1, int(np.ceil((hi - lo) / target)))
        edges.append(np.linspace(lo, hi, n + 1)[:-1])
    edges = np.concatenate(edges + [[segs[-1]]])
    u, w = _gl(spec.boundary_order)
    widths = np.diff(edges)
    theta = (edges[:-1, None] + widths[:, None] * 0.5 * (u + 1.0)).ravel()
    wts = (widths[:, None] * 0.5 * w).ravel()
    pts, normals, speed = shape.boundary_point(theta)
    return BoundaryRule(pts, wts * speed, normals, _wrap_angle(theta),
                        edges, spec.boundary_order)


def refine_boundary_rule(shape: PolarDomain, base: BoundaryRule, theta_star,
                         min_width) -> BoundaryRule:
    """Insert geometrically graded panels around ``theta_star``.

    Used for targets close to the surface; panel widths halve toward the
    nearest parameter until ``min_width``.
    """
    edges = np.unique(base.edges)
    span = edges[-1] - edges[0]
    theta_star = edges[0] + np.mod(theta_star - edges[0], span)
    new = []
    w = span / max(len(edges) - 1, 1)
    while w > min_width:
        w *= 0.5
        new.extend([theta_star - w, theta_star + w])
    new = [t for t in new if edges[0] < t < edges[-1]]
    all_edges = np.unique(np.concatenate([edges, new]))
    u, wq = _gl(base.order)
    widths = np.diff(all_edges)
    theta = (all_edges[:-1, None] + widths[:, None] * 0.5 * (u + 1.0)).ravel()
    wts = (widths[:, None] * 0.5 * wq).ravel()
    pts, normals, speed = shape.boundary_point(theta)
    return BoundaryRule(pts, wts * speed, normals, _wrap_angle(theta),
                        all_edges, base.order)


@dataclass
class VolumeRule:
    points: np.ndarray      # (N, dim)
    weights: np.ndarray     # (N,)


def build_volume_rule(shape: SpatialDomain, spec: QuadratureSpec) -> VolumeRule:
    if isinstance(shape, Interval):
        panels = max(spec.volume_angular_panels, 2)
        edges = np.linspace(shape.a, shape.b, panels + 1)
        u, w = _gl(spec.volume_radial_order)
        widths = np.diff(edges)
        x = (edges[:-1, None] + widths[:, None] * 0.5 * (u + 1.0)).ravel()
        wts = (widths[:, None] * 0.5 * w).ravel()
        return VolumeRule(x[:, None], wts)
    if isinstance(shape, Annulus):
        u, w = _gl(spec.volume_radial_order)
        r = shape.r_inner + (shape.r_outer - shape.r_inner) * 0.5 * (u + 1.0)
        wr = (shape.r_outer - shape.r_inner) * 0.5 * w * r
        n_th = spec.volume_angular_order * spec.volume_angular_panels * 2
        th = np.linspace(0.0, _TWO_PI, n_th, endpoint=False)
        wth = np.full(n_th, _TWO_PI / n_th)
        R, TH = np.meshgrid(r, th, indexing="ij")
        pts = np.asarray(shape.center) + np.column_stack(
            [(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
        wts = np.outer(wr, wth).ravel()
        return VolumeRule(pts, wts)
    if isinstance(shape, PolarDomain):
        bps = np.unique(np.sort(_wrap_angle(shape.breakpoints())))
        segs = np.concatenate([bps, [bps[0] + _TWO_PI]])
        u, w = _gl(spec.volume_angular_order)
        thetas, wth = [], []
        for lo, hi in zip(segs[:-1], segs[1:]):
            sub = np.linspace(lo, hi, spec.volume_angular_panels + 1)
            widths = np.diff(sub)
            thetas.append((sub[:-1, None] + widths[:, None] * 0.5 * (u + 1.0)).ravel())
            wth.append((widths[:, None] * 0.5 * w).ravel())
        theta = np.concatenate(thetas)
        wth = np.concatenate(wth)
        us, ws = _gl(spec.volume_radial_order)
        s = 0.5 * (us + 1.0)
        ws = 0.5 * ws
        # map (s, theta) -> center + s rho e(theta), jacobian s rho^2
        S, TH = np.meshgrid(s, theta, indexing="ij")
        RHO = shape.rho(TH)
        R = S * RHO
        pts = np.asarray(shape.center) + np.column_stack(
            [(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
        wts = (ws[:, None] * wth[None, :] * (S * RHO**2)).ravel()
        return VolumeRule(pts, wts)
    raise ConfigurationError(f"unsupported volume shape {type(shape).__name__}")


@dataclass
class CylinderRules:
    """Product quadrature for one space-time cylinder."""

    cylinder: Cylinder
    volume: VolumeRule
    boundary: BoundaryRule
    time: TimeRule

    def volume_spacetime(self):
        """Flattened (points, times, weights) over base x time."""
        nv = len(self.volume.weights)
        nt = self.time.n_nodes
        pts = np.repeat(self.volume.points, nt, axis=0)
        times = np.tile(self.time.nodes, nv)
        wts = np.repeat(self.volume.weights, nt) * np.tile(self.time.weights, nv)
        return pts, times, wts

    def lateral_spacetime(self):
        nb = len(self.boundary.weights)
        nt = self.time.n_nodes
        pts = np.repeat(self.boundary.points, nt, axis=0)
        normals = np.repeat(self.boundary.normals, nt, axis=0)
        times = np.tile(self.time.nodes, nb)
        wts = np.repeat(self.boundary.weights, nt) * np.tile(self.time.weights, nb)
        return pts, normals, times, wts


def build_quadrature(cyl: Cylinder, spec: QuadratureSpec,
                     extra_breakpoints=()) -> CylinderRules:
    """Volume, lateral-boundary and time rules for one cylinder."""
    volume = build_volume_rule(cyl.base, spec)
    boundary = build_boundary_rule(cyl.base, spec, extra_breakpoints)
    time = TimeRule(cyl.t_start, cyl.t_end, spec.time_panels, spec.time_order)
    total = np.sum(volume.weights)
    expected = cyl.base.area()
    if abs(total - expected) > 1e-8 * max(1.0, abs(expected)):
        raise InvariantViolation(
            f"volume weights sum {total} != area {expected}")
    return CylinderRules(cyl, volume, boundary, time)


def divergence_identity_defect(shape: SpatialDomain, spec: QuadratureSpec) -> float:
    """|boundary integral of x . nu - dim * |Omega||, a rule sanity check."""
    rule = build_boundary_rule(shape, spec)
    if shape.dim == 1:
        val = float(np.sum(rule.weights * np.sum(rule.points * rule.normals, axis=1)))
    else:
        val = float(rule.weights @ np.einsum("md,md->m", rule.points, rule.normals))
    return abs(val - shape.dim * shape.area())


def classify_point(x, t, cyl: Cylinder, band: float = 1e-9) -> str:
    """'inside', 'outside' or 'boundary' for one space-time point."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sd = float(cyl.base.signed_distance(x)[0])
    t = float(t)
    t_gap = max(cyl.t_start - t, t - cyl.t_end)
    if abs(sd) <= band and t_gap <= band:
        return "boundary"
    if sd <= band and abs(t_gap) <= band:
        return "boundary"
    if sd < 0 and t_gap < 0:
        return "inside"
    return "outside"
