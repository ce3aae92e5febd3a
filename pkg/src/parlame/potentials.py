"""The four space-time potentials and the Green representation formula.

Targets stay off the source surfaces; there are no on-surface principal
values here.  The integrands are then smooth, but develop boundary layers:
in the time variable near the target time (width comparable to the squared
distance to the source set) and along the boundary near the target's
closest point.  Both are handled by geometrically graded panels; because
the kernel vanishes to infinite order at zero lag for positive separation,
grading down to the layer scale is enough and no jump corrections are
needed.

Densities are samples on the product rules from :mod:`parlame.geometry`,
optionally backed by an exact evaluator.  Where a graded rule needs values
off the sample grid they come from the evaluator when present, else from
panel-wise polynomial interpolation of the samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as kr
from .errors import AccuracyError, DomainError, InvariantViolation
from .geometry import (BoundaryRule, CylinderRules, Interval, PolarDomain,
                       refine_boundary_rule)

# panels thinner than exp(-_LOG_EPS) x layer-scale contribute nothing
_LOG_EPS = 40.0


@dataclass
class DensityField:
    """Vector density attached to one node family of a cylinder rule set.

    kind 'initial': values (n_volume, dim) on the t = t_start slice;
    kind 'volume': values (n_volume, n_time, dim);
    kind 'lateral': values (n_boundary, n_time, dim).

    ``evaluator`` signatures: initial ``f(x)``, volume ``f(x, t)``,
    lateral ``f(theta, t)`` (boundary parameter), each returning (N, dim).
    """

    kind: str
    rules: CylinderRules
    values: np.ndarray
    evaluator: object = None

    def __post_init__(self):
        dim = self.rules.cylinder.base.dim
        nv = len(self.rules.volume.weights)
        nb = len(self.rules.boundary.weights)
        nt = self.rules.time.n_nodes
        expected = {"initial": (nv, dim), "volume": (nv, nt, dim),
                    "lateral": (nb, nt, dim)}
        if self.kind not in expected:
            raise DomainError(f"unknown density kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expected[self.kind]:
            raise InvariantViolation(
                f"{self.kind} density shape {self.values.shape} != "
                f"{expected[self.kind]}")
        if not np.all(np.isfinite(self.values)):
            raise InvariantViolation("density samples must be finite")

    @property
    def is_zero(self):
        return self.evaluator is None and not np.any(self.values)


def make_initial_density(rules: CylinderRules, evaluator) -> DensityField:
    vals = evaluator(rules.volume.points)
    return DensityField("initial", rules, vals, evaluator)


def make_volume_density(rules: CylinderRules, evaluator) -> DensityField:
    pts = rules.volume.points
    out = np.empty((len(pts), rules.time.n_nodes, rules.cylinder.base.dim))
    for j, t in enumerate(rules.time.nodes):
        out[:, j, :] = evaluator(pts, np.full(len(pts), t))
    return DensityField("volume", rules, out, evaluator)


def make_lateral_density(rules: CylinderRules, evaluator) -> DensityField:
    th = rules.boundary.params
    out = np.empty((len(th), rules.time.n_nodes, rules.cylinder.base.dim))
    for j, t in enumerate(rules.time.nodes):
        out[:, j, :] = evaluator(th, np.full(len(th), t))
    return DensityField("lateral", rules, out, evaluator)


def _graded_tail_edges(lo: float, hi: float, floor: float) -> np.ndarray:
    """Edges on (lo, hi) with widths halving toward hi, stopping at floor."""
    span = hi - lo
    if span <= floor:
        return np.array([lo, hi])
    n = int(np.ceil(np.log2(span / floor)))
    offs = span * 2.0 ** (-np.arange(1, n + 1))
    return np.concatenate([[lo], hi - offs, [hi]])


def _tau_edges(time_rule, t: float, floor: float,
               subdivide: int = 2) -> np.ndarray:
    """Composite panel edges on (t_start, t) graded toward tau = t.

    Base panels are subdivided; the kernel weights recent times strongly,
    so the tau rule runs finer than the rule the density was sampled on.
    """
    base = time_rule.edges
    if subdivide > 1:
        base = np.unique(np.concatenate(
            [np.linspace(a, b, subdivide + 1)
             for a, b in zip(base[:-1], base[1:])]))
    keep = base[base < t - 1e-300]
    if len(keep) == 0:
        keep = np.array([time_rule.t0])
    tail = _graded_tail_edges(keep[-1], t, floor)
    return np.unique(np.concatenate([keep, tail]))


def _distance_to_boundary(shape, x):
    return np.abs(shape.signed_distance(np.atleast_2d(x)))


def _nearest_param(shape: PolarDomain, x):
    d = np.asarray(x, dtype=float) - shape.center
    return float(np.mod(np.arctan2(d[1], d[0]), 2.0 * np.pi))


def _lateral_values_at(density: DensityField, rule: BoundaryRule, taus):
    """Density values at (rule nodes) x (taus): shape (M, Q, dim)."""
    base = density.rules.boundary
    if density.evaluator is not None:
        M, Q = len(rule.params), len(taus)
        out = np.empty((M, Q, density.values.shape[-1]))
        for q, tau in enumerate(taus):
            out[:, q, :] = density.evaluator(rule.params,
                                             np.full(M, tau))
        return out
    tmat = density.rules.time.interp_matrix(taus)      # (Q, nt)
    vals = np.einsum("qn,mnd->mqd", tmat, density.values)
    if rule is base or len(rule.params) == len(base.params) \
            and np.array_equal(rule.params, base.params):
        return vals
    # interpolate along the boundary parameter, panel-wise
    smat = _param_interp_matrix(base, rule.params)
    return np.einsum("pm,mqd->pqd", smat, vals)


def _param_interp_matrix(base: BoundaryRule, query) -> np.ndarray:
    edges = np.unique(base.edges)
    order = base.order
    u, _ = np.polynomial.legendre.leggauss(order)
    ref = 0.5 * (u + 1.0)
    lam = np.array([1.0 / np.prod(ref[j] - np.delete(ref, j))
                    for j in range(order)])
    span = edges[-1] - edges[0]
    q = edges[0] + np.mod(np.asarray(query, dtype=float) - edges[0], span)
    mat = np.zeros((len(q), len(base.params)))
    idx = np.clip(np.searchsorted(edges, q, side="right") - 1, 0, len(edges) - 2)
    for r, (theta, p) in enumerate(zip(q, idx)):
        lo, hi = edges[p], edges[p + 1]
        s = (theta - lo) / (hi - lo)
        d = s - ref
        hit = np.abs(d) < 1e-14
        if np.any(hit):
            row = np.zeros(order)
            row[np.argmax(hit)] = 1.0
        else:
            row = lam / d
            row /= row.sum()
        mat[r, p * order:(p + 1) * order] = row
    return mat


def _volume_values_at(density: DensityField, taus):
    if density.evaluator is not None:
        pts = density.rules.volume.points
        M, Q = len(pts), len(taus)
        out = np.empty((M, Q, density.values.shape[-1]))
        for q, tau in enumerate(taus):
            out[:, q, :] = density.evaluator(pts, np.full(M, tau))
        return out
    tmat = density.rules.time.interp_matrix(taus)
    return np.einsum("qn,mnd->mqd", tmat, density.values)


class _LayerBatch:
    """Single/double layer evaluation for targets sharing one time."""

    def __init__(self, rules: CylinderRules, params: kr.LameParams,
                 singular_split: float, near_mult: float = 0.5,
                 tau_order: int | None = None):
        self.rules = rules
        self.params = params
        self.split = singular_split
        self.near_mult = near_mult
        self.tau_order = tau_order or max(rules.time.order + 4, 10)
        self._rule_cache = {}
        shape = rules.cylinder.base
        if shape.dim == 2:
            edges = np.unique(rules.boundary.edges)
            _, _, speed = shape.boundary_point(0.5 * (edges[:-1] + edges[1:]))
            self.h_arc = float(np.max(np.diff(edges) * speed))
        else:
            self.h_arc = 0.0

    def _rule_for(self, x, dist):
        shape = self.rules.cylinder.base
        if shape.dim == 1 or dist >= self.near_mult * self.h_arc:
            return self.rules.boundary
        theta = _nearest_param(shape, x)
        _, _, speed = shape.boundary_point([theta])
        min_w = max(dist / (3.0 * float(speed[0])), 1e-6)
        key = (round(theta, 12), round(min_w, 12))
        if key not in self._rule_cache:
            self._rule_cache[key] = refine_boundary_rule(
                shape, self.rules.boundary, theta, min_w)
        return self._rule_cache[key]

    def evaluate(self, X, t, trace_density=None, stress_density=None):
        """

        Returns (V(stress), W(trace)) contributions summed:
        out[k] = single-layer of stress density + double-layer of trace
        density at (X[k], t); either density may be None.
        """
        dim = self.params.dim
        X = np.atleast_2d(np.asarray(X, dtype=float))
        K = X.shape[0]
        out = np.zeros((K, dim))
        tr = self.rules.time
        if t <= tr.t0:
            return out
        shape = self.rules.cylinder.base
        dists = _distance_to_boundary(shape, X)
        if np.min(dists) < 1e-12:
            raise AccuracyError(
                "layer potential target on the lateral surface", achieved=None)
        near = (shape.dim == 2) & (dists < self.near_mult * self.h_arc)
        far_idx = np.where(~near)[0]
        if len(far_idx):
            out[far_idx] = self._eval_group(X[far_idx], t, dists[far_idx],
                                            self.rules.boundary,
                                            trace_density, stress_density)
        for k in np.where(near)[0]:
            rule = self._rule_for(X[k], dists[k])
            out[k] = self._eval_group(X[k][None, :], t, dists[k:k + 1],
                                      rule, trace_density, stress_density)[0]
        return out

    def _eval_group(self, X, t, dists, rule, trace_density, stress_density):
        dim = self.params.dim
        K = X.shape[0]
        out = np.zeros((K, dim))
        tr = self.rules.time
        d_min = float(np.min(dists))
        a_max = self.params.fast
        floor = d_min**2 / (4.0 * a_max * _LOG_EPS)
        floor = min(max(floor, 1e-12 * (t - tr.t0)), self.split)
        edges = _tau_edges(tr, t, floor)
        u, w = np.polynomial.legendre.leggauss(self.tau_order)
        need_d1 = trace_density is not None and not trace_density.is_zero
        need_phi = stress_density is not None and not stress_density.is_zero
        if not (need_d1 or need_phi):
            return out
        M = len(rule.params)
        q_ord = self.tau_order
        dz = X[:, None, :] - rule.points[None, :, :]        # (K, M, dim)
        for lo, hi in zip(edges[:-1], edges[1:]):
            taus = lo + (hi - lo) * 0.5 * (u + 1.0)
            wq = (hi - lo) * 0.5 * w
            flat_dz = np.broadcast_to(dz[:, :, None, :],
                                      (K, M, q_ord, dim)).reshape(-1, dim)
            flat_dt = np.broadcast_to(t - taus[None, None, :],
                                      (K, M, q_ord)).reshape(-1)
            stack = kr.fundamental_stack(flat_dz, flat_dt, self.params,
                                         space_order=1 if need_d1 else 0)
            if need_phi:
                vals = _lateral_values_at(stress_density, rule, taus)
                phi = stack["phi"].reshape(K, M, q_ord, dim, dim)
                out += np.einsum("kmqij,m,q,mqj->ki", phi, rule.weights,
                                 wq, vals, optimize=True)
            if need_d1:
                vals = _lateral_values_at(trace_density, rule, taus)
                normals = np.broadcast_to(rule.normals[None, :, None, :],
                                          (K, M, q_ord, dim))
                kern = kr.traction_kernel(
                    normals.reshape(-1, dim), stack["d1"],
                    self.params).reshape(K, M, q_ord, dim, dim)
                out += np.einsum("kmqij,m,q,mqj->ki", kern, rule.weights,
                                 wq, vals, optimize=True)
        return out


def single_layer(v: DensityField, X, T, params: kr.LameParams,
                 singular_split=1e-3) -> np.ndarray:
    """Layer potential with the matrix kernel itself (trace-operator side)."""
    if v.kind != "lateral":
        raise DomainError("single_layer needs a lateral density")
    return _eval_by_time(v.rules, params, singular_split, X, T,
                         stress_density=v)


def double_layer(w: DensityField, X, T, params: kr.LameParams,
                 singular_split=1e-3) -> np.ndarray:
    """Layer potential with the negated adjoint-stress kernel."""
    if w.kind != "lateral":
        raise DomainError("double_layer needs a lateral density")
    return _eval_by_time(w.rules, params, singular_split, X, T,
                         trace_density=w)


def lateral_combined(trace: DensityField | None, stress: DensityField | None,
                     X, T, params: kr.LameParams,
                     singular_split=1e-3) -> np.ndarray:
    """V(stress) + W(trace) sharing kernel evaluations."""
    rules = (trace or stress).rules
    return _eval_by_time(rules, params, singular_split, X, T,
                         trace_density=trace, stress_density=stress)


def _eval_by_time(rules, params, singular_split, X, T,
                  trace_density=None, stress_density=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    if X.shape[0] != T.shape[0]:
        raise DomainError("target point/time count mismatch")
    out = np.zeros((X.shape[0], params.dim))
    zero_tr = trace_density is None or trace_density.is_zero
    zero_st = stress_density is None or stress_density.is_zero
    if zero_tr and zero_st:
        return out
    batch = _LayerBatch(rules, params, singular_split)
    for t in np.unique(T):
        sel = np.where(T == t)[0]
        out[sel] = batch.evaluate(X[sel], float(t),
                                  None if zero_tr else trace_density,
                                  None if zero_st else stress_density)
    return out


def initial_potential(h: DensityField, X, T, params: kr.LameParams) -> np.ndarray:
    """Convolution of the kernel with an initial-slice density."""
    if h.kind != "initial":
        raise DomainError("initial_potential needs an initial density")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    out = np.zeros((X.shape[0], params.dim))
    if h.is_zero:
        return out
    rules = h.rules
    t0 = rules.cylinder.t_start
    vol = rules.volume
    h_vol = _volume_spacing(rules)
    delta = (1.5 * h_vol) ** 2 / params.slow
    inside = rules.cylinder.base.contains(X)
    for t in np.unique(T):
        s = float(t) - t0
        sel = np.where(T == t)[0]
        if s <= 0:
            continue
        if s < delta:
            # too thin for the spatial rule; the kernel acts as an
            # approximate identity at this lag
            for k in sel:
                if not inside[k]:
                    continue
                if h.evaluator is None:
                    raise AccuracyError(
                        f"initial potential under-resolved at lag {s:.3e} "
                        f"(needs evaluator below {delta:.3e})", achieved=s)
                out[k] = h.evaluator(X[k][None, :])[0]
            continue
        dz = (X[sel][:, None, :] - vol.points[None, :, :]).reshape(-1, params.dim)
        phi = kr.fundamental_stack(dz, np.full(dz.shape[0], s), params)["phi"]
        phi = phi.reshape(len(sel), len(vol.points), params.dim, params.dim)
        out[sel] = np.einsum("kmij,m,mj->ki", phi, vol.weights, h.values)
    return out


def _volume_spacing(rules: CylinderRules) -> float:
    shape = rules.cylinder.base
    n = len(rules.volume.weights)
    if shape.dim == 1:
        return shape.area() / n * 2.0
    return float(np.sqrt(shape.area() / n) * 2.0)


def volume_potential(f: DensityField, X, T, params: kr.LameParams,
                     singular_split=1e-3) -> np.ndarray:
    """Space-time convolution of the kernel with a volume density.

    The slab of lags too thin for the spatial rule to resolve is replaced by
    the exact unit spatial mass of the kernel acting on the density at the
    target point (evaluator preferred, kernel-smoothed samples otherwise);
    the replacement error is quadratic in the slab thickness.
    """
    if f.kind != "volume":
        raise DomainError("volume_potential needs a volume density")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    out = np.zeros((X.shape[0], params.dim))
    if f.is_zero:
        return out
    rules = f.rules
    tr = rules.time
    vol = rules.volume
    dim = params.dim
    h_vol = _volume_spacing(rules)
    delta = min(max((1.5 * h_vol) ** 2 / params.slow, 1e-10),
                0.25 * tr.t1 - 0.25 * tr.t0)
    u, w = np.polynomial.legendre.leggauss(tr.order)
    inside = rules.cylinder.base.contains(X)
    M = len(vol.points)
    for t in np.unique(T):
        sel = np.where(T == t)[0]
        if t <= tr.t0:
            continue
        cut = max(t - delta, tr.t0)
        K = len(sel)
        dz = X[sel][:, None, :] - vol.points[None, :, :]   # (K, M, dim)
        if cut > tr.t0:
            edges = _tau_edges(tr, cut, max(delta * 0.25, 1e-6))
            for lo, hi in zip(edges[:-1], edges[1:]):
                taus = lo + (hi - lo) * 0.5 * (u + 1.0)
                wq = (hi - lo) * 0.5 * w
                vals = _volume_values_at(f, taus)          # (M, q, dim)
                flat_dz = np.broadcast_to(dz[:, :, None, :],
                                          (K, M, tr.order, dim)).reshape(-1, dim)
                flat_dt = np.broadcast_to(t - taus[None, None, :],
                                          (K, M, tr.order)).reshape(-1)
                phi = kr.fundamental_stack(flat_dz, flat_dt, params)["phi"]
                phi = phi.reshape(K, M, tr.order, dim, dim)
                out[sel] += np.einsum("kmqij,m,q,mqj->ki", phi,
                                      vol.weights, wq, vals)
        # near slab: identity spatial mass times density at the target point
        if t - cut > 0:
            sq, wsq = np.polynomial.legendre.leggauss(8)
            taus = cut + (t - cut) * 0.5 * (sq + 1.0)
            wts = (t - cut) * 0.5 * wsq
            for k in sel:
                if not inside[k]:
                    continue
                out[k] += wts @ _density_at_point(f, X[k], taus, delta, params)
    return out


def _density_at_point(f: DensityField, x, taus, delta, params):
    """f(x, tau) for each tau, via evaluator or kernel-smoothed samples."""
    if f.evaluator is not None:
        pts = np.repeat(x[None, :], len(taus), axis=0)
        return f.evaluator(pts, np.asarray(taus))
    vol = f.rules.volume
    dz = x[None, :] - vol.points
    r2 = np.sum(dz * dz, axis=1)
    wgt = vol.weights * np.exp(-r2 / (2.0 * params.slow * delta))
    wgt /= np.sum(wgt)
    vals = _volume_values_at(f, np.asarray(taus))       # (M, Q, dim)
    return np.einsum("m,mqd->qd", wgt, vals)


@dataclass
class GreenData:
    """Densities entering the representation formula for one field."""

    initial: DensityField     # field at t_start on the base
    volume: DensityField      # operator applied to the field, on the cylinder
    trace: DensityField       # field on the lateral surface
    stress: DensityField      # boundary-stress of the field on the surface


def green_reconstruct(data: GreenData, X, T, params: kr.LameParams,
                      singular_split=1e-3) -> np.ndarray:
    """Initial + volume + single-layer(stress) + double-layer(trace).

    Equals the underlying field inside the cylinder and zero outside, up to
    quadrature accuracy.
    """
    out = initial_potential(data.initial, X, T, params)
    out += volume_potential(data.volume, X, T, params, singular_split)
    out += lateral_combined(data.trace, data.stress, X, T, params,
                            singular_split)
    return out
