"""Dictionaries of exact solutions generated by exterior kernel sources.

Each dictionary field is one column of the matrix kernel with its source
placed outside the closed target cylinder (spatially outside the base, or
before the initial time), so the field is smooth and operator-null on the
cylinder.  Source placement follows a golden-angle sequence, which makes
prefixes of a dictionary valid smaller dictionaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as kr
from .errors import ConfigurationError, InvariantViolation
from .geometry import Cylinder, CylinderRules, Interval, PolarDomain

_GOLDEN = 0.6180339887498949
_GOLDEN2 = 0.4142135623730951   # sqrt(2) - 1, for the time spread
_PLASTIC = 0.7548776662466927   # 1/plastic number, for the family split


@dataclass(frozen=True)
class SourcePoint:
    """Kernel-column source location, time and column index."""

    y: tuple
    tau: float
    column: int

    def key(self):
        return (tuple(np.round(self.y, 14)), round(self.tau, 14), self.column)


@dataclass
class Dictionary:
    sources: list[SourcePoint]
    cylinder: Cylinder
    params: kr.LameParams

    def __post_init__(self):
        base = self.cylinder.base
        seen = set()
        for s in self.sources:
            y = np.asarray(s.y, dtype=float)
            if y.shape != (self.params.dim,):
                raise InvariantViolation("source dimension mismatch")
            if not 0 <= s.column < self.params.dim:
                raise InvariantViolation("source column out of range")
            outside = float(base.signed_distance(y[None, :])[0]) > 1e-9
            pre_initial = s.tau < self.cylinder.t_start - 1e-12
            if not (outside or pre_initial):
                raise InvariantViolation(
                    f"source {s} not outside the closed cylinder")
            if s.tau >= self.cylinder.t_end:
                raise InvariantViolation(
                    f"source {s} is causally trivial on the cylinder")
            if s.key() in seen:
                raise InvariantViolation(f"duplicate source {s}")
            seen.add(s.key())

    def __len__(self):
        return len(self.sources)

    def subset(self, count: int) -> "Dictionary":
        return Dictionary(self.sources[:count], self.cylinder, self.params)


def make_ring_dictionary(cylinder: Cylinder, params: kr.LameParams,
                         count: int, ring_radius_factor: float,
                         time_offset: float,
                         pre_initial_every: int = 4) -> Dictionary:
    """Sources on an enclosing ring at interior times, interleaved with
    pre-initial sources; golden-angle placement so prefixes nest.

    Every ``pre_initial_every``-th source sits before the initial time on a
    tighter ring; the rest sit on the scaled boundary curve at times spread
    over the first three quarters of the interval.
    """
    if ring_radius_factor <= 1.0 and time_offset <= 0.0:
        raise ConfigurationError(
            "need ring_radius_factor > 1 or time_offset > 0")
    base = cylinder.base
    if base.dim != params.dim:
        raise ConfigurationError("base shape and params dimension mismatch")
    t0, t1 = cylinder.t_start, cylinder.t_end
    span = t1 - t0
    sources = []
    for k in range(count):
        column = k % params.dim
        frac = (k * _GOLDEN) % 1.0
        tfrac = (k * _GOLDEN2) % 1.0
        pre = pre_initial_every > 0 and k % pre_initial_every == pre_initial_every - 1
        if pre and time_offset > 0:
            tau = t0 - time_offset * (0.25 + 0.75 * tfrac)
            radial = 0.5 * (1.0 + ring_radius_factor)
        else:
            tau = t0 + 0.75 * span * tfrac
            radial = ring_radius_factor
        if isinstance(base, Interval):
            c = 0.5 * (base.a + base.b)
            h = 0.5 * (base.b - base.a)
            side = 1.0 if (k // max(1, params.dim)) % 2 == 0 else -1.0
            y = (c + side * radial * h * (1.0 + 0.25 * frac),)
        elif isinstance(base, PolarDomain):
            theta = 2.0 * np.pi * frac
            rho = float(base.rho(np.array([theta]))[0])
            y = tuple(base.center + radial * rho
                      * np.array([np.cos(theta), np.sin(theta)]))
        else:
            raise ConfigurationError(
                f"no source rule for base shape {type(base).__name__}")
        sources.append(SourcePoint(y=y, tau=float(tau), column=column))
    return Dictionary(sources, cylinder, params)


def make_mixed_dictionary(cylinder: Cylinder, params: kr.LameParams,
                          count: int, ring_radius_factor: float = 1.4,
                          near_radius_factor: float = 1.08,
                          near_fraction: float = 0.5,
                          time_offset: float = 0.3,
                          pre_initial_every: int = 4,
                          avoid_arcs=None) -> Dictionary:
    """Ring dictionary enriched with a near-boundary source family.

    The outer ring captures smooth behavior; sources hugging the boundary
    (placed outside ``avoid_arcs``, typically the arc where the data patch
    and the projection region sit) capture the boundary-layer structure
    the extension field develops along the data-free part of the surface.
    With ``near_fraction`` zero this reduces to :func:`make_ring_dictionary`
    placement.
    """
    base = cylinder.base
    if base.dim == 1 or near_fraction <= 0:
        return make_ring_dictionary(cylinder, params, count,
                                    ring_radius_factor, time_offset,
                                    pre_initial_every)
    if not isinstance(base, PolarDomain):
        raise ConfigurationError(
            f"no source rule for base shape {type(base).__name__}")
    if avoid_arcs is None:
        lo_c, hi_c = 0.0, 2.0 * np.pi
    else:
        lo, hi = avoid_arcs
        lo_c, hi_c = hi, lo + 2.0 * np.pi
    t0, t1 = cylinder.t_start, cylinder.t_end
    span = t1 - t0
    sources = []
    for k in range(count):
        column = k % params.dim
        frac = (k * _GOLDEN) % 1.0
        tfrac = (k * _GOLDEN2) % 1.0
        pre = pre_initial_every > 0 and k % pre_initial_every == pre_initial_every - 1
        near = (k * _PLASTIC) % 1.0 < near_fraction
        if pre and time_offset > 0:
            tau = t0 - time_offset * (0.25 + 0.75 * tfrac)
            radial, theta = 0.5 * (1.0 + ring_radius_factor), 2.0 * np.pi * frac
        elif near:
            tau = t0 + 0.75 * span * tfrac
            radial = near_radius_factor
            theta = lo_c + (hi_c - lo_c) * frac
        else:
            tau = t0 + 0.75 * span * tfrac
            radial, theta = ring_radius_factor, 2.0 * np.pi * frac
        rho = float(base.rho(np.array([theta]))[0])
        y = tuple(np.asarray(base.center) + radial * rho
                  * np.array([np.cos(theta), np.sin(theta)]))
        sources.append(SourcePoint(y=y, tau=float(tau), column=column))
    return Dictionary(sources, cylinder, params)


def field_stack(d: Dictionary, index: int, points, times, space_order=0,
                time_deriv=False):
    """Values (and derivative stacks) of one dictionary field.

    Returns dict with 'val' (N, dim); 'jac' (N, dim, dim) with
    ``jac[n, k, j] = d u_j / d x_k`` if space_order >= 1; 'hess'
    (N, n2, dim) over second multi-indices if space_order >= 2; 'dt'
    (N, dim) if requested.
    """
    s = d.sources[index]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tms = np.atleast_1d(np.asarray(times, dtype=float))
    dz = pts - np.asarray(s.y)
    dt = tms - s.tau
    stack = kr.fundamental_stack(dz, dt, d.params, space_order=space_order,
                                 time_deriv=time_deriv)
    out = {"val": stack["phi"][:, :, s.column]}
    if space_order >= 1:
        out["jac"] = stack["d1"][:, :, :, s.column]
    if space_order >= 2:
        out["hess"] = stack["d2"][:, :, :, s.column]
    if time_deriv:
        out["dt"] = stack["dt"][:, :, s.column]
    return out


def evaluate_field(d: Dictionary, index: int, x, t, deriv_order: int = 0):
    """Single-point field evaluation; see :func:`field_stack`."""
    st = field_stack(d, index, np.atleast_2d(x), [t],
                     space_order=deriv_order)
    if deriv_order == 0:
        return st["val"][0]
    if deriv_order == 1:
        return st["val"][0], st["jac"][0]
    return st["val"][0], st["jac"][0], st["hess"][0]


@dataclass
class GramPair:
    """H^{2,1}(outer) and L^2(inner) Gram matrices of a dictionary.

    Also carries the dictionary field values on the inner space-time nodes
    together with the node weights, which downstream projections reuse.
    """

    A: np.ndarray
    B: np.ndarray
    inner_values: np.ndarray      # (K, N_inner, dim)
    inner_weights: np.ndarray     # (N_inner,)

    def __post_init__(self):
        for name, m in (("A", self.A), ("B", self.B)):
            if not np.all(np.isfinite(m)):
                raise InvariantViolation(f"{name} has non-finite entries")
            if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
                raise InvariantViolation(f"{name} is not symmetric")


def gram_pair(d: Dictionary, inner_rules: CylinderRules,
              outer_rules: CylinderRules, chunk: int = 4096) -> GramPair:
    """Assemble the two quadratic forms underlying the eigenproblem.

    A uses the anisotropic Sobolev inner product on the outer cylinder
    (all space derivatives up to order two, counted once per distinct
    multi-index, plus the first time derivative); B is plain L^2 on the
    inner cylinder.  All derivatives are analytic kernel stacks.
    """
    K = len(d)
    dim = d.params.dim
    A = np.zeros((K, K))
    pts, tms, wts = outer_rules.volume_spacetime()
    for lo in range(0, len(wts), chunk):
        sl = slice(lo, min(lo + chunk, len(wts)))
        vals = np.empty((K, sl.stop - sl.start, dim))
        jacs = np.empty((K, sl.stop - sl.start, dim, dim))
        hess = np.empty((K, sl.stop - sl.start, len(kr.multi_indices(dim, 2)), dim))
        dts = np.empty((K, sl.stop - sl.start, dim))
        for k in range(K):
            st = field_stack(d, k, pts[sl], tms[sl], space_order=2,
                             time_deriv=True)
            vals[k], jacs[k], hess[k], dts[k] = (st["val"], st["jac"],
                                                 st["hess"], st["dt"])
        w = wts[sl]
        A += np.einsum("knd,lnd,n->kl", vals, vals, w)
        A += np.einsum("knad,lnad,n->kl", jacs, jacs, w)
        A += np.einsum("knad,lnad,n->kl", hess, hess, w)
        A += np.einsum("knd,lnd,n->kl", dts, dts, w)
    A = 0.5 * (A + A.T)

    ipts, itms, iwts = inner_rules.volume_spacetime()
    inner_vals = np.empty((K, len(iwts), dim))
    for k in range(K):
        inner_vals[k] = field_stack(d, k, ipts, itms)["val"]
    B = np.einsum("knd,lnd,n->kl", inner_vals, inner_vals, iwts)
    B = 0.5 * (B + B.T)
    return GramPair(A, B, inner_vals, iwts)
