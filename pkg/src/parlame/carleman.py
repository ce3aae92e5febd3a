"""The ill-posed lateral Cauchy problem and its regularized reconstruction.

Pipeline: data given on a boundary patch are tapered to the whole boundary
by a C^2 parameter cutoff, combined into the data potential through the
four space-time potentials, projected onto a doubly orthogonal basis over
a small cylinder in the attached exterior region, and the solution is the
data potential minus the truncated coefficient series.  Truncation is the
regularization; the coefficient tail doubles as a solvability diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels as kr
from .dbo import DboBasis, basis_stack
from .dictionary import Dictionary, SourcePoint, field_stack
from .errors import ConfigurationError, InvariantViolation
from .geometry import (CapDomain, Cylinder, CylinderRules, Disk, Interval,
                       LateralPatch, NestedCylinders, QuadratureSpec,
                       build_quadrature, _wrap_angle)
from .potentials import (DensityField, initial_potential, lateral_combined,
                         make_initial_density, make_lateral_density,
                         volume_potential, _param_interp_matrix)


def smoothstep5(s):
    """Quintic smoothstep: C^2, 0 at 0, 1 at 1."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (6.0 * s * s - 15.0 * s + 10.0)


def boundary_cutoff(gamma: LateralPatch, blend_width: float):
    """C^2 taper equal to 1 on the closed patch, decaying to zero over a
    collar of width ``blend_width`` beyond each end, zero elsewhere.

    Keeping the whole patch at 1 means the tapered data agree with the
    given data everywhere on the patch; only the invented collar values
    change the (non-unique) extension field, not the reconstructed
    solution.  The collar must fit inside the complement of the patch.
    """
    if gamma.parent.dim == 1:
        members = np.asarray(gamma.arcs)

        def chi(theta):
            return np.isin(np.atleast_1d(theta), members).astype(float)
        return chi
    _check_collar_fits(gamma, blend_width)

    def chi(theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.zeros(theta.shape)
        for lo, hi in gamma.arcs:
            span = (hi - lo) + 2.0 * blend_width
            d = _wrap_angle(theta - (lo - blend_width))
            inside = d < span
            ramp_in = smoothstep5(d / blend_width)
            ramp_out = smoothstep5((span - d) / blend_width)
            val = np.minimum(np.minimum(ramp_in, ramp_out), 1.0)
            out = np.where(inside, np.maximum(out, val), out)
        return out
    return chi


def _check_collar_fits(gamma: LateralPatch, blend_width: float):
    if blend_width <= 0:
        raise ConfigurationError("blend_width must be positive")
    arcs = sorted((_wrap_angle(lo), _wrap_angle(lo) + (hi - lo))
                  for lo, hi in gamma.arcs)
    for (lo1, hi1), (lo2, _) in zip(arcs, arcs[1:] + [(arcs[0][0] + 2 * np.pi,
                                                       0.0)]):
        gap = lo2 - hi1
        if gap <= 2.0 * blend_width:
            raise ConfigurationError(
                f"complement gap {gap:.4f} cannot hold two collars of "
                f"width {blend_width}")


@dataclass
class CauchyData:
    """Patch data for the lateral problem, sampled on the full boundary rule.

    ``u1`` (trace) and ``u2`` (stress trace) are arrays shaped like a
    lateral density of ``rules``; entries at nodes outside the patch are
    zero and ignored.  Evaluators (theta, t) cover the patch at least; they
    are dropped when noise is applied.
    """

    rules: CylinderRules
    gamma: LateralPatch
    u1: np.ndarray
    u2: np.ndarray
    f: DensityField
    u_init: np.ndarray
    noise_level: float = 0.0
    u1_eval: object = None
    u2_eval: object = None
    u_init_eval: object = None

    def __post_init__(self):
        nb = len(self.rules.boundary.weights)
        nt = self.rules.time.n_nodes
        dim = self.rules.cylinder.base.dim
        for name, arr, shape in (("u1", self.u1, (nb, nt, dim)),
                                 ("u2", self.u2, (nb, nt, dim)),
                                 ("u_init", self.u_init,
                                  (len(self.rules.volume.weights), dim))):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise InvariantViolation(f"{name} shape {arr.shape} != {shape}")
            if not np.all(np.isfinite(arr)):
                raise InvariantViolation(f"{name} must be finite")
        if self.noise_level < 0:
            raise InvariantViolation("noise_level must be >= 0")
        self.gamma_mask = self.gamma.contains_param(self.rules.boundary.params)


@dataclass
class ExtendedData:
    """Whole-boundary densities obtained by tapering patch data."""

    u1_ext: DensityField
    u2_ext: DensityField
    u_init_ext: DensityField
    blend_width: float
    chi: object


def _collar_extrapolation(data: CauchyData, arr: np.ndarray, chi_nodes):
    """Fill collar nodes of the full rule with extrapolated patch data.

    Quadratic least-squares in the boundary parameter over the patch nodes
    nearest the relevant end; low order keeps noise amplification mild.
    The values only shape the extension field, so their accuracy does not
    bias the reconstruction.
    """
    rules = data.rules
    params = rules.boundary.params
    out = arr.copy()
    collar = (chi_nodes > 0.0) & ~data.gamma_mask
    if not np.any(collar):
        return out
    for m in np.where(collar)[0]:
        theta = params[m]
        # nearest patch end and the patch nodes adjacent to it
        best = None
        for lo, hi in data.gamma.arcs:
            for end, inward in ((lo, +1.0), (hi, -1.0)):
                d = _angle_gap(theta, end)
                if best is None or abs(d) < abs(best[0]):
                    best = (d, end, inward)
        _, end, inward = best
        rel = _angle_gap(params[data.gamma_mask], end) * inward
        order = np.argsort(rel)
        take = order[:max(6, rules.boundary.order)]
        src_idx = np.where(data.gamma_mask)[0][take]
        x = _angle_gap(params[src_idx], end)
        xq = _angle_gap(theta, end)
        Vand = np.column_stack([np.ones_like(x), x, x * x])
        coef, *_ = np.linalg.lstsq(Vand, arr[src_idx].reshape(len(x), -1),
                                   rcond=None)
        vals = np.array([1.0, xq, xq * xq]) @ coef
        out[m] = vals.reshape(arr.shape[1:])
    return out


def _angle_gap(theta, theta0):
    d = np.mod(np.asarray(theta) - theta0 + np.pi, 2.0 * np.pi) - np.pi
    return d


def extend_data(data: CauchyData, blend_width: float) -> ExtendedData:
    """Taper the patch data to the whole boundary.

    On the patch the data pass through unchanged; on the collar just
    outside each patch end the values are extrapolated from the patch and
    multiplied by the decaying cutoff (the exact evaluator is used there
    instead when available); elsewhere zero.  The initial-slice density is
    passed through unchanged (zero for the homogeneous-initial family,
    caller-supplied otherwise).
    """
    chi = boundary_cutoff(data.gamma, blend_width)
    rules = data.rules
    chi_nodes = chi(rules.boundary.params)

    def build(arr, ev):
        if ev is not None and rules.cylinder.base.dim == 2:
            vals = make_lateral_density(rules, ev).values
        else:
            vals = _collar_extrapolation(data, arr, chi_nodes) \
                if rules.cylinder.base.dim == 2 else arr
        return vals * chi_nodes[:, None, None]

    u1v = build(data.u1, data.u1_eval)
    u2v = build(data.u2, data.u2_eval)

    def wrap(ev):
        if ev is None:
            return None

        def tapered(theta, t):
            return ev(theta, t) * chi(theta)[:, None]
        return tapered

    u1_ext = DensityField("lateral", rules, u1v, wrap(data.u1_eval))
    u2_ext = DensityField("lateral", rules, u2v, wrap(data.u2_eval))
    u_init = DensityField("initial", rules, data.u_init, data.u_init_eval)
    return ExtendedData(u1_ext, u2_ext, u_init, blend_width, chi)


def assemble_f_tilde(ext: ExtendedData, f: DensityField, X, T,
                     params: kr.LameParams, singular_split=1e-3) -> np.ndarray:
    """Data potential: volume + single-layer(u2) + double-layer(u1) + initial."""
    out = volume_potential(f, X, T, params, singular_split)
    out += lateral_combined(ext.u1_ext, ext.u2_ext, X, T, params,
                            singular_split)
    out += initial_potential(ext.u_init_ext, X, T, params)
    return out


@dataclass
class Reconstruction:
    """Truncated-series solution with its diagnostics.

    ``u(x, t) = Ftilde(x, t) - sum_{nu <= n_star} c_nu b_nu(x, t)`` inside
    the data cylinder.
    """

    basis: DboBasis
    ext: ExtendedData
    f: DensityField
    params: kr.LameParams
    c: np.ndarray
    n_star: int
    diagnostics: dict = field(default_factory=dict)
    singular_split: float = 1e-3

    def f_tilde(self, X, T):
        return assemble_f_tilde(self.ext, self.f, X, T, self.params,
                                self.singular_split)

    def series(self, X, T, n=None):
        n = self.n_star if n is None else n
        if n == 0:
            return np.zeros((np.atleast_2d(X).shape[0], self.params.dim))
        vals = basis_stack(self.basis, X, T)["val"][:, :n, :]
        return np.einsum("nrd,r->nd", vals, self.c[:n])

    def evaluate(self, X, T, n=None):
        return self.f_tilde(X, T) - self.series(X, T, n)


def project_f_tilde(ext: ExtendedData, f: DensityField, basis: DboBasis,
                    small_rules: CylinderRules, params: kr.LameParams,
                    singular_split=1e-3):
    """Data-potential values on the small cylinder and Fourier coefficients."""
    pts, tms, _ = small_rules.volume_spacetime()
    ft = assemble_f_tilde(ext, f, pts, tms, params, singular_split)
    raw = np.einsum("n,nrd,nd->r", basis.inner_weights, basis.inner_values, ft)
    c = raw / basis.sigma
    return ft, c


def tail_energy(c: np.ndarray) -> np.ndarray:
    """tail[N] = sum of |c_nu|^2 beyond the leading N, for N = 0..len(c)."""
    sq = np.abs(c) ** 2
    total = np.sum(sq)
    return total - np.concatenate([[0.0], np.cumsum(sq)])


def solvability_diagnostic(c, window: int = 8, slope_min: float = 0.1) -> dict:
    """Windowed growth statistics of the coefficient partial sums.

    The infinite-series dichotomy (converges iff the problem is solvable)
    degrades to a heuristic on a finite dictionary; thresholds are
    configuration, not ground truth.
    """
    c = np.asarray(c, dtype=float)
    sq = c * c
    cum = np.cumsum(sq)
    n = len(c)
    if n < 2 * window:
        return {"cumulative": cum, "tail_slope": np.nan,
                "window_ratio": np.nan, "verdict": "Inconclusive"}
    floor = max(np.max(sq), 1e-300) * 1e-30
    logsq = np.log10(np.maximum(sq[-window:], floor))
    idx = np.arange(n - window, n)
    slope = float(np.polyfit(idx, logsq, 1)[0])
    first = float(np.sum(sq[:window]))
    last = float(np.sum(sq[-window:]))
    ratio = last / max(first, floor)
    if slope <= -slope_min:
        verdict = "ConvergentLike"
    elif slope >= -0.1 * slope_min:
        verdict = "DivergentLike"
    else:
        verdict = "Inconclusive"
    return {"cumulative": cum, "tail_slope": slope, "window_ratio": ratio,
            "verdict": verdict}


# ---------------------------------------------------------------------------
# gamma-residual collocation for the discrepancy rule
# ---------------------------------------------------------------------------

def _patch_collocation(data: CauchyData, blend_width: float,
                       n_theta: int = 12, n_time: int = 5):
    """Inward-offset points under the shrunk patch with data predictions.

    The prediction transports the Dirichlet data one Taylor step inward
    using the full gradient on the patch, recovered from the stress trace
    plus the tangential derivative of the trace.
    """
    rules = data.rules
    shape = rules.cylinder.base
    params_dim = shape.dim
    tr = rules.time
    times = np.linspace(tr.t0 + 0.15 * (tr.t1 - tr.t0), tr.t1,
                        n_time, endpoint=False)
    if params_dim == 1:
        thetas = np.asarray(data.gamma.arcs)
    else:
        pieces = []
        for lo, hi in data.gamma.arcs:
            margin = 0.06 * (hi - lo)
            pieces.append(np.linspace(lo + margin, hi - margin, n_theta))
        thetas = _wrap_angle(np.concatenate(pieces))
    return thetas, times


def _data_values_at(data: CauchyData, which: str, thetas, t: float):
    arr = data.u1 if which == "u1" else data.u2
    ev = data.u1_eval if which == "u1" else data.u2_eval
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if ev is not None:
        return ev(thetas, np.full(len(thetas), t))
    tmat = data.rules.time.interp_matrix([t])[0]
    vals_t = np.einsum("mnd,n->md", arr, tmat)
    if data.rules.cylinder.base.dim == 1:
        bpar = data.rules.boundary.params
        idx = np.array([int(np.argmin(np.abs(bpar - th))) for th in thetas])
        return vals_t[idx]
    smat = _param_interp_matrix(data.rules.boundary, thetas)
    return smat @ vals_t


def _normal_gradient_from_data(data: CauchyData, params: kr.LameParams,
                               thetas, t: float):
    """Full gradient of the field on the patch from (u1, u2) data.

    Solves the pointwise linear relation between the stress trace and the
    normal derivative given the tangential derivative of the trace.
    """
    shape = data.rules.cylinder.base
    mu, lam = params.mu, params.lam
    if shape.dim == 1:
        pts, normals, _, bpar = shape.boundary_points()
        idx = np.array([int(np.argmin(np.abs(bpar - th))) for th in thetas])
        nu = normals[idx]
        u2 = _data_values_at(data, "u2", thetas, t)
        # stress is (2 mu + lam) nu du/dx, so the normal-directional
        # derivative nu du/dx is just the scaled stress
        dnu = u2 / (2.0 * mu + lam)
        return dnu, nu, None
    pts, nu, speed = shape.boundary_point(thetas)
    tangent = np.column_stack([-nu[:, 1], nu[:, 0]])
    u2 = _data_values_at(data, "u2", thetas, t)
    h = 1e-4
    up = _data_values_at(data, "u1", _wrap_angle(thetas + h), t)
    dn = _data_values_at(data, "u1", _wrap_angle(thetas - h), t)
    darc = (up - dn) / (2.0 * h) / speed[:, None]   # du/d(arclength)
    nud = np.einsum("pd,pd->p", nu, darc)
    taud = np.einsum("pd,pd->p", tangent, darc)
    rhs = u2 - mu * tangent * nud[:, None] - lam * nu * taud[:, None]
    a = np.einsum("pd,pd->p", nu, rhs) / (2.0 * mu + lam)
    b = np.einsum("pd,pd->p", tangent, rhs) / mu
    dnu = a[:, None] * nu + b[:, None] * tangent    # normal derivative vector
    return dnu, nu, darc


def gamma_residual_curve(recon: Reconstruction, data: CauchyData,
                         offset: float = 0.02, n_theta: int = 12,
                         n_time: int = 5):
    """RMS misfit on inward-offset patch collocation points, per truncation.

    Returns (n_values, residuals) where residuals[j] is the misfit of the
    truncation keeping ``n_values[j]`` terms.
    """
    params = recon.params
    shape = data.rules.cylinder.base
    thetas, times = _patch_collocation(data, recon.ext.blend_width,
                                       n_theta, n_time)
    X, T, pred = [], [], []
    for t in times:
        dnu, nu, _ = _normal_gradient_from_data(data, params, thetas, float(t))
        u1 = _data_values_at(data, "u1", thetas, float(t))
        if shape.dim == 1:
            pts_b, normals, _, bpar = shape.boundary_points()
            idx = np.array([int(np.argmin(np.abs(bpar - th))) for th in thetas])
            pts = pts_b[idx]
        else:
            pts, _, _ = shape.boundary_point(thetas)
        X.append(pts - offset * nu)
        T.append(np.full(len(thetas), t))
        pred.append(u1 - offset * dnu)
    X = np.vstack(X)
    T = np.concatenate(T)
    pred = np.vstack(pred)
    ft = recon.f_tilde(X, T)
    bs = basis_stack(recon.basis, X, T)["val"]
    n_values = np.arange(0, len(recon.c) + 1)
    residuals = np.empty(len(n_values))
    for j, n in enumerate(n_values):
        series = np.einsum("nrd,r->nd", bs[:, :n, :], recon.c[:n])
        residuals[j] = np.sqrt(np.mean((ft - series - pred) ** 2))
    return n_values, residuals


def choose_truncation(n_values, residuals, rule: str, fixed_n: int = 0,
                      delta: float = 0.0) -> int:
    """'fixed' returns fixed_n; 'discrepancy' the smallest truncation whose
    residual is at or below delta (argmin if none reaches it)."""
    if rule == "fixed":
        return int(fixed_n)
    if rule != "discrepancy":
        raise ConfigurationError(f"unknown truncation rule {rule!r}")
    hit = np.where(residuals <= delta)[0]
    if len(hit):
        return int(n_values[hit[0]])
    return int(n_values[int(np.argmin(residuals))])


def reconstruct(data: CauchyData, basis: DboBasis,
                small_rules: CylinderRules, params: kr.LameParams,
                truncation=("fixed", 10), blend_width: float = 0.15,
                singular_split: float = 1e-3, collocation_offset: float = 0.02,
                morozov_tau: float = 1.5) -> Reconstruction:
    """End-to-end truncated-series reconstruction from patch data.

    ``truncation``: ('fixed', N) or ('discrepancy', delta); delta <= 0 asks
    for ``morozov_tau`` times the recorded data noise in the collocation
    metric (which is zero for clean data, so the rule then picks the
    residual minimizer).
    """
    ext = extend_data(data, blend_width)
    ft_omega, c = project_f_tilde(ext, data.f, basis, small_rules, params,
                                  singular_split)
    recon = Reconstruction(basis=basis, ext=ext, f=data.f, params=params,
                           c=c, n_star=0, singular_split=singular_split)
    n_values, residuals = gamma_residual_curve(recon, data,
                                               offset=collocation_offset)
    rule, arg = truncation
    if rule == "fixed":
        n_star = choose_truncation(n_values, residuals, "fixed", fixed_n=int(arg))
    else:
        delta = float(arg)
        if delta <= 0.0:
            scale = np.sqrt(np.mean(data.u1[data.gamma_mask] ** 2))
            delta = morozov_tau * data.noise_level * scale
        n_star = choose_truncation(n_values, residuals, "discrepancy",
                                   delta=delta)
    recon.n_star = n_star
    recon.diagnostics = {
        "tail_energy": tail_energy(c),
        "n_values": n_values,
        "gamma_residuals": residuals,
        "f_tilde_omega": ft_omega,
        "delta_used": None if rule == "fixed" else delta,
    }
    return recon


# ---------------------------------------------------------------------------
# explicit truncated kernel (cross-check path)
# ---------------------------------------------------------------------------

class CarlemanKernel:
    """Explicit rank-corrected kernel built on a doubly orthogonal basis.

    The inner space-time integrals over the small cylinder are cached per
    source point.
    """

    def __init__(self, basis: DboBasis, small_rules: CylinderRules,
                 params: kr.LameParams):
        self.basis = basis
        self.small = small_rules
        self.params = params
        pts, tms, _ = small_rules.volume_spacetime()
        self._zpts = pts
        self._ztms = tms
        self._cache = {}

    def corrections(self, y, tau, stress_normal=None):
        """q[nu] = inner integral of the (adjoint) kernel against basis
        field nu; with ``stress_normal`` the traction kernel is used."""
        key = (tuple(np.round(np.atleast_1d(y), 14)), round(float(tau), 14),
               None if stress_normal is None else tuple(np.round(stress_normal, 14)))
        if key in self._cache:
            return self._cache[key]
        dz = self._zpts - np.asarray(y, dtype=float)
        dt = self._ztms - float(tau)
        if stress_normal is None:
            block = kr.fundamental_stack(dz, dt, self.params)["phi"]
        else:
            d1 = kr.fundamental_stack(dz, dt, self.params, space_order=1)["d1"]
            normals = np.broadcast_to(np.asarray(stress_normal, dtype=float),
                                      (len(dz), self.params.dim))
            block = kr.traction_kernel(normals, d1, self.params)
        # q_nu_m = sum_n w_n sum_i block[n, i, m] b_nu_i(n)
        q = np.einsum("n,nim,nri->rm", self.basis.inner_weights, block,
                      self.basis.inner_values)
        self._cache[key] = q
        return q

    def evaluate(self, x, t, y, tau, n: int) -> np.ndarray:
        """Kernel matrix with the leading-n correction subtracted."""
        x = np.asarray(x, dtype=float)
        phi = kr.fundamental_stack((x - np.asarray(y))[None, :],
                                   [float(t) - float(tau)], self.params)["phi"][0]
        if n == 0:
            return phi
        q = self.corrections(y, tau)[:n]
        b = basis_stack(self.basis, x[None, :], [t])["val"][0, :n, :]
        corr = np.einsum("ri,rm,r->im", b, q, 1.0 / self.basis.sigma[:n])
        return phi - corr


def carleman_kernel(basis: DboBasis, small_rules: CylinderRules,
                    params: kr.LameParams, x, t, y, tau, n: int) -> np.ndarray:
    """One-shot explicit kernel evaluation (see :class:`CarlemanKernel`)."""
    return CarlemanKernel(basis, small_rules, params).evaluate(x, t, y, tau, n)


def kernel_form_coefficients(ck: CarlemanKernel, ext: ExtendedData,
                             f: DensityField) -> np.ndarray:
    """Fourier coefficients via the order-swapped (data-side) quadrature.

    Equivalent to projecting the data potential on the small cylinder; the
    difference is pure quadrature commutation error.
    """
    basis = ck.basis
    params = ck.params
    rules = ext.u1_ext.rules
    c = np.zeros(basis.size)
    # lateral terms
    bpts, bnorm = rules.boundary.points, rules.boundary.normals
    bw = rules.boundary.weights
    tn, tw = rules.time.nodes, rules.time.weights
    for m in range(len(bw)):
        for j in range(len(tn)):
            w = bw[m] * tw[j]
            q_v = ck.corrections(bpts[m], tn[j])
            c += w * q_v @ ext.u2_ext.values[m, j]
            q_w = ck.corrections(bpts[m], tn[j], stress_normal=bnorm[m])
            c += w * q_w @ ext.u1_ext.values[m, j]
    # volume term
    if not f.is_zero:
        vpts, vw = rules.volume.points, rules.volume.weights
        for m in range(len(vw)):
            for j in range(len(tn)):
                q = ck.corrections(vpts[m], tn[j])
                c += vw[m] * tw[j] * q @ f.values[m, j]
    # initial term
    if not ext.u_init_ext.is_zero:
        vpts, vw = rules.volume.points, rules.volume.weights
        t0 = rules.cylinder.t_start
        for m in range(len(vw)):
            q = ck.corrections(vpts[m], t0)
            c += vw[m] * q @ ext.u_init_ext.values[m]
    return c / basis.sigma


# ---------------------------------------------------------------------------
# reference geometry and synthetic problems
# ---------------------------------------------------------------------------

@dataclass
class ProblemGeometry:
    """Domains, patch and rules for one lateral Cauchy configuration."""

    params: kr.LameParams
    omega_cyl: Cylinder          # data cylinder over the base domain
    gamma: LateralPatch
    d_cyl: Cylinder              # extension domain (base + cap across gamma)
    small_cyl: Cylinder          # projection cylinder inside the cap
    omega_rules: CylinderRules
    d_rules: CylinderRules
    small_rules: CylinderRules
    blend_width: float

    @property
    def nested(self) -> NestedCylinders:
        return NestedCylinders(self.small_cyl, self.d_cyl)


def reference_geometry(params: kr.LameParams, t_end: float = 1.0,
                       gamma_half_width: float = np.pi / 4,
                       cap_height: float = 0.6,
                       omega_radius_factor: float = 0.55,
                       blend_width_frac: float = 0.12,
                       spec: QuadratureSpec | None = None,
                       small_spec: QuadratureSpec | None = None) -> ProblemGeometry:
    """Unit-disk configuration: patch arc at angle 0, cap glued across it."""
    if params.dim != 2:
        raise ConfigurationError("reference geometry is two-dimensional")
    spec = spec or QuadratureSpec()
    small_spec = small_spec or QuadratureSpec(
        volume_angular_panels=2, volume_angular_order=6,
        volume_radial_order=6, time_panels=spec.time_panels,
        time_order=spec.time_order)
    disk = Disk(radius=1.0)
    gamma = LateralPatch(disk, ((-gamma_half_width, gamma_half_width),))
    cap = CapDomain(radius=1.0, cap_center=0.0,
                    cap_half_width=gamma_half_width, cap_height=cap_height)
    blend = blend_width_frac * 2.0 * gamma_half_width
    omega_cyl = Cylinder(disk, 0.0, t_end)
    d_cyl = Cylinder(cap, 0.0, t_end)
    r_small = omega_radius_factor * 0.5 * cap_height
    center_small = (1.0 + 0.5 * cap_height, 0.0)
    small = Disk(center=center_small, radius=r_small)
    small_cyl = Cylinder(small, 0.0, t_end)
    lo, hi = -gamma_half_width, gamma_half_width
    breakpoints = _wrap_angle(np.array([lo - blend, lo, hi, hi + blend]))
    omega_rules = build_quadrature(omega_cyl, spec,
                                   extra_breakpoints=breakpoints)
    d_rules = build_quadrature(d_cyl, spec)
    small_rules = build_quadrature(small_cyl, small_spec)
    geom = ProblemGeometry(params, omega_cyl, gamma, d_cyl, small_cyl,
                           omega_rules, d_rules, small_rules, blend)
    geom.nested  # validates the pair
    return geom


def interval_geometry(params: kr.LameParams, t_end: float = 1.0,
                      cap_length: float = 0.6,
                      omega_factor: float = 0.6,
                      spec: QuadratureSpec | None = None) -> ProblemGeometry:
    """1D configuration: data on the right endpoint, extension beyond it."""
    if params.dim != 1:
        raise ConfigurationError("interval geometry is one-dimensional")
    spec = spec or QuadratureSpec()
    base = Interval(0.0, 1.0)
    gamma = LateralPatch(base, (1.0,))
    dom = Interval(0.0, 1.0 + cap_length)
    half = 0.5 * omega_factor * cap_length
    mid = 1.0 + 0.5 * cap_length
    small = Interval(mid - half, mid + half)
    omega_cyl = Cylinder(base, 0.0, t_end)
    d_cyl = Cylinder(dom, 0.0, t_end)
    small_cyl = Cylinder(small, 0.0, t_end)
    geom = ProblemGeometry(params, omega_cyl, gamma, d_cyl, small_cyl,
                           build_quadrature(omega_cyl, spec),
                           build_quadrature(d_cyl, spec),
                           build_quadrature(small_cyl, spec), 0.0)
    geom.nested
    return geom


@dataclass
class SyntheticProblem:
    """Manufactured data plus the exact field they came from."""

    data: CauchyData
    truth: Dictionary            # source combination defining the field
    weights: np.ndarray

    def truth_values(self, X, T):
        out = None
        for k, w in enumerate(self.weights):
            v = w * field_stack(self.truth, k, X, T)["val"]
            out = v if out is None else out + v
        return out


def make_synthetic_problem(geom: ProblemGeometry,
                           sources: list[SourcePoint] | None = None,
                           source_weights=None,
                           noise_level: float = 0.0,
                           seed: int = 0) -> SyntheticProblem:
    """Cauchy data from a combination of kernel columns.

    Default sources sit spatially outside the extension domain at early
    interior times, so the field has exactly zero initial trace (causality)
    and the problem is solvable.  Noise is additive Gaussian, relative to
    the RMS of each data channel; noisy data lose their evaluators.
    """
    params = geom.params
    rules = geom.omega_rules
    if sources is None:
        if params.dim == 2:
            sources = [SourcePoint(y=(2.1, 0.45), tau=0.05, column=0),
                       SourcePoint(y=(1.9, -0.7), tau=0.12, column=1)]
        else:
            sources = [SourcePoint(y=(2.2,), tau=0.05, column=0)]
    if source_weights is None:
        source_weights = np.ones(len(sources))
    source_weights = np.asarray(source_weights, dtype=float)
    truth = Dictionary(list(sources), geom.d_cyl, params)

    def u_eval(x, t):
        out = None
        for k, w in enumerate(source_weights):
            v = w * field_stack(truth, k, x, t)["val"]
            out = v if out is None else out + v
        return out

    shape = rules.cylinder.base

    if params.dim == 2:
        def u1_eval(theta, t):
            pts, _, _ = shape.boundary_point(theta)
            return u_eval(pts, t)

        def u2_eval(theta, t):
            pts, normals, _ = shape.boundary_point(theta)
            out = None
            for k, w in enumerate(source_weights):
                st = field_stack(truth, k, pts, t, space_order=1)
                v = w * kr.stress_from_jacobians(normals, st["jac"], params)
                out = v if out is None else out + v
            return out
    else:
        bpts, bnorm, _, bpar = shape.boundary_points()

        def u1_eval(theta, t):
            idx = np.array([int(np.argmin(np.abs(bpar - th)))
                            for th in np.atleast_1d(theta)])
            return u_eval(bpts[idx], t)

        def u2_eval(theta, t):
            idx = np.array([int(np.argmin(np.abs(bpar - th)))
                            for th in np.atleast_1d(theta)])
            out = None
            for k, w in enumerate(source_weights):
                st = field_stack(truth, k, bpts[idx], t, space_order=1)
                v = w * kr.stress_from_jacobians(bnorm[idx], st["jac"], params)
                out = v if out is None else out + v
            return out

    u1 = make_lateral_density(rules, u1_eval)
    u2 = make_lateral_density(rules, u2_eval)
    gmask = geom.gamma.contains_param(rules.boundary.params)
    u1v = np.where(gmask[:, None, None], u1.values, 0.0)
    u2v = np.where(gmask[:, None, None], u2.values, 0.0)

    t0 = rules.cylinder.t_start
    causal_zero = all(s.tau >= t0 for s in sources)
    if causal_zero:
        u_init = np.zeros((len(rules.volume.weights), params.dim))
        u_init_eval = None
    else:
        u_init = u_eval(rules.volume.points,
                        np.full(len(rules.volume.weights), t0))

        def u_init_eval(x):
            return u_eval(np.atleast_2d(x), np.full(len(np.atleast_2d(x)), t0))

    fzero = DensityField("volume", rules,
                         np.zeros((len(rules.volume.weights),
                                   rules.time.n_nodes, params.dim)))
    u1e, u2e = u1_eval, u2_eval
    if noise_level > 0:
        rng = np.random.default_rng(seed)
        for arr in (u1v, u2v):
            mask = np.broadcast_to(gmask[:, None, None], arr.shape)
            rms = np.sqrt(np.mean(arr[mask] ** 2))
            arr += noise_level * rms * rng.standard_normal(arr.shape) * mask
        u1e = u2e = None

    data = CauchyData(rules=rules, gamma=geom.gamma, u1=u1v, u2=u2v,
                      f=fzero, u_init=u_init, noise_level=noise_level,
                      u1_eval=u1e, u2_eval=u2e, u_init_eval=u_init_eval)
    return SyntheticProblem(data, truth, source_weights)
