"""Closed-form heat and parabolic Lame kernels with analytic derivatives.

The matrix kernel treated here is

    K_ij(x, t) = g(x, mu*t) delta_ij
                 + integral_{mu*t}^{(2*mu+lam)*t} d2 g / dx_i dx_j (x, zeta) dzeta,

where ``g`` is the Gaussian heat kernel and ``mu``, ``lam`` are the Lame
constants.  The zeta integral is smooth on its interval, so it is done with
adaptive Gauss-Legendre refinement to an absolute tolerance.  All space and
time derivatives used elsewhere in the package come out of this module in
closed form; nothing downstream differentiates numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels_fast as _fast
from .errors import AccuracyError, DomainError, SingularityError

# Evaluation closer to the space-time diagonal than this raises.
SINGULAR_BAND = 1e-12

_SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class LameParams:
    """Shear constant, second Lame constant, and space dimension."""

    mu: float
    lam: float
    dim: int

    def __post_init__(self):
        if not np.isfinite(self.mu) or not np.isfinite(self.lam):
            raise DomainError("Lame constants must be finite")
        if self.mu <= 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if self.lam + self.mu < 0:
            raise DomainError(f"lam + mu must be >= 0, got {self.lam + self.mu}")
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim}")

    @property
    def slow(self) -> float:
        """Lower endpoint rate of the dispersion interval."""
        return self.mu

    @property
    def fast(self) -> float:
        """Upper endpoint rate, 2*mu + lam."""
        return 2.0 * self.mu + self.lam


@dataclass(frozen=True)
class BoundaryOperatorSpec:
    """Trace (identity) or first-order stress boundary operator at a point."""

    kind: str                  # 'trace' or 'stress'
    normal: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        if self.kind not in ("trace", "stress"):
            raise DomainError(f"unknown boundary operator kind {self.kind!r}")
        nu = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
            raise DomainError("normal must be unit length to 1e-12")
        object.__setattr__(self, "normal", nu)


def multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    """Canonical ordering of space multi-indices with |beta| == order."""
    if dim == 1:
        return [(order,)]
    return [(order - j, j) for j in range(order + 1)]


def _mi_position(dim: int, beta: tuple[int, ...]) -> int:
    return multi_indices(dim, sum(beta)).index(tuple(beta))


# Physicists' Hermite polynomials H_0..H_4, used for the 1D factors
#   d^k/dz^k exp(-z^2/(4 zeta))
#     = (-1/(2 sqrt(zeta)))^k H_k(z/(2 sqrt(zeta))) exp(-z^2/(4 zeta)).
def _hermite(u: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return np.ones_like(u)
    if k == 1:
        return 2.0 * u
    if k == 2:
        return 4.0 * u * u - 2.0
    if k == 3:
        return u * (8.0 * u * u - 12.0)
    if k == 4:
        u2 = u * u
        return 16.0 * u2 * u2 - 48.0 * u2 + 12.0
    raise ValueError(f"Hermite order {k} not tabulated")


def _axis_factors(z: np.ndarray, zeta: np.ndarray, max_order: int) -> np.ndarray:
    """1D heat kernel and its z-derivatives.

    ``z`` and ``zeta`` broadcast together; ``zeta`` must be positive where
    used (caller masks).  Returns stacked shape ``(max_order+1,) + shape``.
    """
    root = np.sqrt(zeta)
    u = z / (2.0 * root)
    base = np.exp(-u * u) / (2.0 * root * _SQRT_PI)
    s = -1.0 / (2.0 * root)
    out = np.empty((max_order + 1,) + np.broadcast(z, zeta).shape)
    fac = np.ones_like(base)
    for k in range(max_order + 1):
        out[k] = base * fac * _hermite(u, k)
        fac = fac * s
    return out


def gaussian_space_derivs(dz: np.ndarray, zeta: np.ndarray, orders) -> dict:
    """Space derivatives of the heat kernel at offsets ``dz`` and times ``zeta``.

    dz: (..., dim), zeta: (...).  Returns ``{order: array (..., n_order)}``
    over :func:`multi_indices`; entries are zero where ``zeta <= 0``.
    """
    dz = np.asarray(dz, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    dim = dz.shape[-1]
    max_order = max(orders)
    pos = zeta > 0.0
    zsafe = np.where(pos, zeta, 1.0)
    fac = [_axis_factors(dz[..., d], zsafe, max_order) for d in range(dim)]
    out = {}
    for order in orders:
        mis = multi_indices(dim, order)
        arr = np.empty(zeta.shape + (len(mis),))
        for a, beta in enumerate(mis):
            term = fac[0][beta[0]]
            for d in range(1, dim):
                term = term * fac[d][beta[d]]
            arr[..., a] = term
        arr[~pos] = 0.0
        out[order] = arr
    return out


def gaussian_time_deriv(dz: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """d/dzeta of the heat kernel; equals its Laplacian off the diagonal."""
    dz = np.asarray(dz, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    dim = dz.shape[-1]
    pos = zeta > 0.0
    zsafe = np.where(pos, zeta, 1.0)
    r2 = np.sum(dz * dz, axis=-1)
    val = np.exp(-r2 / (4.0 * zsafe)) / (2.0 * np.sqrt(np.pi * zsafe)) ** dim
    out = (r2 / (4.0 * zsafe**2) - dim / (2.0 * zsafe)) * val
    return np.where(pos, out, 0.0)


def _gl_cache(n: int, _cache={}):
    if n not in _cache:
        _cache[n] = np.polynomial.legendre.leggauss(n)
    return _cache[n]


def _auto_zeta_order(params: LameParams, tol: float) -> int:
    """Gauss order sufficient for the dispersion-interval integrals.

    The integrand is analytic on [slow*t, fast*t] with its only singularity
    at zeta = 0, so the Gauss error decays like rho^(-2n) with the
    Bernstein parameter of the largest ellipse avoiding the origin; that
    parameter depends only on the ratio fast/slow.  A generous margin
    absorbs the integrand growth on the ellipse.
    """
    r = params.fast / params.slow
    c = (r + 1.0) / (r - 1.0)
    rho = c + np.sqrt(c * c - 1.0)
    n = 0.5 * (np.log(1.0 / max(tol, 1e-16)) + 12.0) / np.log(rho)
    return max(12, int(np.ceil(n)) + 4)


def _zeta_integrals(dz, dt, params: LameParams, orders, tol=1e-12,
                    base_order=None, max_refine=4, verify=False):
    """Integrals over the dispersion interval of Gaussian derivative stacks.

    Returns ``{order: array (..., n_order)}``.  Zero where ``dt <= 0`` or
    the interval is empty (``lam + mu == 0``).  The Gauss order comes from
    an a-priori analyticity estimate; with ``verify=True`` (or when that
    estimate is out of range) the rule is doubled until successive values
    agree to ``tol``, else :class:`AccuracyError`.
    """
    dz = np.asarray(dz, dtype=float)
    dt = np.asarray(dt, dtype=float)
    lo = params.slow * dt
    width = (params.fast - params.slow) * dt
    active = dt > 0.0

    def evaluate(nq):
        u, w = _gl_cache(nq)
        u = 0.5 * (u + 1.0)
        w = 0.5 * w
        # zeta nodes per point: (..., nq)
        zeta = lo[..., None] + width[..., None] * u
        zeta = np.where(active[..., None], zeta, 1.0)
        stacks = gaussian_space_derivs(dz[..., None, :], zeta, orders)
        out = {}
        for order, arr in stacks.items():
            # arr: (..., nq, n_order); contract quadrature axis
            val = np.einsum("...qa,q->...a", arr, w) * width[..., None]
            val[~active] = 0.0
            out[order] = val
        return out

    if params.fast == params.slow:
        zero = {o: np.zeros(dt.shape + (len(multi_indices(dz.shape[-1], o)),))
                for o in orders}
        return zero

    nq = base_order if base_order is not None else _auto_zeta_order(params, tol)
    if nq > 64:
        nq, verify = 32, True
    prev = evaluate(nq)
    if not verify:
        return prev
    for _ in range(max_refine):
        nq *= 2
        cur = evaluate(nq)
        err = max(np.max(np.abs(cur[o] - prev[o])) for o in orders)
        scale = max(np.max(np.abs(cur[o])) for o in orders)
        if err <= max(tol, 1e-14 * scale):
            return cur
        prev = cur
    raise AccuracyError(
        f"zeta integral did not reach tol={tol} (achieved {err:.3e})",
        achieved=err)


def fundamental_stack(dz, dt, params: LameParams, space_order=0,
                      time_deriv=False, tol=1e-12, verify=False):
    """Matrix kernel and derivative stacks at many space-time offsets.

    dz: (N, dim), dt: (N,).  Returns a dict with

    - ``'phi'``: (N, dim, dim) kernel values,
    - ``'d1'``:  (N, dim, dim, dim), ``[n,k,i,j] = d K_ij / dz_k`` (order>=1),
    - ``'d2'``:  (N, n2, dim, dim), second derivatives over
      ``multi_indices(dim, 2)`` (order>=2),
    - ``'dt'``:  (N, dim, dim) time derivative (if requested).

    Entries vanish identically for ``dt <= 0``.  Evaluation is not guarded
    against the diagonal here; callers keep their targets off it.
    """
    dz = np.atleast_2d(np.asarray(dz, dtype=float))
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    dim = params.dim
    n = dz.shape[0]

    order = _auto_zeta_order(params, tol)
    if _fast.HAVE_NUMBA and not verify and order <= 64:
        u, w = _gl_cache(order)
        fn = _fast.stack_2d if dim == 2 else _fast.stack_1d
        phi, d1, d2, dphi = fn(np.ascontiguousarray(dz),
                               np.ascontiguousarray(dt),
                               params.slow, params.fast,
                               0.5 * (u + 1.0), 0.5 * w,
                               space_order, time_deriv)
        out = {"phi": phi}
        if space_order >= 1:
            out["d1"] = d1
        if space_order >= 2:
            out["d2"] = d2
        if time_deriv:
            out["dt"] = dphi
        return out

    g_orders = list(range(2, 2 + space_order + 1))
    ints = _zeta_integrals(dz, dt, params, g_orders, tol=tol, verify=verify)
    direct_orders = list(range(0, space_order + 1)) + ([2] if time_deriv else [])
    slow_g = gaussian_space_derivs(dz, params.slow * dt, sorted(set(direct_orders)))

    mi2 = multi_indices(dim, 2)
    out = {}

    phi = np.zeros((n, dim, dim))
    for i in range(dim):
        for j in range(dim):
            beta = tuple(np.eye(dim, dtype=int)[i] + np.eye(dim, dtype=int)[j])
            phi[:, i, j] = ints[2][:, _mi_position(dim, beta)]
        phi[:, i, i] += slow_g[0][:, 0]
    out["phi"] = phi

    if space_order >= 1:
        d1 = np.zeros((n, dim, dim, dim))
        for k in range(dim):
            for i in range(dim):
                for j in range(dim):
                    beta = np.zeros(dim, dtype=int)
                    beta[i] += 1
                    beta[j] += 1
                    beta[k] += 1
                    d1[:, k, i, j] = ints[3][:, _mi_position(dim, tuple(beta))]
                ek = np.zeros(dim, dtype=int)
                ek[k] = 1
                d1[:, k, i, i] += slow_g[1][:, _mi_position(dim, tuple(ek))]
        out["d1"] = d1

    if space_order >= 2:
        d2 = np.zeros((n, len(mi2), dim, dim))
        for a, gamma in enumerate(mi2):
            for i in range(dim):
                for j in range(dim):
                    beta = np.array(gamma, dtype=int)
                    beta[i] += 1
                    beta[j] += 1
                    d2[:, a, i, j] = ints[4][:, _mi_position(dim, tuple(beta))]
                d2[:, a, i, i] += slow_g[2][:, a]
        out["d2"] = d2

    if time_deriv:
        fast_g2 = gaussian_space_derivs(dz, params.fast * dt, [2])[2]
        slow_g2 = slow_g[2]
        phit = gaussian_time_deriv(dz, params.slow * dt)
        dphi = np.zeros((n, dim, dim))
        for i in range(dim):
            for j in range(dim):
                beta = tuple(np.eye(dim, dtype=int)[i] + np.eye(dim, dtype=int)[j])
                a = _mi_position(dim, beta)
                dphi[:, i, j] = (params.fast * fast_g2[:, a]
                                 - params.slow * slow_g2[:, a])
            dphi[:, i, i] += params.slow * phit
        out["dt"] = dphi

    return out


def _check_point(x, t, dim):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise DomainError(f"expected {dim} coordinates, got {x.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.isfinite(t)):
        raise DomainError("non-finite space-time coordinates")
    return x, float(t)


def heat_kernel(x, t, a=1.0) -> float:
    """Gaussian heat kernel with diffusivity ``a`` at offset ``(x, t)``.

    Returns ``(2 sqrt(pi a t))^-dim * exp(-|x|^2 / (4 a t))`` for t > 0 and
    exactly 0 for t <= 0.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if not (np.all(np.isfinite(x)) and np.isfinite(t)):
        raise DomainError("non-finite space-time coordinates")
    if a <= 0:
        raise DomainError(f"diffusivity must be positive, got {a}")
    if t <= 0:
        return 0.0
    dim = x.shape[0]
    r2 = float(np.dot(x, x))
    return float(np.exp(-r2 / (4.0 * a * t)) / (2.0 * np.sqrt(np.pi * a * t)) ** dim)


def heat_kernel_derivs(x, t, a=1.0):
    """Gradient, Hessian and time derivative of :func:`heat_kernel`.

    All zero for t < 0.  Raises :class:`SingularityError` at the diagonal.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if not (np.all(np.isfinite(x)) and np.isfinite(t)):
        raise DomainError("non-finite space-time coordinates")
    if a <= 0:
        raise DomainError(f"diffusivity must be positive, got {a}")
    dim = x.shape[0]
    if np.sqrt(np.dot(x, x) + t * t) < SINGULAR_BAND:
        raise SingularityError("heat kernel derivatives at the diagonal")
    if t <= 0:
        return np.zeros(dim), np.zeros((dim, dim)), 0.0
    zeta = np.array(a * t)
    g = gaussian_space_derivs(x[None, :], zeta[None], [1, 2])
    grad = g[1][0]
    hess = np.empty((dim, dim))
    for i in range(dim):
        for j in range(dim):
            beta = tuple(np.eye(dim, dtype=int)[i] + np.eye(dim, dtype=int)[j])
            hess[i, j] = g[2][0, _mi_position(dim, beta)]
    tder = a * float(gaussian_time_deriv(x[None, :], zeta[None])[0])
    return grad, hess, tder


def _guard_diagonal(x, t):
    if np.sqrt(np.dot(x, x) + t * t) < SINGULAR_BAND:
        raise SingularityError("kernel evaluation at the space-time diagonal")


def lame_fundamental(x, t, params: LameParams, tol=1e-12) -> np.ndarray:
    """The dim x dim matrix kernel at a single space-time offset."""
    x, t = _check_point(x, t, params.dim)
    _guard_diagonal(x, t)
    return fundamental_stack(x[None, :], [t], params, tol=tol,
                             verify=True)["phi"][0]


def lame_fundamental_space_derivs(x, t, params: LameParams, order: int,
                                  tol=1e-12) -> np.ndarray:
    """Space derivative stack of the matrix kernel, |alpha| == order in {1, 2}.

    Returns shape ``(n_alpha, dim, dim)`` over :func:`multi_indices`.
    """
    if order not in (1, 2):
        raise DomainError(f"derivative order must be 1 or 2, got {order}")
    x, t = _check_point(x, t, params.dim)
    _guard_diagonal(x, t)
    stack = fundamental_stack(x[None, :], [t], params, space_order=order,
                              tol=tol, verify=True)
    if order == 1:
        return stack["d1"][0]
    return stack["d2"][0]


def lame_fundamental_time_deriv(x, t, params: LameParams, tol=1e-12) -> np.ndarray:
    """Time derivative of the matrix kernel at a single offset."""
    x, t = _check_point(x, t, params.dim)
    _guard_diagonal(x, t)
    return fundamental_stack(x[None, :], [t], params, time_deriv=True,
                             tol=tol, verify=True)["dt"][0]


def apply_boundary_op(spec: BoundaryOperatorSpec, field_value, field_jacobian,
                      params: LameParams) -> np.ndarray:
    """Apply the trace or stress operator to one field value/jacobian pair.

    Jacobian convention: ``J[k, j] = d u_j / d x_k``.
    """
    value = np.asarray(field_value, dtype=float)
    if spec.kind == "trace":
        return value.copy()
    jac = np.asarray(field_jacobian, dtype=float)
    nu = spec.normal
    out = (params.mu * nu @ jac
           + params.mu * jac @ nu
           + params.lam * nu * np.trace(jac))
    return out


def stress_from_jacobians(normals, jac, params: LameParams) -> np.ndarray:
    """Vectorized stress operator: normals (N, dim), jac (N, dim, dim)."""
    normals = np.asarray(normals, dtype=float)
    jac = np.asarray(jac, dtype=float)
    term1 = np.einsum("nk,nkm->nm", normals, jac)
    term2 = np.einsum("nj,nmj->nm", normals, jac)
    term3 = normals * np.trace(jac, axis1=1, axis2=2)[:, None]
    return params.mu * term1 + params.mu * term2 + params.lam * term3


def traction_kernel(normals, d1, params: LameParams) -> np.ndarray:
    """Double-layer kernel block from first-derivative stacks.

    ``d1[n, k, i, j] = d K_ij / dz_k`` at offsets ``z = x - y``; ``normals``
    are outward at the source points ``y``.  Returns ``(N, dim, dim)`` with
    the convention that the boundary-stress operator acts in the source
    variable on the adjoint kernel columns, transposed and negated: pairing
    entry ``[n, i, m]`` multiplies density component ``m`` of the result
    component ``i``.  The sign flip from d/dy = -d/dz is already included.
    """
    normals = np.asarray(normals, dtype=float)
    mu, lam = params.mu, params.lam
    t1 = np.einsum("nk,nkim->nim", normals, d1)
    t2 = np.einsum("nj,nmij->nim", normals, d1)
    t3 = np.einsum("nm,ni->nim", normals, np.einsum("njij->ni", d1))
    return mu * t1 + mu * t2 + lam * t3


class GaussianBump:
    """Smooth vector test field with analytic derivatives.

    Each component is ``amp_i * exp(-sum((x_d - c_d)^2 / w_d^2)
    - (t - ct)^2 / wt^2)``; effectively supported within a few widths.
    """

    def __init__(self, center, width, t_center, t_width, amplitudes):
        self.center = np.asarray(center, dtype=float)
        self.width = np.asarray(width, dtype=float) * np.ones_like(self.center)
        self.t_center = float(t_center)
        self.t_width = float(t_width)
        self.amp = np.asarray(amplitudes, dtype=float)
        if self.amp.shape != self.center.shape:
            raise DomainError("amplitude count must match dimension")

    def _profile(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        q = np.sum(((x - self.center) / self.width) ** 2, axis=1)
        q = q + ((t - self.t_center) / self.t_width) ** 2
        return x, t, np.exp(-q)

    def value(self, x, t) -> np.ndarray:
        _, _, prof = self._profile(x, t)
        return prof[:, None] * self.amp

    def apply_lame(self, x, t, params: LameParams) -> np.ndarray:
        """Pointwise value of the parabolic Lame operator on the bump."""
        x, t, prof = self._profile(x, t)
        u = (x - self.center) / self.width**2          # (N, dim)
        dt_fac = -2.0 * (t - self.t_center) / self.t_width**2
        # first derivs of profile: d_d prof = -2 u_d prof
        # second: d_d d_e prof = (4 u_d u_e - 2 delta_de / w_d^2) prof
        lap = (4.0 * np.sum(u * u, axis=1)
               - 2.0 * np.sum(1.0 / self.width**2)) * prof
        out = np.empty((x.shape[0], params.dim))
        for i in range(params.dim):
            # grad(div psi)_i = sum_j d_i d_j psi_j
            graddiv = 0.0
            for j in range(params.dim):
                dd = 4.0 * u[:, i] * u[:, j]
                if i == j:
                    dd = dd - 2.0 / self.width[i] ** 2
                graddiv = graddiv + dd * prof * self.amp[j]
            out[:, i] = (dt_fac * prof * self.amp[i]
                         - params.mu * lap * self.amp[i]
                         - (params.mu + params.lam) * graddiv)
        return out


def _panel_nodes(edges: np.ndarray, order: int):
    u, w = _gl_cache(order)
    widths = np.diff(edges)
    pts = (edges[:-1, None] + widths[:, None] * 0.5 * (u + 1.0)).ravel()
    wts = (widths[:, None] * 0.5 * w).ravel()
    return pts, wts


def _graded_symmetric_axis(radius, n_nodes, floor_frac=2e-3, order=8):
    """Panels on (-radius, radius) geometrically refined toward 0."""
    per_side = max(3, n_nodes // (2 * order))
    pos = radius * np.geomspace(floor_frac, 1.0, per_side)
    edges = np.concatenate([-pos[::-1], [0.0], pos])
    return _panel_nodes(edges, order)


def verify_fundamental_property(params: LameParams, test_field: GaussianBump,
                                box_radius, t_radius, nx, nt,
                                near_cut=1e-3) -> float:
    """Residual of the distributional identity against a smooth test field.

    Quadrature of ``K^T(x, -t) (L psi)(x, t)`` over the box
    ``[-box_radius, box_radius]^dim x (-t_radius, 0)`` should return
    ``psi(0, 0)``; the max-norm defect is returned.  The kernel is causal,
    so only t < 0 contributes.  Panels are graded toward the space-time
    origin where the kernel concentrates, and the slab ``-near_cut < t < 0``
    is handled semi-analytically: the kernel's spatial mass is exactly the
    identity for every positive lag, so that slab contributes the time
    integral of ``(L psi)(0, t)``, with an error quadratic in ``near_cut``.
    """
    dim = params.dim
    order = 8
    xs, wxs = _graded_symmetric_axis(box_radius, nx, order=order)

    # time panels on (-t_radius, -near_cut), graded toward -near_cut
    per = max(3, nt // order)
    offs = (t_radius - near_cut) * np.geomspace(near_cut / t_radius, 1.0, per)
    edges_abs = near_cut + np.concatenate([[0.0], offs])
    tpts, twts = _panel_nodes(-edges_abs[::-1], order)

    if dim == 1:
        X = xs[:, None]
        WX = wxs
    else:
        g0, g1 = np.meshgrid(xs, xs, indexing="ij")
        X = np.column_stack([g0.ravel(), g1.ravel()])
        WX = np.outer(wxs, wxs).ravel()

    acc = np.zeros(dim)
    for tp, tw in zip(tpts, twts):
        tt = np.full(X.shape[0], tp)
        k = fundamental_stack(X, -tt, params)["phi"]
        lpsi = test_field.apply_lame(X, tt, params)
        acc += tw * np.einsum("n,nij,ni->j", WX, k, lpsi)

    # near-time slab: identity spatial mass times L psi on the time axis
    spts, swts = _panel_nodes(np.array([-near_cut, 0.0]), 16)
    lpsi0 = test_field.apply_lame(np.zeros((len(spts), dim)), spts, params)
    acc += swts @ lpsi0

    ref = test_field.value(np.zeros((1, dim)), [0.0])[0]
    return float(np.max(np.abs(acc - ref)))
