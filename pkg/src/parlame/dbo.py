"""Doubly orthogonal bases from the restriction-operator eigenproblem.

Given the Gram pair (A, B) of a dictionary -- A the Sobolev form on the
big cylinder, B the L^2 form on the small one -- the basis coefficients
solve the generalized symmetric problem B c = sigma A c by whitening A and
diagonalizing the compressed B.  Columns are A-orthonormal; B becomes
diag(sigma) with sigma the squared restriction norms, kept explicit so the
Fourier projection divides by them literally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dictionary import Dictionary, GramPair, field_stack
from .errors import ConditioningError, DegenerateGeometryError, DomainError


@dataclass
class DboBasis:
    coeffs: np.ndarray            # (K_dict, R) dictionary coordinates
    sigma: np.ndarray             # (R,) descending positive
    dictionary: Dictionary
    cond_report: dict
    inner_values: np.ndarray      # (N_inner, R, dim) basis values on inner nodes
    inner_weights: np.ndarray     # (N_inner,)

    @property
    def size(self) -> int:
        return self.coeffs.shape[1]


def build_dbo(g: GramPair, d: Dictionary, drop_tol: float = 1e-12,
              sigma_floor_rel: float = 1e-14) -> DboBasis:
    """Whiten A, diagonalize the compressed B, drop unusable directions.

    One Cholesky refinement pass keeps the A-orthonormality defect near
    roundoff even when A is severely ill-conditioned (which it always is
    for kernel dictionaries).
    """
    A, B = g.A, g.B
    lam, Q = np.linalg.eigh(A)
    lam_max = float(lam[-1])
    if lam_max <= 0:
        raise ConditioningError("A has no positive spectrum",
                                report={"lam_max": lam_max})
    keep = lam > drop_tol * lam_max
    n_dropped = int(np.sum(~keep))
    W = Q[:, keep] / np.sqrt(lam[keep])

    # refinement: re-orthonormalize against A in the kept subspace
    G = W.T @ A @ W
    try:
        R = sla.cholesky(0.5 * (G + G.T), lower=False)
    except sla.LinAlgError as exc:
        raise ConditioningError(
            "whitened A not positive definite; lower drop_tol",
            report={"dropped": n_dropped, "lam_max": lam_max}) from exc
    W = sla.solve_triangular(R, W.T, trans="T", lower=False).T

    M = W.T @ B @ W
    M = 0.5 * (M + M.T)
    s, U = np.linalg.eigh(M)
    order = np.argsort(s)[::-1]
    s, U = s[order], U[:, order]
    floor = sigma_floor_rel * max(float(s[0]), 0.0)
    usable = s > max(floor, 0.0)
    if not np.any(usable):
        raise DegenerateGeometryError(
            "all restriction singular values at or below the floor")
    s, U = s[usable], U[:, usable]
    C = W @ U
    # deterministic sign: largest-magnitude coefficient positive
    picks = np.argmax(np.abs(C), axis=0)
    signs = np.sign(C[picks, np.arange(C.shape[1])])
    signs[signs == 0] = 1.0
    C = C * signs

    ortho = float(np.max(np.abs(C.T @ A @ C - np.eye(C.shape[1]))))
    bdiag = C.T @ B @ C
    offdiag = float(np.max(np.abs(bdiag - np.diag(np.diag(bdiag)))))
    report = {
        "n_dict": A.shape[0],
        "n_dropped_whitening": n_dropped,
        "n_dropped_sigma": int(np.sum(~usable)),
        "drop_tol": drop_tol,
        "sigma_floor": floor,
        "lam_max": lam_max,
        "lam_min_kept": float(lam[keep][0]),
        "a_orthonormality_defect": ortho,
        "b_offdiagonal_defect": offdiag,
    }
    inner_vals = np.einsum("kr,knd->nrd", C, g.inner_values)
    return DboBasis(C, s, d, report, inner_vals, g.inner_weights)


def basis_stack(basis: DboBasis, points, times, space_order=0,
                time_deriv=False, columns=None) -> dict:
    """Values/derivatives of all (or selected) basis fields at points.

    Returns 'val' with shape (N, R, dim) plus optional stacks mirroring
    :func:`parlame.dictionary.field_stack`.
    """
    C = basis.coeffs if columns is None else basis.coeffs[:, columns]
    K = basis.coeffs.shape[0]
    acc = {}
    for k in range(K):
        st = field_stack(basis.dictionary, k, points, times,
                         space_order=space_order, time_deriv=time_deriv)
        for key, arr in st.items():
            if key not in acc:
                acc[key] = np.zeros((arr.shape[0],) + (C.shape[1],) + arr.shape[1:])
            acc[key] += np.einsum("r,n...->nr...", C[k], arr)
    return acc


def expand(basis: DboBasis, coeffs, x, t) -> np.ndarray:
    """Sum of coefficient-weighted basis fields at one space-time point."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] > basis.size:
        raise DomainError("more coefficients than basis fields")
    w = basis.coeffs[:, :coeffs.shape[0]] @ coeffs
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros((pts.shape[0], basis.dictionary.params.dim))
    for k in range(len(w)):
        if w[k] == 0.0:
            continue
        out += w[k] * field_stack(basis.dictionary, k, pts,
                                  np.full(pts.shape[0], t))["val"]
    return out[0] if np.asarray(x).ndim == 1 else out


def project_l2(basis: DboBasis, values, sigma_floor: float = 0.0):
    """Fourier coefficients of inner-node samples against the basis.

    ``values``: (N_inner, dim) samples on the inner cylinder's space-time
    nodes.  Returns (coeffs, excluded) where ``excluded`` lists indices with
    sigma at or below the floor (their coefficients are zeroed).
    """
    values = np.asarray(values, dtype=float)
    if values.shape != basis.inner_values.shape[:1] + basis.inner_values.shape[2:]:
        raise DomainError(
            f"samples shape {values.shape} does not match inner nodes")
    raw = np.einsum("n,nrd,nd->r", basis.inner_weights, basis.inner_values,
                    values)
    excluded = np.where(basis.sigma <= sigma_floor)[0]
    c = np.zeros_like(raw)
    ok = basis.sigma > sigma_floor
    c[ok] = raw[ok] / basis.sigma[ok]
    return c, excluded
