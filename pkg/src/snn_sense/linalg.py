"""Dense linear algebra at desk scale.

Matrices are plain 2-D ``float64`` numpy arrays. ``vec`` follows the
column-stacking convention, so ``vec([[1, 2], [3, 4]]) == [1, 3, 2, 4]`` even
though numpy stores the array row-major.
"""

from typing import NamedTuple

import numpy as np

from ._jacobi import EPS, jacobi_rows
from .errors import DimensionError, SvdConvergenceError

# relative floor below which singular values count as zero for rank purposes
RANK_RTOL = 1e-12
MAX_SWEEPS = 60


class CompactSvd(NamedTuple):
    """``a == phi @ diag(sigma) @ psi.T`` with phi square and psi truncated to rows(a) columns."""

    phi: np.ndarray
    sigma: np.ndarray
    psi: np.ndarray

    def reconstruct(self):
        return (self.phi * self.sigma) @ self.psi.T


def as_mat(a, name="matrix"):
    """Coerce to a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _complete_columns(psi, keep):
    """Replace columns of ``psi`` not flagged in ``keep`` by an orthonormal completion.

    Candidates are the standard basis vectors in index order, orthogonalised
    twice against everything accepted so far, so the result is deterministic.
    """
    n = psi.shape[0]
    basis = [psi[:, j] for j in range(psi.shape[1]) if keep[j]]
    fill = []
    for e in range(n):
        if len(basis) + len(fill) == psi.shape[1]:
            break
        cand = np.zeros(n)
        cand[e] = 1.0
        for _ in range(2):
            for b in basis + fill:
                cand -= (b @ cand) * b
        norm = np.linalg.norm(cand)
        if norm > 1e-8:
            fill.append(cand / norm)
    out = psi.copy()
    it = iter(fill)
    for j in range(psi.shape[1]):
        if not keep[j]:
            out[:, j] = next(it)
    return out


def compact_svd(a):
    """Compact SVD of a matrix with rows <= cols.

    Returns ``CompactSvd(phi, sigma, psi)`` with ``phi`` orthogonal (d1 x d1),
    ``sigma`` non-increasing and ``psi`` (d2 x d1) with orthonormal columns.
    Each column of ``phi`` has its largest-magnitude entry non-negative (first
    index wins ties); the matching ``psi`` column is flipped with it.
    """
    a = as_mat(a)
    d1, d2 = a.shape
    if d1 > d2:
        raise DimensionError(f"compact_svd needs rows <= cols, got {a.shape}; transpose first")
    m = np.ascontiguousarray(a.copy())
    v = np.eye(d1)
    if jacobi_rows(m, v, d1 * EPS, MAX_SWEEPS) < 0:
        raise SvdConvergenceError(f"Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")
    sigma = np.sqrt(np.einsum("ij,ij->i", m, m))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    phi = v[:, order]
    m = m[order]
    # rows at or below the kernel's roundoff floor carry no direction; their
    # psi columns are completed to an orthonormal set instead
    floor = 2.0 * d1 * EPS * float(np.linalg.norm(a))
    keep = sigma > max(floor, np.finfo(np.float64).tiny)
    psi = np.zeros((d2, d1))
    psi[:, keep] = (m[keep] / sigma[keep, None]).T
    if not np.all(keep):
        psi = _complete_columns(psi, keep)
    lead = np.argmax(np.abs(phi), axis=0)
    signs = np.where(phi[lead, np.arange(d1)] < 0, -1.0, 1.0)
    return CompactSvd(phi * signs, sigma, psi * signs)


def singular_values(a):
    """Singular values (non-increasing) of any-shaped matrix."""
    a = as_mat(a)
    if a.shape[0] > a.shape[1]:
        a = a.T
    return compact_svd(a).sigma


def numerical_rank(sigma, rtol=RANK_RTOL):
    sigma = np.asarray(sigma)
    if sigma.size == 0 or sigma[0] == 0:
        return 0
    return int(np.count_nonzero(sigma > rtol * sigma[0]))


def clamp_small(sigma, rtol=RANK_RTOL):
    sigma = np.array(sigma, dtype=np.float64)
    if sigma.size and sigma.max() > 0:
        sigma[sigma <= rtol * sigma.max()] = 0.0
    return sigma


def vec(a):
    """Stack the columns of ``a`` into one vector."""
    return as_mat(a).reshape(-1, order="F")


def unvec(x, rows, cols):
    x = np.asarray(x, dtype=np.float64)
    if x.size != rows * cols:
        raise DimensionError(f"cannot reshape length {x.size} into {rows}x{cols}")
    return x.reshape((rows, cols), order="F")


def diag_of(a):
    a = as_mat(a)
    return np.diagonal(a).copy()


def rect_diag(v, rows, cols):
    """Rectangular diagonal ``rows x cols`` matrix carrying ``v`` on its main diagonal."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != min(rows, cols):
        raise DimensionError(f"need {min(rows, cols)} diagonal entries for {rows}x{cols}, got {v.size}")
    out = np.zeros((rows, cols))
    idx = np.arange(v.size)
    out[idx, idx] = v
    return out


def rect_identity(rows, cols):
    return rect_diag(np.ones(min(rows, cols)), rows, cols)


def khatri_rao(psi, phi):
    """Column-wise Kronecker product; column i is ``vec(phi[:, i] psi[:, i]^T)``."""
    psi = as_mat(psi, "psi")
    phi = as_mat(phi, "phi")
    if not (psi.shape[1] == phi.shape[1] == phi.shape[0]):
        raise DimensionError(f"khatri_rao needs psi (d2 x d1) and phi (d1 x d1), got {psi.shape}, {phi.shape}")
    d1 = phi.shape[0]
    d2 = psi.shape[0]
    # kron(psi_i, phi_i)[j*d1 + r] = psi[j, i] * phi[r, i]
    return (psi[:, None, :] * phi[None, :, :]).reshape(d1 * d2, d1)


def frobenius_inner(a, b):
    a = as_mat(a)
    b = as_mat(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.trace(a.T @ b))


def frobenius_norm(a):
    return float(np.linalg.norm(as_mat(a)))


def nuclear_norm(a):
    return float(np.sum(singular_values(a)))


def spectral_norm(a):
    return float(singular_values(a)[0])


def pinv_apply(a, b, rtol=RANK_RTOL):
    """Minimum-norm least-squares solution of ``a @ x = b`` via the in-repo SVD.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    a = as_mat(a)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] <= a.shape[1]:
        phi, sigma, psi = compact_svd(a)
        left, right = phi, psi  # a = left diag(sigma) right^T
    else:
        phi, sigma, psi = compact_svd(a.T)
        left, right = psi, phi
    inv = np.zeros_like(sigma)
    nz = clamp_small(sigma, rtol) > 0
    inv[nz] = 1.0 / sigma[nz]
    coeff = left.T @ b
    coeff = coeff * (inv if coeff.ndim == 1 else inv[:, None])
    return right @ coeff


def orthonormal_basis(a, rtol=RANK_RTOL):
    """Orthonormal basis of the column space of ``a``."""
    a = as_mat(a)
    if a.shape[0] <= a.shape[1]:
        phi, sigma, _ = compact_svd(a)
        return phi[:, : numerical_rank(sigma, rtol)]
    _, sigma, psi = compact_svd(a.T)
    return psi[:, : numerical_rank(sigma, rtol)]


def max_principal_angle(p, q):
    """Largest principal angle (radians) between the column spans of orthonormal ``p`` and ``q``."""
    p = as_mat(p)
    q = as_mat(q)
    if p.shape[0] != q.shape[0]:
        raise DimensionError("subspaces live in different ambient dimensions")
    if p.shape[1] != q.shape[1]:
        raise DimensionError("subspaces must have equal dimension")
    # sin of the largest angle is the spectral norm of the part of p outside span(q)
    resid = p - q @ (q.T @ p)
    s = float(singular_values(resid)[0]) if np.any(resid) else 0.0
    return float(np.arcsin(min(1.0, s)))


def haar_orthogonal(rng, n):
    """Haar-distributed orthogonal matrix: QR of a Gaussian with the R-diagonal sign fix."""
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d
