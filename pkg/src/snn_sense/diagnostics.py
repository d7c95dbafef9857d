"""Convergence-rate fits, KKT certificates and reconstruction metrics."""

import dataclasses
import math

import numpy as np

from . import linalg
from .errors import InsufficientData

RESIDUAL_FLOOR = 1e-12
MIN_SAMPLES = 10


@dataclasses.dataclass(frozen=True)
class RateFit:
    eta_hat: float
    c_hat: float
    r_squared: float
    window: tuple

    def as_dict(self):
        return dataclasses.asdict(self)


def fit_exponential(times, residuals, floor=RESIDUAL_FLOOR, fraction=0.5):
    """Fit ``residual ~ c * exp(-eta * t)`` on the trailing ``fraction`` of samples above ``floor``.

    A least-squares line through ``log(residual)`` against ``t``; ``eta_hat``
    is minus its slope. Needs at least ten samples above the floor.
    """
    t = np.asarray(times, dtype=np.float64)
    r = np.asarray(residuals, dtype=np.float64)
    if t.shape != r.shape:
        raise ValueError("times and residuals must have the same length")
    keep = r > floor
    if np.count_nonzero(keep) < MIN_SAMPLES:
        raise InsufficientData(f"only {np.count_nonzero(keep)} samples above {floor:g}")
    t, r = t[keep], r[keep]
    start = int(math.floor(t.size * (1.0 - fraction)))
    if t.size - start < MIN_SAMPLES:
        start = t.size - MIN_SAMPLES
    t, y = t[start:], np.log(r[start:])
    tc = t - t.mean()
    denom = float(tc @ tc)
    if denom == 0:
        raise InsufficientData("fit window has zero time span")
    slope = float(tc @ (y - y.mean())) / denom
    intercept = float(y.mean() - slope * t.mean())
    fitted = intercept + slope * t
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(-slope, math.exp(intercept), r2, (float(t[0]), float(t[-1])))


def max_log_decrease_ratio(times, norms, fit):
    """Largest per-sample drop of ``log ||residual||`` over the fit window, relative to
    ``|slope| * dt``. Values at or below 3 mean decay stays exponentially bounded below."""
    t = np.asarray(times, dtype=np.float64)
    n = np.asarray(norms, dtype=np.float64)
    sel = (t >= fit.window[0]) & (t <= fit.window[1]) & (n > RESIDUAL_FLOOR)
    t, logn = t[sel], np.log(n[sel])
    drops = -(np.diff(logn))
    allowed = abs(fit.eta_hat) * np.diff(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(allowed > 0, drops / allowed, np.where(drops > 0, np.inf, 0.0))
    return float(np.max(ratio)) if ratio.size else 0.0


@dataclasses.dataclass(frozen=True)
class KktReport:
    feasibility_residual: float
    dual_residual: float
    nu_hat: np.ndarray
    range_residual: float
    rank_deficient: bool = False

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["nu_hat"] = [float(v) for v in self.nu_hat]
        return d


def kkt_check(x, ens, rank_tol=1e-8):
    """Certify nuclear-norm optimality of ``x`` among matrices matching the labels.

    Feasibility is ``max_i |<A_i, x> - y_i|``. The dual residual is
    ``min_nu ||phi psi^T + sum_i nu_i A_i||_F`` with ``phi psi^T`` the
    nuclear-norm gradient at ``x`` (taken from its own SVD), solved by minimum-norm
    least squares. ``range_residual`` is the reduced form ``||B nu - 1||``
    when the ensemble carries B.
    """
    x = linalg.as_mat(x)
    feas = float(np.max(np.abs(ens.residuals(x))))
    flip = x.shape[0] > x.shape[1]
    phi, sigma, psi = linalg.compact_svd(x.T if flip else x)
    polar = phi @ psi.T
    if flip:
        polar = polar.T
    rank_deficient = bool(sigma[-1] < rank_tol)
    op = ens.operator
    nu = -linalg.pinv_apply(op.T, polar.ravel())
    dual = float(np.linalg.norm(polar + ens.adjoint(nu)))
    range_res = math.nan
    if ens.b is not None:
        ones = np.ones(ens.b.shape[0])
        range_res = float(np.linalg.norm(ens.b @ linalg.pinv_apply(ens.b, ones) - ones))
    return KktReport(feas, dual, nu, range_res, rank_deficient)


def psnr(x, x_ref, peak=1.0):
    """Peak signal-to-noise ratio in dB; ``inf`` when the matrices agree exactly."""
    x = np.asarray(x, dtype=np.float64)
    x_ref = np.asarray(x_ref, dtype=np.float64)
    if x.shape != x_ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_ref.shape}")
    mse = float(np.mean((x - x_ref) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def effective_rank(x):
    """``exp`` of the Shannon entropy of the normalised (clamped) singular values."""
    sigma = linalg.clamp_small(linalg.singular_values(x))
    total = sigma.sum()
    if total == 0:
        raise ValueError("effective rank of the zero matrix is undefined")
    p = sigma[sigma > 0] / total
    return float(math.exp(-np.sum(p * np.log(p))))


def subspace_alignment(x, phi, psi, gap_rtol=1e-6):
    """Largest principal angles (left, right) between leading singular subspaces of ``x``
    and the matching columns of ``phi`` / ``psi``.

    Columns of ``phi``/``psi`` are matched to ``x`` by the magnitude of
    ``diag(phi^T x psi)``. Only leading blocks separated by a relative
    singular-value gap above ``gap_rtol`` are compared, since within a cluster
    of equal singular values the vectors are not unique.
    """
    x = linalg.as_mat(x)
    xs_phi, xs, xs_psi = linalg.compact_svd(x)
    weights = np.abs(linalg.diag_of(phi.T @ x @ psi))
    order = np.argsort(-weights, kind="stable")
    rank = linalg.numerical_rank(xs)
    left = right = 0.0
    for k in range(1, rank + 1):
        nxt = xs[k] if k < xs.size else 0.0
        if xs[k - 1] - nxt <= gap_rtol * xs[0]:
            continue
        cols = order[:k]
        left = max(left, linalg.max_principal_angle(xs_phi[:, :k], phi[:, cols]))
        right = max(right, linalg.max_principal_angle(xs_psi[:, :k], psi[:, cols]))
    return left, right


def sigma_star_lift(ens):
    """``phi Diag(sigma*) psi^T``: the minimum-nuclear-norm interpolant for a commuting ensemble."""
    return (ens.phi * ens.sigma_star) @ ens.psi.T


def nuclear_optimality_crosscheck(x, ens):
    """``||x||_* - ||phi Diag(sigma*) psi^T||_*``."""
    return linalg.nuclear_norm(x) - linalg.nuclear_norm(sigma_star_lift(ens))


def null_space_perturbation(ens, rng, scale=1.0):
    """A random matrix projected onto the null space of the measurement operator."""
    d1, d2 = ens.shape
    g = rng.standard_normal(d1 * d2)
    op = ens.operator
    g = g - linalg.pinv_apply(op, op @ g)
    g = g - linalg.pinv_apply(op, op @ g)
    n = g.reshape(d1, d2)
    norm = np.linalg.norm(n)
    return scale * n / norm if norm > 0 else n
