"""Sensing ensembles, ground-truth targets and labels.

Two ensemble families are supported:

* commuting: every ``A_i = phi @ Diag(sigma_i) @ psi.T`` shares the same
  singular vectors (the setting where the gradient flow has a closed form);
* gaussian: iid standard normal entries (the general setting).
"""

import dataclasses
import enum
import itertools

import numpy as np

from . import linalg
from .errors import DimensionError, InvariantViolation
from .rng import stream

QUASI_COMMUTE_TOL = 1e-9
RANGE_TOL = 1e-8
MIN_SIGMA_STAR = 0.05


class EnsembleKind(enum.Enum):
    COMMUTING = "commuting"
    GAUSSIAN = "gaussian"


class PhiPsiSource(enum.Enum):
    SVD_OF_TARGET = "svd_of_target"
    RANDOM_ORTHOGONAL = "random_orthogonal"


@dataclasses.dataclass(frozen=True)
class GroundTruth:
    x_star: np.ndarray
    normalization: float
    shift: float = 0.0


@dataclasses.dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    a: np.ndarray  # (m, d1, d2)
    y: np.ndarray
    kind: EnsembleKind
    phi: np.ndarray | None = None
    psi: np.ndarray | None = None
    b: np.ndarray | None = None  # (d1, m); column i holds the singular values of A_i
    sigma_star: np.ndarray | None = None
    target: GroundTruth | None = None
    noise_std: float = 0.0
    metadata: dict = dataclasses.field(default_factory=dict)

    @property
    def m(self):
        return self.a.shape[0]

    @property
    def shape(self):
        return self.a.shape[1:]

    @property
    def c(self):
        return None if self.b is None else self.b @ self.b.T

    @property
    def operator(self):
        """Row i is A_i flattened row-major, so ``operator @ x.ravel()`` gives every <A_i, x>."""
        return self.a.reshape(self.m, -1)

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.shape:
            raise DimensionError(f"expected {self.shape}, got {x.shape}")
        return self.operator @ x.ravel()

    def residuals(self, x):
        return self.y - self.predict(x)

    def adjoint(self, r):
        """``sum_i r_i A_i``."""
        return np.tensordot(r, self.a, axes=(0, 0))

    def sigma_target(self):
        """Spectrum the reduced flow is driven towards.

        Equal to ``sigma_star`` for exact labels; with noisy labels it is the
        least-squares fit of ``y`` by ``B.T @ s``.
        """
        if self.b is None:
            raise ValueError("sigma_target only exists for commuting ensembles")
        if self.noise_std == 0.0 and self.sigma_star is not None:
            return self.sigma_star.copy()
        return np.linalg.solve(self.c, self.b @ self.y)


def gen_ground_truth(d1, d2, inner_dim, seed):
    """Uniform[0,1] factor product ``X~ X~^T`` (or ``X~ Y~^T`` when d1 != d2) scaled to unit nuclear norm."""
    if min(d1, d2, inner_dim) < 1:
        raise DimensionError("dimensions must be positive")
    rng = stream(seed, "truth")
    left = rng.uniform(0.0, 1.0, size=(d1, inner_dim))
    if d1 == d2:
        x = left @ left.T
    else:
        right = rng.uniform(0.0, 1.0, size=(d2, inner_dim))
        x = left @ right.T
    norm = linalg.nuclear_norm(x)
    return GroundTruth(x / norm, norm)


def quasi_commute_check(a_list):
    """Largest deviation from ``A_i A_j^T = A_j A_i^T`` and ``A_i^T A_j = A_j^T A_i`` over all pairs."""
    worst = 0.0
    mats = [np.asarray(a, dtype=np.float64) for a in a_list]
    for ai, aj in itertools.combinations(mats, 2):
        if ai.shape != aj.shape:
            raise DimensionError("all measurement matrices must share a shape")
        worst = max(
            worst,
            float(np.linalg.norm(ai @ aj.T - aj @ ai.T)),
            float(np.linalg.norm(ai.T @ aj - aj.T @ ai)),
        )
    return worst


def ones_range_residual(b):
    """``||B nu - 1||_2`` for the minimum-norm least-squares ``nu``."""
    ones = np.ones(b.shape[0])
    nu = linalg.pinv_apply(b, ones)
    return float(np.linalg.norm(b @ nu - ones))


def _positivity_shift(x_star, phi, psi, threshold):
    """Smallest ``c >= 0`` so that, after adding ``c * phi psi^T`` and rescaling to unit
    nuclear norm, every ``diag(phi^T X psi)`` entry is at least ``threshold``."""
    frame = phi @ psi.T

    def min_sigma(c):
        x = x_star + c * frame
        return float(np.min(linalg.diag_of(phi.T @ x @ psi))) / linalg.nuclear_norm(x)

    if min_sigma(0.0) >= threshold:
        return 0.0
    lo, hi = 0.0, 1.0
    while min_sigma(hi) < threshold:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise InvariantViolation("cannot make sigma* positive by shifting")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if min_sigma(mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return hi


def commuting_from_factors(phi, psi, diagonals, target=None, check=True):
    """Build a commuting ensemble from shared singular vectors and per-matrix diagonals.

    ``diagonals`` is (m, d1); row i becomes the singular values of ``A_i``.
    ``psi`` is d2 x d1 (the compact right factor).
    """
    phi = linalg.as_mat(phi, "phi")
    psi = linalg.as_mat(psi, "psi")
    diagonals = np.atleast_2d(np.asarray(diagonals, dtype=np.float64))
    d1 = phi.shape[0]
    d2 = psi.shape[0]
    if phi.shape != (d1, d1) or psi.shape != (d2, d1) or diagonals.shape[1] != d1:
        raise DimensionError("phi must be d1 x d1, psi d2 x d1 and diagonals m x d1")
    a = np.einsum("ik,mk,jk->mij", phi, diagonals, psi)
    b = diagonals.T.copy()
    sigma_star = None
    y = np.zeros(a.shape[0])
    if target is not None:
        sigma_star = linalg.diag_of(phi.T @ target.x_star @ psi)
        y = a.reshape(a.shape[0], -1) @ target.x_star.ravel()
    ens = MeasurementEnsemble(
        a=a, y=y, kind=EnsembleKind.COMMUTING, phi=phi, psi=psi, b=b, sigma_star=sigma_star, target=target
    )
    if check:
        check_commuting(ens)
    return ens


def check_commuting(ens):
    dev = quasi_commute_check(ens.a)
    if dev > QUASI_COMMUTE_TOL:
        raise InvariantViolation(f"measurements do not quasi-commute (deviation {dev:.3g})")
    if np.any(ens.b < 0):
        raise InvariantViolation("measurement singular values must be non-negative")
    res = ones_range_residual(ens.b)
    if res > RANGE_TOL:
        raise InvariantViolation(f"all-ones vector not in range(B): residual {res:.3g}")
    if ens.sigma_star is not None and np.any(ens.sigma_star <= 0):
        raise InvariantViolation("sigma* must be coordinatewise positive")


def gen_commuting_ensemble(
    d1, d2, m, seed, target, phi_psi_source=PhiPsiSource.SVD_OF_TARGET, min_sigma=MIN_SIGMA_STAR
):
    """Quasi-commuting ensemble: uniform[0,1] diagonals sorted descending, shared singular vectors.

    If some ``sigma*_i`` falls below ``min(min_sigma, 0.5/d1)`` the target is
    shifted along ``phi psi^T`` and rescaled back to unit nuclear norm; the
    shift is kept on the returned ``target`` and in ``metadata``.
    """
    if d1 > d2:
        raise DimensionError("commuting ensembles need d1 <= d2")
    if m < d1:
        raise DimensionError(f"need m >= d1 for the all-ones range condition (m={m}, d1={d1})")
    if target.x_star.shape != (d1, d2):
        raise DimensionError(f"target is {target.x_star.shape}, expected {(d1, d2)}")
    source = PhiPsiSource(phi_psi_source)
    rng = stream(seed, "ensemble")
    if source is PhiPsiSource.SVD_OF_TARGET:
        phi, _, psi = linalg.compact_svd(target.x_star)
    else:
        phi = linalg.haar_orthogonal(rng, d1)
        psi = linalg.haar_orthogonal(rng, d2)[:, :d1]
    diagonals = -np.sort(-rng.uniform(0.0, 1.0, size=(m, d1)), axis=1)

    threshold = min(min_sigma, 0.5 / d1)
    shift = _positivity_shift(target.x_star, phi, psi, threshold)
    if shift > 0:
        shifted = target.x_star + shift * (phi @ psi.T)
        scale = linalg.nuclear_norm(shifted)
        target = GroundTruth(shifted / scale, target.normalization * scale, shift)
    ens = commuting_from_factors(phi, psi, diagonals, target)
    ens.metadata.update(
        phi_psi_source=source.value, shift=shift, sigma_threshold=threshold, seed=int(seed)
    )
    return ens


def gen_gaussian_ensemble(d1, d2, m, seed, target=None):
    """``m`` matrices with iid standard normal entries; labels are noise-free if a target is given."""
    if min(d1, d2, m) < 1:
        raise DimensionError("dimensions must be positive")
    a = stream(seed, "ensemble").standard_normal((m, d1, d2))
    y = np.zeros(m) if target is None else a.reshape(m, -1) @ target.x_star.ravel()
    return MeasurementEnsemble(a=a, y=y, kind=EnsembleKind.GAUSSIAN, target=target, metadata={"seed": int(seed)})


def measure(ens, x_star, noise_std, seed):
    """Return a copy of ``ens`` with labels ``<A_i, x_star> + noise_std * eps_i``."""
    x_star = linalg.as_mat(x_star, "x_star")
    if x_star.shape != ens.shape:
        raise DimensionError(f"x_star is {x_star.shape}, ensemble expects {ens.shape}")
    y = ens.operator @ x_star.ravel()
    if noise_std:
        y = y + noise_std * stream(seed, "noise").standard_normal(ens.m)
    return dataclasses.replace(ens, y=y, noise_std=float(noise_std))
