"""Plain gradient descent for the general sensing problem.

Three models share the squared loss ``0.5 * sum_i (y_i - <A_i, X>)^2``:

* ``SnnParams``: X = sum_k alpha_k Gamma(U_k V_k^T)
* ``LinearModel``: X itself
* ``Depth3Model``: X = W1 W2 W3
"""

import dataclasses
import enum
from typing import NamedTuple

import numpy as np

from . import linalg
from .diagnostics import effective_rank, psnr
from .errors import DimensionError, Divergence
from .model import SnnParams, snn_forward, spectral_activation
from .trajectory import Trajectory, TrajectoryRow, top3

DIVERGENCE_FACTOR = 1e6


class GradientMode(enum.Enum):
    FINITE_DIFFERENCE = "finite_difference"
    ANALYTIC = "analytic"


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    n_steps: int
    record_stride: int = 10
    gradient_mode: GradientMode = GradientMode.FINITE_DIFFERENCE
    fd_step: float = 1e-6
    snapshot_steps: tuple = ()

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.n_steps < 1 or self.record_stride < 1:
            raise ValueError("n_steps and record_stride must be positive")
        object.__setattr__(self, "gradient_mode", GradientMode(self.gradient_mode))


@dataclasses.dataclass(frozen=True, eq=False)
class LinearModel:
    x: np.ndarray

    def matrix(self):
        return self.x


@dataclasses.dataclass(frozen=True, eq=False)
class Depth3Model:
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray

    def __post_init__(self):
        d1 = self.w1.shape[0]
        if self.w1.shape != (d1, d1) or self.w2.shape != (d1, d1) or self.w3.shape[0] != d1:
            raise DimensionError("depth-3 factors must chain as (d1,d1)(d1,d1)(d1,d2)")

    @classmethod
    def scaled_identity(cls, d1, d2, scale=1e-4):
        return cls(scale * np.eye(d1), scale * np.eye(d1), scale * linalg.rect_identity(d1, d2))

    def matrix(self):
        return self.w1 @ self.w2 @ self.w3


def _params(model):
    if isinstance(model, SnnParams):
        return (model.alpha, model.u, model.v)
    if isinstance(model, LinearModel):
        return (model.x,)
    return (model.w1, model.w2, model.w3)


def _finite(model):
    return all(np.all(np.isfinite(a)) for a in _params(model))


def model_matrix(model):
    if isinstance(model, SnnParams):
        return snn_forward(model)
    return model.matrix()


class SnnGradient(NamedTuple):
    alpha: np.ndarray
    u: np.ndarray
    v: np.ndarray
    degenerate: bool = False

    def flat(self):
        return np.concatenate([self.alpha, self.u.ravel(), self.v.ravel()])


def _loss_from_flat(ens, x_flat):
    r = ens.y - ens.operator @ x_flat
    return 0.5 * float(r @ r)


def loss_gradient(x, ens):
    """Gradient of the squared loss w.r.t. X: ``-sum_j r_j A_j``."""
    return -ens.adjoint(ens.residuals(x))


def fd_gradient(fun, theta, h=1e-6):
    """Central-difference gradient of a scalar function of a flat vector.

    Each coordinate uses the step ``h * max(1, |theta_j|)``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    work = theta.copy()
    for j in range(theta.size):
        hj = h * max(1.0, abs(theta[j]))
        work[j] = theta[j] + hj
        fp = fun(work)
        work[j] = theta[j] - hj
        fm = fun(work)
        work[j] = theta[j]
        grad[j] = (fp - fm) / (2.0 * hj)
    return grad


def grad_fd(p, ens, h=1e-6):
    """Central-difference gradient of the loss w.r.t. every scalar of ``p``.

    Perturbing an entry of ``U_k`` or ``V_k`` only changes ``Gamma(U_k V_k^T)``,
    so the other neurons' outputs are reused.
    """
    act = p.activation
    gam = np.array([spectral_activation(p.u[k] @ p.v[k].T, act) for k in range(p.K)])
    base = np.tensordot(p.alpha, gam, axes=1).ravel()
    flat_gam = gam.reshape(p.K, -1)

    def loss_alpha(a):
        return _loss_from_flat(ens, a @ flat_gam)

    g_alpha = fd_gradient(loss_alpha, p.alpha, h)
    g_u = np.empty_like(p.u)
    g_v = np.empty_like(p.v)
    for k in range(p.K):
        rest = base - p.alpha[k] * flat_gam[k]
        uk, vk, ak = p.u[k], p.v[k], p.alpha[k]

        def loss_u(theta, vk=vk, ak=ak, rest=rest):
            return _loss_from_flat(ens, rest + ak * spectral_activation(theta.reshape(uk.shape) @ vk.T, act).ravel())

        def loss_v(theta, uk=uk, ak=ak, rest=rest):
            return _loss_from_flat(ens, rest + ak * spectral_activation(uk @ theta.reshape(vk.shape).T, act).ravel())

        g_u[k] = fd_gradient(loss_u, uk.ravel(), h).reshape(uk.shape)
        g_v[k] = fd_gradient(loss_v, vk.ravel(), h).reshape(vk.shape)
    return SnnGradient(g_alpha, g_u, g_v)


class SpectralJet(NamedTuple):
    """SVD of Z together with gamma and gamma' on its singular values."""

    phi: np.ndarray
    s: np.ndarray
    psi: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    transposed: bool

    @property
    def value(self):
        out = (self.phi * self.f) @ self.psi.T
        return out.T if self.transposed else out


def spectral_jet(z, act):
    z = np.asarray(z, dtype=np.float64)
    transposed = z.shape[0] > z.shape[1]
    phi, s, psi = linalg.compact_svd(z.T if transposed else z)
    return SpectralJet(phi, s, psi, act(s), act.prime(s), transposed)


def spectral_pullback(jet, cotangent, act, gap_tol=1e-8):
    """Gradient of ``Z -> <Gamma(Z), cotangent>`` at the point described by ``jet``.

    Uses first divided differences of gamma across singular-value pairs, with
    the confluent limit gamma' for near-coincident pairs. Returns
    ``(grad, degenerate)``; ``degenerate`` flags gaps below ``gap_tol``. When
    ``gamma(0) != 0`` and a singular value is (near) zero, Gamma is not
    differentiable there and ``grad`` is ``None``.
    """
    cot = cotangent.T if jet.transposed else cotangent
    phi, s, psi, f, fp = jet.phi, jet.s, jet.psi, jet.f, jet.fp
    scale = max(1.0, float(s[0]))
    close_tol = 1e-6 * scale
    diff = s[:, None] - s[None, :]
    summ = s[:, None] + s[None, :]
    mid = 0.5 * summ
    offdiag = ~np.eye(s.size, dtype=bool)
    degenerate = bool(np.any(np.abs(diff[offdiag]) < gap_tol) or np.any(s < gap_tol))
    if float(act(np.zeros(1))[0]) != 0.0 and np.any(s < close_tol):
        return None, True

    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(np.abs(diff) > close_tol, (f[:, None] - f[None, :]) / diff, act.prime(mid))
        ds = np.where(summ > close_tol, (f[:, None] + f[None, :]) / summ, act.prime(mid))
        q = np.where(s > close_tol, f / s, act.prime(0.5 * s))

    m = phi.T @ cot @ psi
    m_perp = phi.T @ cot - m @ psi.T
    core = dd * (0.5 * (m + m.T)) + ds * (0.5 * (m - m.T))
    np.fill_diagonal(core, fp * np.diag(m))
    grad = phi @ core @ psi.T + phi @ (q[:, None] * m_perp)
    return (grad.T if jet.transposed else grad), degenerate


def grad_analytic(p, ens, fd_fallback=False, gap_tol=1e-8):
    """Closed-form gradient of the loss through the spectral activation.

    Falls back to ``grad_fd`` where the spectral map is not differentiable, and
    also on any flagged degeneracy when ``fd_fallback`` is set.
    """
    act = p.activation
    jets = [spectral_jet(z, act) for z in p.products()]
    vals = [j.value for j in jets]
    gx = loss_gradient(np.tensordot(p.alpha, np.array(vals), axes=1), ens)
    g_alpha = np.array([float(np.sum(v * gx)) for v in vals])
    g_u = np.empty_like(p.u)
    g_v = np.empty_like(p.v)
    degenerate = False
    for k, jet in enumerate(jets):
        gz, deg = spectral_pullback(jet, p.alpha[k] * gx, act, gap_tol)
        degenerate |= deg
        if gz is None or (fd_fallback and degenerate):
            g = grad_fd(p, ens)
            return SnnGradient(g.alpha, g.u, g.v, True)
        g_u[k] = gz @ p.v[k]
        g_v[k] = gz.T @ p.u[k]
    return SnnGradient(g_alpha, g_u, g_v, degenerate)


def linear_grad(x, ens):
    return loss_gradient(x, ens)


def depth3_grad(w1, w2, w3, ens):
    """Gradients of the loss at ``X = W1 W2 W3`` w.r.t. each factor."""
    g = loss_gradient(w1 @ w2 @ w3, ens)
    return g @ (w2 @ w3).T, w1.T @ g @ w3.T, (w1 @ w2).T @ g


def _snn_grad(p, ens, cfg):
    if cfg.gradient_mode is GradientMode.ANALYTIC:
        return grad_analytic(p, ens)
    return grad_fd(p, ens, cfg.fd_step)


def _descend(model, ens, cfg):
    lr = cfg.learning_rate
    if isinstance(model, SnnParams):
        g = _snn_grad(model, ens, cfg)
        return model.replace(alpha=model.alpha - lr * g.alpha, u=model.u - lr * g.u, v=model.v - lr * g.v)
    if isinstance(model, LinearModel):
        return LinearModel(model.x - lr * linear_grad(model.x, ens))
    if isinstance(model, Depth3Model):
        g1, g2, g3 = depth3_grad(model.w1, model.w2, model.w3, ens)
        return Depth3Model(model.w1 - lr * g1, model.w2 - lr * g2, model.w3 - lr * g3)
    raise TypeError(f"unsupported model {type(model).__name__}")


def _record(i, lr, x, ens, x_ref):
    r = ens.residuals(x)
    sig = linalg.singular_values(x)
    return TrajectoryRow(
        step=i,
        time=i * lr,
        loss=0.5 * float(r @ r),
        nuclear_norm=float(np.sum(sig)),
        sigma_top3=top3(sig),
        residual_inf=float(np.max(np.abs(r))),
        psnr=None if x_ref is None else psnr(x, x_ref),
        eff_rank=effective_rank(x) if np.any(sig > 0) else None,
    )


def train(model, ens, cfg, x_ref=None):
    """Run ``cfg.n_steps`` of gradient descent; returns ``(final_model, trajectory)``.

    Rows are recorded every ``cfg.record_stride`` steps plus the first and last;
    matrices at ``cfg.snapshot_steps`` are kept in ``trajectory.meta["snapshots"]``.
    """
    traj = Trajectory(meta={"learning_rate": cfg.learning_rate, "model": type(model).__name__})
    snapshots = {}
    x = model_matrix(model)
    first = _record(0, cfg.learning_rate, x, ens, x_ref)
    traj.append(first)
    if 0 in cfg.snapshot_steps:
        snapshots[0] = x.copy()
    cap = DIVERGENCE_FACTOR * max(first.loss, 1e-300)
    for i in range(1, cfg.n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            model = _descend(model, ens, cfg)
        if not _finite(model):
            raise Divergence("non-finite parameters", i)
        if i % cfg.record_stride == 0 or i == cfg.n_steps or i in cfg.snapshot_steps:
            x = model_matrix(model)
            row = _record(i, cfg.learning_rate, x, ens, x_ref)
            if row.loss > cap:
                raise Divergence(f"loss {row.loss:.3g} exceeds {DIVERGENCE_FACTOR:g} x initial", i)
            traj.append(row)
            if i in cfg.snapshot_steps:
                snapshots[i] = x.copy()
    traj.meta["snapshots"] = snapshots
    return model, traj
