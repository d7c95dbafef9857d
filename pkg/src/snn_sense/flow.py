"""Closed-form gradient flow in diagonal coordinates.

Under quasi-commuting measurements and spectral initialisation the flow of the
full parameters reduces to

    d alpha/dt = H^T C (s* - H alpha)
    d ubar_k/dt = lambda_k * vbar_k,    d vbar_k/dt = lambda_k * ubar_k
    lambda_k = alpha_k * gamma'(z_k) * C (s* - H alpha)

with ``z_k = ubar_k * vbar_k`` and ``H[:, k] = gamma(z_k)``. Euler with step
``dt`` is exactly gradient descent with learning rate ``dt``.
"""

import dataclasses
import enum

import numpy as np

from .activations import ActivationFn
from .errors import StepBlowUp
from .linalg import singular_values
from .model import ReducedState, SnnParams, lift_factors
from .model import loss as full_loss
from .trajectory import Trajectory, TrajectoryRow, top3

BLOWUP_CAP = 1e12


class Scheme(enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


@dataclasses.dataclass(frozen=True, eq=False)
class FlowContext:
    c: np.ndarray
    sigma_star: np.ndarray
    act: ActivationFn
    b: np.ndarray | None = None
    y: np.ndarray | None = None

    @classmethod
    def from_ensemble(cls, ens, act):
        return cls(ens.c, ens.sigma_target(), act, ens.b, ens.y)

    def loss(self, state):
        """Training loss of the lifted X, evaluated in spectral coordinates."""
        h_alpha = state.spectrum(self.act)
        if self.b is None:
            r = self.sigma_star - h_alpha
            return 0.5 * float(r @ self.c @ r)
        r = self.y - self.b.T @ h_alpha
        return 0.5 * float(r @ r)


def _drive(s, ctx):
    h = s.h(ctx.act)
    return h, ctx.c @ (ctx.sigma_star - h @ s.alpha)


def compute_lambda(s, ctx):
    """(K, d1) array whose row k is ``alpha_k * gamma'(z_k) * C (s* - H alpha)``."""
    _, drive = _drive(s, ctx)
    return s.alpha[:, None] * ctx.act.prime(s.z) * drive[None, :]


def flow_rhs(s, ctx):
    """Time derivative of the reduced state."""
    h, drive = _drive(s, ctx)
    lam = s.alpha[:, None] * ctx.act.prime(s.z) * drive[None, :]
    return ReducedState(h.T @ drive, lam * s.vbar, lam * s.ubar)


def _check(s, step=None):
    mag = s.max_abs()
    if not np.isfinite(mag) or mag > BLOWUP_CAP:
        raise StepBlowUp(f"state magnitude {mag:.3g} exceeds {BLOWUP_CAP:g}", step)
    return s


def step(s, ctx, dt, scheme=Scheme.EULER):
    if dt <= 0:
        raise ValueError("dt must be positive")
    scheme = Scheme(scheme)
    if scheme is Scheme.EULER:
        return _check(s + dt * flow_rhs(s, ctx))
    k1 = flow_rhs(s, ctx)
    k2 = flow_rhs(s + (0.5 * dt) * k1, ctx)
    k3 = flow_rhs(s + (0.5 * dt) * k2, ctx)
    k4 = flow_rhs(s + dt * k3, ctx)
    return _check(s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def conserved_q(s):
    """``w^2 - z^2`` per neuron and coordinate; constant along the exact flow."""
    return s.w**2 - s.z**2


@dataclasses.dataclass
class FlowRecorder:
    """Records every ``stride`` steps plus the first and last one.

    Loss, nuclear norm and leading singular values are read off the spectrum
    ``H alpha`` (the lifted X is ``phi Diag(H alpha) psi^T``). Pass ``lift_fn``
    to instead compute them from an explicitly lifted matrix.
    """

    stride: int = 10
    lift_fn: object = None
    ensemble: object = None

    def row(self, i, t, s, ctx, q0):
        h_alpha = s.spectrum(ctx.act)
        residual = ctx.sigma_star - h_alpha
        if self.lift_fn is None:
            loss = ctx.loss(s)
            sig = np.abs(h_alpha)
        else:
            x = self.lift_fn(s)
            loss = full_loss(x, self.ensemble) if self.ensemble is not None else ctx.loss(s)
            sig = singular_values(x)
        drift = float(np.max(np.abs(conserved_q(s) - q0)))
        row = TrajectoryRow(i, t, loss, float(np.sum(sig)), top3(sig), float(np.max(np.abs(residual))), drift)
        return row, residual


def integrate(
    s0,
    ctx,
    dt,
    n_steps,
    scheme=Scheme.EULER,
    recorder=None,
    max_halvings=6,
    stop_residual=None,
):
    """Integrate the reduced flow for ``n_steps`` steps of size ``dt``.

    On ``StepBlowUp`` the run restarts from ``s0`` with half the step and twice
    the steps (same horizon), at most ``max_halvings`` times. With
    ``stop_residual`` the run ends early once ``max |s* - H alpha|`` drops
    below it. Returns ``(final_state, trajectory)``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    recorder = recorder or FlowRecorder()
    scheme = Scheme(scheme)
    for attempt in range(max_halvings + 1):
        try:
            return _integrate_once(s0, ctx, dt, n_steps, scheme, recorder, stop_residual)
        except StepBlowUp:
            if attempt == max_halvings:
                raise
            dt, n_steps = dt / 2.0, n_steps * 2


def _integrate_once(s0, ctx, dt, n_steps, scheme, recorder, stop_residual):
    traj = Trajectory(meta={"dt": dt, "scheme": scheme.value, "n_steps": n_steps})
    q0 = conserved_q(s0)
    s = s0
    row, res = recorder.row(0, 0.0, s, ctx, q0)
    traj.append(row, res)
    for i in range(1, n_steps + 1):
        try:
            s = step(s, ctx, dt, scheme)
        except StepBlowUp as exc:
            raise StepBlowUp(str(exc), i) from None
        done = i == n_steps
        if stop_residual is not None and not done:
            if np.max(np.abs(ctx.sigma_star - s.spectrum(ctx.act))) <= stop_residual:
                done = True
        if done or i % recorder.stride == 0:
            row, res = recorder.row(i, i * dt, s, ctx, q0)
            traj.append(row, res)
        if done:
            traj.meta["n_steps"] = i
            break
    return s, traj


def lift(s, phi, psi, g, act):
    """Full parameters and the matrix ``X = phi Diag(H alpha) psi^T`` for a reduced state."""
    u, v = lift_factors(s, phi, psi, g)
    params = SnnParams(s.alpha.copy(), u, v, act)
    x = (phi * s.spectrum(act)) @ psi.T
    return params, x
