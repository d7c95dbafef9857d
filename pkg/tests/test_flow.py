import numpy as np
import pytest

from snn_sense import flow as F
from snn_sense import measurements as M
from snn_sense.activations import get_activation
from snn_sense.descent import fd_gradient
from snn_sense.errors import StepBlowUp
from snn_sense.model import ReducedState, loss, snn_forward, spectral_init

TANH = get_activation("tanh")


def setup(seed=0, d=6, m=20, act=TANH):
    e = M.gen_commuting_ensemble(d, d, m, seed, M.gen_ground_truth(d, d, 3, seed))
    start = spectral_init(e.phi, e.psi, e.sigma_star, 2, d, seed, act)
    return e, start, F.FlowContext.from_ensemble(e, act)


def test_lambda_vanishes_at_zero_alpha_or_residual():
    e, start, ctx = setup()
    s = start.state
    zero_alpha = ReducedState(np.zeros(2), s.ubar, s.vbar)
    assert not F.compute_lambda(zero_alpha, ctx).any()
    at_target = F.FlowContext(ctx.c, s.spectrum(TANH), TANH)
    assert not F.compute_lambda(s, at_target).any()
    rhs = F.flow_rhs(s, at_target)
    assert not rhs.alpha.any() and not rhs.ubar.any() and not rhs.vbar.any()


def test_rhs_is_minus_gradient_of_reduced_loss():
    e, start, ctx = setup(seed=3)
    s = start.state
    shapes = s.ubar.shape

    def f(theta):
        st = ReducedState(theta[:2], theta[2 : 2 + s.ubar.size].reshape(shapes), theta[2 + s.ubar.size :].reshape(shapes))
        return ctx.loss(st)

    np.testing.assert_allclose(F.flow_rhs(s, ctx).flat(), -fd_gradient(f, s.flat()), rtol=1e-6, atol=1e-9)


def test_rhs_matches_full_loss_through_lift():
    e, start, ctx = setup(seed=4)
    s = start.state
    p = start.params
    theta = p.flat()

    def f(t):
        return loss(snn_forward(p.with_flat(t)), e)

    g = -fd_gradient(f, theta)
    gp = p.with_flat(g)
    rhs = F.flow_rhs(s, ctx)
    np.testing.assert_allclose(gp.alpha, rhs.alpha, rtol=1e-6)
    ubar_dot = np.array([np.diag(e.phi.T @ gp.u[k] @ start.g.T) for k in range(2)])
    np.testing.assert_allclose(ubar_dot, rhs.ubar, rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_initial_sign_structure(seed):
    e, start, ctx = setup(seed)
    s = start.state
    assert np.all(e.sigma_star - s.spectrum(TANH) > 0)
    rhs = F.flow_rhs(s, ctx)
    assert np.all(rhs.alpha > 0)
    assert np.all(F.compute_lambda(s, ctx) >= 0)


def test_euler_is_first_order():
    e, start, ctx = setup(seed=1)
    ref, _ = F.integrate(start.state, ctx, 1e-4, 20000, F.Scheme.RK4, F.FlowRecorder(10**6))
    errs = []
    for dt, n in [(4e-3, 500), (2e-3, 1000), (1e-3, 2000)]:
        s, _ = F.integrate(start.state, ctx, dt, n, recorder=F.FlowRecorder(10**6))
        errs.append(np.max(np.abs((s.flat() - ref.flat()))))
    assert 1.7 < errs[0] / errs[1] < 2.3 and 1.7 < errs[1] / errs[2] < 2.3


def test_rk4_closer_than_euler():
    e, start, ctx = setup(seed=2)
    ref, _ = F.integrate(start.state, ctx, 1e-4, 10000, F.Scheme.RK4, F.FlowRecorder(10**6))
    eu, _ = F.integrate(start.state, ctx, 1e-2, 100, recorder=F.FlowRecorder(10**6))
    rk, _ = F.integrate(start.state, ctx, 1e-2, 100, F.Scheme.RK4, F.FlowRecorder(10**6))
    assert np.max(np.abs(rk.flat() - ref.flat())) < 0.05 * np.max(np.abs(eu.flat() - ref.flat()))


def test_conserved_q_examples():
    s = ReducedState(np.ones(1), np.array([[3.0]]), np.array([[1.0]]))
    # w = 5, z = 3
    assert F.conserved_q(s)[0, 0] == 16.0
    sym = ReducedState(np.ones(1), np.array([[2.0]]), np.array([[2.0]]))
    assert F.conserved_q(sym)[0, 0] == 0.0


def test_rk4_conserves_q():
    e, start, ctx = setup(seed=5)
    s, traj = F.integrate(start.state, ctx, 1e-3, 2000, F.Scheme.RK4, F.FlowRecorder(100))
    assert np.nanmax(traj.column("q_drift")) <= 1e-8


def test_single_step_and_recording():
    e, start, ctx = setup()
    s, traj = F.integrate(start.state, ctx, 1e-2, 1, recorder=F.FlowRecorder(5))
    assert [r.step for r in traj.rows] == [0, 1]
    np.testing.assert_allclose(s.flat(), F.step(start.state, ctx, 1e-2).flat())
    _, traj = F.integrate(start.state, ctx, 1e-2, 23, recorder=F.FlowRecorder(5))
    assert [r.step for r in traj.rows] == [0, 5, 10, 15, 20, 23]
    assert traj.residual_matrix().shape == (6, 6)
    with pytest.raises(ValueError):
        F.integrate(start.state, ctx, 1e-2, 0)
    with pytest.raises(ValueError):
        F.step(start.state, ctx, 0.0)


def test_recorder_lift_agrees_with_spectrum():
    e, start, ctx = setup(seed=6)

    def lift_x(s):
        return F.lift(s, e.phi, e.psi, start.g, TANH)[1]

    _, a = F.integrate(start.state, ctx, 1e-2, 50, recorder=F.FlowRecorder(10))
    _, b = F.integrate(start.state, ctx, 1e-2, 50, recorder=F.FlowRecorder(10, lift_x, e))
    np.testing.assert_allclose(a.column("loss"), b.column("loss"), rtol=1e-8, atol=1e-14)
    np.testing.assert_allclose(a.column("nuclear_norm"), b.column("nuclear_norm"), rtol=1e-10)


def test_lift_matches_forward():
    e, start, ctx = setup(seed=7)
    params, x = F.lift(start.state, e.phi, e.psi, start.g, TANH)
    np.testing.assert_allclose(snn_forward(params), x, atol=1e-12)


def test_blowup_triggers_halving():
    # lambda_max(C) is about 47 here, so Euler with dt 0.1 is unstable and 0.05 is not
    e, start, ctx = setup()
    with pytest.raises(StepBlowUp):
        F.integrate(start.state, ctx, 0.1, 40, max_halvings=0)
    s, traj = F.integrate(start.state, ctx, 0.1, 40, max_halvings=3)
    assert traj.meta["dt"] == 0.05
    assert traj.meta["n_steps"] == 80


def test_stop_residual_ends_early():
    e, start, ctx = setup()
    _, traj = F.integrate(start.state, ctx, 1e-2, 20000, stop_residual=0.2)
    assert traj.meta["n_steps"] < 20000
    assert traj.last.residual_inf <= 0.2
