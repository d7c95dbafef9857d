import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snn_sense import diagnostics as G
from snn_sense import linalg
from snn_sense import measurements as M
from snn_sense.errors import InsufficientData


def test_fit_recovers_exponential():
    t = np.linspace(0, 5, 200)
    fit = G.fit_exponential(t, 3 * np.exp(-2 * t))
    assert fit.eta_hat == pytest.approx(2, abs=1e-6)
    assert fit.c_hat == pytest.approx(3, rel=1e-6)
    assert fit.r_squared >= 1 - 1e-10
    assert fit.window[1] == 5.0


def test_fit_constant_and_short_input():
    t = np.arange(40.0)
    fit = G.fit_exponential(t, np.full(40, 0.5))
    assert fit.eta_hat == 0 and fit.r_squared == 1
    with pytest.raises(InsufficientData):
        G.fit_exponential(np.arange(9.0), np.ones(9))
    with pytest.raises(InsufficientData):
        G.fit_exponential(t, np.r_[np.ones(5), np.zeros(35)])
    with pytest.raises(ValueError):
        G.fit_exponential(t, np.ones(3))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 10), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_fit_scale_equivariance(eta, c, k):
    t = np.linspace(0, 3, 60)
    r = c * np.exp(-eta * t) * (1 + 0.01 * np.sin(7 * t))
    a = G.fit_exponential(t, r, floor=0)
    b = G.fit_exponential(t, k * r, floor=0)
    assert b.eta_hat == pytest.approx(a.eta_hat, rel=1e-8, abs=1e-10)
    assert b.c_hat == pytest.approx(k * a.c_hat, rel=1e-8)


def test_log_decrease_ratio():
    t = np.linspace(0, 5, 101)
    n = np.exp(-t)
    fit = G.fit_exponential(t, n)
    assert G.max_log_decrease_ratio(t, n, fit) == pytest.approx(1, rel=1e-8)
    n2 = n.copy()
    n2[80:] *= 0.01
    assert G.max_log_decrease_ratio(t, n2, G.fit_exponential(t, n2)) > 3


def commuting(seed=0, d=6, m=15):
    return M.gen_commuting_ensemble(d, d, m, seed, M.gen_ground_truth(d, d, 3, seed))


def test_kkt_at_sigma_star_lift():
    e = commuting()
    x = G.sigma_star_lift(e)
    rep = G.kkt_check(x, e)
    assert rep.feasibility_residual <= 1e-10
    assert rep.dual_residual <= 1e-10
    assert rep.range_residual <= 1e-10
    np.testing.assert_allclose(e.b @ (-rep.nu_hat), np.ones(6), atol=1e-9)
    assert G.nuclear_optimality_crosscheck(x, e) == pytest.approx(0, abs=1e-12)
    assert set(rep.as_dict()) >= {"feasibility_residual", "dual_residual", "nu_hat"}


def test_kkt_zero_and_infeasible():
    e = commuting(1)
    zero = G.kkt_check(np.zeros((6, 6)), e)
    assert zero.feasibility_residual == pytest.approx(np.max(np.abs(e.y)))
    assert zero.rank_deficient
    x = np.random.default_rng(0).standard_normal((6, 6))
    assert G.kkt_check(x, e).feasibility_residual > 1e-3


def test_psnr():
    a = np.random.default_rng(1).random((4, 4))
    assert G.psnr(a, a) == math.inf
    assert G.psnr(np.zeros((2, 2)), np.full((2, 2), 0.1)) == pytest.approx(20)
    with pytest.raises(ValueError):
        G.psnr(np.zeros((2, 2)), np.zeros((2, 3)))


def test_effective_rank():
    assert G.effective_rank(np.outer([1, 2], [3, 4, 5])) == pytest.approx(1)
    assert G.effective_rank(np.eye(5)) == pytest.approx(5)
    with pytest.raises(ValueError):
        G.effective_rank(np.zeros((3, 3)))


def test_subspace_alignment():
    e = commuting(2)
    x = G.sigma_star_lift(e)
    left, right = G.subspace_alignment(x, e.phi, e.psi)
    assert left <= 1e-10 and right <= 1e-10
    # flipping signs of singular vector pairs does not move the subspaces
    signs = np.array([1, -1, 1, -1, -1, 1.0])
    assert max(G.subspace_alignment(x, e.phi * signs, e.psi * signs)) <= 1e-10
    rng = np.random.default_rng(3)
    q = linalg.haar_orthogonal(rng, 6)
    assert max(G.subspace_alignment(x, q, e.psi)) > 1e-3


def test_null_space_perturbations_never_beat_the_lift():
    e = commuting(4)
    x = G.sigma_star_lift(e)
    rng = np.random.default_rng(5)
    base = linalg.nuclear_norm(x)
    for scale in (1e-3, 1e-1, 1.0):
        n = G.null_space_perturbation(e, rng, scale)
        assert np.max(np.abs(e.predict(n))) <= 1e-10
        assert np.linalg.norm(n) == pytest.approx(scale)
        assert linalg.nuclear_norm(x + n) - base >= -1e-5
