"""Scalar activations applied to singular values.

The theory wants ``gamma`` bounded in [0, 1], differentiable and
non-decreasing. Raw ``tanh`` is negative on negative inputs; it is kept for
experiment fidelity next to the ``max(tanh, 0)`` variant that respects the
bounds.
"""

import dataclasses
from typing import Callable

import numpy as np


@dataclasses.dataclass(frozen=True)
class ActivationFn:
    name: str
    gamma: Callable[[np.ndarray], np.ndarray]
    gamma_prime: Callable[[np.ndarray], np.ndarray]
    zero_locus: float | None = None  # where gamma vanishes; -inf for asymptotic zeros

    def __call__(self, x):
        return self.gamma(np.asarray(x, dtype=np.float64))

    def prime(self, x):
        return self.gamma_prime(np.asarray(x, dtype=np.float64))


def _tanh_prime(x):
    return 1.0 - np.tanh(x) ** 2


def tanh_act(clamped=False):
    """``tanh``; with ``clamped`` the output is ``max(tanh(x), 0)``."""
    if not clamped:
        return ActivationFn("tanh", np.tanh, _tanh_prime, 0.0)
    return ActivationFn(
        "tanh_pos",
        lambda x: np.maximum(np.tanh(x), 0.0),
        lambda x: np.where(x >= 0, _tanh_prime(x), 0.0),
        0.0,
    )


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid_act():
    return ActivationFn("sigmoid", _sigmoid, lambda x: _sigmoid(x) * (1.0 - _sigmoid(x)), -np.inf)


def smoothed_clipped_relu(width=0.1):
    """Clip to [0, 1] with quadratic rounding of both kinks over ``width``."""
    w = float(width)

    def gamma(x):
        x = np.asarray(x, dtype=np.float64)
        return np.select(
            [x <= 0, x <= w, x <= 1.0, x <= 1.0 + w],
            [0.0, x * x / (2 * w), x - w / 2, 1.0 - (1.0 + w - x) ** 2 / (2 * w)],
            1.0,
        )

    def gamma_prime(x):
        x = np.asarray(x, dtype=np.float64)
        return np.select([x <= 0, x <= w, x <= 1.0, x <= 1.0 + w], [0.0, x / w, 1.0, (1.0 + w - x) / w], 0.0)

    return ActivationFn("smoothed_clipped_relu", gamma, gamma_prime, 0.0)


def clipped_identity():
    """``min(x, 1)``; identity on singular values up to 1."""
    return ActivationFn("clipped_identity", lambda x: np.minimum(x, 1.0), lambda x: np.where(x < 1.0, 1.0, 0.0))


def identity_act():
    return ActivationFn("identity", lambda x: np.array(x, dtype=np.float64), np.ones_like)


CATALOGUE = {
    "tanh": lambda: tanh_act(False),
    "tanh_pos": lambda: tanh_act(True),
    "sigmoid": sigmoid_act,
    "smoothed_clipped_relu": smoothed_clipped_relu,
}


def get_activation(name, clamped=False):
    """Look an activation up by name; ``clamped`` turns plain ``tanh`` into ``tanh_pos``."""
    if name == "tanh" and clamped:
        name = "tanh_pos"
    try:
        return CATALOGUE[name]()
    except KeyError:
        raise KeyError(f"unknown activation {name!r}; choose from {sorted(CATALOGUE)}") from None


def assumption_violations(act, grid=None, fd_step=1e-6, fd_tol=1e-6):
    """List the ways ``act`` breaks boundedness, monotonicity or derivative consistency on ``grid``.

    An empty list means the activation passed. Grid points within ``fd_step``
    of a kink would make the derivative check meaningless, so keep the grid
    away from them.
    """
    if grid is None:
        grid = np.linspace(-4.0, 4.0, 801) + 1e-3
    grid = np.asarray(grid, dtype=np.float64)
    vals = act(grid)
    problems = []
    if np.any(vals < 0) or np.any(vals > 1):
        problems.append(f"range [{vals.min():.4g}, {vals.max():.4g}] leaves [0, 1]")
    if np.any(np.diff(vals) < 0):
        problems.append("not non-decreasing")
    fd = (act(grid + fd_step) - act(grid - fd_step)) / (2 * fd_step)
    err = np.max(np.abs(fd - act.prime(grid)))
    if err > fd_tol:
        problems.append(f"derivative disagrees with central differences by {err:.3g}")
    return problems
