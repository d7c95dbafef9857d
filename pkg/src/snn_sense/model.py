"""Spectral neural network: elemental neuron, block, deep stack, depth-1 factorisation.

An elemental neuron maps ``X = phi Diag(s) psi^T`` to ``phi Diag(gamma(s)) psi^T``.
A block applies K neurons to K inputs and sums them with learned weights.
The depth-1 model used for matrix sensing is

    X = sum_k alpha_k * Gamma(U_k V_k^T)
"""

import dataclasses
import warnings

import numpy as np

from . import linalg
from .activations import ActivationFn
from .errors import DimensionError, InfeasibleInit
from .rng import stream


def spectral_activation(x, act):
    """Apply ``act`` to the singular values of ``x``, keeping its singular vectors."""
    x = linalg.as_mat(x)
    if x.shape[0] > x.shape[1]:
        return spectral_activation(x.T, act).T
    phi, sigma, psi = linalg.compact_svd(x)
    return (phi * act(sigma)) @ psi.T


def snn_block_forward(inputs, alpha, act):
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if len(inputs) != alpha.size:
        raise DimensionError(f"block has {alpha.size} weights but {len(inputs)} inputs")
    shapes = {np.shape(x) for x in inputs}
    if len(shapes) != 1:
        raise DimensionError(f"block inputs must share a shape, got {shapes}")
    return sum(a * spectral_activation(x, act) for a, x in zip(alpha, inputs))


@dataclasses.dataclass(frozen=True, eq=False)
class SnnParams:
    """Trainable triple of the depth-1 model: ``alpha`` (K,), ``u`` (K, d1, d), ``v`` (K, d2, d)."""

    alpha: np.ndarray
    u: np.ndarray
    v: np.ndarray
    activation: ActivationFn

    def __post_init__(self):
        k = self.alpha.shape[0]
        if self.u.ndim != 3 or self.v.ndim != 3 or self.u.shape[0] != k or self.v.shape[0] != k:
            raise DimensionError("u and v must be stacks of K matrices matching alpha")
        if self.u.shape[2] != self.v.shape[2]:
            raise DimensionError("U_k and V_k need the same inner width d")

    @property
    def K(self):
        return self.alpha.shape[0]

    @property
    def shape(self):
        return self.u.shape[1], self.v.shape[1]

    @property
    def width(self):
        return self.u.shape[2]

    @property
    def overparameterized(self):
        d1, d2 = self.shape
        return self.width >= d2 >= d1

    def products(self):
        """Z_k = U_k V_k^T for every k, shape (K, d1, d2)."""
        return np.einsum("kid,kjd->kij", self.u, self.v)

    def flat(self):
        return np.concatenate([self.alpha, self.u.ravel(), self.v.ravel()])

    def with_flat(self, theta):
        k = self.K
        nu = self.u.size
        return SnnParams(
            theta[:k].copy(),
            theta[k : k + nu].reshape(self.u.shape).copy(),
            theta[k + nu :].reshape(self.v.shape).copy(),
            self.activation,
        )

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


def snn_forward(p):
    """``sum_k alpha_k Gamma(U_k V_k^T)`` with the products formed explicitly."""
    z = p.products()
    return snn_block_forward(list(z), p.alpha, p.activation)


@dataclasses.dataclass(frozen=True)
class SnnLayerSpec:
    """Layer widths ``L_0..L_D``; layer i holds ``L_i`` blocks each reading ``L_{i-1}`` matrices."""

    layer_sizes: tuple
    activations: tuple

    def __post_init__(self):
        if len(self.layer_sizes) < 2 or any(int(n) < 1 for n in self.layer_sizes):
            raise DimensionError("need at least an input and one block layer, all sizes positive")
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise DimensionError("one activation per block layer")

    @classmethod
    def uniform(cls, layer_sizes, act):
        return cls(tuple(layer_sizes), (act,) * (len(layer_sizes) - 1))

    @property
    def depth(self):
        return len(self.layer_sizes) - 1


def deep_snn_forward(spec, weights, inputs):
    """Run a stack of SNN blocks.

    ``weights[i]`` has shape ``(L_{i+1}, L_i)``: row j is the alpha vector of
    block j in layer i+1. Returns the list of ``L_D`` output matrices.
    """
    if len(inputs) != spec.layer_sizes[0]:
        raise DimensionError(f"expected {spec.layer_sizes[0]} input matrices, got {len(inputs)}")
    if len(weights) != spec.depth:
        raise DimensionError(f"expected weights for {spec.depth} layers, got {len(weights)}")
    current = list(inputs)
    for i, (w, act) in enumerate(zip(weights, spec.activations)):
        w = np.atleast_2d(np.asarray(w, dtype=np.float64))
        want = (spec.layer_sizes[i + 1], spec.layer_sizes[i])
        if w.shape != want:
            raise DimensionError(f"layer {i + 1} weights have shape {w.shape}, expected {want}")
        activated = [spectral_activation(x, act) for x in current]
        current = [sum(a * g for a, g in zip(row, activated)) for row in w]
    return current


@dataclasses.dataclass(frozen=True, eq=False)
class ReducedState:
    """Diagonal coordinates of a spectrally initialised SNN.

    ``ubar[k]`` and ``vbar[k]`` hold the diagonals of the rectangular diagonal
    factors of ``U_k`` and ``V_k`` in the measurement singular basis.
    """

    alpha: np.ndarray  # (K,)
    ubar: np.ndarray  # (K, d1)
    vbar: np.ndarray  # (K, d1)

    @property
    def z(self):
        return self.ubar * self.vbar

    @property
    def w(self):
        return 0.5 * (self.ubar**2 + self.vbar**2)

    def h(self, act):
        """d1 x K matrix whose column k is gamma(z^(k))."""
        return act(self.z).T

    def spectrum(self, act):
        """H alpha: the singular values of the lifted X (when non-negative)."""
        return self.h(act) @ self.alpha

    def flat(self):
        return np.concatenate([self.alpha, self.ubar.ravel(), self.vbar.ravel()])

    def __add__(self, other):
        return ReducedState(self.alpha + other.alpha, self.ubar + other.ubar, self.vbar + other.vbar)

    def __mul__(self, scalar):
        return ReducedState(scalar * self.alpha, scalar * self.ubar, scalar * self.vbar)

    __rmul__ = __mul__

    def max_abs(self):
        return max(np.max(np.abs(self.alpha)), np.max(np.abs(self.ubar)), np.max(np.abs(self.vbar)))


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralStart:
    params: SnnParams
    state: ReducedState
    g: np.ndarray


def lift_factors(state, phi, psi, g):
    """Full factors ``U_k = phi Ubar_k G`` and ``V_k = psi Vbar_k G`` for a reduced state."""
    d1 = phi.shape[0]
    d = g.shape[0]
    ubar = np.zeros((state.alpha.size, d1, d))
    vbar = np.zeros_like(ubar)
    idx = np.arange(d1)
    ubar[:, idx, idx] = state.ubar
    vbar[:, idx, idx] = state.vbar
    return phi @ ubar @ g, psi @ vbar @ g


def spectral_init(phi, psi, sigma_star, K, d, seed, act, margin=0.9):
    """Initialisation aligned with the shared singular vectors of a commuting ensemble.

    Diagonals are uniform[0,1] sorted descending, ``G`` is a seeded Haar
    orthogonal matrix, and alpha is uniform[0,1] rescaled by the largest
    ``s <= 1`` keeping ``s * H alpha <= sigma*`` coordinatewise, times ``margin``.
    """
    phi = linalg.as_mat(phi, "phi")
    psi = linalg.as_mat(psi, "psi")
    sigma_star = np.asarray(sigma_star, dtype=np.float64)
    d1, d2 = phi.shape[0], psi.shape[0]
    if not d >= d2 >= d1:
        raise DimensionError(f"spectral init needs d >= d2 >= d1, got d={d}, d1={d1}, d2={d2}")
    if np.any(sigma_star <= 0):
        raise InfeasibleInit("sigma* must be coordinatewise positive")
    rng = stream(seed, "init")
    g = linalg.haar_orthogonal(rng, d)
    ubar = -np.sort(-rng.uniform(0.0, 1.0, size=(K, d1)), axis=1)
    vbar = -np.sort(-rng.uniform(0.0, 1.0, size=(K, d1)), axis=1)
    alpha = rng.uniform(0.0, 1.0, size=K)
    h_alpha = ReducedState(alpha, ubar, vbar).spectrum(act)
    pos = h_alpha > 0
    scale = min(1.0, float(np.min(sigma_star[pos] / h_alpha[pos]))) if np.any(pos) else 1.0
    state = ReducedState(alpha * scale * margin, ubar, vbar)
    if np.any(state.spectrum(act) > sigma_star):
        raise InfeasibleInit("could not bound the initial spectrum by sigma*")
    u, v = lift_factors(state, phi, psi, g)
    return SpectralStart(SnnParams(state.alpha.copy(), u, v, act), state, g)


def near_zero_init(d1, d2, d, K, scale, jitter, seed, act):
    """Rectangular diagonal factors with entries ``scale + jitter * eps``; alpha uniform[0,1]."""
    rng = stream(seed, "init")
    idx_u = np.arange(min(d1, d))
    idx_v = np.arange(min(d2, d))
    u = np.zeros((K, d1, d))
    v = np.zeros((K, d2, d))
    u[:, idx_u, idx_u] = scale + jitter * rng.standard_normal((K, idx_u.size))
    v[:, idx_v, idx_v] = scale + jitter * rng.standard_normal((K, idx_v.size))
    alpha = rng.uniform(0.0, 1.0, size=K)
    p = SnnParams(alpha, u, v, act)
    if not p.overparameterized:
        warnings.warn(f"width d={d} is below the over-parameterised regime d >= d2 >= d1", stacklevel=2)
    return p


def loss(x, ens):
    """Half the squared label residual."""
    r = ens.residuals(x)
    return 0.5 * float(r @ r)
