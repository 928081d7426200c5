"""Small fully connected ReLU network for the nonparametric risk term.

The network maps the z covariates to a scalar log-hazard contribution.
Hidden layers use ReLU with inverted dropout (survivors scaled at train
time, so evaluation is a plain forward pass); the output layer is linear
because the risk term must take both signs.  Training runs a short Adam
loop on the partial-likelihood loss with the linear coefficients held
fixed, and the fitted network is recentered so its average over the
training z is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericalDivergence
from .survival import (Predictor, RiskIndex, SurvivalDataset, grad_eta,
                       neg_log_partial_likelihood)


@dataclass(frozen=True)
class NetworkArch:
    """Layer plan: input width, hidden widths, scalar output, dropout rate."""

    input_dim: int
    hidden_widths: tuple = (4, 4)
    dropout_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def layer_dims(self) -> tuple:
        return (self.input_dim,) + self.hidden_widths + (1,)


@dataclass
class Network:
    """Weights, biases, and the centering offset subtracted at evaluation."""

    arch: NetworkArch
    weights: list
    biases: list
    center_offset: float = 0.0

    def copy(self) -> "Network":
        return Network(arch=self.arch,
                       weights=[w.copy() for w in self.weights],
                       biases=[b.copy() for b in self.biases],
                       center_offset=self.center_offset)


@dataclass
class AdamState:
    """Adam hyperparameters plus its moment accumulators.

    Used both as a configuration record (accumulators empty) and as the
    live state inside adam_fit, which always starts from zero moments.
    """

    r1: float = 0.9
    r2: float = 0.999
    gamma: float = 0.01
    eps0: float = 1e-8
    t: int = 0
    m: Optional[list] = None
    v: Optional[list] = None

    def __post_init__(self):
        if not (0.0 < self.r1 < 1.0 and 0.0 < self.r2 < 1.0):
            raise ValueError("decay rates must be in (0, 1)")
        if self.gamma <= 0.0 or self.eps0 <= 0.0:
            raise ValueError("gamma and eps0 must be > 0")
        if self.t < 0:
            raise ValueError("t must be >= 0")


def init_network(arch: NetworkArch, seed) -> Network:
    """Xavier-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    dims = arch.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(arch=arch, weights=weights, biases=biases, center_offset=0.0)


def zero_network(input_dim: int) -> Network:
    """Single linear layer with all-zero parameters: g identically zero.

    Used as the disabled nonparametric term when fitting the plain
    penalized Cox baseline.
    """
    arch = NetworkArch(input_dim=input_dim, hidden_widths=(), dropout_rate=0.0)
    return Network(arch=arch, weights=[np.zeros((1, input_dim))],
                   biases=[np.zeros(1)], center_offset=0.0)


def _forward_cached(net: Network, z: np.ndarray, train: bool, rng):
    """Forward pass returning raw outputs and the per-layer caches.

    In train mode one dropout mask per hidden layer is sampled from rng and
    kept in the cache so the backward pass reuses it.
    """
    a = z
    caches = []
    n_layers = len(net.weights)
    rate = net.arch.dropout_rate
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        pre = a @ w.T + b
        if l < n_layers - 1:
            act = np.maximum(pre, 0.0)
            if train and rate > 0.0:
                mask = (rng.random(act.shape) >= rate) / (1.0 - rate)
                out = act * mask
            else:
                mask = None
                out = act
            caches.append((a, pre, mask))
            a = out
        else:
            caches.append((a, pre, None))
            a = pre
    return a[:, 0], caches


def forward(net: Network, z_batch, mode: str = "eval", rng=None) -> np.ndarray:
    """Network outputs for a batch of z rows.

    mode "train" applies inverted dropout (needs rng when the rate is
    positive) and returns raw outputs; mode "eval" is deterministic and
    subtracts the centering offset.
    """
    z = np.atleast_2d(np.asarray(z_batch, dtype=float))
    if z.shape[1] != net.arch.input_dim:
        raise ValueError("z has %d columns, network expects %d"
                         % (z.shape[1], net.arch.input_dim))
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    train = mode == "train"
    if train and net.arch.dropout_rate > 0.0 and rng is None:
        raise ValueError("train mode with dropout needs an rng")
    out, _ = _forward_cached(net, z, train, rng)
    if not train:
        out = out - net.center_offset
    return out


def loss_and_grads(net: Network, dataset: SurvivalDataset, index: RiskIndex,
                   beta_fixed, rng=None):
    """Partial-likelihood loss and its gradients for every weight and bias.

    The penalty does not involve the network, so this is the full loss
    gradient.  One dropout mask per hidden layer is sampled here and shared
    between the forward and backward passes.
    """
    beta_fixed = np.asarray(beta_fixed, dtype=float)
    train = net.arch.dropout_rate > 0.0
    if train and rng is None:
        raise ValueError("dropout needs an rng")
    g_raw, caches = _forward_cached(net, dataset.z, train, rng)
    xi = dataset.x @ beta_fixed
    pred = Predictor.from_parts(xi, g_raw)
    loss = neg_log_partial_likelihood(pred, dataset, index)
    dq_dg = grad_eta(pred, dataset, index)

    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    delta = dq_dg[:, None]
    for l in range(len(net.weights) - 1, -1, -1):
        inputs, pre, mask = caches[l]
        grads_w[l] = delta.T @ inputs
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ net.weights[l]
            _, pre_prev, mask_prev = caches[l - 1]
            if mask_prev is not None:
                delta = delta * mask_prev
            delta = delta * (pre_prev > 0.0)
    return loss, list(zip(grads_w, grads_b))


def grad_params(net: Network, dataset: SurvivalDataset, index: RiskIndex,
                beta_fixed, rng=None):
    """Gradients of the loss with respect to all network parameters."""
    _, grads = loss_and_grads(net, dataset, index, beta_fixed, rng)
    return grads


def adam_fit(net: Network, dataset: SurvivalDataset, index: RiskIndex,
             beta_fixed, adam_cfg: AdamState, inner_steps: int = 20,
             tol: float = 1e-7, rng=None) -> Network:
    """Run up to inner_steps Adam updates on the network, beta held fixed.

    Moments restart at zero on every call; a long run is unnecessary
    because the surrounding alternation revisits the network, and early
    stopping keeps it from overfitting.  Stops once the parameter step has
    L2 norm <= tol.  The returned network is recentered on the training z.
    """
    if inner_steps < 1:
        raise ValueError("inner_steps must be >= 1")
    if net.arch.dropout_rate > 0.0 and rng is None:
        raise ValueError("dropout needs an rng")
    state = AdamState(r1=adam_cfg.r1, r2=adam_cfg.r2, gamma=adam_cfg.gamma,
                      eps0=adam_cfg.eps0)
    state.m = [(np.zeros_like(w), np.zeros_like(b))
               for w, b in zip(net.weights, net.biases)]
    state.v = [(np.zeros_like(w), np.zeros_like(b))
               for w, b in zip(net.weights, net.biases)]

    for _ in range(inner_steps):
        loss, grads = loss_and_grads(net, dataset, index, beta_fixed, rng)
        if not np.isfinite(loss):
            raise NumericalDivergence("training diverged")
        state.t += 1
        bc1 = 1.0 - state.r1 ** state.t
        bc2 = 1.0 - state.r2 ** state.t
        step_sq = 0.0
        for l, (gw, gb) in enumerate(grads):
            mw, mb = state.m[l]
            vw, vb = state.v[l]
            mw = state.r1 * mw + (1.0 - state.r1) * gw
            mb = state.r1 * mb + (1.0 - state.r1) * gb
            vw = state.r2 * vw + (1.0 - state.r2) * gw ** 2
            vb = state.r2 * vb + (1.0 - state.r2) * gb ** 2
            state.m[l] = (mw, mb)
            state.v[l] = (vw, vb)
            step_w = state.gamma * (mw / bc1) / (np.sqrt(vw / bc2) + state.eps0)
            step_b = state.gamma * (mb / bc1) / (np.sqrt(vb / bc2) + state.eps0)
            net.weights[l] -= step_w
            net.biases[l] -= step_b
            step_sq += float((step_w ** 2).sum() + (step_b ** 2).sum())
        if not np.isfinite(step_sq):
            raise NumericalDivergence("training diverged")
        if np.sqrt(step_sq) <= tol:
            break
    return center(net, dataset.z)


def center(net: Network, z_train) -> Network:
    """Set the offset so evaluation outputs average to zero on z_train."""
    z = np.atleast_2d(np.asarray(z_train, dtype=float))
    raw, _ = _forward_cached(net, z, train=False, rng=None)
    net.center_offset = float(raw.mean())
    return net


NETWORK_FORMAT = "dplc-network"
NETWORK_VERSION = 1


def network_to_dict(net: Network) -> dict:
    """JSON-ready description: architecture, row-major weights, offset."""
    return {
        "format": NETWORK_FORMAT,
        "version": NETWORK_VERSION,
        "input_dim": net.arch.input_dim,
        "hidden_widths": list(net.arch.hidden_widths),
        "dropout_rate": net.arch.dropout_rate,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "center_offset": net.center_offset,
    }


def network_from_dict(data: dict) -> Network:
    if data.get("format") != NETWORK_FORMAT:
        raise ValueError("not a network record")
    if data.get("version") != NETWORK_VERSION:
        raise ValueError("unsupported network version: %r" % (data.get("version"),))
    arch = NetworkArch(input_dim=int(data["input_dim"]),
                       hidden_widths=tuple(data["hidden_widths"]),
                       dropout_rate=float(data["dropout_rate"]))
    weights = [np.asarray(w, dtype=float) for w in data["weights"]]
    biases = [np.asarray(b, dtype=float) for b in data["biases"]]
    dims = arch.layer_dims
    if len(weights) != len(dims) - 1 or len(biases) != len(weights):
        raise ValueError("layer count does not match architecture")
    for l, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (dims[l + 1], dims[l]) or b.shape != (dims[l + 1],):
            raise ValueError("layer %d has wrong shape" % l)
    return Network(arch=arch, weights=weights, biases=biases,
                   center_offset=float(data["center_offset"]))
