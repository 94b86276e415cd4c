"""Minimal dense network engine: ReLU MLPs, exact backprop, Adam.

Everything is float64. Weight matrices are laid out (out, in); hidden
layers are ReLU and the output head is configurable. Gradients returned
by :func:`mlp_backward` are exact partial derivatives of
``sum(grad_out * output)``; loss code is responsible for any 1/batch
scaling (losses in this package are batch means).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ShapeError, ValidationError

HEAD_CODES = {
    "identity": kernels.ACT_IDENTITY,
    "relu": kernels.ACT_RELU,
    "tanh": kernels.ACT_TANH,
    "sigmoid": kernels.ACT_SIGMOID,
}


@dataclass
class MLPParams:
    """Weights/biases of one MLP; ``weights[k]`` has shape (out_k, in_k)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = "identity"

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in checkpoint order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out

    def copy(self) -> "MLPParams":
        return MLPParams([W.copy() for W in self.weights],
                         [b.copy() for b in self.biases], self.head)

    def validate(self) -> None:
        if self.head not in HEAD_CODES:
            raise ValidationError(f"unknown head {self.head!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("weights and biases must pair up, one per layer")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {k}: W {W.shape} does not match b {b.shape}")
            if k > 0 and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeError(
                    f"layer {k} expects {W.shape[1]} inputs, "
                    f"layer {k - 1} emits {self.weights[k - 1].shape[0]}")
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise ValidationError(f"layer {k}: non-finite parameters")


@dataclass
class MLPGrads:
    """Gradient arrays mirroring an MLPParams layout."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out


@dataclass
class ForwardCache:
    """Per-layer pre-activations and activations for one batch."""

    inputs: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]


def mlp_init(dims: list[int], head: str = "identity",
             rng: np.random.Generator | None = None) -> MLPParams:
    """Build an MLP with Uniform(+-sqrt(6/(in+out))) weights and zero biases."""
    if rng is None:
        rng = np.random.default_rng(0)
    if len(dims) < 2:
        raise ShapeError("need at least an input and an output dimension")
    weights, biases = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    params = MLPParams(weights, biases, head)
    params.validate()
    return params


def mlp_zeros_like(params: MLPParams) -> MLPGrads:
    return MLPGrads([np.zeros_like(W) for W in params.weights],
                    [np.zeros_like(b) for b in params.biases])


def _as_batch(x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :]
    if x.ndim != 2:
        raise ShapeError(f"input must be a vector or matrix, got ndim={x.ndim}")
    return x


def mlp_forward(params: MLPParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass; returns (output, cache sufficient for exact backprop)."""
    x = _as_batch(x)
    if x.shape[1] != params.in_dim:
        raise ShapeError(f"input width {x.shape[1]} != expected {params.in_dim}")
    if not np.isfinite(x).all():
        raise ValidationError("non-finite input")
    head_code = HEAD_CODES[params.head]
    pre, post = [], []
    h = x
    last = params.n_layers - 1
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = kernels.affine(h, W, b)
        code = head_code if k == last else kernels.ACT_RELU
        a = kernels.act(z, code)
        pre.append(z)
        post.append(a)
        h = a
    return h, ForwardCache(x, pre, post)


def mlp_backward(params: MLPParams, cache: ForwardCache, grad_out: np.ndarray,
                 need_input_grad: bool = True) -> tuple[MLPGrads, np.ndarray]:
    """Exact gradients of sum(grad_out * output) w.r.t. parameters and input."""
    grad_out = _as_batch(grad_out)
    n_layers = params.n_layers
    if len(cache.pre) != n_layers or grad_out.shape != cache.post[-1].shape:
        raise ShapeError("cache does not match params/grad_out")
    head_code = HEAD_CODES[params.head]
    gws: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gbs: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    g = grad_out
    grad_in = np.empty((0, 0))
    for k in range(n_layers - 1, -1, -1):
        code = head_code if k == n_layers - 1 else kernels.ACT_RELU
        gz = kernels.act_bwd(g, cache.post[k], code)
        layer_in = cache.inputs if k == 0 else cache.post[k - 1]
        need_gx = k > 0 or need_input_grad
        gW, gb, gx = kernels.affine_bwd(gz, layer_in, params.weights[k], need_gx)
        gws[k] = gW
        gbs[k] = gb
        g = gx
        if k == 0:
            grad_in = gx
    return MLPGrads(gws, gbs), grad_in


@dataclass
class AdamState:
    """First/second moments and step counter for a list of parameter arrays."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_arrays(cls, arrays: list[np.ndarray], **kw) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays],
                   [np.zeros_like(a) for a in arrays], **kw)

    @classmethod
    def for_mlp(cls, params: MLPParams, **kw) -> "AdamState":
        return cls.for_arrays(params.arrays(), **kw)


def adam_step_arrays(state: AdamState, params: list[np.ndarray],
                     grads: list[np.ndarray], lr: float) -> None:
    """One Adam step, in place, over parallel lists of arrays."""
    if lr < 0:
        raise ValidationError("lr must be >= 0")
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ShapeError("params/grads do not match optimizer state")
    state.t += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape}")
        kernels.adam_update(p.reshape(-1), np.ascontiguousarray(g).reshape(-1),
                            m.reshape(-1), v.reshape(-1), state.t,
                            lr, state.beta1, state.beta2, state.eps)


def adam_step(state: AdamState, params: MLPParams, grads: MLPGrads, lr: float) -> None:
    """Adam step over a whole MLP (in place on params and state)."""
    adam_step_arrays(state, params.arrays(), grads.arrays(), lr)


@dataclass
class FiniteDiffReport:
    max_rel_err: float
    tol: float
    probes: int
    worst: tuple[int, str, int] = field(default=(0, "W", 0))

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def finite_diff_check(loss_fn, grad_fn, params: MLPParams, probes: int = 10,
                      h: float = 1e-6, tol: float = 1e-5,
                      seed: int = 0) -> FiniteDiffReport:
    """Compare grad_fn(params) against central differences of loss_fn.

    Probes ``probes`` randomly chosen coordinates (deterministic in
    ``seed``). Relative error uses max(|analytic|, |numeric|, 1e-12) as
    the scale.
    """
    if probes < 1:
        raise ValidationError("probes must be >= 1")
    if h <= 0:
        raise ValidationError("h must be positive")
    rng = np.random.default_rng(seed)
    analytic = grad_fn(params)
    max_err = 0.0
    worst = (0, "W", 0)
    for _ in range(probes):
        layer = int(rng.integers(params.n_layers))
        kind = "W" if rng.random() < 0.5 else "b"
        arr = params.weights[layer] if kind == "W" else params.biases[layer]
        flat = arr.reshape(-1)
        idx = int(rng.integers(flat.size))
        orig = flat[idx]
        flat[idx] = orig + h
        up = loss_fn(params)
        flat[idx] = orig - h
        down = loss_fn(params)
        flat[idx] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise ValidationError("loss returned a non-finite value")
        numeric = (up - down) / (2.0 * h)
        garr = analytic.weights[layer] if kind == "W" else analytic.biases[layer]
        ana = garr.reshape(-1)[idx]
        err = abs(ana - numeric) / max(abs(ana), abs(numeric), 1e-12)
        if err > max_err:
            max_err = err
            worst = (layer, kind, idx)
    return FiniteDiffReport(max_err, tol, probes, worst)
