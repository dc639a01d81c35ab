"""Fully connected networks: forward, exact reverse-mode gradients, Adam.

Only the fixed topology needed here is supported: dense layers with ReLU
hidden activations, an optional auxiliary input concatenated before one
layer (used to forward encoded view directions to the output layer), and a
per-output choice of identity or sigmoid. Weights are float32 by default;
float64 exists for gradient verification.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingCache, ShapeMismatch


@dataclass(frozen=True)
class MLPConfig:
    in_dim: int
    out_dim: int
    hidden_layers: int
    hidden_width: int
    skip_layer: int | None = None
    skip_dim: int = 0
    output_activation: str | tuple[str, ...] = "none"

    def __post_init__(self):
        if min(self.in_dim, self.out_dim, self.hidden_width) < 1 or self.hidden_layers < 0:
            raise ValueError("network dimensions must be positive")
        if self.skip_layer is not None:
            if not (0 <= self.skip_layer <= self.hidden_layers):
                raise ValueError(f"skip layer {self.skip_layer} outside [0, {self.hidden_layers}]")
            if self.skip_dim < 1:
                raise ValueError("skip_dim must be >= 1 when a skip layer is set")
        acts = self.output_activation
        if isinstance(acts, list):
            acts = tuple(acts)
            object.__setattr__(self, "output_activation", acts)
        if isinstance(acts, tuple) and len(acts) != self.out_dim:
            raise ValueError("per-output activations must have out_dim entries")
        for a in acts if isinstance(acts, tuple) else (acts,):
            if a not in ("none", "sigmoid"):
                raise ValueError(f"unknown output activation {a!r}")

    @property
    def activations(self) -> tuple[str, ...]:
        a = self.output_activation
        return a if isinstance(a, tuple) else (a,) * self.out_dim

    @property
    def n_layers(self) -> int:
        """Number of weight layers, output layer included."""
        return self.hidden_layers + 1

    def fan_in(self, layer: int) -> int:
        base = self.in_dim if layer == 0 else self.hidden_width
        if self.skip_layer is not None and layer == self.skip_layer:
            base += self.skip_dim
        return base

    def fan_out(self, layer: int) -> int:
        return self.out_dim if layer == self.hidden_layers else self.hidden_width

    def to_dict(self) -> dict:
        acts = self.output_activation
        return {
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "skip_layer": self.skip_layer,
            "skip_dim": self.skip_dim,
            "output_activation": list(acts) if isinstance(acts, tuple) else acts,
        }

    @staticmethod
    def from_dict(d: dict) -> "MLPConfig":
        acts = d["output_activation"]
        return MLPConfig(
            in_dim=int(d["in_dim"]),
            out_dim=int(d["out_dim"]),
            hidden_layers=int(d["hidden_layers"]),
            hidden_width=int(d["hidden_width"]),
            skip_layer=None if d["skip_layer"] is None else int(d["skip_layer"]),
            skip_dim=int(d["skip_dim"]),
            output_activation=tuple(acts) if isinstance(acts, list) else str(acts),
        )


@dataclass
class MLPParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def copy(self) -> "MLPParams":
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def astype(self, dtype) -> "MLPParams":
        return MLPParams(
            [w.astype(dtype) for w in self.weights], [b.astype(dtype) for b in self.biases]
        )

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def init_params(cfg: MLPConfig, seed: int, dtype=np.float32) -> MLPParams:
    """Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for layer in range(cfg.n_layers):
        fi, fo = cfg.fan_in(layer), cfg.fan_out(layer)
        bound = np.sqrt(6.0 / (fi + fo))
        weights.append(rng.uniform(-bound, bound, size=(fi, fo)).astype(dtype))
        biases.append(np.zeros(fo, dtype=dtype))
    return MLPParams(weights, biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def forward(
    params: MLPParams,
    cfg: MLPConfig,
    x: np.ndarray,
    skip: np.ndarray | None = None,
    want_cache: bool = True,
):
    """Dense forward pass over a batch.

    x is (B, in_dim); skip, when the config declares a skip layer, is
    (B, skip_dim) and is concatenated to that layer's input. Returns
    (outputs, cache); outputs are (B, out_dim) after the configured output
    activation. The cache feeds backward().
    """
    x = np.asarray(x, dtype=params.dtype)
    if x.ndim != 2 or x.shape[1] != cfg.in_dim:
        raise ShapeMismatch(f"input shape {x.shape} does not match in_dim {cfg.in_dim}")
    if cfg.skip_layer is not None:
        if skip is None:
            raise ShapeMismatch("config declares a skip input but none was given")
        skip = np.asarray(skip, dtype=params.dtype)
        if skip.shape != (x.shape[0], cfg.skip_dim):
            raise ShapeMismatch(f"skip shape {skip.shape} != ({x.shape[0]}, {cfg.skip_dim})")

    h = x
    inputs = []
    for layer in range(cfg.n_layers):
        if cfg.skip_layer is not None and layer == cfg.skip_layer:
            h = np.concatenate([h, skip], axis=1)
        inputs.append(h)
        z = h @ params.weights[layer]
        z += params.biases[layer]
        if layer < cfg.hidden_layers:
            np.maximum(z, 0.0, out=z)
        h = z
    logits = h
    acts = cfg.activations
    if all(a == "sigmoid" for a in acts):
        y = _sigmoid(logits)
    elif all(a == "none" for a in acts):
        y = logits
    else:
        y = logits.copy()
        cols = [i for i, a in enumerate(acts) if a == "sigmoid"]
        y[:, cols] = _sigmoid(logits[:, cols])
    cache = {"inputs": inputs, "y": y} if want_cache else None
    return y, cache


def backward(
    params: MLPParams,
    cfg: MLPConfig,
    cache: dict | None,
    g_out: np.ndarray | None = None,
    g_logits: np.ndarray | None = None,
):
    """Exact gradients for all parameters plus the input and skip input.

    Pass g_out to differentiate w.r.t. the activated outputs, or g_logits to
    start from the pre-activation (used by fused sigmoid + cross-entropy).
    Returns (weight_grads, bias_grads, g_x, g_skip).
    """
    if cache is None:
        raise MissingCache("forward must be called with want_cache=True before backward")
    if (g_out is None) == (g_logits is None):
        raise ValueError("pass exactly one of g_out / g_logits")
    if g_logits is None:
        acts = cfg.activations
        if all(a == "sigmoid" for a in acts):
            y = cache["y"]
            g = (g_out * y * (1.0 - y)).astype(params.dtype, copy=False)
        elif all(a == "none" for a in acts):
            g = np.asarray(g_out, dtype=params.dtype)
        else:
            y = cache["y"]
            g = np.array(g_out, dtype=params.dtype)
            cols = [i for i, a in enumerate(acts) if a == "sigmoid"]
            g[:, cols] *= y[:, cols] * (1.0 - y[:, cols])
    else:
        g = np.asarray(g_logits, dtype=params.dtype)

    w_grads: list[np.ndarray] = [None] * cfg.n_layers  # type: ignore[list-item]
    b_grads: list[np.ndarray] = [None] * cfg.n_layers  # type: ignore[list-item]
    g_skip = None
    for layer in range(cfg.hidden_layers, -1, -1):
        a = cache["inputs"][layer]
        w_grads[layer] = a.T @ g
        b_grads[layer] = g.sum(axis=0)
        g = g @ params.weights[layer].T
        if cfg.skip_layer is not None and layer == cfg.skip_layer:
            g_skip = g[:, -cfg.skip_dim :]
            g = g[:, : -cfg.skip_dim]
        if layer > 0:
            # cached layer input starts with the previous ReLU output, so its
            # positivity is the activation mask (0 pre-activations inactive)
            g *= cache["inputs"][layer][:, : cfg.hidden_width] > 0
    return w_grads, b_grads, g, g_skip


@dataclass
class AdamState:
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def init(params: MLPParams, lr: float = 5e-4) -> "AdamState":
        zeros = lambda arrs: [np.zeros_like(a) for a in arrs]
        return AdamState(
            m_w=zeros(params.weights),
            v_w=zeros(params.weights),
            m_b=zeros(params.biases),
            v_b=zeros(params.biases),
            lr=lr,
        )


def adam_step(
    params: MLPParams, w_grads: list[np.ndarray], b_grads: list[np.ndarray], state: AdamState
) -> None:
    """In-place Adam update with bias correction."""
    if len(w_grads) != len(params.weights):
        raise ShapeMismatch("gradient list length does not match parameters")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    scale = state.lr / corr1
    for p, g, m, v in zip(
        params.weights + params.biases,
        w_grads + b_grads,
        state.m_w + state.m_b,
        state.v_w + state.v_b,
    ):
        if p.shape != g.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        p -= scale * m / (np.sqrt(v / corr2) + state.eps)


def flop_count(cfg: MLPConfig) -> int:
    """FLOPs for one forward evaluation: 2 per multiply-add, all weight
    layers (skip-widened) included, activations not counted."""
    return 2 * sum(cfg.fan_in(layer) * cfg.fan_out(layer) for layer in range(cfg.n_layers))
