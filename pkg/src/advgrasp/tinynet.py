"""Small convolutional network with hand-written forward/backward passes.

Layers: Conv (valid padding), ReLU, MaxPool, Flatten, Dense, and a final
Sigmoid head. Training is per-example: binary cross entropy on a single
selected output bin, updated with RMSProp. Everything is float64 numpy so
analytic gradients check against central finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ParseError, ShapeMismatchError

PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class NetSpec:
    """Layer chain; validated so shapes compose and the head is Sigmoid."""

    input_shape: tuple = (1, 32, 32)
    layers: tuple = (
        ("conv", 8, 5, 1),
        ("relu",),
        ("maxpool", 2, 2),
        ("conv", 16, 3, 1),
        ("relu",),
        ("maxpool", 2, 2),
        ("flatten",),
        ("dense", 64),
        ("relu",),
        ("dense", 18),
        ("sigmoid",),
    )

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(l) for l in self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        self._chain_shapes()
        if self.layers[-1][0] != "sigmoid":
            raise ShapeMismatchError("final layer must be sigmoid")

    def _chain_shapes(self) -> list:
        """Shape after every layer; raises ShapeMismatchError on a bad chain."""
        shape = self.input_shape
        shapes = [shape]
        for layer in self.layers:
            kind = layer[0]
            if kind == "conv":
                _, out_c, k, s = layer
                if len(shape) != 3:
                    raise ShapeMismatchError("conv needs a (C, H, W) input")
                c, h, w = shape
                oh, ow = (h - k) // s + 1, (w - k) // s + 1
                if h < k or w < k or oh < 1 or ow < 1:
                    raise ShapeMismatchError(f"conv kernel {k} too large for {shape}")
                shape = (out_c, oh, ow)
            elif kind == "maxpool":
                _, k, s = layer
                if len(shape) != 3:
                    raise ShapeMismatchError("maxpool needs a (C, H, W) input")
                c, h, w = shape
                oh, ow = (h - k) // s + 1, (w - k) // s + 1
                if oh < 1 or ow < 1:
                    raise ShapeMismatchError(f"pool window {k} too large for {shape}")
                shape = (c, oh, ow)
            elif kind == "relu" or kind == "sigmoid":
                pass
            elif kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif kind == "dense":
                if len(shape) != 1:
                    raise ShapeMismatchError("dense needs a flat input")
                shape = (layer[1],)
            else:
                raise ShapeMismatchError(f"unknown layer kind {kind!r}")
            shapes.append(shape)
        if len(shapes[-1]) != 1:
            raise ShapeMismatchError("network output must be a vector")
        return shapes

    @property
    def out_dim(self) -> int:
        return self._chain_shapes()[-1][0]

    def to_dict(self) -> dict:
        return {"input_shape": list(self.input_shape),
                "layers": [list(l) for l in self.layers]}

    @staticmethod
    def from_dict(d: dict) -> "NetSpec":
        return NetSpec(input_shape=tuple(d["input_shape"]),
                       layers=tuple(tuple(l) for l in d["layers"]))


def default_net_spec(out_dim: int = 18) -> NetSpec:
    """Desk-scale grasp net; out_dim is the number of output bins."""
    return NetSpec(layers=(
        ("conv", 8, 5, 1), ("relu",), ("maxpool", 2, 2),
        ("conv", 16, 3, 1), ("relu",), ("maxpool", 2, 2),
        ("flatten",), ("dense", 64), ("relu",),
        ("dense", out_dim), ("sigmoid",),
    ))


@dataclass
class NetParams:
    """Weight/bias tensors for each parameterized layer, in spec order."""

    spec: NetSpec
    layers: list  # [{"w": ndarray, "b": ndarray}, ...] for conv/dense layers

    def copy(self) -> "NetParams":
        return NetParams(self.spec, [{"w": l["w"].copy(), "b": l["b"].copy()}
                                     for l in self.layers])

    def num_params(self) -> int:
        return sum(l["w"].size + l["b"].size for l in self.layers)


@dataclass
class OptState:
    """RMSProp running mean-square accumulators plus hyperparameters."""

    acc: list
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8


def init_params(spec: NetSpec, rng_seed: int) -> NetParams:
    """Fan-in-scaled uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(rng_seed)
    shape = spec.input_shape
    layers = []
    for layer in spec.layers:
        kind = layer[0]
        if kind == "conv":
            _, out_c, k, s = layer
            c = shape[0]
            fan_in = c * k * k
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(out_c, c * k * k))
            layers.append({"w": w, "b": np.zeros(out_c)})
            shape = (out_c, (shape[1] - k) // s + 1, (shape[2] - k) // s + 1)
        elif kind == "maxpool":
            _, k, s = layer
            shape = (shape[0], (shape[1] - k) // s + 1, (shape[2] - k) // s + 1)
        elif kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif kind == "dense":
            out_d = layer[1]
            fan_in = shape[0]
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(out_d, fan_in))
            layers.append({"w": w, "b": np.zeros(out_d)})
            shape = (out_d,)
    return NetParams(spec, layers)


def init_opt_state(params: NetParams, lr: float = 1e-3, rho: float = 0.9,
                   eps: float = 1e-8) -> OptState:
    return OptState([{"w": np.zeros_like(l["w"]), "b": np.zeros_like(l["b"])}
                     for l in params.layers], lr=lr, rho=rho, eps=eps)


def _as_input(spec: NetSpec, patch) -> np.ndarray:
    x = np.asarray(getattr(patch, "pixels", patch), dtype=float)
    if x.ndim == 2:
        x = x[None, :, :]
    if x.shape != spec.input_shape:
        raise ShapeMismatchError(f"input {x.shape} != expected {spec.input_shape}")
    return x


def _im2col(x: np.ndarray, k: int, s: int) -> Tuple[np.ndarray, tuple]:
    view = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
    c, oh, ow = view.shape[0], view.shape[1], view.shape[2]
    return view.transpose(0, 3, 4, 1, 2).reshape(c * k * k, oh * ow), (oh, ow)


def _forward_cached(params: NetParams, patch) -> Tuple[np.ndarray, list]:
    x = _as_input(params.spec, patch)
    caches = []
    w_idx = 0
    for layer in params.spec.layers:
        kind = layer[0]
        if kind == "conv":
            _, out_c, k, s = layer
            cols, (oh, ow) = _im2col(x, k, s)
            lw = params.layers[w_idx]
            out = lw["w"] @ cols + lw["b"][:, None]
            caches.append(("conv", x.shape, cols, k, s, (oh, ow)))
            x = out.reshape(out_c, oh, ow)
            w_idx += 1
        elif kind == "relu":
            caches.append(("relu", x > 0.0))
            x = np.maximum(x, 0.0)
        elif kind == "maxpool":
            _, k, s = layer
            view = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
            c, oh, ow = view.shape[0], view.shape[1], view.shape[2]
            flat = view.reshape(c, oh, ow, k * k)
            idx = np.argmax(flat, axis=-1)
            caches.append(("maxpool", x.shape, idx, k, s))
            x = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        elif kind == "flatten":
            caches.append(("flatten", x.shape))
            x = x.reshape(-1)
        elif kind == "dense":
            lw = params.layers[w_idx]
            caches.append(("dense", x))
            x = lw["w"] @ x + lw["b"]
            w_idx += 1
        elif kind == "sigmoid":
            z = x
            p = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                         np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
            caches.append(("sigmoid", p))
            x = p
    return x, caches


def forward(params: NetParams, patch) -> np.ndarray:
    """Output probabilities, one per bin; all strictly inside (0, 1)."""
    out, _ = _forward_cached(params, patch)
    return out


def bce_loss(p: float, target: float) -> float:
    """Binary cross entropy; p clamped away from {0, 1}, target may be fractional."""
    p = min(max(float(p), PROB_CLAMP), 1.0 - PROB_CLAMP)
    return -target * math.log(p) - (1.0 - target) * math.log(1.0 - p)


def backward(params: NetParams, patch, angle_idx: int, target: float) -> list:
    """Gradients of bce_loss on output[angle_idx]; other bins get no gradient."""
    out_dim = params.spec.out_dim
    if not (0 <= angle_idx < out_dim):
        raise ShapeMismatchError(f"angle_idx {angle_idx} outside [0, {out_dim})")
    out, caches = _forward_cached(params, patch)

    grads = [{"w": np.zeros_like(l["w"]), "b": np.zeros_like(l["b"])}
             for l in params.layers]
    # sigmoid + BCE on the selected bin collapses to dL/dz_k = p_k - target
    dz = np.zeros(out_dim)
    dz[angle_idx] = out[angle_idx] - target

    d = dz
    w_idx = len(params.layers)
    for layer, cache in zip(reversed(params.spec.layers), reversed(caches)):
        kind = layer[0]
        if kind == "sigmoid":
            continue  # absorbed into dz above
        if kind == "dense":
            w_idx -= 1
            x = cache[1]
            grads[w_idx]["w"] += np.outer(d, x)
            grads[w_idx]["b"] += d
            d = params.layers[w_idx]["w"].T @ d
        elif kind == "relu":
            d = d * cache[1]
        elif kind == "flatten":
            d = d.reshape(cache[1])
        elif kind == "maxpool":
            _, in_shape, idx, k, s = cache
            c, oh, ow = idx.shape
            dx = np.zeros(in_shape)
            ci, oi, oj = np.indices(idx.shape)
            r = oi * s + idx // k
            cc = oj * s + idx % k
            np.add.at(dx, (ci, r, cc), d)
            d = dx
        elif kind == "conv":
            w_idx -= 1
            _, in_shape, cols, k, s, (oh, ow) = cache
            out_c = layer[1]
            dmat = d.reshape(out_c, oh * ow)
            grads[w_idx]["w"] += dmat @ cols.T
            grads[w_idx]["b"] += dmat.sum(axis=1)
            dcols = (params.layers[w_idx]["w"].T @ dmat).reshape(
                in_shape[0], k, k, oh, ow)
            dx = np.zeros(in_shape)
            for ki in range(k):
                for kj in range(k):
                    dx[:, ki:ki + s * oh:s, kj:kj + s * ow:s] += dcols[:, ki, kj]
            d = dx
    return grads


def rmsprop_step(params: NetParams, grads: list, opt: OptState) -> Tuple[NetParams, OptState]:
    """acc <- rho*acc + (1-rho)*g^2; w <- w - lr*g/sqrt(acc+eps), elementwise."""
    if len(grads) != len(params.layers):
        raise ShapeMismatchError("gradient list does not match parameter layers")
    new_layers = []
    new_acc = []
    for lw, g, a in zip(params.layers, grads, opt.acc):
        if g["w"].shape != lw["w"].shape or g["b"].shape != lw["b"].shape:
            raise ShapeMismatchError("gradient shape does not match parameters")
        entry_p, entry_a = {}, {}
        for key in ("w", "b"):
            acc = opt.rho * a[key] + (1.0 - opt.rho) * g[key] ** 2
            entry_a[key] = acc
            entry_p[key] = lw[key] - opt.lr * g[key] / np.sqrt(acc + opt.eps)
        new_layers.append(entry_p)
        new_acc.append(entry_a)
    return (NetParams(params.spec, new_layers),
            OptState(new_acc, lr=opt.lr, rho=opt.rho, eps=opt.eps))


def save(params: NetParams, path: str) -> None:
    doc = {"spec": params.spec.to_dict(),
           "layers": [{"w": l["w"].tolist(), "b": l["b"].tolist()}
                      for l in params.layers]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load(path: str, expected_spec: Optional[NetSpec] = None) -> NetParams:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"{path}: {e}") from e
    try:
        spec = NetSpec.from_dict(doc["spec"])
        raw_layers = doc["layers"]
    except (KeyError, TypeError) as e:
        raise ParseError(f"{path}: missing checkpoint fields ({e})") from e
    if expected_spec is not None and spec != expected_spec:
        raise ShapeMismatchError(f"{path}: checkpoint spec differs from expected spec")
    reference = init_params(spec, rng_seed=0)
    if len(raw_layers) != len(reference.layers):
        raise ShapeMismatchError(f"{path}: wrong number of parameter layers")
    layers = []
    for raw, ref in zip(raw_layers, reference.layers):
        w = np.asarray(raw["w"], dtype=float)
        b = np.asarray(raw["b"], dtype=float)
        if w.shape != ref["w"].shape or b.shape != ref["b"].shape:
            raise ShapeMismatchError(f"{path}: tensor shapes do not match the layer chain")
        layers.append({"w": w, "b": b})
    return NetParams(spec, layers)
