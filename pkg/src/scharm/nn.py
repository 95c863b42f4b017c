"""Layers built on the autodiff engine: dense, normalization, ChebConv, AdaIN."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, adain, chebconv
from .errors import ShapeMismatch


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


class Module:
    def parameters(self) -> list[Tensor]:
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        raise NotImplementedError


class Dense(Module):
    """Affine map on the last axis, optional normalization then activation."""

    def __init__(self, rng, in_features: int, out_features: int, norm: str = "none", act: str = "none"):
        self.w = Tensor(glorot(rng, in_features, out_features), requires_grad=True)
        self.b = Tensor(np.zeros(out_features), requires_grad=True)
        if norm == "batch":
            self.norm = BatchNorm(out_features)
        elif norm == "layer":
            self.norm = LayerNorm(out_features)
        elif norm == "none":
            self.norm = None
        else:
            raise ValueError(f"unknown norm {norm!r}")
        if act not in ("relu", "none"):
            raise ValueError(f"unknown act {act!r}")
        self.act = act

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        if x.data.shape[-1] != self.w.data.shape[0]:
            raise ShapeMismatch(f"input width {x.data.shape[-1]} != {self.w.data.shape[0]}")
        out = x @ self.w + self.b
        if self.norm is not None:
            out = self.norm(out, training=training)
        if self.act == "relu":
            out = out.relu()
        return out

    def parameters(self):
        own = [self.w, self.b]
        return own + (self.norm.parameters() if self.norm is not None else [])

    def named_parameters(self, prefix=""):
        named = {f"{prefix}w": self.w, f"{prefix}b": self.b}
        if self.norm is not None:
            named.update(self.norm.named_parameters(prefix=f"{prefix}norm."))
        return named


class BatchNorm(Module):
    """Per-feature batch normalization with running statistics for inference."""

    def __init__(self, features: int, eps: float = 1e-5, momentum: float = 0.1):
        self.gamma = Tensor(np.ones(features), requires_grad=True)
        self.beta = Tensor(np.zeros(features), requires_grad=True)
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)
        self.eps = eps
        self.momentum = momentum

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        axes = tuple(range(x.data.ndim - 1))
        if training:
            mu = x.mean(axis=axes, keepdims=True)
            centered = x - mu
            var = (centered * centered).mean(axis=axes, keepdims=True)
            self.running_mean += self.momentum * (mu.data.reshape(-1) - self.running_mean)
            self.running_var += self.momentum * (var.data.reshape(-1) - self.running_var)
            norm = centered * (var + self.eps).pow(-0.5)
        else:
            norm = (x - Tensor(self.running_mean)) * Tensor(1.0 / np.sqrt(self.running_var + self.eps))
        return self.gamma * norm + self.beta

    def parameters(self):
        return [self.gamma, self.beta]

    def named_parameters(self, prefix=""):
        return {f"{prefix}gamma": self.gamma, f"{prefix}beta": self.beta}


class LayerNorm(Module):
    """Normalize each sample over the feature (last) axis."""

    def __init__(self, features: int, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(features), requires_grad=True)
        self.beta = Tensor(np.zeros(features), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return self.gamma * (centered * (var + self.eps).pow(-0.5)) + self.beta

    def parameters(self):
        return [self.gamma, self.beta]

    def named_parameters(self, prefix=""):
        return {f"{prefix}gamma": self.gamma, f"{prefix}beta": self.beta}


class UnitNorm(Module):
    """Scale each sample to unit root-mean-square over the feature (last) axis.

    Parameter-free; bounds the embedding to a sphere, which keeps the
    adversarial classifier game stable (logits cannot grow without bound).
    """

    def __init__(self, eps: float = 1e-8):
        self.eps = eps

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        sq = (x * x).mean(axis=-1, keepdims=True)
        return x * (sq + self.eps).pow(-0.5)

    def parameters(self):
        return []

    def named_parameters(self, prefix=""):
        return {}


def dense(x: Tensor, w: Tensor, b: Tensor, norm=None, act: str = "none", training: bool = True) -> Tensor:
    """Functional affine -> normalization -> activation."""
    out = x @ w + b
    if norm is not None:
        out = norm(out, training=training)
    if act == "relu":
        out = out.relu()
    elif act != "none":
        raise ValueError(f"unknown act {act!r}")
    return out


class ChebConv(Module):
    """Chebyshev graph convolution layer with bias, optional norm/activation."""

    def __init__(self, rng, in_features: int, out_features: int, order: int,
                 norm: str = "none", act: str = "none"):
        self.theta = Tensor(
            glorot(rng, in_features * (order + 1), out_features, shape=(order + 1, in_features, out_features)),
            requires_grad=True,
        )
        self.b = Tensor(np.zeros(out_features), requires_grad=True)
        if norm == "layer":
            self.norm = LayerNorm(out_features)
        elif norm == "none":
            self.norm = None
        else:
            raise ValueError(f"unknown norm {norm!r} for graph layers")
        self.act = act

    def __call__(self, x: Tensor, l_rescaled, training: bool = True, validate_spectrum: bool = False) -> Tensor:
        out = chebconv(x, l_rescaled, self.theta, validate_spectrum=validate_spectrum) + self.b
        if self.norm is not None:
            out = self.norm(out, training=training)
        if self.act == "relu":
            out = out.relu()
        return out

    def parameters(self):
        own = [self.theta, self.b]
        return own + (self.norm.parameters() if self.norm is not None else [])

    def named_parameters(self, prefix=""):
        named = {f"{prefix}theta": self.theta, f"{prefix}b": self.b}
        if self.norm is not None:
            named.update(self.norm.named_parameters(prefix=f"{prefix}norm."))
        return named


class MLP(Module):
    """Stack of Dense layers; hidden layers use relu, the last is linear."""

    def __init__(self, rng, widths: list[int], norm: str = "none"):
        self.layers = []
        for i in range(len(widths) - 1):
            last = i == len(widths) - 2
            self.layers.append(
                Dense(rng, widths[i], widths[i + 1], norm="none" if last else norm,
                      act="none" if last else "relu")
            )

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        for layer in self.layers:
            x = layer(x, training=training)
        return x

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def named_parameters(self, prefix=""):
        named = {}
        for i, layer in enumerate(self.layers):
            named.update(layer.named_parameters(prefix=f"{prefix}{i}."))
        return named


class AdaInConditioner(Module):
    """Maps the site latent to per-feature scale and shift for one AdaIN site.

    Scale weights start at zero so conditioning begins as identity-scale 1
    plus shift 0, keeping early training stable.
    """

    def __init__(self, rng, latent_dim: int, features: int):
        self.scale_net = Dense(rng, latent_dim, features)
        self.shift_net = Dense(rng, latent_dim, features)
        self.scale_net.w.data[:] = 0.0
        self.scale_net.b.data[:] = 1.0
        self.shift_net.w.data[:] = 0.0

    def __call__(self, f_e: Tensor, f_m: Tensor, training: bool = True) -> Tensor:
        scale = self.scale_net(f_m, training=training)
        shift = self.shift_net(f_m, training=training)
        return adain(f_e, scale, shift)

    def parameters(self):
        return self.scale_net.parameters() + self.shift_net.parameters()

    def named_parameters(self, prefix=""):
        named = self.scale_net.named_parameters(prefix=f"{prefix}scale.")
        named.update(self.shift_net.named_parameters(prefix=f"{prefix}shift."))
        return named
