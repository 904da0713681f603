"""MLP embedding network with hand-written forward/backward passes.

Layers are ``h = x @ W + b``; every layer but the last is followed by a
rectifier. Parameter lists are flat: ``[W0, b0, W1, b1, ...]``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError, ParseError, TraceError

CHECKPOINT_FORMAT = "lsdml-mlp"
CHECKPOINT_VERSION = 1


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre: list  # pre-activation of every layer
    post: list  # activation of every layer (last one is the embedding)
    version: int
    owner: int


def _forward(params, x):
    pre, post = [], []
    h = x
    n_layers = len(params) // 2
    for k in range(n_layers):
        w, b = params[2 * k], params[2 * k + 1]
        a = h @ w + b
        pre.append(a)
        h = np.maximum(a, 0.0) if k < n_layers - 1 else a
        post.append(h)
    return h, pre, post


def _check_input(dims, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != dims[0]:
        raise DimensionError(f"expected inputs of width {dims[0]}, got shape {x.shape}")
    return x


class MlpEncoder:
    def __init__(self, params):
        params = [np.array(p, dtype=np.float64) for p in params]
        if len(params) < 2 or len(params) % 2:
            raise DimensionError("params must alternate weight, bias")
        dims = [params[0].shape[0]]
        for k in range(0, len(params), 2):
            w, b = params[k], params[k + 1]
            if w.ndim != 2 or w.shape[0] != dims[-1] or b.shape != (w.shape[1],):
                raise DimensionError(f"layer {k // 2} does not chain: {w.shape}, {b.shape}")
            dims.append(w.shape[1])
        self.params = params
        self.dims = tuple(dims)
        self.version = 0

    @classmethod
    def init(cls, dims, rng):
        """Glorot-uniform weights, zero biases."""
        params = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            params.append(np.zeros(fan_out))
        return cls(params)

    @property
    def out_dim(self):
        return self.dims[-1]

    def forward(self, x):
        x = _check_input(self.dims, x)
        out, pre, post = _forward(self.params, x)
        return out, ForwardTrace(x, pre, post, self.version, id(self))

    def embed(self, x):
        return _forward(self.params, _check_input(self.dims, x))[0]

    def backward(self, trace, grad_out):
        """Gradients of ``sum(grad_out * forward(x))`` for every parameter."""
        if trace.owner != id(self) or trace.version != self.version:
            raise TraceError("trace was recorded on a different parameter state")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if grad_out.shape != trace.post[-1].shape:
            raise DimensionError(
                f"upstream gradient {grad_out.shape} != output {trace.post[-1].shape}"
            )
        n_layers = len(self.params) // 2
        grads = [None] * len(self.params)
        g = grad_out
        for k in reversed(range(n_layers)):
            if k < n_layers - 1:
                g = g * (trace.pre[k] > 0)
            h_in = trace.inputs if k == 0 else trace.post[k - 1]
            grads[2 * k] = h_in.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k:
                g = g @ self.params[2 * k].T
        return grads

    def snapshot(self, epoch):
        return TeacherSnapshot.capture(self, epoch)

    def copy(self):
        return MlpEncoder([p.copy() for p in self.params])

    # -- checkpoint file -------------------------------------------------

    def to_dict(self):
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "dims": list(self.dims),
            "layers": [
                {"weight": self.params[k].tolist(), "bias": self.params[k + 1].tolist()}
                for k in range(0, len(self.params), 2)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ParseError(f"not an {CHECKPOINT_FORMAT} checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ParseError(f"unsupported checkpoint version {d.get('version')}")
        params = []
        for layer in d["layers"]:
            params += [np.array(layer["weight"], dtype=np.float64), np.array(layer["bias"], dtype=np.float64)]
        enc = cls(params)
        if list(enc.dims) != list(d["dims"]):
            raise ParseError(f"dims {d['dims']} disagree with layer shapes {enc.dims}")
        return enc

    def save(self, path):
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class TeacherSnapshot:
    """Read-only copy of an encoder's parameters taken at one epoch."""

    def __init__(self, params, epoch):
        self._params = []
        for p in params:
            p = np.array(p, dtype=np.float64, copy=True)
            p.flags.writeable = False
            self._params.append(p)
        self.epoch = int(epoch)
        self.dims = tuple([self._params[0].shape[0]] + [w.shape[1] for w in self._params[::2]])

    @classmethod
    def capture(cls, enc, epoch):
        return cls(enc.params, epoch)

    @property
    def params(self):
        return tuple(self._params)

    def embed(self, x):
        return _forward(self._params, _check_input(self.dims, x))[0]


@dataclass
class Adam:
    """Adam with decoupled weight decay, one instance per parameter list."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads, lr, weight_decay=0.0):
        """Update ``params`` (a list of arrays) in place."""
        if len(grads) != len(params):
            raise DimensionError("gradient list does not match parameters")
        for g, p in zip(grads, params):
            if g.shape != p.shape:
                raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            if not np.all(np.isfinite(g)):
                raise DivergenceError("non-finite gradient")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            step = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if weight_decay:
                step = step + weight_decay * p
            p -= lr * step


def adam_step(enc, opt, grads, lr, weight_decay=0.0):
    """One optimizer step on an encoder; invalidates its outstanding traces."""
    opt.step(enc.params, grads, lr, weight_decay)
    enc.version += 1
    return enc
