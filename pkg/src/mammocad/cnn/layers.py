"""Network layers with exact analytic gradients.

Activations are float64 arrays in NCHW layout. Every layer caches what
its backward pass needs during forward; backward returns the gradient
with respect to the input and stores parameter gradients on the layer.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Conv2d:
    """2-D cross-correlation with zero padding and stride."""

    def __init__(self, in_channels, out_channels, kernel, stride=1, padding=0, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel * kernel
        self.weight = rng.normal(0.0, np.sqrt(2.0 / fan_in),
                                 (out_channels, in_channels, kernel, kernel))
        self.bias = np.zeros(out_channels)
        self.stride = stride
        self.padding = padding
        self.grad_weight = None
        self.grad_bias = None
        self._cache = None

    def output_shape(self, h, w):
        k, s, p = self.weight.shape[2], self.stride, self.padding
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.weight.shape[1]:
            raise ValueError(
                f"expected NCHW input with {self.weight.shape[1]} channels, got {x.shape}")
        n, _, h, w = x.shape
        o, _, k, _ = self.weight.shape
        s, p = self.stride, self.padding
        ho, wo = self.output_shape(h, w)
        if ho < 1 or wo < 1:
            raise ValueError(f"kernel {k} with stride {s} does not fit {h}x{w}")
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, -1)
        out = cols @ self.weight.reshape(o, -1).T + self.bias
        self._cache = (x.shape, xp.shape, cols)
        return out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)

    def backward(self, grad):
        x_shape, xp_shape, cols = self._cache
        n, _, h, w = x_shape
        o, c, k, _ = self.weight.shape
        s, p = self.stride, self.padding
        ho, wo = grad.shape[2], grad.shape[3]
        g = grad.transpose(0, 2, 3, 1).reshape(n * ho * wo, o)
        self.grad_weight = (g.T @ cols).reshape(self.weight.shape)
        self.grad_bias = g.sum(axis=0)
        gcols = (g @ self.weight.reshape(o, -1)).reshape(n, ho, wo, c, k, k)
        gxp = np.zeros(xp_shape)
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += \
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return gxp[:, :, p:p + h, p:p + w]

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}


class MaxPool2d:
    """Windowed maximum; gradients route to the first maximum per window."""

    def __init__(self, window=3, stride=2):
        self.window = window
        self.stride = stride
        self._cache = None

    def output_shape(self, h, w):
        k, s = self.window, self.stride
        return (h - k) // s + 1, (w - k) // s + 1

    def forward(self, x, train=False):
        k, s = self.window, self.stride
        n, c, h, w = x.shape
        if k > h or k > w:
            raise ValueError(f"pool window {k} exceeds spatial extent {h}x{w}")
        win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        flat = win.reshape(*win.shape[:4], k * k)
        idx = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        self._cache = (x.shape, idx)
        return out

    def backward(self, grad):
        x_shape, idx = self._cache
        k, s = self.window, self.stride
        gx = np.zeros(x_shape)
        n, c, ho, wo = idx.shape
        ni, ci, hi, wi = np.indices(idx.shape)
        rows = hi * s + idx // k
        cols = wi * s + idx % k
        np.add.at(gx, (ni, ci, rows, cols), grad)
        return gx

    def params(self):
        return {}

    def grads(self):
        return {}


class BatchNorm2d:
    """Per-channel normalization with running statistics for inference."""

    def __init__(self, channels, momentum=0.9, eps=1e-5):
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps
        self.grad_gamma = None
        self.grad_beta = None
        self._cache = None

    def forward(self, x, train=False):
        if train:
            if x.shape[0] < 2:
                raise ValueError("batch normalization needs a batch of at least 2 in training")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        self._cache = (xhat, inv_std, train)
        return self.gamma[None, :, None, None] * xhat + self.beta[None, :, None, None]

    def backward(self, grad):
        xhat, inv_std, trained = self._cache
        self.grad_gamma = (grad * xhat).sum(axis=(0, 2, 3))
        self.grad_beta = grad.sum(axis=(0, 2, 3))
        scale = (self.gamma * inv_std)[None, :, None, None]
        if not trained:
            return grad * scale
        m = grad.shape[0] * grad.shape[2] * grad.shape[3]
        correction = (self.grad_beta[None, :, None, None]
                      + xhat * self.grad_gamma[None, :, None, None]) / m
        return scale * (grad - correction)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.grad_gamma, "beta": self.grad_beta}

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        return np.where(self._mask, grad, 0.0)

    def params(self):
        return {}

    def grads(self):
        return {}


class Flatten:
    def __init__(self):
        self._shape = None

    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def params(self):
        return {}

    def grads(self):
        return {}


class Dense:
    """Affine map on flattened features."""

    def __init__(self, in_features, out_features, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = rng.normal(0.0, np.sqrt(2.0 / in_features),
                                 (in_features, out_features))
        self.bias = np.zeros(out_features)
        self.grad_weight = None
        self.grad_bias = None
        self._cache = None

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise ValueError(
                f"expected input of width {self.weight.shape[0]}, got {x.shape}")
        self._cache = x
        return x @ self.weight + self.bias

    def backward(self, grad):
        x = self._cache
        self.grad_weight = x.T @ grad
        self.grad_bias = grad.sum(axis=0)
        return grad @ self.weight.T

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}


def softmax_predict(logits):
    """Class probabilities and argmax labels (ties go to the lowest index).

    Accepts a single logit vector or a batch; max-subtraction keeps the
    exponentials finite.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("logits must be finite")
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    shifted = arr - arr.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    labels = probs.argmax(axis=1)
    if squeeze:
        return probs[0], int(labels[0])
    return probs, labels


def cross_entropy(probs, labels):
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    The probability of the true class is clamped at 1e-12 before the
    log; for softmax outputs the logit gradient is (p - onehot) / N.
    """
    p = np.asarray(probs, dtype=np.float64)
    squeeze = p.ndim == 1
    if squeeze:
        p = p[None, :]
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n = p.shape[0]
    picked = np.clip(p[np.arange(n), y], 1e-12, None)
    loss = float(-np.log(picked).mean())
    grad = p.copy()
    grad[np.arange(n), y] -= 1.0
    grad /= n
    if squeeze:
        grad = grad[0]
    return loss, grad


def sgd_step(params, grads, learning_rate, momentum=0.9, velocity=None):
    """Momentum update: v <- m*v + grad; param <- param - lr*v.

    Returns (new_params, velocity); pass the velocity back in on the
    next call. Parameter and gradient dictionaries must share keys and
    shapes.
    """
    if set(params) != set(grads):
        raise ValueError("parameter and gradient names differ")
    if velocity is None:
        velocity = {k: np.zeros_like(v) for k, v in params.items()}
    new_params = {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {k!r}")
        velocity[k] = momentum * velocity[k] + g
        new_params[k] = p - learning_rate * velocity[k]
    return new_params, velocity
