"""Layers with explicit forward and backward passes.

Every layer works on batch-first ``float64`` arrays.  ``forward`` caches what
``backward`` needs only when called with ``training=True``; ``backward``
returns the gradient with respect to the layer input and stores parameter
gradients in ``self.grads`` under the same keys as ``self.params``.

Shapes passed to :meth:`Layer.output_shape` and :meth:`Layer.flops` are
per-sample shapes (no batch axis).
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError, DomainError, StateError


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def output_shape(self, in_shape):
        return tuple(in_shape)

    def flops(self, in_shape) -> int:
        return 0

    def children(self):
        return ()

    def _need_cache(self):
        if self._cache is None:
            raise StateError(f"{self.kind}: backward called without a cached training forward pass")
        return self._cache

    def __repr__(self):
        return f"{type(self).__name__}()"


def _glorot(rng, fan_in, fan_out, shape):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None):
        super().__init__()
        if n_in < 1 or n_out < 1:
            raise DomainError("dense sizes must be positive")
        rng = rng or np.random.default_rng(0)
        self.n_in, self.n_out = n_in, n_out
        self.params["W"] = _glorot(rng, n_in, n_out, (n_in, n_out))
        self.params["b"] = np.zeros(n_out)

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise DimensionError(f"dense expects (N, {self.n_in}), got {x.shape}")
        if training:
            self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad):
        x = self._need_cache()
        self.grads["W"] = x.T @ grad
        self.grads["b"] = grad.sum(axis=0)
        return grad @ self.params["W"].T

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.n_in,):
            raise DimensionError(f"dense expects ({self.n_in},), got {tuple(in_shape)}")
        return (self.n_out,)

    def flops(self, in_shape):
        return 2 * self.n_in * self.n_out

    def __repr__(self):
        return f"Dense({self.n_in}, {self.n_out})"


class Conv2D(Layer):
    """2-D cross-correlation on ``(N, C, H, W)`` inputs."""

    kind = "conv2d"

    def __init__(self, c_in: int, c_out: int, kernel=3, stride=1, padding="same",
                 rng: np.random.Generator | None = None):
        super().__init__()
        kh, kw = (kernel, kernel) if isinstance(kernel, int) else tuple(kernel)
        if padding == "same":
            if stride != 1 or kh % 2 == 0 or kw % 2 == 0:
                raise DomainError("'same' padding needs stride 1 and odd kernels")
            padding = (kh // 2, kw // 2)
        elif isinstance(padding, int):
            padding = (padding, padding)
        self.c_in, self.c_out = c_in, c_out
        self.kernel = (kh, kw)
        self.stride = stride
        self.padding = tuple(padding)
        rng = rng or np.random.default_rng(0)
        fan_in, fan_out = c_in * kh * kw, c_out * kh * kw
        self.params["W"] = _glorot(rng, fan_in, fan_out, (c_out, c_in, kh, kw))
        self.params["b"] = np.zeros(c_out)

    def output_shape(self, in_shape):
        c, h, w = in_shape
        if c != self.c_in:
            raise DimensionError(f"conv2d expects {self.c_in} channels, got {c}")
        kh, kw = self.kernel
        ph, pw = self.padding
        ho = (h + 2 * ph - kh) // self.stride + 1
        wo = (w + 2 * pw - kw) // self.stride + 1
        if ho < 1 or wo < 1:
            raise DimensionError("conv2d input smaller than kernel")
        return (self.c_out, ho, wo)

    @staticmethod
    def _im2col(x, kernel, padding, stride):
        """Per-sample patch matrices ``(N, C kh kw, H_out W_out)`` of an NCHW input."""
        ph, pw = padding
        n, c, h, w = x.shape
        xp = np.zeros((n, c, h + 2 * ph, w + 2 * pw))
        xp[:, :, ph:ph + h, pw:pw + w] = x
        win = sliding_window_view(xp, kernel, axis=(2, 3))[:, :, ::stride, ::stride]
        ho, wo, kh, kw = win.shape[2:]
        cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, ho * wo)
        return cols, (ho, wo)

    def forward(self, x, training=False):
        if x.ndim != 4:
            raise DimensionError(f"conv2d expects (N, C, H, W), got {x.shape}")
        self.output_shape(x.shape[1:])
        cols, (ho, wo) = self._im2col(x, self.kernel, self.padding, self.stride)
        out = self.params["W"].reshape(self.c_out, -1) @ cols
        out += self.params["b"][:, None]
        if training:
            self._cache = (cols, x.shape, (ho, wo))
        return out.reshape(x.shape[0], self.c_out, ho, wo)

    def backward(self, grad):
        cols, x_shape, (ho, wo) = self._need_cache()
        n = grad.shape[0]
        kh, kw = self.kernel
        ph, pw = self.padding
        g3 = grad.reshape(n, self.c_out, ho * wo)
        self.grads["W"] = np.matmul(g3, cols.transpose(0, 2, 1)).sum(axis=0).reshape(self.params["W"].shape)
        self.grads["b"] = g3.sum(axis=(0, 2))
        if self.stride == 1 and ph < kh and pw < kw:
            # input gradient of a stride-1 correlation is a full correlation
            # with the spatially flipped, channel-swapped kernel
            wf = self.params["W"][:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(self.c_in, -1)
            gcols, _ = self._im2col(grad, self.kernel, (kh - 1 - ph, kw - 1 - pw), 1)
            return (wf @ gcols).reshape(x_shape)
        wmat = self.params["W"].reshape(self.c_out, -1)
        dcols = (wmat.T @ g3).reshape(n, self.c_in, kh, kw, ho, wo)
        hp, wp = x_shape[2] + 2 * ph, x_shape[3] + 2 * pw
        dxp = np.zeros((n, self.c_in, hp, wp))
        s = self.stride
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += dcols[:, :, i, j]
        return dxp[:, :, ph:hp - ph, pw:wp - pw]

    def flops(self, in_shape):
        c_out, ho, wo = self.output_shape(in_shape)
        kh, kw = self.kernel
        return 2 * kh * kw * self.c_in * c_out * ho * wo

    def __repr__(self):
        return f"Conv2D({self.c_in}, {self.c_out}, kernel={self.kernel})"


class BatchNorm(Layer):
    """Batch normalization over the feature axis (axis 1).

    Statistics are pooled over every other axis, so for ``(N, C, H, W)``
    inputs each channel is normalized over ``N * H * W`` entries.
    """

    kind = "batch_norm"

    def __init__(self, n_features: int, momentum=0.9, eps=1e-5):
        super().__init__()
        self.n_features = n_features
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(n_features)
        self.params["beta"] = np.zeros(n_features)
        self.buffers["running_mean"] = np.zeros(n_features)
        self.buffers["running_var"] = np.ones(n_features)

    def _bshape(self, x):
        return (1, self.n_features) + (1,) * (x.ndim - 2)

    def forward(self, x, training=False):
        if x.ndim < 2 or x.shape[1] != self.n_features:
            raise DimensionError(f"batch_norm expects {self.n_features} features on axis 1, got {x.shape}")
        axes = (0,) + tuple(range(2, x.ndim))
        shp = self._bshape(x)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.buffers["running_mean"] = m * self.buffers["running_mean"] + (1 - m) * mean
            self.buffers["running_var"] = m * self.buffers["running_var"] + (1 - m) * var
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(shp)) * inv_std.reshape(shp)
        if training:
            self._cache = (xhat, inv_std, axes)
        return xhat * self.params["gamma"].reshape(shp) + self.params["beta"].reshape(shp)

    def backward(self, grad):
        xhat, inv_std, axes = self._need_cache()
        shp = self._bshape(grad)
        m = grad.size // self.n_features
        self.grads["gamma"] = (grad * xhat).sum(axis=axes)
        self.grads["beta"] = grad.sum(axis=axes)
        gxhat = grad * self.params["gamma"].reshape(shp)
        return (inv_std.reshape(shp) / m) * (
            m * gxhat
            - gxhat.sum(axis=axes).reshape(shp)
            - xhat * (gxhat * xhat).sum(axis=axes).reshape(shp)
        )

    def flops(self, in_shape):
        return math.prod(in_shape)

    def __repr__(self):
        return f"BatchNorm({self.n_features})"


class _Elementwise(Layer):
    def flops(self, in_shape):
        return math.prod(in_shape)


class LeakyReLU(_Elementwise):
    kind = "leaky_relu"

    def __init__(self, slope=0.3):
        super().__init__()
        self.slope = slope

    def forward(self, x, training=False):
        mult = np.where(x > 0, 1.0, self.slope)
        if training:
            self._cache = mult
        return x * mult

    def backward(self, grad):
        return grad * self._need_cache()

    def __repr__(self):
        return f"LeakyReLU({self.slope})"


class Tanh(_Elementwise):
    kind = "tanh"

    def forward(self, x, training=False):
        y = np.tanh(x)
        if training:
            self._cache = y
        return y

    def backward(self, grad):
        y = self._need_cache()
        return grad * (1.0 - y * y)


class Sigmoid(_Elementwise):
    kind = "sigmoid"

    def forward(self, x, training=False):
        y = 0.5 * (1.0 + np.tanh(0.5 * x))  # overflow-free logistic
        if training:
            self._cache = y
        return y

    def backward(self, grad):
        y = self._need_cache()
        return grad * y * (1.0 - y)


class Reshape(Layer):
    """Reshape the per-sample part of the input; ``Reshape((-1,))`` flattens."""

    kind = "reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def output_shape(self, in_shape):
        return np.empty(tuple(in_shape), dtype=np.bool_).reshape(self.shape).shape

    def forward(self, x, training=False):
        if training:
            self._cache = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad):
        return grad.reshape(self._need_cache())

    def __repr__(self):
        return f"Reshape({self.shape})"


class ReZeroResidual(Layer):
    """``x + alpha * branch(x)`` with a learned scalar ``alpha`` starting at zero."""

    kind = "rezero_residual_block"

    def __init__(self, branch, alpha=0.0):
        super().__init__()
        self.branch = branch
        self.params["alpha"] = np.array([float(alpha)])

    def children(self):
        return (self.branch,)

    def output_shape(self, in_shape):
        out = self.branch.output_shape(in_shape)
        if tuple(out) != tuple(in_shape):
            raise DimensionError("residual branch must preserve shape")
        return tuple(in_shape)

    def forward(self, x, training=False):
        f = self.branch.forward(x, training)
        if training:
            self._cache = f
        return x + self.params["alpha"][0] * f

    def backward(self, grad):
        f = self._need_cache()
        alpha = self.params["alpha"][0]
        self.grads["alpha"] = np.array([np.sum(f * grad)])
        return grad + self.branch.backward(alpha * grad)

    def flops(self, in_shape):
        return self.branch.flops(in_shape) + math.prod(in_shape)

    def __repr__(self):
        return f"ReZeroResidual({self.branch!r})"
