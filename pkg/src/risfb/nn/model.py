"""Layer containers: :class:`Sequential` and the two-part :class:`AutoEncoder`."""
from __future__ import annotations

import numpy as np

from ..errors import DimensionError, StateError
from .layers import Layer


class Sequential(Layer):
    """An ordered chain of layers with a declared per-sample input shape."""

    kind = "sequential"

    def __init__(self, layers=(), input_shape=None):
        super().__init__()
        self.layers = list(layers)
        self.input_shape = None if input_shape is None else tuple(input_shape)
        self._trained_forward = False
        if self.input_shape is not None:
            self.output_shape(self.input_shape)  # validates the chain

    def children(self):
        return tuple(self.layers)

    def output_shape(self, in_shape=None):
        shape = tuple(self.input_shape if in_shape is None else in_shape)
        for layer in self.layers:
            shape = tuple(layer.output_shape(shape))
        return shape

    def forward(self, x, training=False):
        x = np.asarray(x, dtype=np.float64)
        if self.input_shape is not None and x.shape[1:] != self.input_shape:
            raise DimensionError(f"expected per-sample shape {self.input_shape}, got {x.shape[1:]}")
        for layer in self.layers:
            x = layer.forward(x, training)
        self._trained_forward = training
        return x

    def backward(self, grad):
        if not self._trained_forward:
            raise StateError("backward called without a preceding training forward pass")
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def flops(self, in_shape=None) -> int:
        if not self.layers:
            return 0
        shape = tuple(self.input_shape if in_shape is None else in_shape)
        total = 0
        for layer in self.layers:
            total += layer.flops(shape)
            shape = tuple(layer.output_shape(shape))
        return total

    def __add__(self, other):
        return Sequential(self.layers + other.layers, self.input_shape)

    def __repr__(self):
        inner = ", ".join(repr(layer) for layer in self.layers)
        return f"Sequential([{inner}])"


def iter_layers(layer):
    """Depth-first walk over a layer tree, parents before children."""
    yield layer
    for child in layer.children():
        yield from iter_layers(child)


def named_arrays(root, which="params"):
    """``(name, layer, key)`` triples for every parameter or buffer, in a stable order."""
    out = []

    def walk(layer, prefix):
        for key in getattr(layer, which):
            out.append((f"{prefix}{layer.kind}.{key}", layer, key))
        for i, child in enumerate(layer.children()):
            walk(child, f"{prefix}{i}.")

    walk(root, "")
    return out


class AutoEncoder:
    """Encoder / decoder pair; the encoder output is the codeword in ``(0, 1)``."""

    def __init__(self, encoder: Sequential, decoder: Sequential, arch: dict | None = None):
        self.encoder = encoder
        self.decoder = decoder
        self.arch = dict(arch or {})
        enc_out = encoder.output_shape()
        if len(enc_out) != 1 or decoder.input_shape != enc_out:
            raise DimensionError("encoder output must be the flat decoder input")

    @property
    def code_size(self) -> int:
        return self.encoder.output_shape()[0]

    @property
    def input_shape(self):
        return self.encoder.input_shape

    def forward(self, x, training=False, quant_bits=None):
        code = self.encoder.forward(x, training)
        if quant_bits is not None:
            # straight-through: quantize forward, identity backward
            levels = 2**quant_bits - 1
            code = np.floor(np.clip(code, 0.0, 1.0) * levels + 0.5) / levels
        return self.decoder.forward(code, training)

    __call__ = forward

    def backward(self, grad):
        return self.encoder.backward(self.decoder.backward(grad))

    def encode(self, x):
        return self.encoder.forward(x, training=False)

    def decode(self, code):
        return self.decoder.forward(code, training=False)

    def layers(self):
        return [self.encoder, self.decoder]

    def parameters(self):
        """``(name, array)`` pairs of trainable parameters."""
        return [(n, layer.params[k]) for n, layer, k in self.named("params")]

    def named(self, which="params"):
        out = []
        for part, seq in (("encoder", self.encoder), ("decoder", self.decoder)):
            out += [(f"{part}.{n}", d, k) for n, d, k in named_arrays(seq, which)]
        return out

    def flops(self) -> int:
        return count_flops(self)


def count_flops(model) -> int:
    """Per-sample inference FLOPs.

    Dense layers count ``2 * in * out``, convolutions
    ``2 * kh * kw * c_in * c_out * h_out * w_out``, and batch norm,
    activations and residual merges one FLOP per output entry.
    """
    if isinstance(model, AutoEncoder):
        return model.encoder.flops() + model.decoder.flops()
    if isinstance(model, Sequential):
        return model.flops()
    raise TypeError(f"cannot count FLOPs of {type(model).__name__}")
