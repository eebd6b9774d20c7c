"""Real-valued views of channels and ratio vectors, ratio extraction, and the
uniform scalar quantizer with its bit packing.

All channel and ratio functions accept a leading batch axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

RATIO_EPS = 1e-12
RATIO_FALLBACK = 0.0


@dataclass(frozen=True)
class NormalizationSpec:
    """Magnitude bound mapping real and imaginary parts into ``[-1, 1]``."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0 or not np.isfinite(self.scale):
            raise DomainError("normalization scale must be positive and finite")

    @classmethod
    def fit(cls, data, percentile=99.9):
        """Scale at the given percentile of ``|Re|`` and ``|Im|`` over ``data``."""
        data = np.asarray(data)
        parts = np.concatenate([np.abs(data.real).ravel(), np.abs(data.imag).ravel()])
        return cls(float(np.percentile(parts, percentile)))


def _clip(x, return_clipped):
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    x = np.clip(x, -1.0, 1.0)
    return (x, clipped) if return_clipped else x


def channel_to_tensor(H, spec: NormalizationSpec, return_clipped=False):
    """``(..., n_ris, n_t)`` complex to ``(..., 2, n_ris, n_t)`` real in ``[-1, 1]``.

    With ``return_clipped`` the number of clipped entries is returned as well.
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim < 2:
        raise DimensionError("channel must be at least 2-D")
    x = np.stack([H.real, H.imag], axis=-3) / spec.scale
    return _clip(x, return_clipped)


def tensor_to_channel(x, spec: NormalizationSpec):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 3 or x.shape[-3] != 2:
        raise DimensionError(f"expected (..., 2, n_ris, n_t), got {x.shape}")
    return (x[..., 0, :, :] + 1j * x[..., 1, :, :]) * spec.scale


@dataclass
class RatioVector:
    values: np.ndarray  # (..., n_ris) complex
    mask: np.ndarray    # True where the ratio is undefined

    def __len__(self):
        return self.values.shape[-1]


def extract_ratio(H0, Ht, eps=RATIO_EPS) -> RatioVector:
    """Per-row ratio ``<h_i(0), h_i(t)> / ||h_i(0)||^2``.

    Rows whose anchor energy is below ``eps`` carry no information; they are
    masked and set to ``RATIO_FALLBACK``.
    """
    H0 = np.asarray(H0, dtype=np.complex128)
    Ht = np.asarray(Ht, dtype=np.complex128)
    if H0.shape != Ht.shape or H0.ndim < 2:
        raise DimensionError(f"anchor {H0.shape} and current channel {Ht.shape} must match")
    energy = np.sum(np.abs(H0) ** 2, axis=-1)
    num = np.sum(np.conj(H0) * Ht, axis=-1)
    mask = energy < eps
    safe = np.where(mask, 1.0, energy)
    values = np.where(mask, RATIO_FALLBACK, num / safe)
    return RatioVector(values, mask)


def reconstruct_from_ratio(H0_hat, p_hat) -> np.ndarray:
    """Scale each anchor row by its ratio; masked entries give zero rows."""
    H0_hat = np.asarray(H0_hat, dtype=np.complex128)
    if isinstance(p_hat, RatioVector):
        p = np.where(p_hat.mask, RATIO_FALLBACK, p_hat.values)
    else:
        p = np.asarray(p_hat, dtype=np.complex128)
    if p.shape != H0_hat.shape[:-1]:
        raise DimensionError(f"ratio shape {p.shape} does not match anchor rows {H0_hat.shape[:-1]}")
    return p[..., None] * H0_hat


def ratio_to_tensor(p, spec: NormalizationSpec, return_clipped=False):
    """``(..., n_ris)`` complex to ``(..., 2 n_ris)`` real: real parts first, then imaginary."""
    values = p.values if isinstance(p, RatioVector) else np.asarray(p, dtype=np.complex128)
    x = np.concatenate([values.real, values.imag], axis=-1) / spec.scale
    return _clip(x, return_clipped)


def tensor_to_ratio(x, spec: NormalizationSpec) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] % 2:
        raise DimensionError("ratio tensor length must be even")
    n = x.shape[-1] // 2
    return (x[..., :n] + 1j * x[..., n:]) * spec.scale


def _levels(n_q):
    if int(n_q) != n_q or n_q < 1:
        raise DomainError(f"bits per element must be a positive integer, got {n_q}")
    return (1 << int(n_q)) - 1


def quantize(values, n_q: int) -> np.ndarray:
    """Uniform ``n_q``-bit quantization of ``[0, 1]`` values, rounding half away from zero."""
    levels = _levels(n_q)
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * levels + 0.5).astype(np.int64)


def dequantize(indices, n_q: int) -> np.ndarray:
    levels = _levels(n_q)
    idx = np.asarray(indices)
    if np.any(idx < 0) or np.any(idx > levels):
        raise DomainError(f"indices must lie in [0, {levels}]")
    return idx.astype(np.float64) / levels


def max_quantization_error(n_q: int) -> float:
    return 1.0 / (2 * _levels(n_q))


def pack_bits(indices, n_q: int) -> bytes:
    """Concatenate ``n_q``-bit indices MSB first and zero-pad to a whole byte."""
    levels = _levels(n_q)
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        return b""
    if np.any(idx < 0) or np.any(idx > levels):
        raise DomainError(f"indices must lie in [0, {levels}]")
    shifts = np.arange(n_q - 1, -1, -1, dtype=np.int64)
    bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def unpack_bits(data: bytes, n_q: int, count: int) -> np.ndarray:
    _levels(n_q)
    need = (n_q * count + 7) // 8
    if len(data) != need:
        raise DomainError(f"{count} indices of {n_q} bits need {need} bytes, got {len(data)}")
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: n_q * count].reshape(count, n_q)
    weights = 1 << np.arange(n_q - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights
