"""UE and BS state machines for two-timescale feedback, and the frame format.

Every large timescale spans ``T + 1`` intervals.  In its first interval the
UE sends the full cascaded channel (a FULL frame, compressed by AE1) and
keeps it as the anchor; in the remaining ``T`` intervals it sends only the
per-RIS-unit ratio vector against that anchor (RATIO frames, compressed by
AE2).  The BS rebuilds each channel by scaling the rows of its
reconstructed anchor.  ``T = 0`` is the full-feedback baseline.

Frame layout (little-endian)::

    kind u8 (0 = FULL, 1 = RATIO) | t u32 | payload bits u32 | payload bytes

``t`` is the global interval counter.  Quantized payloads hold ``n_q``-bit
indices packed MSB first; with ``n_q=None`` the payload carries raw float64
code values (a lossless test mode).
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction

import numpy as np

from .codec import (
    NormalizationSpec,
    channel_to_tensor,
    dequantize,
    extract_ratio,
    pack_bits,
    quantize,
    ratio_to_tensor,
    reconstruct_from_ratio,
    tensor_to_channel,
    tensor_to_ratio,
    unpack_bits,
)
from .errors import DecodeError, DimensionError, DomainError, ProtocolError

_HEADER = struct.Struct("<BII")
RAW_BITS = 64


class FrameKind(IntEnum):
    FULL = 0
    RATIO = 1


@dataclass(frozen=True)
class FeedbackMessage:
    kind: FrameKind
    t: int
    n_bits: int
    payload: bytes

    def __post_init__(self):
        if len(self.payload) != (self.n_bits + 7) // 8:
            raise DecodeError(f"payload of {len(self.payload)} bytes cannot hold {self.n_bits} bits")

    def to_bytes(self) -> bytes:
        return _HEADER.pack(int(self.kind), self.t, self.n_bits) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "FeedbackMessage":
        if len(data) < _HEADER.size:
            raise DecodeError("frame shorter than its header")
        kind, t, n_bits = _HEADER.unpack_from(data)
        try:
            kind = FrameKind(kind)
        except ValueError:
            raise DecodeError(f"unknown frame kind {kind}") from None
        payload = bytes(data[_HEADER.size:])
        if len(payload) != (n_bits + 7) // 8:
            raise DecodeError(f"header claims {n_bits} bits but payload has {len(payload)} bytes")
        return cls(kind, t, n_bits, payload)


def encode_payload(code, n_q):
    """Codeword values to ``(n_bits, payload)``."""
    code = np.asarray(code, dtype=np.float64).ravel()
    if n_q is None:
        return RAW_BITS * code.size, code.astype("<f8").tobytes()
    return n_q * code.size, pack_bits(quantize(code, n_q), n_q)


def decode_payload(msg: FeedbackMessage, n_q, count: int) -> np.ndarray:
    bits = (RAW_BITS if n_q is None else n_q) * count
    if msg.n_bits != bits:
        raise DecodeError(f"{msg.kind.name} frame carries {msg.n_bits} bits, expected {bits}")
    if n_q is None:
        return np.frombuffer(msg.payload, dtype="<f8").astype(np.float64)
    return dequantize(unpack_bits(msg.payload, n_q, count), n_q)


class IdentityCompressor:
    """Lossless stand-in for an autoencoder: the codeword is the flattened input."""

    def __init__(self, shape):
        self.shape = tuple(shape)
        self.code_size = math.prod(self.shape)

    def encode(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x.reshape(x.shape[0], -1)

    def decode(self, code):
        code = np.asarray(code, dtype=np.float64)
        return code.reshape((code.shape[0],) + self.shape)


@dataclass
class LinkConfig:
    """Parameters shared by both ends of a feedback link."""

    T: int
    n_q: int | None
    channel_spec: NormalizationSpec
    ratio_spec: NormalizationSpec | None = None

    def __post_init__(self):
        if self.T < 0:
            raise DomainError("T must be >= 0")
        if self.n_q is not None and self.n_q < 1:
            raise DomainError("n_q must be >= 1")
        if self.T > 0 and self.ratio_spec is None:
            raise DomainError("ratio feedback (T > 0) needs a ratio normalization")

    def position(self, t: int) -> int:
        return t % (self.T + 1)


@dataclass
class OverheadLedger:
    """Bits sent per interval."""

    bits: list = field(default_factory=list)

    def record(self, msg: FeedbackMessage):
        self.bits.append(msg.n_bits)

    @property
    def total(self) -> int:
        return sum(self.bits)

    def average(self, last: int | None = None) -> Fraction:
        window = self.bits if last is None else self.bits[-last:]
        return Fraction(sum(window), len(window))


class UeEndpoint:
    """UE side: compresses H(t) or the ratio vector into feedback frames.

    With ``mirror_anchor`` the UE decodes its own FULL frame (it must then be
    given the AE1 decoder) and takes ratios against the BS's reconstruction
    instead of the true anchor.
    """

    def __init__(self, link: LinkConfig, ae1, ae2=None, mirror_anchor=False):
        if link.T > 0 and ae2 is None:
            raise DomainError("ratio feedback needs an AE2 encoder")
        self.link = link
        self.ae1, self.ae2 = ae1, ae2
        self.mirror_anchor = mirror_anchor
        self.t = 0
        self.anchor = None
        self.ledger = OverheadLedger()

    def step(self, H_t) -> FeedbackMessage:
        H_t = np.asarray(H_t, dtype=np.complex128)
        if self.anchor is not None and H_t.shape != self.anchor.shape:
            raise DimensionError(f"channel shape {H_t.shape} differs from anchor {self.anchor.shape}")
        link = self.link
        if link.position(self.t) == 0:
            x = channel_to_tensor(H_t, link.channel_spec)[None]
            n_bits, payload = encode_payload(self.ae1.encode(x)[0], link.n_q)
            msg = FeedbackMessage(FrameKind.FULL, self.t, n_bits, payload)
            if self.mirror_anchor:
                code = decode_payload(msg, link.n_q, self.ae1.code_size)
                self.anchor = tensor_to_channel(self.ae1.decode(code[None])[0], link.channel_spec)
            else:
                self.anchor = H_t.copy()
        else:
            if self.anchor is None:
                raise ProtocolError("no anchor channel for ratio feedback")
            p = extract_ratio(self.anchor, H_t)
            x = ratio_to_tensor(p, link.ratio_spec)[None]
            n_bits, payload = encode_payload(self.ae2.encode(x)[0], link.n_q)
            msg = FeedbackMessage(FrameKind.RATIO, self.t, n_bits, payload)
        self.t += 1
        self.ledger.record(msg)
        return msg


class BsEndpoint:
    """BS side: rebuilds H(t) from FULL and RATIO frames."""

    def __init__(self, link: LinkConfig, ae1, ae2=None):
        self.link = link
        self.ae1, self.ae2 = ae1, ae2
        self.t = 0
        self.anchor = None
        self.last_ratio = None

    def step(self, msg: FeedbackMessage) -> np.ndarray:
        if msg.t != self.t:
            raise ProtocolError(f"expected frame for interval {self.t}, got {msg.t}")
        link = self.link
        expected = FrameKind.FULL if link.position(self.t) == 0 else FrameKind.RATIO
        if msg.kind != expected:
            raise ProtocolError(f"interval {self.t} expects a {expected.name} frame, got {msg.kind.name}")
        if msg.kind == FrameKind.FULL:
            code = decode_payload(msg, link.n_q, self.ae1.code_size)
            H_hat = tensor_to_channel(self.ae1.decode(code[None])[0], link.channel_spec)
            self.anchor = H_hat
        else:
            if self.anchor is None or self.ae2 is None:
                raise ProtocolError("RATIO frame received without a stored anchor")
            code = decode_payload(msg, link.n_q, self.ae2.code_size)
            self.last_ratio = tensor_to_ratio(self.ae2.decode(code[None])[0], link.ratio_spec)
            H_hat = reconstruct_from_ratio(self.anchor, self.last_ratio)
        self.t += 1
        return H_hat


def equivalent_overhead(n_q, n_s1, n_s2, T, exact=False):
    """Average feedback bits per interval over one large timescale."""
    if min(n_q, n_s1, n_s2, T) < 0:
        raise DomainError("arguments must be non-negative")
    value = Fraction(n_q * (n_s1 + T * n_s2), T + 1)
    return value if exact else float(value)


def compression_ratios(n_s1, n_s2, n_t, n_ris):
    """``(gamma1, gamma2)``: codeword length over the real dimension of what it compresses."""
    if min(n_s1, n_s2, n_t, n_ris) <= 0:
        raise DomainError("dimensions must be positive")
    return n_s1 / (2 * n_t * n_ris), n_s2 / (2 * n_ris)
