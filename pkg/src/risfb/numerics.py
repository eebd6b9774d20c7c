"""Complex-array helpers, seeded random streams and the signal-model identity.

Complex matrices and vectors are plain ``numpy`` arrays of dtype
``complex128``.  The helpers below only validate and coerce; they never copy
when the input already conforms.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError

__all__ = [
    "as_cvec",
    "as_cmat",
    "make_rng",
    "substream",
    "hermitian_inner",
    "received_signal",
    "crandn",
]


def as_cvec(x, name="vector"):
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def as_cmat(x, name="matrix"):
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a Philox generator for ``seed`` and an optional sub-stream key path.

    Generators with different key paths are statistically independent, so the
    i-th sample of a dataset can be drawn from ``make_rng(seed, i)`` regardless
    of the order in which samples are produced.
    """
    if seed < 0:
        raise DomainError("seed must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def substream(rng: np.random.Generator, *keys: int) -> np.random.Generator:
    """Derive a child generator from ``rng``'s seed sequence without consuming draws."""
    ss = rng.bit_generator.seed_seq
    child = np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(child))


def crandn(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    s = np.sqrt(var / 2.0)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def hermitian_inner(x, y) -> complex:
    """Return ``sum(conj(x_i) * y_i)``."""
    x = as_cvec(x, "x")
    y = as_cvec(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    return complex(np.vdot(x, y))


def received_signal(a, phi, B, v, x, z, form="direct") -> complex:
    """Noisy received sample of a single-antenna UE behind a passive RIS.

    Parameters
    ----------
    a : (n_ris,) complex
        RIS-UE channel.
    phi : (n_ris,) complex
        RIS reflection coefficients.
    B : (n_ris, n_t) complex
        BS-RIS channel.
    v : (n_t,) complex
        BS beamformer.
    x, z : complex
        Transmitted symbol and additive noise.
    form : {"direct", "reformulated"}
        ``direct`` evaluates ``a^T diag(phi) B v x + z``; ``reformulated``
        evaluates ``phi^T diag(a) B v x + z``.  Both are mathematically equal.
    """
    a = as_cvec(a, "a")
    phi = as_cvec(phi, "phi")
    B = as_cmat(B, "B")
    v = as_cvec(v, "v")
    if not (a.shape[0] == phi.shape[0] == B.shape[0]):
        raise DimensionError("a, phi and B rows must share the RIS dimension")
    if v.shape[0] != B.shape[1]:
        raise DimensionError("v length must equal the number of BS antennas")
    if form == "direct":
        y = (a @ np.diag(phi) @ B) @ v
    elif form == "reformulated":
        y = (phi @ np.diag(a) @ B) @ v
    else:
        raise DomainError(f"unknown form {form!r}")
    return complex(y * x + z)
