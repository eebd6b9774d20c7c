"""Reconstruction quality metrics."""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError

DB_FLOOR_LINEAR = 1e-18
DB_FLOOR_TEXT = "<-180"


def nmse(H, H_hat) -> float:
    """``||H - H_hat||_F^2 / ||H||_F^2`` (linear)."""
    H = np.asarray(H, dtype=np.complex128)
    H_hat = np.asarray(H_hat, dtype=np.complex128)
    if H.shape != H_hat.shape:
        raise DimensionError(f"shapes differ: {H.shape} vs {H_hat.shape}")
    ref = float(np.sum(np.abs(H) ** 2))
    if ref == 0.0:
        raise DomainError("NMSE undefined for an all-zero reference channel")
    return float(np.sum(np.abs(H - H_hat) ** 2)) / ref


def to_db(linear) -> float:
    """``10 log10``; zero maps to ``-inf``."""
    linear = float(linear)
    if linear < 0:
        raise DomainError("negative power ratio")
    return -np.inf if linear == 0.0 else float(10.0 * np.log10(linear))


def nmse_db(H, H_hat) -> float:
    return to_db(nmse(H, H_hat))


def average_nmse_db(per_interval_linear) -> float:
    """Linear mean over intervals, then converted to dB."""
    return to_db(np.mean(per_interval_linear))


def format_db(linear) -> str:
    """dB text for CSV output; tiny values become a finite sentinel."""
    if linear < DB_FLOOR_LINEAR:
        return DB_FLOOR_TEXT
    return f"{to_db(linear):.4f}"
