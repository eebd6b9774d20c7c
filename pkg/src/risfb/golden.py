"""Golden test vectors: wire-format frames and small oracle values.

``compute()`` rebuilds every vector from the library; ``verify()`` compares
that against a stored JSON file (by default the copy shipped in the package).
Bytes and integers must match exactly, floats to a relative 1e-12.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import ula_steering, upa_steering
from .codec import pack_bits, quantize
from .metrics import nmse_db
from .nn import BatchNorm, Conv2D, Dense, Sequential, build_ae1, build_ae2, count_flops
from .numerics import crandn, make_rng
from .protocol import FeedbackMessage, FrameKind, compression_ratios, encode_payload, equivalent_overhead

FLOAT_RTOL = 1e-12
GOLDEN_NAME = "golden.json"


def _frame(kind, t, code, n_q):
    n_bits, payload = encode_payload(code, n_q)
    return FeedbackMessage(kind, t, n_bits, payload).to_bytes().hex()


def _cplx(z):
    return [[float(v.real), float(v.imag)] for v in np.ravel(z)]


def compute() -> dict:
    H = crandn(make_rng(11), (4, 2))
    overhead = []
    for args in [(4, 512, 64, 9), (4, 512, 64, 4), (4, 512, 64, 0), (2, 128, 16, 3), (8, 32, 32, 1)]:
        overhead.append({"args": list(args), "bits": str(equivalent_overhead(*args, exact=True))})
    return {
        "format": 1,
        "quantize": {
            "n_q": 4,
            "values": [0.0, 0.25, 0.5, 0.75, 1.0],
            "indices": quantize([0.0, 0.25, 0.5, 0.75, 1.0], 4).tolist(),
        },
        "pack": [
            {"n_q": 4, "indices": [10, 5], "hex": pack_bits([10, 5], 4).hex()},
            {"n_q": 3, "indices": [5, 1, 7], "hex": pack_bits([5, 1, 7], 3).hex()},
            {"n_q": 1, "indices": [1, 0, 1], "hex": pack_bits([1, 0, 1], 1).hex()},
        ],
        "frames": [
            {"kind": "FULL", "t": 0, "n_q": 4, "code": np.linspace(0, 1, 16).tolist(),
             "hex": _frame(FrameKind.FULL, 0, np.linspace(0, 1, 16), 4)},
            {"kind": "RATIO", "t": 3, "n_q": 2, "code": np.linspace(0.05, 0.95, 10).tolist(),
             "hex": _frame(FrameKind.RATIO, 3, np.linspace(0.05, 0.95, 10), 2)},
            {"kind": "RATIO", "t": 7, "n_q": None, "code": [0.125, 0.5, 0.875],
             "hex": _frame(FrameKind.RATIO, 7, [0.125, 0.5, 0.875], None)},
        ],
        "overhead": overhead,
        "compression_ratios": [
            {"args": [512, 64, 32, 256], "gammas": [str(Fraction(g).limit_denominator()) for g in
                                                    compression_ratios(512, 64, 32, 256)]},
        ],
        "nmse_db": {"scale": 0.9, "value": nmse_db(H, 0.9 * H)},
        "steering": {
            "ula_n2_sin1": _cplx(ula_steering(2, 1.0)),
            "upa_2x2_u0.3_v-0.2": _cplx(upa_steering(2, 2, 0.3, -0.2)),
        },
        "rng": {
            "seed": 11,
            "keys": [3],
            "standard_normal": make_rng(11, 3).standard_normal(4).tolist(),
            "crandn_4x2": _cplx(H),
        },
        "flops": {
            "dense_4_2": count_flops(Sequential([Dense(4, 2)], input_shape=(4,))),
            "conv_3x3_2_2_8x8": Conv2D(2, 2, 3).flops((2, 8, 8)),
            "batch_norm_3x4x5": BatchNorm(3).flops((3, 4, 5)),
            "ae1_64x8_256": count_flops(build_ae1(64, 8, 256)),
            "ae2_64_32": count_flops(build_ae2(64, 32)),
        },
    }


def load(path=None) -> dict:
    if path is None:
        text = resources.files("risfb.data").joinpath(GOLDEN_NAME).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


def emit(out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / GOLDEN_NAME
    path.write_text(json.dumps(compute(), indent=2) + "\n", encoding="utf-8")
    return path


def _diff(expected, actual, where, out):
    if isinstance(expected, dict) and isinstance(actual, dict):
        for key in sorted(set(expected) | set(actual)):
            if key not in expected or key not in actual:
                out.append(f"{where}.{key}: present on one side only")
            else:
                _diff(expected[key], actual[key], f"{where}.{key}", out)
    elif isinstance(expected, list) and isinstance(actual, list):
        if len(expected) != len(actual):
            out.append(f"{where}: length {len(actual)} != {len(expected)}")
        for i, (e, a) in enumerate(zip(expected, actual)):
            _diff(e, a, f"{where}[{i}]", out)
    elif isinstance(expected, float) or isinstance(actual, float):
        if not math.isclose(float(expected), float(actual), rel_tol=FLOAT_RTOL, abs_tol=1e-300):
            out.append(f"{where}: {actual!r} != {expected!r}")
    elif expected != actual:
        out.append(f"{where}: {actual!r} != {expected!r}")


def verify(path=None) -> list[str]:
    """Mismatches between the stored vectors and a fresh computation (empty when all agree)."""
    mismatches = []
    _diff(load(path), json.loads(json.dumps(compute())), "golden", mismatches)
    return mismatches
