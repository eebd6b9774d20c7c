"""Weight files.

Layout (little-endian)::

    magic "RCNN" | version u32
    arch_len u32 | arch text (utf-8 ``key = value`` lines)
    n_entries u32
    per entry: name_len u16 | name (utf-8) | ndim u8 | dims u32 * ndim
    float64 data of every entry, concatenated in manifest order

Entry names are ``params.<path>``, ``buffers.<path>`` or ``extra.<key>``;
the path embeds each layer's kind so the manifest is self-describing.
"""
from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from ..errors import DecodeError, FormatVersionError
from ..kvfile import parse_kv
from .architectures import build_from_arch
from .model import AutoEncoder

MAGIC = b"RCNN"
FORMAT_VERSION = 1


def _entries(model: AutoEncoder, extras):
    out = []
    for which in ("params", "buffers"):
        for name, layer, key in model.named(which):
            out.append((f"{which}.{name}", getattr(layer, which)[key]))
    for key, value in (extras or {}).items():
        out.append((f"extra.{key}", np.atleast_1d(np.asarray(value, dtype=np.float64))))
    return out


def save_model(model: AutoEncoder, path, extras: dict | None = None) -> Path:
    path = Path(path)
    arch = "\n".join(f"{k} = {v}" for k, v in model.arch.items()).encode("utf-8")
    entries = _entries(model, extras)
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(arch)), arch, struct.pack("<I", len(entries))]
    for name, arr in entries:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for _, arr in entries:
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    path.write_bytes(b"".join(chunks))
    return path


def load_model(path) -> tuple[AutoEncoder, dict]:
    """Return the rebuilt model and its ``extra`` entries."""
    path = Path(path)
    raw = path.read_bytes()
    try:
        if raw[:4] != MAGIC:
            raise DecodeError(f"{path}: bad magic {raw[:4]!r}")
        version, arch_len = struct.unpack_from("<II", raw, 4)
        if version != FORMAT_VERSION:
            raise FormatVersionError(f"{path}: unsupported weight file version {version}")
        pos = 12
        arch = parse_kv(raw[pos:pos + arch_len].decode("utf-8"), source=str(path))
        pos += arch_len
        (n_entries,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        manifest = []
        for _ in range(n_entries):
            (name_len,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", raw, pos)
            pos += 4 * ndim
            manifest.append((name, shape))
        arrays = {}
        for name, shape in manifest:
            count = math.prod(shape)
            if pos + 8 * count > len(raw):
                raise DecodeError(f"{path}: truncated data for {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).astype(np.float64).reshape(shape)
            pos += 8 * count
    except struct.error as exc:
        raise DecodeError(f"{path}: truncated weight file") from exc
    if pos != len(raw):
        raise DecodeError(f"{path}: {len(raw) - pos} trailing bytes")

    model = build_from_arch(arch)
    expected = _entries(model, None)
    for name, arr in expected:
        if name not in arrays or arrays[name].shape != arr.shape:
            raise DecodeError(f"{path}: manifest does not match architecture at {name}")
    for which in ("params", "buffers"):
        for name, layer, key in model.named(which):
            getattr(layer, which)[key] = arrays[f"{which}.{name}"].copy()
    extras = {k[len("extra."):]: v for k, v in arrays.items() if k.startswith("extra.")}
    return model, extras
