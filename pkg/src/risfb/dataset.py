"""Episode datasets of time-varying cascaded channels and their file format.

An episode is one large timescale: ``T + 1`` cascaded channels
``H(0), ..., H(T)`` sharing the same BS-RIS matrix.  Consecutive episodes
are linked by one autoregressive step of the BS-RIS channel, while each
episode draws a fresh UE (RIS-UE multipath state).

File layout (little-endian)::

    magic "RCSF" | version u32 | n_ris u32 | n_t u32 | T u32 | episodes u32 | seed u64
    complex128 body, shape (episodes, T + 1, n_ris, n_t), (re, im) interleaved

Geometry and generator parameters go to a ``<file>.meta`` key-value sidecar.
"""
from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import (
    DEFAULT_CARRIER_HZ,
    SPEED_OF_LIGHT,
    ArrayGeometry,
    BsRisParams,
    cascade,
    evolve_bs_ris,
    gen_bs_ris,
    gen_ris_ue_paths,
    ris_ue_series,
)
from .errors import DecodeError, DomainError, FormatVersionError
from .kvfile import read_kv, write_kv
from .numerics import make_rng

MAGIC = b"RCSF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIQ")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ChannelConfig:
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    T: int = 9
    n_paths_bs: int = 8
    n_paths_ue: int = 4
    rho: float = 0.9
    speed: float = 1.0           # m/s
    carrier_hz: float = DEFAULT_CARRIER_HZ
    dt: float = 5e-3             # s
    n_samples: int = 20_000      # cascaded channel matrices, all intervals counted
    split: tuple = (8, 1, 1)

    def __post_init__(self):
        if self.T < 0:
            raise DomainError("T must be >= 0")
        if self.n_samples < self.T + 1:
            raise DomainError("n_samples must cover at least one episode")
        if len(self.split) != 3 or min(self.split) < 0 or sum(self.split) <= 0:
            raise DomainError("split must be three non-negative weights")

    @property
    def n_episodes(self) -> int:
        return self.n_samples // (self.T + 1)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def bs_params(self) -> BsRisParams:
        return BsRisParams(n_paths=self.n_paths_bs, rho=self.rho)


def split_sizes(n_episodes: int, weights=(8, 1, 1)) -> dict[str, int]:
    total = sum(weights)
    n_train = n_episodes * weights[0] // total
    n_val = n_episodes * weights[1] // total
    return {"train": n_train, "val": n_val, "test": n_episodes - n_train - n_val}


@dataclass
class EpisodeDataset:
    config: ChannelConfig
    seed: int
    channels: np.ndarray  # (episodes, T + 1, n_ris, n_t) complex128

    @property
    def geometry(self) -> ArrayGeometry:
        return self.config.geometry

    @property
    def T(self) -> int:
        return self.channels.shape[1] - 1

    @property
    def n_episodes(self) -> int:
        return self.channels.shape[0]

    def split_slices(self) -> dict[str, slice]:
        sizes = split_sizes(self.n_episodes, self.config.split)
        out, start = {}, 0
        for name in SPLITS:
            out[name] = slice(start, start + sizes[name])
            start += sizes[name]
        return out

    def split(self, name: str) -> np.ndarray:
        """Episodes of one split, shape ``(n, T + 1, n_ris, n_t)``."""
        return self.channels[self.split_slices()[name]]


def gen_episode_channels(config: ChannelConfig, seed: int, n_episodes: int | None = None) -> np.ndarray:
    """Channel tensor of shape ``(n_episodes, T + 1, n_ris, n_t)``.

    Episode ``k`` draws from sub-stream ``(seed, k)``, so its randomness does
    not depend on how many episodes precede it.
    """
    g = config.geometry
    E = config.n_episodes if n_episodes is None else n_episodes
    times = np.arange(config.T + 1)
    params = config.bs_params
    out = np.empty((E, config.T + 1, g.n_ris, g.n_t), dtype=np.complex128)
    B = None
    for k in range(E):
        rng = make_rng(seed, k)
        if B is None:
            B = gen_bs_ris(g, params, rng)
        else:
            B = evolve_bs_ris(B, config.rho, rng, g, params)
        paths = gen_ris_ue_paths(g, config.speed, config.wavelength, config.dt, config.n_paths_ue, rng)
        a = ris_ue_series(paths, times)
        for t in times:
            out[k, t] = cascade(a[t], B)
    return out


def gen_dataset(config: ChannelConfig, seed: int) -> EpisodeDataset:
    return EpisodeDataset(config, int(seed), gen_episode_channels(config, seed))


def _meta(ds: EpisodeDataset) -> dict:
    c = ds.config
    g = c.geometry
    sizes = split_sizes(ds.n_episodes, c.split)
    return {
        "format_version": FORMAT_VERSION,
        "seed": ds.seed,
        "n_t": g.n_t,
        "n1": g.n1,
        "n2": g.n2,
        "spacing": repr(g.spacing),
        "T": c.T,
        "n_paths_bs": c.n_paths_bs,
        "n_paths_ue": c.n_paths_ue,
        "rho": repr(c.rho),
        "speed": repr(c.speed),
        "carrier_hz": repr(c.carrier_hz),
        "dt": repr(c.dt),
        "n_samples": c.n_samples,
        "split": ",".join(str(w) for w in c.split),
        "n_train": sizes["train"],
        "n_val": sizes["val"],
        "n_test": sizes["test"],
    }


def save_dataset(ds: EpisodeDataset, path) -> Path:
    path = Path(path)
    E, Tp1, n_ris, n_t = ds.channels.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, n_ris, n_t, Tp1 - 1, E, ds.seed)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(ds.channels, dtype="<c16").tobytes())
        write_kv(meta_path(path), _meta(ds))
    except OSError as exc:
        raise OSError(f"failed to write dataset {path}: {exc}") from exc
    return path


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def load_dataset(path) -> EpisodeDataset:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"failed to read dataset {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise DecodeError(f"{path}: truncated header")
    magic, version, n_ris, n_t, T, E, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DecodeError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"{path}: unsupported dataset version {version}")
    expected = E * (T + 1) * n_ris * n_t * 16
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise DecodeError(f"{path}: body has {len(body)} bytes, expected {expected}")
    channels = np.frombuffer(body, dtype="<c16").astype(np.complex128).reshape(E, T + 1, n_ris, n_t)

    meta = read_kv(meta_path(path))
    g = ArrayGeometry(int(meta["n_t"]), int(meta["n1"]), int(meta["n2"]), float(meta["spacing"]))
    if g.n_ris != n_ris or g.n_t != n_t:
        raise DecodeError(f"{path}: sidecar geometry disagrees with header")
    config = ChannelConfig(
        geometry=g,
        T=T,
        n_paths_bs=int(meta["n_paths_bs"]),
        n_paths_ue=int(meta["n_paths_ue"]),
        rho=float(meta["rho"]),
        speed=float(meta["speed"]),
        carrier_hz=float(meta["carrier_hz"]),
        dt=float(meta["dt"]),
        n_samples=int(meta["n_samples"]),
        split=tuple(int(w) for w in meta["split"].split(",")),
    )
    return EpisodeDataset(config, int(seed), channels)


def config_dict(config: ChannelConfig) -> dict:
    d = asdict(config)
    d["geometry"] = asdict(config.geometry)
    return d
