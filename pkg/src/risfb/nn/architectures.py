"""The two feedback autoencoders.

AE1 compresses a full cascaded channel viewed as a ``(2, n_ris, n_t)`` real
image; AE2 compresses a ratio vector viewed as a flat ``2 * n_ris`` vector.
Both encoders end in a sigmoid so codewords live in ``(0, 1)`` for the
uniform quantizer, and both decoders end in ``tanh``.
"""
from __future__ import annotations

from ..errors import DomainError
from ..numerics import make_rng
from .layers import BatchNorm, Conv2D, Dense, LeakyReLU, Reshape, ReZeroResidual, Sigmoid, Tanh
from .model import AutoEncoder, Sequential


def _refine_block(channels, slope, rng):
    """Three 3x3 convs with batch norm; LeakyReLU after all but the last."""
    layers = []
    widths = list(channels)
    for i, (c_in, c_out) in enumerate(zip(widths[:-1], widths[1:])):
        layers += [Conv2D(c_in, c_out, 3, rng=rng), BatchNorm(c_out)]
        if i < len(widths) - 2:
            layers.append(LeakyReLU(slope))
    return ReZeroResidual(Sequential(layers))


def build_ae1(n_ris: int, n_t: int, n_s1: int, filters: int = 16, refine=(8, 16),
              slope: float = 0.3, seed: int = 0) -> AutoEncoder:
    """Convolutional autoencoder for the full cascaded channel.

    Encoder: conv 3x3 (2 -> ``filters``), batch norm, LeakyReLU, flatten,
    dense to ``n_s1``, sigmoid.  Decoder: dense back to ``2 n_ris n_t``,
    reshape, two ReZero RefineNet blocks (2 -> refine... -> 2), tanh.
    """
    n_real = 2 * n_ris * n_t
    if n_ris < 1 or n_t < 1 or not 1 <= n_s1 <= n_real:
        raise DomainError(f"need 1 <= n_s1 <= {n_real}, got {n_s1}")
    rng = make_rng(seed, 1)
    shape = (2, n_ris, n_t)
    encoder = Sequential([
        Conv2D(2, filters, 3, rng=rng),
        BatchNorm(filters),
        LeakyReLU(slope),
        Reshape((-1,)),
        Dense(filters * n_ris * n_t, n_s1, rng=rng),
        Sigmoid(),
    ], input_shape=shape)
    chain = (2, *refine, 2)
    decoder = Sequential([
        Dense(n_s1, n_real, rng=rng),
        Reshape(shape),
        _refine_block(chain, slope, rng),
        _refine_block(chain, slope, rng),
        Tanh(),
    ], input_shape=(n_s1,))
    arch = {"kind": "ae1", "n_ris": n_ris, "n_t": n_t, "n_s1": n_s1, "filters": filters,
            "refine": ",".join(map(str, refine)), "slope": slope, "seed": seed}
    return AutoEncoder(encoder, decoder, arch)


def build_ae2(n_ris: int, n_s2: int, hidden: int | None = None, slope: float = 0.3,
              seed: int = 0) -> AutoEncoder:
    """Fully connected autoencoder for the ratio vector.

    ``hidden`` defaults to ``4 * n_s2``.
    """
    n_real = 2 * n_ris
    if n_ris < 1 or not 1 <= n_s2 <= n_real:
        raise DomainError(f"need 1 <= n_s2 <= {n_real}, got {n_s2}")
    hidden = 4 * n_s2 if hidden is None else hidden
    rng = make_rng(seed, 2)
    encoder = Sequential([
        Dense(n_real, hidden, rng=rng),
        LeakyReLU(slope),
        Dense(hidden, n_s2, rng=rng),
        Sigmoid(),
    ], input_shape=(n_real,))

    def residual():
        return ReZeroResidual(Sequential([
            Dense(n_real, hidden, rng=rng),
            LeakyReLU(slope),
            Dense(hidden, n_real, rng=rng),
        ]))

    decoder = Sequential([
        Dense(n_s2, hidden, rng=rng),
        LeakyReLU(slope),
        Dense(hidden, n_real, rng=rng),
        residual(),
        residual(),
        Tanh(),
    ], input_shape=(n_s2,))
    arch = {"kind": "ae2", "n_ris": n_ris, "n_s2": n_s2, "hidden": hidden, "slope": slope, "seed": seed}
    return AutoEncoder(encoder, decoder, arch)


def build_from_arch(arch: dict) -> AutoEncoder:
    """Rebuild an (untrained) autoencoder from its ``arch`` description."""
    kind = arch.get("kind")
    if kind == "ae1":
        refine = tuple(int(c) for c in str(arch["refine"]).split(","))
        return build_ae1(int(arch["n_ris"]), int(arch["n_t"]), int(arch["n_s1"]),
                         filters=int(arch["filters"]), refine=refine,
                         slope=float(arch["slope"]), seed=int(arch["seed"]))
    if kind == "ae2":
        return build_ae2(int(arch["n_ris"]), int(arch["n_s2"]), hidden=int(arch["hidden"]),
                         slope=float(arch["slope"]), seed=int(arch["seed"]))
    raise DomainError(f"unknown architecture kind {kind!r}")
