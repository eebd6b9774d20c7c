"""BS-RIS, RIS-UE and cascaded channel generation.

The BS-RIS link follows a narrowband Saleh-Valenzuela (clustered multipath)
model between a ULA at the BS and a UPA at the RIS, and drifts across large
timescales through a first-order autoregression.  The RIS-UE link is a
small geometric multipath model whose paths rotate in phase with their
Doppler shifts, so ``a(t)`` varies smoothly from one feedback interval to
the next while the BS-RIS link stays frozen.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .numerics import as_cmat, as_cvec, crandn

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 2.655e9


@dataclass(frozen=True)
class ArrayGeometry:
    """BS ULA with ``n_t`` antennas and an ``n1 x n2`` RIS."""

    n_t: int = 8
    n1: int = 8
    n2: int = 8
    spacing: float = 0.5  # in wavelengths

    def __post_init__(self):
        if self.n_t < 1 or self.n1 < 1 or self.n2 < 1:
            raise DomainError("array sizes must be positive")
        if self.spacing <= 0:
            raise DomainError("element spacing must be positive")

    @property
    def n_ris(self) -> int:
        return self.n1 * self.n2

    @classmethod
    def full_size(cls):
        """32 BS antennas and a 16 x 16 RIS."""
        return cls(n_t=32, n1=16, n2=16)


@dataclass(frozen=True)
class BsRisParams:
    n_paths: int = 8
    rho: float = 0.9

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError("rho must lie in [0, 1]")


@dataclass(frozen=True)
class RisUePaths:
    """Frozen multipath description of one UE's RIS-UE link."""

    n1: int
    n2: int
    gains: np.ndarray           # (L,) complex
    sin_az_cos_el: np.ndarray   # (L,)
    sin_el: np.ndarray          # (L,)
    doppler: np.ndarray         # (L,) Hz
    dt: float                   # seconds per feedback interval

    @property
    def n_paths(self) -> int:
        return self.gains.shape[0]


def _check_sine(s):
    s = np.asarray(s, dtype=np.float64)
    if np.any(np.abs(s) > 1.0):
        raise DomainError("direction sines must lie in [-1, 1]")
    return s


def _ula_columns(n, sines, spacing=0.5):
    """Steering vectors as columns, shape (n, len(sines))."""
    k = np.arange(n)[:, None]
    return np.exp(2j * np.pi * spacing * k * np.atleast_1d(sines)[None, :]) / np.sqrt(n)


def ula_steering(n: int, sin_angle: float, spacing: float = 0.5) -> np.ndarray:
    """Unit-norm ULA response ``exp(j 2 pi d k sin) / sqrt(n)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    _check_sine(sin_angle)
    return _ula_columns(n, float(sin_angle), spacing)[:, 0]


def _upa_columns(n1, n2, u, v, spacing=0.5):
    cu = _ula_columns(n1, u, spacing)
    cv = _ula_columns(n2, v, spacing)
    # column-wise Kronecker product
    return (cu[:, None, :] * cv[None, :, :]).reshape(n1 * n2, -1)


def upa_steering(n1: int, n2: int, sin_az_cos_el: float, sin_el: float,
                 spacing: float = 0.5) -> np.ndarray:
    """Unit-norm UPA response, the Kronecker product of the two axis responses."""
    if n1 < 1 or n2 < 1:
        raise DomainError("n1, n2 must be >= 1")
    _check_sine(sin_az_cos_el)
    _check_sine(sin_el)
    return np.kron(ula_steering(n1, sin_az_cos_el, spacing), ula_steering(n2, sin_el, spacing))


def _draw_ris_directions(rng, size):
    # uniform over the front hemisphere: azimuth uniform, sin(elevation) uniform
    az = rng.uniform(-np.pi / 2, np.pi / 2, size)
    sin_el = rng.uniform(-1.0, 1.0, size)
    cos_el = np.sqrt(1.0 - sin_el**2)
    return np.sin(az) * cos_el, sin_el


def sv_channel(geometry: ArrayGeometry, gains, ris_u, ris_v, bs_sines) -> np.ndarray:
    """Deterministic Saleh-Valenzuela BS-RIS matrix for explicit path parameters.

    ``B = sqrt(n_t n_ris / L) sum_l gains_l a_ris(l) a_bs(l)^H``.
    """
    gains = np.atleast_1d(np.asarray(gains, dtype=np.complex128))
    ris_u, ris_v, bs_sines = (_check_sine(np.atleast_1d(x)) for x in (ris_u, ris_v, bs_sines))
    L = gains.shape[0]
    if not (ris_u.shape[0] == ris_v.shape[0] == bs_sines.shape[0] == L):
        raise DimensionError("path parameter arrays must have equal length")
    g = geometry
    A_ris = _upa_columns(g.n1, g.n2, ris_u, ris_v, g.spacing)
    A_bs = _ula_columns(g.n_t, bs_sines, g.spacing)
    scale = np.sqrt(g.n_t * g.n_ris / L)
    return scale * (A_ris * gains[None, :]) @ A_bs.conj().T


def gen_bs_ris(geometry: ArrayGeometry, params: BsRisParams, rng: np.random.Generator) -> np.ndarray:
    """Draw one BS-RIS channel of shape ``(n_ris, n_t)``; ``E||B||_F^2 = n_t n_ris``."""
    L = params.n_paths
    gains = crandn(rng, L)
    bs_sines = rng.uniform(-1.0, 1.0, L)
    u, v = _draw_ris_directions(rng, L)
    return sv_channel(geometry, gains, u, v, bs_sines)


def evolve_bs_ris(B_prev, rho: float, rng: np.random.Generator,
                  geometry: ArrayGeometry, params: BsRisParams) -> np.ndarray:
    """One autoregressive step ``rho B_prev + sqrt(1 - rho^2) E``.

    The innovation ``E`` is a fresh draw from :func:`gen_bs_ris`, so the second
    moment of ``B`` is preserved.  For ``rho == 1`` no randomness is consumed.
    """
    if not 0.0 <= rho <= 1.0:
        raise DomainError("rho must lie in [0, 1]")
    B_prev = as_cmat(B_prev, "B_prev")
    if B_prev.shape != (geometry.n_ris, geometry.n_t):
        raise DimensionError(f"B_prev shape {B_prev.shape} does not match geometry")
    if rho == 1.0:
        return B_prev.copy()
    innovation = gen_bs_ris(geometry, params, rng)
    return rho * B_prev + np.sqrt(1.0 - rho**2) * innovation


def max_doppler(speed: float, wavelength: float) -> float:
    return speed / wavelength


def gen_ris_ue_paths(geometry: ArrayGeometry, speed: float, wavelength: float, dt: float,
                     n_paths: int, rng: np.random.Generator) -> RisUePaths:
    """Draw the multipath state of one UE.

    Each path has a CN(0, 1) gain, a departure direction uniform over the RIS
    front hemisphere and a Doppler shift ``(speed / wavelength) cos(zeta)``
    with ``zeta`` uniform on ``[0, 2 pi)``.
    """
    if speed < 0:
        raise DomainError("speed must be non-negative")
    if dt <= 0 or wavelength <= 0:
        raise DomainError("dt and wavelength must be positive")
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    gains = crandn(rng, n_paths)
    u, v = _draw_ris_directions(rng, n_paths)
    zeta = rng.uniform(0.0, 2 * np.pi, n_paths)
    doppler = max_doppler(speed, wavelength) * np.cos(zeta)
    return RisUePaths(geometry.n1, geometry.n2, gains, u, v, doppler, float(dt))


def ris_ue_series(paths: RisUePaths, times) -> np.ndarray:
    """RIS-UE channels at integer interval indices ``times``; shape ``(len(times), n_ris)``."""
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if np.any(times < 0):
        raise DomainError("interval index must be >= 0")
    n_ris = paths.n1 * paths.n2
    steer = _upa_columns(paths.n1, paths.n2, paths.sin_az_cos_el, paths.sin_el)  # (n_ris, L)
    phase = np.exp(2j * np.pi * np.outer(times * paths.dt, paths.doppler))     # (len, L)
    coeff = phase * paths.gains[None, :] * np.sqrt(n_ris / paths.n_paths)
    return coeff @ steer.T


def ris_ue_at(paths: RisUePaths, t: int) -> np.ndarray:
    """RIS-UE channel ``a(t)`` after ``t`` feedback intervals."""
    return ris_ue_series(paths, [t])[0]


def cascade(a, B) -> np.ndarray:
    """Cascaded channel ``diag(a) B``: row ``i`` is ``a_i * b_i``."""
    a = as_cvec(a, "a")
    B = as_cmat(B, "B")
    if a.shape[0] != B.shape[0]:
        raise DimensionError(f"a has {a.shape[0]} entries but B has {B.shape[0]} rows")
    return a[:, None] * B
