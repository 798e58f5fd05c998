"""Link model: channel draws, steering vectors, beamformer, SINR and CRB.

Scalar entry points take a :class:`SystemConfig` and a
:class:`ChannelRealization`.  The ``*_batch`` variants evaluate the same
quantities for stacked channels ``h`` of shape ``(T, N)`` and angles of shape
``(T,)`` and are what the Monte Carlo estimators use.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, DegenerateBeamformer, SingularFisher

DEGENERATE_NORM = 1e-12
SINGULAR_DENOMINATOR = 1e-300
# |cos(theta)| below this is treated as exactly zero; float(pi/2) has cos ~6e-17
COS_ZERO = 1e-15


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the downlink ISAC link.

    Defaults are the reference operating point: 15 transmit and 17 receive
    antennas, ``p_t = 10``, unit noise variances, ``L = 30``, ``alpha = 1``,
    ``b1 = 0.2 exp(j pi/3)`` and ``b2 = 0.8``.
    """

    N: int = 15
    M: int = 17
    p_t: float = 10.0
    sigma_u2: float = 1.0
    sigma_r2: float = 1.0
    L: int = 30
    alpha: complex = 1.0
    b1_mag: float = 0.2
    b1_phase: float = math.pi / 3
    b2_mag: float = 0.8
    b2_phase: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not _is_int(self.N) or self.N < 2:
            raise ConfigError("N", f"transmit antenna count must be an integer >= 2, got {self.N!r}")
        if not _is_int(self.M) or self.M < 2:
            raise ConfigError("M", f"receive antenna count must be an integer >= 2, got {self.M!r}")
        if not _is_int(self.L) or self.L <= self.N:
            raise ConfigError("L", f"frame length must be an integer > N={self.N}, got {self.L!r}")
        for key in ("p_t", "sigma_u2", "sigma_r2"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(key, f"must be finite and > 0, got {value!r}")
        if not (cmath.isfinite(self.alpha) and abs(self.alpha) > 0):
            raise ConfigError("alpha", f"reflection coefficient must be nonzero, got {self.alpha!r}")
        for key in ("b1_mag", "b2_mag"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(key, f"must be finite and >= 0, got {value!r}")
        for key in ("b1_phase", "b2_phase"):
            if not math.isfinite(getattr(self, key)):
                raise ConfigError(key, "must be finite")
        if self.b1_mag + self.b2_mag <= 0:
            raise ConfigError("b1_mag", "b1_mag and b2_mag cannot both be zero")

    @property
    def b1(self) -> complex:
        return cmath.rect(self.b1_mag, self.b1_phase)

    @property
    def b2(self) -> complex:
        return cmath.rect(self.b2_mag, self.b2_phase)

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray = field(repr=False)
    theta: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.ndim != 1:
            raise ValueError("h must be a 1-D complex vector")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class Beamformer:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise ValueError("beamformer must have unit norm")
        object.__setattr__(self, "w", w)


# ---------------------------------------------------------------- sampling

def sample_channels(n_antennas: int, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` i.i.d. CN(0, I) channels and Uniform[0, pi] angles."""
    parts = rng.normal(0.0, math.sqrt(0.5), size=(count, n_antennas, 2))
    h = parts[..., 0] + 1j * parts[..., 1]
    theta = rng.uniform(0.0, math.pi, size=count)
    return h, theta


def sample_channel(config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    h, theta = sample_channels(config.N, 1, rng)
    return ChannelRealization(h[0], float(theta[0]))


# ------------------------------------------------------------ array model

def _cos(theta):
    c = np.cos(theta)
    return np.where(np.abs(c) <= COS_ZERO, 0.0, c)


def element_offsets(count: int) -> np.ndarray:
    """Half-integer element positions ``(count - (2i - 1)) / 2`` for i = 1..count."""
    i = np.arange(1, count + 1)
    return (count - (2 * i - 1)) / 2.0


def steering_phases(theta, count: int) -> np.ndarray:
    """Phases ``f_i = pi sin(theta) (count - (2i - 1)) / 2``; shape ``theta.shape + (count,)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    theta = np.asarray(theta, dtype=float)
    return math.pi * np.sin(theta)[..., None] * element_offsets(count)


def steering_vector(theta, count: int) -> np.ndarray:
    return np.exp(-1j * steering_phases(theta, count))


def steering_derivative(theta, count: int) -> np.ndarray:
    """Derivative of :func:`steering_vector` with respect to ``theta``."""
    theta = np.asarray(theta, dtype=float)
    slope = -1j * math.pi * _cos(theta)[..., None] * element_offsets(count)
    return slope * steering_vector(theta, count)


def steering_derivative_norm2(theta, count: int):
    """Closed form ``||b'(theta)||^2 = pi^2 cos^2(theta) (count - 1) count (count + 1) / 12``."""
    return math.pi**2 * _cos(theta) ** 2 * (count - 1) * count * (count + 1) / 12.0


# ------------------------------------------------------------- beamformer

def _mix(config: SystemConfig, h, theta):
    if h.shape[-1] != config.N:
        raise ValueError(f"channel has {h.shape[-1]} entries, config expects N={config.N}")
    return config.b1 * h + config.b2 * steering_vector(theta, h.shape[-1])


def beamformer(config: SystemConfig, chan: ChannelRealization) -> Beamformer:
    v = _mix(config, chan.h, chan.theta)
    norm = np.linalg.norm(v)
    if norm < DEGENERATE_NORM:
        raise DegenerateBeamformer(f"||b1 h + b2 a|| = {norm:.3g} is too small to normalise")
    return Beamformer(v / norm)


def sinr(config: SystemConfig, chan: ChannelRealization) -> float:
    w = beamformer(config, chan).w
    return config.p_t / config.sigma_u2 * abs(np.vdot(chan.h, w)) ** 2


def sinr_batch(config: SystemConfig, h: np.ndarray, theta: np.ndarray) -> np.ndarray:
    v = _mix(config, h, theta)
    norm2 = np.einsum("ij,ij->i", v.real, v.real) + np.einsum("ij,ij->i", v.imag, v.imag)
    if np.any(norm2 < DEGENERATE_NORM**2):
        raise DegenerateBeamformer("||b1 h + b2 a|| vanished for at least one draw")
    gain = np.abs(np.einsum("ij,ij->i", h.conj(), v)) ** 2
    return config.p_t / config.sigma_u2 * gain / norm2


# -------------------------------------------------------------------- CRB

def crb_general(config: SystemConfig, chan: ChannelRealization) -> float:
    """Trace-form CRB with ``A = b a^H`` and ``R_x = p_t w w^H``, evaluated literally."""
    N, M = config.N, config.M
    theta = chan.theta
    a = steering_vector(theta, N)
    a_dot = steering_derivative(theta, N)
    b = steering_vector(theta, M)
    b_dot = steering_derivative(theta, M)
    w = beamformer(config, chan).w

    A = np.outer(b, a.conj())
    A_dot = np.outer(b_dot, a.conj()) + np.outer(b, a_dot.conj())
    R = config.p_t * np.outer(w, w.conj())

    AhA = A.conj().T @ A
    t_aa = np.trace(AhA @ R).real
    t_dd = np.trace(A_dot.conj().T @ A_dot @ R).real
    t_da = np.trace(A_dot.conj().T @ A @ R)
    fisher = t_aa * t_dd - abs(t_da) ** 2
    denom = 2.0 * abs(config.alpha) ** 2 * config.L * fisher
    if denom < SINGULAR_DENOMINATOR:
        raise SingularFisher(f"Fisher information vanishes at theta={theta:.6g}")
    return config.sigma_r2 * t_aa / denom


def crb_gain(config: SystemConfig, theta):
    """``g(theta) = 6 sigma_r^2 / (L p_t |alpha|^2 (M-1) M (M+1) pi^2 cos^2 theta)``.

    Returns ``inf`` where ``cos(theta) = 0``.
    """
    bdot2 = steering_derivative_norm2(theta, config.M)
    scale = 2.0 * config.L * config.p_t * abs(config.alpha) ** 2
    with np.errstate(divide="ignore"):
        return np.divide(config.sigma_r2, scale * bdot2)


def crb_simplified(config: SystemConfig, chan: ChannelRealization) -> float:
    a = steering_vector(chan.theta, config.N)
    w = beamformer(config, chan).w
    bdot2 = steering_derivative_norm2(chan.theta, config.M)
    denom = 2.0 * config.L * config.p_t * abs(config.alpha) ** 2 * bdot2 * abs(np.vdot(a, w)) ** 2
    if denom < SINGULAR_DENOMINATOR:
        raise SingularFisher(f"Fisher information vanishes at theta={chan.theta:.6g}")
    return config.sigma_r2 / denom


def crb_batch(config: SystemConfig, h: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Simplified CRB per draw; singular draws come back as ``inf``."""
    a = steering_vector(theta, config.N)
    v = _mix(config, h, theta)
    norm2 = np.einsum("ij,ij->i", v.real, v.real) + np.einsum("ij,ij->i", v.imag, v.imag)
    if np.any(norm2 < DEGENERATE_NORM**2):
        raise DegenerateBeamformer("||b1 h + b2 a|| vanished for at least one draw")
    proj = np.abs(np.einsum("ij,ij->i", a.conj(), v)) ** 2 / norm2
    bdot2 = steering_derivative_norm2(theta, config.M)
    denom = 2.0 * config.L * config.p_t * abs(config.alpha) ** 2 * bdot2 * proj
    out = np.full(denom.shape, np.inf)
    ok = denom >= SINGULAR_DENOMINATOR
    out[ok] = config.sigma_r2 / denom[ok]
    return out
