"""Per-antenna random triples and their trivariate-Gaussian CLT limits.

For antenna ``i`` with channel ``h_i = m + j n`` and steering phase ``f_i``:

* user triple   ``(x, y, k)``:  ``x + j y = b1 |h|^2 + b2 conj(h) e^{-jf}``
* target triple ``(x~, y~, k)``: ``x~ + j y~ = b1 e^{jf} h``

with ``k = |b1 h + b2 e^{-jf}|^2`` in both.  Summing over the ``N`` antennas
gives ``(X, Y, K)`` (SINR) and ``(X~, Y~, K)`` (CRB); conditioned on ``theta``
the per-antenna triples are i.i.d., so the sums are approximately
``N_3(N mu, N Sigma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import SystemConfig, steering_phases


class SampleTriple(NamedTuple):
    first: float | np.ndarray
    second: float | np.ndarray
    third: float | np.ndarray


@dataclass(frozen=True)
class TrivariateGaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(3)
        cov = np.asarray(self.cov, dtype=float).reshape(3, 3)
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @classmethod
    def standard(cls) -> "TrivariateGaussian":
        return cls(np.zeros(3), np.eye(3))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        # eigh-based factor tolerates the singular covariances that occur at b1=0 or b2=0
        vals, vecs = np.linalg.eigh(self.cov)
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
        z = rng.standard_normal((count, 3))
        return self.mean + z @ factor.T


# ----------------------------------------------------- per-antenna triples

def _split(h):
    h = np.asarray(h, dtype=complex)
    return h.real, h.imag


def sample_triple_user(h_i, f_i, config: SystemConfig) -> SampleTriple:
    """``(x_i, y_i, k_i)`` from the real expansions in ``m, n, |b1|, |b2|, phi1, phi2, f``.

    Accepts scalars or broadcastable arrays.
    """
    m, n = _split(h_i)
    r1, p1 = config.b1_mag, config.b1_phase
    r2, p2 = config.b2_mag, config.b2_phase
    power = m**2 + n**2
    d = p2 - np.asarray(f_i, dtype=float)
    x = r1 * power * math.cos(p1) + r2 * m * np.cos(d) + r2 * n * np.sin(d)
    y = r1 * power * math.sin(p1) + r2 * m * np.sin(d) - r2 * n * np.cos(d)
    return SampleTriple(x, y, _k_expansion(m, n, f_i, config))


def sample_triple_target(h_i, f_i, config: SystemConfig) -> SampleTriple:
    """``(x~_i, y~_i, k_i)``; the first two are the real/imag parts of ``b1 e^{jf} h``."""
    m, n = _split(h_i)
    r1 = config.b1_mag
    phase = config.b1_phase + np.asarray(f_i, dtype=float)
    c, s = np.cos(phase), np.sin(phase)
    x = r1 * c * m - r1 * n * s
    y = r1 * c * n + r1 * m * s
    return SampleTriple(x, y, _k_expansion(m, n, f_i, config))


def _k_expansion(m, n, f, config: SystemConfig):
    r1, r2 = config.b1_mag, config.b2_mag
    d = config.b2_phase - config.b1_phase - np.asarray(f, dtype=float)
    return (r1**2 * (m**2 + n**2)
            + 2.0 * m * r1 * r2 * np.cos(d)
            + 2.0 * n * r1 * r2 * np.sin(d)
            + r2**2)


def triple_sums(config: SystemConfig, h: np.ndarray, theta, target: bool = False) -> np.ndarray:
    """Sum the per-antenna triples over the array: ``(X, Y, K)`` or ``(X~, Y~, K)``.

    ``h`` has shape ``(T, N)``, ``theta`` shape ``(T,)``; returns ``(T, 3)``.
    """
    f = steering_phases(theta, config.N)
    fn = sample_triple_target if target else sample_triple_user
    triple = fn(h, f, config)
    return np.stack([np.sum(t, axis=-1) for t in triple], axis=-1)


# --------------------------------------------------------- closed-form moments

def user_moments_per_antenna(config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    r1, r2, p1 = config.b1_mag, config.b2_mag, config.b1_phase
    c, s = math.cos(p1), math.sin(p1)
    e_k = r1**2 + r2**2
    mean = np.array([r1 * c, r1 * s, e_k])
    cov = np.array([
        [r2**2 / 2 + r1**2 * c**2, r1**2 * c * s, r1 * e_k * c],
        [r1**2 * c * s, r2**2 / 2 + r1**2 * s**2, r1 * e_k * s],
        [r1 * e_k * c, r1 * e_k * s, r1**4 + 2 * r1**2 * r2**2],
    ])
    return mean, cov


def target_moments_per_antenna(config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    r1, r2, p2 = config.b1_mag, config.b2_mag, config.b2_phase
    ck = r1**2 * r2 * math.cos(p2)
    sk = r1**2 * r2 * math.sin(p2)
    mean = np.array([0.0, 0.0, r1**2 + r2**2])
    cov = np.array([
        [r1**2 / 2, 0.0, ck],
        [0.0, r1**2 / 2, sk],
        [ck, sk, r1**4 + 2 * r1**2 * r2**2],
    ])
    return mean, cov


def moments_user(config: SystemConfig) -> TrivariateGaussian:
    """CLT law of ``(X, Y, K)``; free of ``theta`` and ``phi2``."""
    mean, cov = user_moments_per_antenna(config)
    return TrivariateGaussian(config.N * mean, config.N * cov)


def moments_target(config: SystemConfig) -> TrivariateGaussian:
    """CLT law of ``(X~, Y~, K)``; free of ``theta`` and ``phi1``."""
    mean, cov = target_moments_per_antenna(config)
    return TrivariateGaussian(config.N * mean, config.N * cov)


# ------------------------------------------------- empirical moment check

@dataclass(frozen=True)
class MomentMatch:
    """Entrywise comparison of sample moments against expected ones.

    ``z_mean`` and ``z_cov`` are the deviations divided by jackknife standard
    errors; entries whose standard error and deviation are both ~0 score 0.
    """

    mean: np.ndarray
    cov: np.ndarray
    se_mean: np.ndarray
    se_cov: np.ndarray
    z_mean: np.ndarray
    z_cov: np.ndarray

    @property
    def max_z(self) -> float:
        return float(max(np.max(np.abs(self.z_mean)), np.max(np.abs(self.z_cov))))


def jackknife_moments(samples: np.ndarray, n_blocks: int = 100) -> tuple[np.ndarray, ...]:
    """Sample mean/covariance of ``samples`` (shape ``(n, d)``) with delete-one-block jackknife SEs."""
    samples = np.asarray(samples, dtype=float)
    n, dim = samples.shape
    if n < 2 * n_blocks:
        raise ValueError("need at least two samples per jackknife block")
    usable = n - n % n_blocks
    blocks = samples[:usable].reshape(n_blocks, usable // n_blocks, dim)
    s1 = blocks.sum(axis=1)
    s2 = np.einsum("bij,bik->bjk", blocks, blocks)
    tot1, tot2 = s1.sum(axis=0), s2.sum(axis=0)

    def stats(sum1, sum2, count):
        mu = sum1 / count
        return mu, sum2 / count - np.outer(mu, mu)

    mean, cov = stats(tot1, tot2, usable)
    loo = usable - usable // n_blocks
    jm = np.empty((n_blocks, dim))
    jc = np.empty((n_blocks, dim, dim))
    for b in range(n_blocks):
        jm[b], jc[b] = stats(tot1 - s1[b], tot2 - s2[b], loo)
    factor = (n_blocks - 1) / n_blocks
    se_mean = np.sqrt(factor * np.sum((jm - jm.mean(axis=0)) ** 2, axis=0))
    se_cov = np.sqrt(factor * np.sum((jc - jc.mean(axis=0)) ** 2, axis=0))
    return mean, cov, se_mean, se_cov


def moment_match(samples: np.ndarray, mean: np.ndarray, cov: np.ndarray, n_blocks: int = 100) -> MomentMatch:
    emp_mean, emp_cov, se_mean, se_cov = jackknife_moments(samples, n_blocks)
    return MomentMatch(
        emp_mean, emp_cov, se_mean, se_cov,
        _zscore(emp_mean - mean, se_mean),
        _zscore(emp_cov - cov, se_cov),
    )


def _zscore(delta, se, floor=1e-12):
    delta = np.asarray(delta, dtype=float)
    z = np.zeros_like(delta)
    live = se > floor
    z[live] = delta[live] / se[live]
    # an entry with no sampling spread must then match exactly
    dead = ~live & (np.abs(delta) > floor)
    z[dead] = np.inf
    return z
