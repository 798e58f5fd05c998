"""User and target outage probabilities: CLT analysis and Monte Carlo."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged
from .model import SystemConfig, crb_batch, crb_gain, sample_channels, sinr_batch
from .moments import moments_target, moments_user
from .quadform import QuadraticDomain, domain_probability
from .rng import blocks, map_ordered, random_stream

THETA_TOL = 1e-4
MAX_THETA_NODES = 2048


class Method(str, Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class OutageQuery:
    config: SystemConfig = SystemConfig()
    gamma: float = 8.0
    epsilon: float = 8e-7
    trials: int = 10_000
    seed: int = 0
    theta_nodes: int = 32
    workers: int = 1

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.theta_nodes < 8:
            raise ValueError("theta_nodes must be >= 8")


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    method: Method


# ------------------------------------------------------------- domains

def user_domain(config: SystemConfig, gamma: float) -> QuadraticDomain:
    """``X^2 + Y^2 - (gamma sigma_u^2 / p_t) K < 0``, i.e. ``SINR < gamma``."""
    return QuadraticDomain(
        np.diag([1.0, 1.0, 0.0]),
        [0.0, 0.0, -gamma * config.sigma_u2 / config.p_t],
        0.0,
    )


def target_domain(config: SystemConfig, epsilon: float, theta: float) -> QuadraticDomain:
    """``CRB > epsilon`` at ``theta``.

    ``eps (X~^2 + Y~^2 + 2N Re(b2) X~ + 2N Im(b2) Y~ + N^2 |b2|^2) - g(theta) K < 0``.
    """
    N, b2 = config.N, config.b2
    g = float(crb_gain(config, theta))
    return QuadraticDomain(
        epsilon * np.diag([1.0, 1.0, 0.0]),
        [2 * N * epsilon * b2.real, 2 * N * epsilon * b2.imag, -g],
        epsilon * N**2 * abs(b2) ** 2,
    )


@lru_cache(maxsize=64)
def _half_gauss_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, pi/2] and [pi/2, pi], weights normalised to average over [0, pi]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    quarter = math.pi / 4
    left = quarter * (x + 1.0)
    right = left + math.pi / 2
    theta = np.concatenate([left, right])
    weight = np.concatenate([w, w]) * quarter / math.pi
    return theta, weight


def theta_average(fn, nodes: int) -> float:
    """``(1/pi) int_0^pi fn(theta) d theta`` by Gauss-Legendre on both half-intervals."""
    theta, weight = _half_gauss_legendre(nodes)
    return float(sum(wt * fn(float(t)) for t, wt in zip(theta, weight)))


# ------------------------------------------------------------ analytic

def user_op_analytic(query: OutageQuery, average_theta: bool = False) -> Estimate:
    """``P(SINR < gamma)`` from the CLT law of ``(X, Y, K)``.

    The conditional law does not involve ``theta``; with ``average_theta`` the
    conditional probability is still integrated over ``theta`` explicitly,
    which must give the same number.
    """
    cfg = query.config
    domain = user_domain(cfg, query.gamma)
    if not average_theta:
        p = domain_probability(domain, moments_user(cfg))
    else:
        p = theta_average(lambda _t: domain_probability(domain, moments_user(cfg)), query.theta_nodes)
    return Estimate(p, 0.0, Method.ANALYTIC)


def _conditional_target(config: SystemConfig, epsilon: float):
    gauss = moments_target(config)

    def inner(theta):
        if not math.isfinite(float(crb_gain(config, theta))):
            return 1.0
        return domain_probability(target_domain(config, epsilon, theta), gauss)

    return inner


def _bisect(fn, lo, hi, inside, steps=40):
    """Narrow ``[lo, hi]`` around the last point where ``inside(fn(theta))`` holds."""
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if inside(fn(mid)):
            lo = mid
        else:
            hi = mid
    return lo, hi


def transition_band(inner, scan: int = 64) -> tuple[float, float]:
    """``[a, b]`` within ``[0, pi/2]`` outside which ``inner`` is exactly 0 (left) or 1 (right).

    ``inner`` rises with ``theta`` on this half-interval (the CRB gain grows
    like ``1/cos^2``), and the CDF returns exact 0 or 1 once a Chernoff bound
    puts the answer within 1e-7 of it.  A coarse scan brackets both edges and
    bisection tightens them.
    """
    grid = np.linspace(0.0, math.pi / 2, scan + 1)
    values = [inner(float(t)) for t in grid]
    zeros = 0
    while zeros < len(values) and values[zeros] == 0.0:
        zeros += 1
    ones = len(values)
    while ones > zeros and values[ones - 1] == 1.0:
        ones -= 1
    a = 0.0 if zeros == 0 else _bisect(inner, grid[zeros - 1], grid[min(zeros, scan)], lambda v: v == 0.0)[0]
    if ones == len(values):
        b = math.pi / 2
    else:
        b = _bisect(inner, grid[max(ones - 1, 0)], grid[ones], lambda v: v != 1.0)[1]
    return a, max(a, b)


def _gauss_legendre(fn, a: float, b: float, nodes: int) -> float:
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (b - a)
    return float(half * sum(wi * fn(float(a + half * (xi + 1.0))) for xi, wi in zip(x, w)))


def target_op_analytic(query: OutageQuery) -> Estimate:
    """``P(CRB > epsilon)`` averaged over ``theta ~ U[0, pi]``.

    The integrand depends on ``theta`` only through ``cos^2``, so the two
    half-intervals mirror each other and ``[0, pi/2]`` is integrated once.
    The conditional outage probability switches from 0 to 1 over a band of
    angles that can be very narrow; the band is located first and
    Gauss-Legendre runs on it only, starting at ``theta_nodes`` nodes and
    doubling until successive results agree to ``1e-4``.  Raises
    :class:`QuadratureNotConverged` if that has not happened by
    ``MAX_THETA_NODES``.
    """
    inner = _conditional_target(query.config, query.epsilon)
    a, b = transition_band(inner)
    scale = 2.0 / math.pi
    flat = scale * (math.pi / 2 - b)
    if b - a <= 0.0:
        return Estimate(min(1.0, flat), 0.0, Method.ANALYTIC)
    nodes = query.theta_nodes
    prev = _gauss_legendre(inner, a, b, nodes)
    while True:
        nodes *= 2
        cur = _gauss_legendre(inner, a, b, nodes)
        if scale * abs(cur - prev) <= THETA_TOL:
            return Estimate(min(1.0, max(0.0, flat + scale * cur)), 0.0, Method.ANALYTIC)
        if nodes >= MAX_THETA_NODES:
            raise QuadratureNotConverged(
                f"theta quadrature still moved by {scale * abs(cur - prev):.2e} at {nodes} nodes"
            )
        prev = cur


# --------------------------------------------------------- Monte Carlo

def _draw_block(config: SystemConfig, seed: int, index: int, size: int):
    return sample_channels(config.N, size, random_stream(seed, index))


def monte_carlo_blocks(query: OutageQuery, statistic) -> list:
    """Apply ``statistic(h, theta)`` to every trial block, in block order."""
    cfg = query.config

    def run(index, size):
        h, theta = _draw_block(cfg, query.seed, index, size)
        return statistic(h, theta)

    return map_ordered(run, list(blocks(query.trials)), query.workers)


def _binomial(hits: int, trials: int) -> Estimate:
    p = hits / trials
    return Estimate(p, math.sqrt(p * (1.0 - p) / trials), Method.MONTE_CARLO)


def user_op_montecarlo(query: OutageQuery) -> Estimate:
    """Fraction of channel draws whose exact SINR falls below ``gamma``."""
    cfg, gamma = query.config, query.gamma
    counts = monte_carlo_blocks(query, lambda h, t: int(np.count_nonzero(sinr_batch(cfg, h, t) < gamma)))
    return _binomial(sum(counts), query.trials)


def target_op_montecarlo(query: OutageQuery, theta: float | None = None) -> Estimate:
    """Fraction of draws whose exact CRB exceeds ``epsilon``.

    Singular draws have infinite CRB and count as outages.  ``theta`` pins the
    target angle instead of drawing it.
    """
    cfg, eps = query.config, query.epsilon

    def stat(h, t):
        if theta is not None:
            t = np.full_like(t, theta)
        return int(np.count_nonzero(crb_batch(cfg, h, t) > eps))

    return _binomial(sum(monte_carlo_blocks(query, stat)), query.trials)


def outage_curves_montecarlo(query: OutageQuery, gammas=(), epsilons=()) -> tuple[list[Estimate], list[Estimate]]:
    """Monte Carlo ``P_u`` at every ``gamma`` and ``P_c`` at every ``epsilon`` from one set of draws.

    Each entry equals what :func:`user_op_montecarlo` / :func:`target_op_montecarlo`
    return for a query with that threshold and the same seed.
    """
    cfg = query.config
    gammas = np.asarray(gammas, dtype=float)
    epsilons = np.asarray(epsilons, dtype=float)

    def stat(h, t):
        s = sinr_batch(cfg, h, t) if gammas.size else np.zeros(0)
        c = crb_batch(cfg, h, t) if epsilons.size else np.zeros(0)
        return (np.count_nonzero(s[:, None] < gammas, axis=0) if gammas.size else np.zeros(0, int),
                np.count_nonzero(c[:, None] > epsilons, axis=0) if epsilons.size else np.zeros(0, int))

    parts = monte_carlo_blocks(query, stat)
    u_hits = sum((p[0] for p in parts), np.zeros(gammas.size, int))
    c_hits = sum((p[1] for p in parts), np.zeros(epsilons.size, int))
    return ([_binomial(int(n), query.trials) for n in u_hits],
            [_binomial(int(n), query.trials) for n in c_hits])


@dataclass(frozen=True)
class RateEstimate:
    value: float
    std_error: float


def ergodic_rate_montecarlo(query: OutageQuery) -> RateEstimate:
    """Mean of ``log2(1 + SINR)`` in bits per channel use."""
    cfg = query.config

    def stat(h, t):
        r = np.log2(1.0 + sinr_batch(cfg, h, t))
        return r.size, float(np.sum(r)), float(np.sum(r * r))

    parts = monte_carlo_blocks(query, stat)
    n = sum(p[0] for p in parts)
    s1 = math.fsum(p[1] for p in parts)
    s2 = math.fsum(p[2] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return RateEstimate(mean, math.sqrt(var / n))
