"""Probability that a Gaussian vector falls in a quadratic sublevel set.

``P(u' Q2 u + q1' u + c < 0)`` for ``u ~ N(mean, cov)`` is rewritten as the
CDF at zero of a generalized chi-square variable

    G = sum_i w_i chi'^2(k_i, lambda_i) + s Z + m,

whose CDF is obtained by inverting its characteristic function (Imhof).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import AccuracyNotReached, NonPSDCovariance
from .moments import TrivariateGaussian

PSD_TOL = 1e-12
ZERO_EIG_TOL = 1e-10
CDF_ABS_TOL = 1e-6
# the inversion integral is truncated once the bound on its remainder falls below this
TAIL_TOL = 1e-9
ASYMPTOTIC_WT = 5.0
MAX_HEAD = 2.0**40
# panels spanning more radians than this at the local slope use QAWO
PANEL_CYCLES = 50.0
# tail probabilities provably below this are returned as exactly 0 or 1
BOUND_TOL = 1e-7


@dataclass(frozen=True)
class QuadraticDomain:
    """The set ``{u : u' q2 u + q1' u + c < 0}``."""

    q2: np.ndarray
    q1: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        q2 = np.asarray(self.q2, dtype=float)
        q1 = np.asarray(self.q1, dtype=float).reshape(-1)
        if q2.shape != (q1.size, q1.size):
            raise ValueError("q2 must be square and match q1")
        if not np.allclose(q2, q2.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(q2).max())):
            raise ValueError("q2 must be symmetric")
        object.__setattr__(self, "q2", 0.5 * (q2 + q2.T))
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "c", float(self.c))

    def value(self, u: np.ndarray) -> np.ndarray:
        """Quadratic form evaluated row-wise; ``u`` has shape ``(..., d)``."""
        u = np.asarray(u, dtype=float)
        return np.einsum("...i,ij,...j->...", u, self.q2, u) + u @ self.q1 + self.c

    def contains(self, u: np.ndarray) -> np.ndarray:
        return self.value(u) < 0


@dataclass(frozen=True)
class GChi2Params:
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    noncentralities: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lin_coeff: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        k = np.atleast_1d(np.asarray(self.dofs))
        lam = np.atleast_1d(np.asarray(self.noncentralities, dtype=float))
        if not (w.shape == k.shape == lam.shape) or w.ndim != 1:
            raise ValueError("weights, dofs and noncentralities must have equal length")
        if k.size and (np.any(k != np.round(k)) or np.any(k < 1)):
            raise ValueError("dofs must be positive integers")
        if np.any(lam < 0):
            raise ValueError("noncentralities must be >= 0")
        if not self.lin_coeff >= 0:
            raise ValueError("lin_coeff must be >= 0")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "dofs", k.astype(int))
        object.__setattr__(self, "noncentralities", lam)
        object.__setattr__(self, "lin_coeff", float(self.lin_coeff))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def mean(self) -> float:
        return float(np.sum(self.weights * (self.dofs + self.noncentralities)) + self.offset)

    @property
    def std(self) -> float:
        var = np.sum(2.0 * self.weights**2 * (self.dofs + 2.0 * self.noncentralities)) + self.lin_coeff**2
        return float(math.sqrt(var))


# ------------------------------------------------------------- reduction

def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root with eigenvalues below ``1e-12 * trace`` clamped to zero."""
    cov = np.asarray(cov, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    scale = max(float(np.trace(cov)), 0.0)
    if np.any(vals < -PSD_TOL * max(scale, np.finfo(float).tiny)):
        raise NonPSDCovariance(f"covariance has negative eigenvalue {vals.min():.3g}")
    vals = np.where(vals <= PSD_TOL * scale, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def reduce_to_gchi2(domain: QuadraticDomain, gauss: TrivariateGaussian) -> GChi2Params:
    """Generalized chi-square ``G`` with ``P(u in domain) = P(G < 0)``."""
    S = psd_sqrt(gauss.cov)
    mu = gauss.mean
    q2, q1 = domain.q2, domain.q1
    q2_std = S @ q2 @ S
    q1_std = 2.0 * S @ q2 @ mu + S @ q1
    c_std = float(mu @ q2 @ mu + q1 @ mu + domain.c)

    eigvals, V = np.linalg.eigh(0.5 * (q2_std + q2_std.T))
    a = V.T @ q1_std
    top = float(np.max(np.abs(eigvals))) if eigvals.size else 0.0
    live = np.abs(eigvals) > ZERO_EIG_TOL * top if top > 0 else np.zeros(eigvals.shape, bool)

    d, al = eigvals[live], a[live]
    lin = math.sqrt(float(np.sum(a[~live] ** 2)))
    offset = c_std - float(np.sum(al**2 / (4.0 * d)))
    return GChi2Params(
        weights=d,
        dofs=np.ones(d.size, dtype=int),
        noncentralities=(al / (2.0 * d)) ** 2,
        lin_coeff=lin,
        offset=offset,
    )


# ------------------------------------------------------------ CDF (Imhof)

class _Inversion:
    """Gil-Pelaez integrand for a standardized generalized chi-square.

    ``P(G <= x) = 1/2 - (1/pi) int_0^inf Im[e^{-itx} phi(t)] / t dt``.  Each
    term ``w (Z + sqrt(lam))^2`` is carried as ``w Z^2 + beta Z + w lam`` with
    ``beta = 2 w sqrt(lam)`` so that huge noncentralities (a quadratic form
    that is nearly linear) do not cancel inside the phase.  ``drift`` is
    ``E[linear part] - x``, i.e. ``offset + sum(w lam) - x``.
    """

    def __init__(self, w, k, lam, s, drift, omega):
        self.w, self.k, self.lam, self.s = w, k, lam, s
        self.beta2 = 4.0 * w * w * lam
        self.drift = drift
        # asymptotic phase slope, offset - x
        self.omega = omega

    def log_envelope(self, t):
        w2 = 4.0 * (self.w * t) ** 2
        return float(-np.sum(0.25 * self.k * np.log1p(w2) + 0.5 * self.beta2 * t * t / (1.0 + w2))
                     - 0.5 * self.s**2 * t * t)

    def envelope(self, t):
        return math.exp(self.log_envelope(t)) / t

    def phase(self, t):
        wt = self.w * t
        w2 = 4.0 * wt * wt
        return float(np.sum(0.5 * self.k * np.arctan(2.0 * wt) - self.beta2 * t * t * wt / (1.0 + w2))
                     + self.drift * t)

    def phase_slope(self, t):
        wt = self.w * t
        d = 1.0 + 4.0 * wt * wt
        return float(np.sum(self.k * self.w / d - self.beta2 * wt * t * (3.0 + 4.0 * wt * wt) / (d * d))
                     + self.drift)

    def residual_phase(self, t):
        """``phase(t) - omega t``; bounded as ``t -> inf``."""
        wt = self.w * t
        return float(np.sum(0.5 * self.k * np.arctan(2.0 * wt) + self.lam * wt / (1.0 + 4.0 * wt * wt)))

    def full(self, t):
        if t == 0.0:
            return float(np.sum(self.k * self.w)) + self.drift
        return math.sin(self.phase(t)) * self.envelope(t)

    def sin_part(self, t):
        return math.sin(self.residual_phase(t)) * self.envelope(t)

    def cos_part(self, t):
        return math.cos(self.residual_phase(t)) * self.envelope(t)


def _chernoff_log_bound(f: _Inversion, upper: bool) -> float:
    """``log`` of the Chernoff bound on ``P(G > x)`` (``upper``) or ``P(G <= x)``.

    Uses the standardized cumulant generating function
    ``sum[-(k/2) log(1 - 2wu) + (beta^2/2) u^2 / (1 - 2wu)] + s^2 u^2 / 2 + drift u``.
    """
    w, k, b2, s2, drift = f.w, f.k, f.beta2, f.s**2, f.drift

    def cgf(u):
        d = 1.0 - 2.0 * w * u
        if np.any(d <= 0):
            return np.inf
        return float(np.sum(-0.5 * k * np.log(d) + 0.5 * b2 * u * u / d) + 0.5 * s2 * u * u + drift * u)

    # 1 - 2 w u > 0 caps u on the side where w has the same sign as u
    same = w[w > 0] if upper else w[w < 0]
    reach = 10.0 * max(1.0, abs(drift))
    edge = float(np.min(0.5 / np.abs(same))) * (1.0 - 1e-9) if same.size else reach
    lo, hi = (0.0, min(edge, reach)) if upper else (-min(edge, reach), 0.0)
    res = optimize.minimize_scalar(cgf, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return min(float(res.fun), 0.0)


def _tail_bound(f: _Inversion, t: float) -> float:
    """Bound on ``int_t^inf envelope``; the envelope decays at least like ``t^{-1-sum(k)/2}``."""
    return f.envelope(t) * t * 2.0 / float(np.sum(f.k))


def _quad(fn, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, a, b, epsabs=1e-10, epsrel=1e-10, limit=2000, **kw)[:2]
    return val, err


def _quad_panel(f: _Inversion, a: float, b: float):
    """``int_a^b f.full``; fast oscillation is factored out at the local phase slope.

    With ``r(t) = phase(t) - nu t``, ``sin(phase) = sin(r) cos(nu t) + cos(r) sin(nu t)``
    and each piece goes to QUADPACK's Fourier-weighted rule.
    """
    nu = f.phase_slope(0.5 * (a + b))
    if abs(nu) * (b - a) < PANEL_CYCLES:
        return _quad(f.full, a, b)
    env = f.envelope

    def rest(t):
        return f.phase(t) - nu * t

    c_val, c_err = _quad(lambda t: math.sin(rest(t)) * env(t), a, b, weight="cos", wvar=nu)
    s_val, s_err = _quad(lambda t: math.cos(rest(t)) * env(t), a, b, weight="sin", wvar=nu)
    return c_val + s_val, c_err + s_err


def _quad_geometric(f: _Inversion, end: float):
    """Integrate ``f.full`` over ``[0, end]`` on panels ``[0, 1], [1, 2], [2, 4], ...``."""
    total, err = _quad(f.full, 0.0, min(1.0, end))
    a = 1.0
    while a < end:
        b = min(2.0 * a, end)
        v, e = _quad_panel(f, a, b)
        total, err = total + v, err + e
        a = b
    return total, err


def gchi2_cdf(params: GChi2Params, x: float = 0.0) -> float:
    """``P(G <= x)`` to absolute accuracy ``1e-6``.

    Raises :class:`AccuracyNotReached` when the quadrature error estimate is
    larger than that, or the inverted value leaves [0, 1] by more than it.
    """
    w = params.weights
    active = w != 0.0
    w = w[active]
    k = params.dofs[active].astype(float)
    lam = params.noncentralities[active]
    s = params.lin_coeff
    shift = x - params.offset

    if w.size == 0:
        if s > 0:
            return float(special.ndtr(shift / s))
        return 1.0 if shift >= 0 else 0.0

    scale = params.std
    # Cantelli: P(|G - mean| >= k std) <= 1/(1 + k^2) one-sided; far enough out
    # the answer is 0 or 1 within the accuracy contract without inverting
    k_far = (x - params.mean) / scale
    if 1.0 / (1.0 + k_far * k_far) <= CDF_ABS_TOL:
        return 1.0 if k_far > 0 else 0.0
    drift = (params.offset + float(np.sum(w * lam)) - x) / scale
    f = _Inversion(w / scale, k, lam, s / scale, drift, -shift / scale)
    if k_far < 0 and _chernoff_log_bound(f, upper=False) < math.log(BOUND_TOL):
        return 0.0
    if k_far > 0 and _chernoff_log_bound(f, upper=True) < math.log(BOUND_TOL):
        return 1.0

    # Extend the head until the remainder bound is negligible, or until the
    # residual phase has settled (t |w| large) so the tail can be handed to
    # Fourier-weighted QUADPACK at the asymptotic frequency.
    # QAWF also needs a full cycle of the asymptotic frequency ahead of it;
    # below that the head panels are nearly non-oscillatory and cheap
    settle = ASYMPTOTIC_WT / float(np.min(np.abs(f.w)))
    cycle = 2.0 * math.pi / abs(f.omega) if f.omega != 0.0 else 0.0
    end = 1.0
    while _tail_bound(f, end) >= TAIL_TOL and end < MAX_HEAD and (end < settle or end < cycle):
        end *= 2.0
    val, err = _quad_geometric(f, end)
    tail = _tail_bound(f, end)
    if tail < TAIL_TOL:
        err += tail
    elif f.omega == 0.0 or end < cycle:
        tv, te = _quad(f.full, end, np.inf)
        val, err = val + tv, err + te
    else:
        # sin(psi + omega t) = sin(psi) cos(omega t) + cos(psi) sin(omega t)
        sgn = math.copysign(1.0, f.omega)
        c_val, c_err = _quad(f.sin_part, end, np.inf, weight="cos", wvar=abs(f.omega))
        s_val, s_err = _quad(f.cos_part, end, np.inf, weight="sin", wvar=abs(f.omega))
        val += c_val + sgn * s_val
        err += c_err + s_err

    err /= math.pi
    p = 0.5 - val / math.pi
    if not math.isfinite(p) or err > CDF_ABS_TOL:
        raise AccuracyNotReached(f"CDF inversion error estimate {err:.2e} exceeds {CDF_ABS_TOL:g}")
    return _clamp_probability(p)


def _clamp_probability(p: float) -> float:
    if p < -CDF_ABS_TOL or p > 1.0 + CDF_ABS_TOL:
        raise AccuracyNotReached(f"inverted probability {p:.3g} outside [0, 1]")
    return min(1.0, max(0.0, p))


def gchi2_sample(params: GChi2Params, trials: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. draws of ``G``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    out = np.full(trials, params.offset, dtype=float)
    for w, k, lam in zip(params.weights, params.dofs, params.noncentralities):
        z = rng.standard_normal(trials) + math.sqrt(lam)
        term = z * z
        if k > 1:
            term += rng.chisquare(k - 1, trials)
        out += w * term
    if params.lin_coeff > 0:
        out += params.lin_coeff * rng.standard_normal(trials)
    return out


def domain_probability(domain: QuadraticDomain, gauss: TrivariateGaussian) -> float:
    """``P(u in domain)`` for ``u ~ gauss``."""
    return gchi2_cdf(reduce_to_gchi2(domain, gauss), 0.0)
