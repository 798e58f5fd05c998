"""Outage analysis for a single-target, single-user MIMO ISAC link."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AccuracyNotReached,
    ConfigError,
    DegenerateBeamformer,
    ISACError,
    NonPSDCovariance,
    QuadratureNotConverged,
    SingularFisher,
)
from .model import (  # noqa: E402
    Beamformer,
    ChannelRealization,
    SystemConfig,
    beamformer,
    crb_general,
    crb_simplified,
    sample_channel,
    sinr,
    steering_derivative,
    steering_derivative_norm2,
    steering_vector,
)
from .moments import TrivariateGaussian, moments_target, moments_user  # noqa: E402
from .outage import (  # noqa: E402
    Estimate,
    Method,
    OutageQuery,
    ergodic_rate_montecarlo,
    target_op_analytic,
    target_op_montecarlo,
    user_op_analytic,
    user_op_montecarlo,
)
from .quadform import GChi2Params, QuadraticDomain, domain_probability, gchi2_cdf, reduce_to_gchi2  # noqa: E402
from .rng import random_stream  # noqa: E402

__all__ = [
    "AccuracyNotReached", "Beamformer", "ChannelRealization", "ConfigError", "DegenerateBeamformer",
    "Estimate", "GChi2Params", "ISACError", "Method", "NonPSDCovariance", "OutageQuery",
    "QuadraticDomain", "QuadratureNotConverged", "SingularFisher", "SystemConfig", "TrivariateGaussian",
    "beamformer", "crb_general", "crb_simplified", "domain_probability", "ergodic_rate_montecarlo",
    "gchi2_cdf", "moments_target", "moments_user", "random_stream", "reduce_to_gchi2", "sample_channel",
    "sinr", "steering_derivative", "steering_derivative_norm2", "steering_vector", "target_op_analytic",
    "target_op_montecarlo", "user_op_analytic", "user_op_montecarlo",
]
