"""Covariance-matrix dynamics and entanglement of two oscillators in a shared bath."""

from .dynamics import (CovarianceFlow, build_diffusion, build_drift, evolve,
                       evolve_ode_oracle, expm_scaling_squaring, ode_oracle_batch,
                       ode_oracle_path, propagator, steady_state)
from .entanglement import (asymptotic_a_block, asymptotic_c_block, asymptotic_det_c,
                           asymptotic_negativity, asymptotic_simon_gibbs,
                           entanglement_interval, in_entanglement_interval, log_negativity,
                           simon_s)
from .events import detect_events, trace
from .model import (CovarianceMatrix, EnvironmentSpec, OscillatorSpec, blocks, check_physical,
                    gibbs_environment, preset_covariance, symmetric_environment,
                    validate_environment)

__version__ = "0.1.0"

__all__ = [
    "CovarianceFlow", "CovarianceMatrix", "EnvironmentSpec", "OscillatorSpec",
    "asymptotic_a_block", "asymptotic_c_block", "asymptotic_det_c", "asymptotic_negativity",
    "asymptotic_simon_gibbs", "blocks", "build_diffusion", "build_drift", "check_physical",
    "detect_events", "entanglement_interval", "evolve", "evolve_ode_oracle",
    "expm_scaling_squaring", "gibbs_environment", "in_entanglement_interval",
    "log_negativity", "ode_oracle_batch", "ode_oracle_path", "preset_covariance", "propagator", "simon_s", "steady_state",
    "symmetric_environment", "trace", "validate_environment",
]
