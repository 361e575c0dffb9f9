"""Photon-photon interaction mediated by two ZZ-coupled qubits.

Modules
-------
model
    System parameters, pulse shapes and the level scheme.
analytic
    Closed-form single-photon results.
engine
    Numerical one- and two-photon scattering (two independent backends).
pheno
    Reduced model, transistor figures of merit, pulse optimizer and gain.
circuit
    Transmon circuit model behind the ZZ coupling.
cli
    Command-line front end.
"""

from .analytic import SingleOutcome, p_ex, pt_closed, pt_detuned, smatrix_elastic
from .errors import (ConfigError, ConvergenceError, Infeasible, MappingInvalid,
                     OptimizationFailure, PhotonTransistorError)
from .model import (PulseSpec, Shape, SystemParams, control_pulse, fig2_params, level_scheme,
                    pulse_amp_freq, pulse_amp_time, target_pulse)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SystemParams",
    "PulseSpec",
    "Shape",
    "level_scheme",
    "pulse_amp_freq",
    "pulse_amp_time",
    "fig2_params",
    "target_pulse",
    "control_pulse",
    "SingleOutcome",
    "pt_closed",
    "pt_detuned",
    "smatrix_elastic",
    "p_ex",
    "PhotonTransistorError",
    "ConfigError",
    "ConvergenceError",
    "OptimizationFailure",
    "Infeasible",
    "MappingInvalid",
]
