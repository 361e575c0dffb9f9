"""Closed-form single-photon results for a qubit side-coupled to a line.

All probabilities use the coherent convention: ``p_t`` and ``p_r`` count only
the elastically scattered part of the photon.  Weight scattered incoherently
by dephasing is reported together with relaxation loss in ``p_loss``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .model import SystemParams

__all__ = [
    "SingleOutcome",
    "pt_closed",
    "pt_detuned",
    "pt_detuned_closed",
    "smatrix_elastic",
    "p_ex",
]


@dataclass(frozen=True)
class SingleOutcome:
    """Single-photon channel probabilities.

    Attributes
    ----------
    p_t, p_r : float
        Coherent transmission and reflection probabilities.
    p_loss : float
        ``1 - p_t - p_r``: relaxation loss plus incoherently scattered weight.
    p_t_flux, p_r_flux : float or None
        Flux-convention probabilities, which also count photons re-emitted
        after a dephasing event.  Only numerical backends fill these.
    sigma : float
        Monte Carlo standard error of the flux values (0 for exact methods).
    """

    p_t: float
    p_r: float
    p_loss: float
    p_t_flux: Optional[float] = None
    p_r_flux: Optional[float] = None
    sigma: float = 0.0

    @classmethod
    def from_pt_pr(cls, p_t: float, p_r: float, **extra) -> "SingleOutcome":
        return cls(p_t=float(p_t), p_r=float(p_r), p_loss=float(1.0 - p_t - p_r), **extra)


def _check_width(name: str, value: float) -> None:
    if not value > 0.0:
        raise ValueError(f"{name} must be > 0, got {value!r}")


def pt_closed(params: SystemParams, tau_t: float) -> SingleOutcome:
    """Transmission and reflection of a resonant Lorentzian photon.

    Parameters
    ----------
    params : SystemParams
        Uses ``tau1`` and ``gamma``.
    tau_t : float
        Temporal width of the target photon.

    Returns
    -------
    SingleOutcome
        Exact coherent-convention probabilities.
    """
    _check_width("tau_t", tau_t)
    t1 = params.tau1
    g = params.gamma
    denom = (1.0 + t1 * g) * (t1 + tau_t + tau_t * t1 * g)
    p_t = (t1 + t1 * t1 * g + (t1 * g) ** 2 * tau_t) / denom
    p_r = tau_t / denom
    return SingleOutcome.from_pt_pr(p_t, p_r)


def pt_detuned_closed(params: SystemParams, tau_t: float, detuning: float) -> SingleOutcome:
    """Closed form of :func:`pt_detuned`, used as an independent check."""
    _check_width("tau_t", tau_t)
    a = 1.0 / tau_t
    b = 1.0 / params.tau1
    c = b + params.gamma
    s = a + c
    q = s * s + detuning * detuning
    p_r = b * b * s / (c * q)
    p_t = 1.0 - 2.0 * b * s / q + p_r
    return SingleOutcome.from_pt_pr(p_t, p_r)


def smatrix_elastic(params: SystemParams, k, qubit_freq: float):
    """Coherent transmission and reflection amplitudes at frequency ``k``.

    Returns
    -------
    (t, r) : tuple of complex or ndarray
        ``t = 1 - (1/tau1) / (i (qubit_freq - k) + 1/tau1 + gamma)`` and
        ``r = t - 1``.
    """
    k = np.asarray(k, dtype=float)
    rate = 1.0 / params.tau1
    r = -rate / (1j * (qubit_freq - k) + rate + params.gamma)
    t = 1.0 + r
    if np.ndim(r) == 0:
        return complex(t), complex(r)
    return t, r


def pt_detuned(params: SystemParams, tau_t: float, detuning: float,
               epsabs: float = 1e-13) -> SingleOutcome:
    """Transmission of a Lorentzian photon detuned from the qubit.

    Integrates ``|alpha(k)|^2 |t(k)|^2`` and ``|alpha(k)|^2 |r(k)|^2`` over
    the pulse spectrum, piecewise around the pulse peak and the qubit
    resonance, with the far tails mapped onto a finite interval.

    Parameters
    ----------
    detuning : float
        Qubit transition frequency minus the pulse carrier.
    """
    _check_width("tau_t", tau_t)
    a = 1.0 / tau_t
    b = 1.0 / params.tau1
    c = b + params.gamma

    def transfer(u):
        d = detuning - u
        den = d * d + c * c
        re = 1.0 - b * c / den
        im = b * d / den
        return re * re + im * im, b * b / den

    def in_u(u, which):
        return transfer(u)[which] * a / (math.pi * (u * u + a * a))

    def in_v(v, which):
        # Tail beyond the outermost edge, with u = 1 / v.
        return transfer(1.0 / v)[which] * a / (math.pi * (1.0 + a * a * v * v))

    # Geometric breakpoints around the pulse peak and the qubit resonance
    # bracket both features whatever their relative widths.
    edges = {0.0, detuning}
    for scale in (1.0, 10.0, 100.0, 1000.0):
        edges.update((scale * a, -scale * a, detuning + scale * c, detuning - scale * c))
    edges = sorted(edges)
    kw = dict(epsabs=epsabs, epsrel=1e-11, limit=200)
    out = []
    with warnings.catch_warnings():
        # Roundoff notices at the requested tolerance are harmless here.
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for which in (0, 1):
            total = 0.0
            for lo, hi in zip(edges[:-1], edges[1:]):
                total += integrate.quad(in_u, lo, hi, args=(which,), **kw)[0]
            total += integrate.quad(in_v, 0.0, 1.0 / edges[-1], args=(which,), **kw)[0]
            total += integrate.quad(in_v, 1.0 / edges[0], 0.0, args=(which,), **kw)[0]
            out.append(total)
    p_t, p_r = out
    return SingleOutcome.from_pt_pr(p_t, p_r)


def p_ex(params: SystemParams, tau_c: float, t):
    """Excitation probability of qubit 2 driven by an inverting control photon.

    ``t`` is measured from the control's arrival time; the profile is peaked
    at ``t = 0`` and decays symmetrically at rate ``2 gamma + 2 / tau2``.
    """
    _check_width("tau_c", tau_c)
    t2 = params.tau2
    g = params.gamma
    peak = 4.0 * tau_c * t2 / (tau_c + t2 + g * tau_c * t2) ** 2
    rate = 2.0 * g + 2.0 / t2
    value = peak * np.exp(-np.abs(np.asarray(t, dtype=float)) * rate)
    return float(value) if value.ndim == 0 else value
