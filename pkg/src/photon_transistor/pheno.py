"""Reduced model of the transistor and its figures of merit.

The control photon's only effect in the reduced model is to leave qubit 2
excited with some probability ``p_e`` while the target passes.  Qubit 1 is
then detuned by ``4J`` and the target transmission becomes the weighted sum
of the resonant and the detuned single-photon results.  The same picture
with the roles of the photons swapped gives the back-action of target
photons on the control, and hence the gain.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .analytic import p_ex, pt_detuned_closed
from .errors import OptimizationFailure
from .model import PulseSpec, Shape, SystemParams, level_scheme, pulse_amp_time

__all__ = [
    "Method",
    "Constraint",
    "DelayMode",
    "Metrics",
    "p_e_overlap",
    "pheno_pt",
    "metrics",
    "optimize_pulses",
    "perturbation_probability",
    "gain",
    "GAIN_SENTINEL",
]

# Returned by ``gain`` when a target photon cannot perturb the control at all.
GAIN_SENTINEL = 10**9

# Search ranges of the optimizer, in log10 of the pulse length.
LOG_TAU_RANGE = (1.5, 7.5)
SEED_POINTS = 8


class Method(enum.Enum):
    ENGINE = "engine"
    PHENO = "pheno"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


class Constraint(enum.Enum):
    """``INDEPENDENT``: free target and control lengths.  ``IDENTICAL``: one
    shared length for both inverting pulses."""

    INDEPENDENT = "independent"
    IDENTICAL = "identical"

    @classmethod
    def parse(cls, value) -> "Constraint":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


@dataclass(frozen=True)
class DelayMode:
    """Arrival lead of the control over the target: fixed, or optimized."""

    optimize: bool = False
    value: float = 0.0

    @classmethod
    def fixed(cls, value: float = 0.0) -> "DelayMode":
        return cls(False, float(value))

    @classmethod
    def optimized(cls) -> "DelayMode":
        return cls(True, 0.0)


@dataclass(frozen=True)
class Metrics:
    """Transistor figures of merit.

    Attributes
    ----------
    c_s : float
        Contrast ``p_tc - p_t``.
    r_s : float
        On-off ratio ``p_tc / p_t``; ``inf`` when ``p_t`` vanishes.
    p_t, p_tc : float
        Target transmission without and with the control photon.
    tau_t_opt, tau_c_opt, delay_opt : float or None
        Pulse lengths and delay found by :func:`optimize_pulses`.
    """

    c_s: float
    r_s: float
    p_t: float
    p_tc: float
    tau_t_opt: Optional[float] = None
    tau_c_opt: Optional[float] = None
    delay_opt: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "c_s": self.c_s, "r_s": self.r_s, "p_t": self.p_t, "p_tc": self.p_tc,
            "tau_t_opt": self.tau_t_opt, "tau_c_opt": self.tau_c_opt,
            "delay_opt": self.delay_opt,
        }


def _relative_delay(target: PulseSpec, control: PulseSpec, delay: float) -> float:
    return float(delay) + target.delay - control.delay


def _exp_overlap(profile, width: float, shape: Shape, lag: float, rate: float) -> float:
    """``int |alpha(t)|^2 P(t + lag) dt`` for a pulse arriving at 0 and a
    two-sided exponential ``P`` peaked at ``-lag``."""
    if shape is Shape.DECAYING:
        lo, hi = 0.0, 60.0 * width
    else:
        lo, hi = -60.0 * width, 0.0
    kink = -lag
    pts = [p for p in (kink, kink - 5.0 / rate, kink + 5.0 / rate) if lo < p < hi]

    def f(t):
        return profile(t) * math.exp(-abs(t + lag) * rate)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, lo, hi, points=pts or None, limit=400,
                              epsabs=1e-12, epsrel=1e-10)[0]


def p_e_overlap(params: SystemParams, target: PulseSpec, control: PulseSpec,
                delay: float = 0.0) -> float:
    """Probability that qubit 2 is excited while the target passes.

    Parameters
    ----------
    params : SystemParams
    target, control : PulseSpec
        The control's width enters the excitation profile of qubit 2.
    delay : float
        Extra lead of the control over the target, added to
        ``target.delay - control.delay``.

    Returns
    -------
    float
        ``int dt |alpha_t(t)|^2 P_ex(t + T)`` with ``T`` the total lead.
    """
    lag = _relative_delay(target, control, delay)
    peak = float(p_ex(params, control.width, 0.0))
    rate = 2.0 * params.gamma + 2.0 / params.tau2
    base = target.replace(delay=0.0)

    def profile(t):
        return abs(pulse_amp_time(base, t)) ** 2

    return peak * _exp_overlap(profile, target.width, target.shape, lag, rate)


def _detunings(params: SystemParams, target: PulseSpec) -> tuple[float, float]:
    lv = level_scheme(params)
    return lv.f_gg_eg - target.carrier, lv.f_ge_ee - target.carrier


def pheno_pt(params: SystemParams, target: PulseSpec, control: PulseSpec,
             delay: float = 0.0) -> float:
    """Target transmission with a control photon, in the reduced model.

    Returns
    -------
    float
        ``(1 - p_e) p_t(d) + p_e p_t(d - 4J)`` where ``d`` is the detuning of
        qubit 1 from the target carrier with qubit 2 in its ground state.
    """
    p_e = p_e_overlap(params, target, control, delay)
    d_g, d_e = _detunings(params, target)
    p_g = pt_detuned_closed(params, target.width, d_g).p_t
    p_x = pt_detuned_closed(params, target.width, d_e).p_t
    return (1.0 - p_e) * p_g + p_e * p_x


def _make_metrics(p_t: float, p_tc: float, **extra) -> Metrics:
    if p_t < 1e-12:
        warnings.warn("target transmission without control vanishes; r_s reported as inf",
                      RuntimeWarning, stacklevel=3)
        r_s = math.inf
    else:
        r_s = p_tc / p_t
    return Metrics(c_s=float(p_tc - p_t), r_s=float(r_s), p_t=float(p_t), p_tc=float(p_tc),
                   **extra)


def metrics(params: SystemParams, target: PulseSpec, control: PulseSpec,
            delay: float = 0.0, method: Method | str = Method.PHENO,
            cfg=None) -> Metrics:
    """Contrast and on-off ratio of one transistor configuration.

    Parameters
    ----------
    params : SystemParams
    target, control : PulseSpec
    delay : float
        Extra lead of the control over the target.
    method : Method
        ``PHENO`` for the reduced model, ``ENGINE`` for the full scattering
        calculation (``cfg`` selects its backend).

    Returns
    -------
    Metrics
        ``r_s`` is ``inf`` (with a RuntimeWarning) when ``p_t < 1e-12``.
    """
    method = Method.parse(method)
    if method is Method.PHENO:
        d_g, _ = _detunings(params, target)
        p_t = pt_detuned_closed(params, target.width, d_g).p_t
        p_tc = pheno_pt(params, target, control, delay)
        return _make_metrics(p_t, p_tc)
    from .engine import scatter_pair, scatter_single

    shifted = target.replace(delay=target.delay + delay)
    p_t = scatter_single(params, shifted, cfg).p_t
    p_tc = scatter_pair(params, shifted, control, cfg).p_tc
    return _make_metrics(p_t, p_tc)


def _candidate(params: SystemParams, constraint: Constraint, log_t: float, log_c: float,
               target_shape: Shape):
    from .model import control_pulse, target_pulse

    if constraint is Constraint.IDENTICAL:
        log_c = log_t
    tau_t, tau_c = 10.0 ** log_t, 10.0 ** log_c
    p = params.replace(tau2=tau_c)
    shape = Shape.INVERTING if constraint is Constraint.IDENTICAL else target_shape
    return p, target_pulse(p, tau_t, shape=shape), control_pulse(p, tau_c)


def optimize_pulses(params: SystemParams, constraint: Constraint | str = Constraint.INDEPENDENT,
                    delay_mode: DelayMode = DelayMode.fixed(0.0),
                    method: Method | str = Method.PHENO, cfg=None,
                    target_shape: Shape | str = Shape.INVERTING,
                    xatol: float = 1e-3) -> Metrics:
    """Maximize the contrast over the pulse lengths (and optionally the delay).

    The control length is tied to the lifetime of qubit 2, so ``tau2`` of
    the returned configuration equals ``tau_c_opt``.  The search starts from
    the best point of a log-spaced grid and continues with Nelder-Mead on
    ``log10`` of the lengths; delays are searched in units of ``1e3``.

    Parameters
    ----------
    params : SystemParams
        ``tau2`` is overridden by the control length.
    constraint : Constraint
        ``INDEPENDENT`` (two lengths) or ``IDENTICAL`` (one length, both
        pulses inverting).
    delay_mode : DelayMode
    method : Method
        ``ENGINE`` seeds from the reduced-model optimum and refines with the
        full calculation.
    target_shape : Shape
        Target shape for ``INDEPENDENT``.
    xatol : float
        Simplex size at convergence, in log10 units.

    Returns
    -------
    Metrics
        With ``tau_t_opt``, ``tau_c_opt`` and ``delay_opt`` filled in.

    Raises
    ------
    OptimizationFailure
        If the local search neither converges nor improves on the seed.
    """
    constraint = Constraint.parse(constraint)
    method = Method.parse(method)
    target_shape = Shape.parse(target_shape)
    identical = constraint is Constraint.IDENTICAL
    n_tau = 1 if identical else 2
    lo, hi = LOG_TAU_RANGE

    def unpack(x):
        x = np.asarray(x, dtype=float)
        logs = np.clip(x[:n_tau], lo, hi)
        log_t = logs[0]
        log_c = logs[0] if identical else logs[1]
        delay = 1e3 * x[n_tau] if delay_mode.optimize else delay_mode.value
        return log_t, log_c, delay

    def evaluate(x, how):
        log_t, log_c, delay = unpack(x)
        p, tgt, ctl = _candidate(params, constraint, log_t, log_c, target_shape)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return metrics(p, tgt, ctl, delay, method=how, cfg=cfg)

    def objective(x, how):
        return -evaluate(x, how).c_s

    if method is Method.ENGINE:
        seed_result = optimize_pulses(params, constraint, delay_mode, Method.PHENO,
                                      target_shape=target_shape, xatol=xatol)
        x0 = [math.log10(seed_result.tau_t_opt)]
        if not identical:
            x0.append(math.log10(seed_result.tau_c_opt))
        if delay_mode.optimize:
            x0.append(seed_result.delay_opt / 1e3)
        x0 = np.array(x0)
        steps = np.full(x0.size, 0.1)
        engine_tol = max(xatol, 1e-2)
    else:
        axes = [np.linspace(lo + 0.5, hi - 0.5, SEED_POINTS)] * n_tau
        if delay_mode.optimize:
            axes.append(np.array([-4.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0]))
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        values = np.array([objective(x, Method.PHENO) for x in grid])
        x0 = grid[int(np.argmin(values))]
        steps = np.array([0.5] * n_tau + ([1.0] if delay_mode.optimize else []))
        engine_tol = xatol

    f0 = objective(x0, method)
    simplex = np.vstack([x0] + [x0 + np.eye(x0.size)[i] * steps[i] for i in range(x0.size)])
    res = optimize.minimize(objective, x0, args=(method,), method="Nelder-Mead",
                            options=dict(initial_simplex=simplex, xatol=engine_tol,
                                         fatol=1e-12, maxiter=4000, maxfev=8000))
    if not res.success and not res.fun < f0:
        raise OptimizationFailure(f"pulse optimization did not improve on the seed: {res.message}")
    x_best = res.x if res.fun <= f0 else x0
    log_t, log_c, delay = unpack(x_best)
    best = evaluate(x_best, method)
    return Metrics(c_s=best.c_s, r_s=best.r_s, p_t=best.p_t, p_tc=best.p_tc,
                   tau_t_opt=float(10.0 ** log_t), tau_c_opt=float(10.0 ** log_c),
                   delay_opt=float(delay))


def _lorentz_overlap(a: float, b: float, c: float, d: float, shift: float) -> complex:
    """``int L_a(u) conj(s(u; d)) s(u; d - shift) du`` for a Lorentzian spectrum
    ``L_a`` of half-width ``a`` and reflection amplitudes
    ``s(u; d) = 1 - 2b / (c + i (d - u))`` of a qubit detuned by ``d``.

    Closed by residues in the upper half plane.  When the spectrum and the
    qubit line coincide the two poles merge and the double-pole residue is
    used instead.
    """
    z = d + 1j * c
    if abs(z - 1j * a) < 1e-6 * (a + c):
        return _merged_overlap(a, b, c, shift)

    def s_conj(u):
        return 1.0 - 2.0 * b / (c - 1j * d + 1j * u)

    def s_det(u):
        return 1.0 - 2.0 * b / (c + 1j * (d - shift - u))

    at_peak = s_conj(1j * a) * s_det(1j * a)
    at_pole = -4.0 * a * b * s_det(z) / (z * z + a * a)
    return complex(at_peak + at_pole)


def _merged_overlap(a: float, b: float, c: float, shift: float) -> complex:
    """:func:`_lorentz_overlap` at ``d = 0`` and ``c = a``."""
    sq = c - 1j * shift

    def s_det(u):
        return 1.0 - 2.0 * b / (sq - 1j * u)

    def ds_det(u):
        return -2.0j * b / (sq - 1j * u) ** 2

    u = 1j * a
    num = 1j * u + c - 2.0 * b
    slope = (1j * s_det(u) + num * ds_det(u)) / (2.0 * u) - num * s_det(u) / (2.0 * u) ** 2
    return complex(2.0 * a * slope)


def _control_fidelity(params: SystemParams, control: PulseSpec) -> float:
    """Normalized overlap of the reflected control with and without a ``4J``
    shift of qubit 2."""
    lv = level_scheme(params)
    a = 1.0 / control.width
    b = 1.0 / params.tau2
    c = b + params.gamma
    d = lv.f_gg_ge - control.carrier
    shift = lv.f_gg_ge - lv.f_eg_ee
    cross = _lorentz_overlap(a, b, c, d, shift)
    norm_g = _lorentz_overlap(a, b, c, d, 0.0).real
    norm_e = _lorentz_overlap(a, b, c, d - shift, 0.0).real
    return float(abs(cross) ** 2 / (norm_g * norm_e))


def perturbation_probability(params: SystemParams, target: PulseSpec, control: PulseSpec,
                             delay: float = 0.0) -> float:
    """Probability that one target photon perturbs the control photon.

    The target excites qubit 1 with the same profile that the control
    creates on qubit 2, with the control length replaced by the target
    length and ``tau2`` by ``tau1``: both qubits couple to the even mode of
    their line at rate ``2 / tau_i``.  Counting the whole target photon as
    even-mode excitation gives an upper bound on the back-action.  An
    excited qubit 1 shifts qubit 2 by ``4J``, and the control is perturbed
    with probability one minus the fidelity of its reflected state.
    """
    tau_t, tau1, g = target.width, params.tau1, params.gamma
    peak = 4.0 * tau_t * tau1 / (tau_t + tau1 + g * tau_t * tau1) ** 2
    rate = 2.0 * g + 2.0 / tau1
    # Roles swapped: the control is probed by the excitation profile of
    # qubit 1, which the target creates ``T`` after the control arrives.
    lag = -_relative_delay(target, control, delay)
    base = control.replace(delay=0.0)

    def profile(t):
        return abs(pulse_amp_time(base, t)) ** 2

    p_excited = peak * _exp_overlap(profile, control.width, control.shape, lag, rate)
    return p_excited * (1.0 - _control_fidelity(params, control))


def gain(params: SystemParams, target: PulseSpec, control: PulseSpec,
         perturbation_budget: float = 0.05, delay: float = 0.0) -> int:
    """Number of target photons one control photon can switch.

    Parameters
    ----------
    perturbation_budget : float
        Largest acceptable probability that the control is perturbed.

    Returns
    -------
    int
        ``max{N : 1 - (1 - p)^N <= budget}`` for the per-photon perturbation
        probability ``p``; 0 if ``p >= budget``, ``GAIN_SENTINEL`` if ``p``
        vanishes.
    """
    if not 0.0 <= perturbation_budget < 1.0:
        raise ValueError(f"perturbation_budget must be in [0, 1), got {perturbation_budget!r}")
    if perturbation_budget == 0.0:
        return 0
    p = perturbation_probability(params, target, control, delay)
    if p >= perturbation_budget:
        return 0
    if p <= 0.0:
        return GAIN_SENTINEL
    n = math.floor(math.log1p(-perturbation_budget) / math.log1p(-p) * (1.0 + 1e-12))
    return int(min(n, GAIN_SENTINEL))
