"""Numerical one- and two-photon scattering off the two-qubit center.

Two independent backends are provided:

* ``Backend.HIERARCHY`` integrates Fock-state input master equations for
  the density matrix, split into photon-counting branches.  Exact for
  single-photon inputs and free of sampling noise.
* ``Backend.TRAJECTORIES`` propagates time-binned pure states and samples
  relaxation and dephasing as quantum jumps.

Both run in a frame where each qubit rotates with the carrier of its own
line, which is exact because the qubits exchange no excitations.  They
report the coherent convention (photons counted only if no jump hit their
qubit) alongside the flux convention (all photons leaving on a line).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from ..analytic import SingleOutcome
from ..errors import ConfigError, ConvergenceError
from ..model import PulseSpec, SystemParams, pulse_amp_freq, pulse_amp_time
from ._select import kernels
from .config import Backend, EngineConfig, PairOutcome, Problem, build_problem
from .hierarchy import branch_probabilities, build_generator, joint_tables
from .trajectories import run_trajectories, step_size

__all__ = [
    "Backend",
    "EngineConfig",
    "PairOutcome",
    "Spectrum",
    "scatter_single",
    "scatter_pair",
    "coherent_output_spectrum",
    "kernel_name",
]


def kernel_name() -> str:
    """``"cython"`` if the compiled kernels are in use, else ``"python"``."""
    return kernels().NAME


def _run_hierarchy(prob: Problem, cfg: EngineConfig, t_out=None):
    gen = build_generator(prob)
    indptr, indices, data, tags = gen.combined()
    idx, coeff = gen.coherence_rows["r"]
    readout = np.zeros((1, gen.n_state), dtype=complex)
    readout[0, idx] = coeff
    t_out = np.zeros(0) if t_out is None else np.asarray(t_out, dtype=float)
    hmax = np.inf if cfg.time_step is None else cfg.time_step
    y, rec, _ = kernels().hier_integrate(
        indptr, indices, data, tags, gen.y0, prob.breakpoints, prob.pulse_t, prob.pulse_c,
        cfg.rtol, cfg.atol, min(prob.tau_min / 100.0, hmax), hmax, t_out, readout)
    coh, flux = joint_tables(branch_probabilities(gen, y), prob.pair)
    return coh, flux, 0.0, 0.0, gen.leakage, rec


def _run(prob: Problem, cfg: EngineConfig):
    if cfg.backend is Backend.HIERARCHY:
        return _run_hierarchy(prob, cfg)[:5]
    res = run_trajectories(prob, cfg)
    return res.coh, res.flux, res.sigma, res.sigma_flux, 0.0


def _checked(run, cfg: EngineConfig, key):
    first = run(cfg)
    if cfg.convergence_tol is None:
        return first
    second = run(cfg.refined())
    change = abs(key(second) - key(first))
    if change > 5.0 * cfg.convergence_tol:
        raise ConvergenceError(
            f"refining the resolution changed the result by {change:.3g} "
            f"(allowed {5.0 * cfg.convergence_tol:.3g}); reduce time_step or raise n_modes")
    return second


def scatter_single(params: SystemParams, target: PulseSpec,
                   cfg: Optional[EngineConfig] = None,
                   qubit2_excited: bool = False) -> SingleOutcome:
    """Scatter one target photon with the control line empty.

    Parameters
    ----------
    params : SystemParams
    target : PulseSpec
        Target photon on line 1.
    cfg : EngineConfig, optional
    qubit2_excited : bool
        Hold qubit 2 in ``|e>`` instead of ``|g>``.  Qubit 2 is frozen either
        way, so qubit 1 sees a fixed shift of ``-2J`` or ``+2J``.

    Returns
    -------
    SingleOutcome
        Coherent ``p_t``, ``p_r`` plus ``p_t_flux``, ``p_r_flux``.
    """
    cfg = cfg or EngineConfig()
    # Validate the window before any work is done.
    build_problem(params, target, None, cfg, qubit2_excited)
    coh, flux, sigma, sigma_flux, _ = _checked(
        lambda c: _run(build_problem(params, target, None, c, qubit2_excited), c),
        cfg, key=lambda r: r[0][0, 0])
    return SingleOutcome.from_pt_pr(coh[0, 0], coh[1, 0], p_t_flux=float(flux[0, 0]),
                                    p_r_flux=float(flux[1, 0]), sigma=float(sigma_flux))


def scatter_pair(params: SystemParams, target: PulseSpec, control: PulseSpec,
                 cfg: Optional[EngineConfig] = None) -> PairOutcome:
    """Scatter a target photon and a control photon together.

    Returns
    -------
    PairOutcome
        Joint probabilities over target (transmitted, reflected, lost) and
        control (reflected, lost), in the coherent and the flux convention.
    """
    cfg = cfg or EngineConfig()
    build_problem(params, target, control, cfg)  # validates
    coh, flux, sigma, sigma_flux, leak = _checked(
        lambda c: _run(build_problem(params, target, control, c), c),
        cfg, key=lambda r: r[0][0].sum())
    return PairOutcome(joint=coh, joint_flux=flux, sigma=float(sigma),
                       sigma_flux=float(sigma_flux), leakage=float(leak))


@dataclass(frozen=True)
class Spectrum:
    """Coherent output amplitudes on a uniform frequency grid.

    ``beta_r[j]`` and ``beta_l[j]`` are the transmitted and reflected
    single-photon amplitudes at ``freqs[j]`` (lab frame), normalized like
    the input: ``sum |beta|^2 * dk`` is the coherent probability.
    """

    freqs: np.ndarray
    beta_r: np.ndarray
    beta_l: np.ndarray

    @property
    def dk(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def probabilities(self) -> tuple[float, float]:
        return (float((np.abs(self.beta_r) ** 2).sum() * self.dk),
                float((np.abs(self.beta_l) ** 2).sum() * self.dk))


def _step_grid(breakpoints, h):
    """Times at which the time-bin propagator completes a step."""
    out = [breakpoints[:1]]
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b > a:
            n = max(1, int(np.ceil((b - a) / h - 1e-9)))
            out.append(a + (b - a) * np.arange(1, n + 1) / n)
    return np.concatenate(out)


def _resample(grid, values, times):
    return (CubicSpline(grid, values.real)(times)
            + 1j * CubicSpline(grid, values.imag)(times))


def coherent_output_spectrum(params: SystemParams, target: PulseSpec,
                             cfg: Optional[EngineConfig] = None,
                             control: Optional[PulseSpec] = None,
                             n_times: int = 1 << 16,
                             qubit2_excited: bool = False) -> Spectrum:
    """Fourier transform of the coherent output field of a single photon.

    The output amplitudes are sampled on ``n_times`` points spanning the
    simulation window and transformed with
    ``beta(p) = (2 pi)^-1/2 int dt beta(t) exp(i p t)``.

    Raises
    ------
    ConfigError
        If a control photon is given: the two-photon output is entangled
        and has no single-photon amplitude to report.
    """
    if control is not None:
        raise ConfigError("output spectra are available for single-photon inputs only")
    cfg = cfg or EngineConfig()
    prob = build_problem(params, target, None, cfg, qubit2_excited)
    times = np.linspace(prob.t0, prob.t1, n_times)
    dt = times[1] - times[0]
    # The incident packet has a sharp edge that a sampled transform would
    # alias, so it is added back analytically and only the field radiated by
    # the qubit is transformed.
    if cfg.backend is Backend.HIERARCHY:
        scattered = _run_hierarchy(prob, cfg, t_out=times)[5][:, 0]
        rad_r = rad_l = scattered
    else:
        grid = _step_grid(prob.breakpoints, step_size(prob, cfg))
        rec = run_trajectories(prob, cfg, t_rec=grid).record
        incident = pulse_amp_time(target, grid, carrier_offset=prob.frame)
        rad_r = _resample(grid, rec[:, 0] - incident, times)
        rad_l = _resample(grid, rec[:, 1], times)
    n = times.size
    nu = 2.0 * np.pi * np.fft.fftfreq(n, d=dt)
    phase = np.exp(1j * nu * times[0])

    def transform(x):
        return np.fft.fftshift(np.fft.ifft(x) * n * dt / np.sqrt(2.0 * np.pi) * phase)

    freqs = np.fft.fftshift(nu) + prob.frame
    incident_k = pulse_amp_freq(target, freqs)
    beta_r = incident_k + transform(rad_r)
    beta_l = transform(rad_l)
    return Spectrum(freqs=freqs, beta_r=beta_r, beta_l=beta_l)
