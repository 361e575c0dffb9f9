"""Engine configuration, result types and the shared time-domain setup."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import ConfigError
from ..model import PulseSpec, Shape, SystemParams, level_scheme

__all__ = ["Backend", "EngineConfig", "PairOutcome", "Problem", "build_problem"]

# Pulse tails are cut where the remaining weight is exp(-2 * TAIL_WIDTHS).
TAIL_WIDTHS = 12.0
# Minimum window beyond the pulses, in units of the longest time scale.
MIN_WIDTHS = 10.0


class Backend(enum.Enum):
    HIERARCHY = "hierarchy"
    TRAJECTORIES = "trajectories"

    @classmethod
    def parse(cls, value) -> "Backend":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


@dataclass(frozen=True)
class EngineConfig:
    """Numerical settings of a scattering run.

    Attributes
    ----------
    backend : Backend
        ``HIERARCHY`` (density-matrix Fock-state hierarchy, default) or
        ``TRAJECTORIES`` (time-binned pure states with quantum jumps).
    time_step : float or None
        Hierarchy: largest allowed step of the adaptive integrator.
        Trajectories: fixed step; defaults to the shortest time scale / 50.
    t_span : float or None
        Simulation window.  Defaults to the pulse supports plus
        ``12 * max(tau1, tau2)``; shorter windows raise ConfigError.
    n_modes : int or None
        Time bins per line for the trajectory backend (at least 256).
    n_traj : int
        Number of jump trajectories sampled when dissipation is present.
    rng_seed : int
        Master seed; trajectory seeds are spawned from it.
    rtol, atol : float
        Tolerances of the adaptive integrator.
    convergence_tol : float or None
        If set, repeat the run at doubled resolution and raise
        ConvergenceError when ``p_tc`` moves by more than five times this.
    """

    backend: Backend = Backend.HIERARCHY
    time_step: Optional[float] = None
    t_span: Optional[float] = None
    n_modes: Optional[int] = None
    n_traj: int = 1000
    rng_seed: int = 0
    rtol: float = 1e-8
    atol: float = 1e-12
    convergence_tol: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "backend", Backend.parse(self.backend))
        if self.time_step is not None and not self.time_step > 0.0:
            raise ConfigError(f"time_step must be > 0, got {self.time_step!r}")
        if self.t_span is not None and not self.t_span > 0.0:
            raise ConfigError(f"t_span must be > 0, got {self.t_span!r}")
        if self.n_modes is not None and self.n_modes < 256:
            raise ConfigError(f"n_modes must be >= 256, got {self.n_modes!r}")
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be >= 1, got {self.n_traj!r}")
        if not (0.0 < self.rtol < 1.0 and self.atol > 0.0):
            raise ConfigError("tolerances must satisfy 0 < rtol < 1 and atol > 0")

    def replace(self, **changes) -> "EngineConfig":
        return replace(self, **changes)

    def refined(self) -> "EngineConfig":
        """The same run at twice the resolution."""
        return replace(
            self,
            time_step=None if self.time_step is None else 0.5 * self.time_step,
            n_modes=None if self.n_modes is None else 2 * self.n_modes,
            rtol=0.1 * self.rtol,
            convergence_tol=None,
        )


@dataclass(frozen=True)
class PairOutcome:
    """Joint channel probabilities of a target and a control photon.

    ``joint[i, j]`` has target ``i`` in (transmitted, reflected, lost) and
    control ``j`` in (reflected, lost), in the coherent convention.
    ``joint_flux`` is the same table in the flux convention.  ``sigma`` is
    the Monte Carlo standard error of ``p_tc`` (0 for exact backends).
    """

    joint: np.ndarray
    joint_flux: np.ndarray
    sigma: float = 0.0
    sigma_flux: float = 0.0
    leakage: float = 0.0

    @property
    def p_tc(self) -> float:
        return float(self.joint[0].sum())

    @property
    def p_rc(self) -> float:
        return float(self.joint[1].sum())

    @property
    def p_target_lost(self) -> float:
        return float(self.joint[2].sum())

    @property
    def p_control_reflected(self) -> float:
        return float(self.joint[:, 0].sum())

    @property
    def p_control_lost(self) -> float:
        return float(self.joint[:, 1].sum())

    @property
    def p_tc_flux(self) -> float:
        return float(self.joint_flux[0].sum())

    def as_dict(self) -> dict:
        names_t = ("transmitted", "reflected", "lost")
        names_c = ("reflected", "lost")
        out = {
            "p_tc": self.p_tc,
            "p_rc": self.p_rc,
            "p_target_lost": self.p_target_lost,
            "p_control_reflected": self.p_control_reflected,
            "p_control_lost": self.p_control_lost,
        }
        for i, a in enumerate(names_t):
            for j, b in enumerate(names_c):
                out[f"joint_{a}_{b}"] = float(self.joint[i, j])
        out["p_tc_flux"] = self.p_tc_flux
        out["sigma"] = float(self.sigma)
        return out


def pulse_row(pulse: Optional[PulseSpec], frame: float) -> np.ndarray:
    """Encode a pulse as ``[present, shape, detuning, width, delay]`` for the kernels."""
    if pulse is None:
        return np.array([0.0, 1.0, 0.0, 1.0, 0.0])
    shape = 1.0 if pulse.shape is Shape.DECAYING else -1.0
    return np.array([1.0, shape, pulse.carrier - frame, pulse.width, pulse.delay])


def pulse_support(pulse: PulseSpec) -> tuple[float, float]:
    if pulse.shape is Shape.DECAYING:
        return pulse.delay, pulse.delay + TAIL_WIDTHS * pulse.width
    return pulse.delay - TAIL_WIDTHS * pulse.width, pulse.delay


@dataclass
class Problem:
    """Numbers shared by both backends for one run."""

    params: SystemParams
    target: PulseSpec
    control: Optional[PulseSpec]
    qubit2_excited: bool
    frame: float  # rotation frequency of qubit 1 and the target line
    frame_c: float  # rotation frequency of qubit 2 and the control line
    energies: np.ndarray  # e_gg, e_eg, e_ge, e_ee in the rotating frame
    t0: float
    t1: float
    breakpoints: np.ndarray
    pulse_t: np.ndarray
    pulse_c: np.ndarray
    tau_min: float
    bandwidth: float
    extras: dict = field(default_factory=dict)

    @property
    def pair(self) -> bool:
        return self.control is not None


def build_problem(params: SystemParams, target: PulseSpec, control: Optional[PulseSpec],
                  cfg: EngineConfig, qubit2_excited: bool = False) -> Problem:
    # The qubits never exchange excitations, so each can rotate with the
    # carrier of its own line.  Resonant runs then have static envelopes and
    # the adaptive integrator takes steps set by the physics alone.
    levels = level_scheme(params)
    frame = target.carrier
    frame_c = control.carrier if control is not None else levels.f_gg_ge
    energies = np.array([
        0.0,
        levels.e_eg - levels.e_gg - frame,
        levels.e_ge - levels.e_gg - frame_c,
        levels.e_ee - levels.e_gg - frame - frame_c,
    ])
    pulses = [target] + ([control] if control is not None else [])
    supports = [pulse_support(p) for p in pulses]
    start = min(s[0] for s in supports)
    last = max(s[1] for s in supports)
    scales = [p.width for p in pulses] + [params.tau1]
    if control is not None:
        scales.append(params.tau2)
    longest = max(scales)
    decay = params.tau1 if control is None else max(params.tau1, params.tau2)
    required = (last - start) + MIN_WIDTHS * decay
    span = (last - start) + TAIL_WIDTHS * decay
    if cfg.t_span is not None:
        if cfg.t_span < required:
            raise ConfigError(
                f"t_span={cfg.t_span!r} is shorter than the pulses plus "
                f"{MIN_WIDTHS:g} decay times ({required:.6g})")
        span = cfg.t_span
    end = start + span
    marks = {start, end}
    for p in pulses:
        if start < p.delay < end:
            marks.add(float(p.delay))
    tau_min = min(scales)
    rates = [1.0 / s for s in scales]
    bandwidth = max(rates)
    if cfg.n_modes is not None and bandwidth * span / cfg.n_modes > 0.5:
        raise ConfigError(
            f"n_modes={cfg.n_modes} cannot resolve the bandwidth {bandwidth:.3g} over "
            f"t_span={span:.6g}; need at least {math.ceil(2.0 * bandwidth * span)} modes")
    return Problem(
        params=params, target=target, control=control, qubit2_excited=qubit2_excited,
        frame=frame, frame_c=frame_c, energies=energies, t0=start, t1=end,
        breakpoints=np.array(sorted(marks)),
        pulse_t=pulse_row(target, frame), pulse_c=pulse_row(control, frame_c),
        tau_min=tau_min, bandwidth=bandwidth, extras={"longest": longest},
    )
