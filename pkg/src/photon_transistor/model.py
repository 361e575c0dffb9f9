"""Physical parameters, pulse shapes and the level scheme of the two-qubit
scattering center.

Units: hbar = 1 and the bare frequency of qubit 1 is the unit of frequency,
so ``omega1 = 1`` by convention, rates are in units of ``omega1`` and times
in units of ``1 / omega1``.  Pauli convention: ``sigma_z |e> = +|e>``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Shape",
    "SystemParams",
    "PulseSpec",
    "LevelScheme",
    "level_scheme",
    "pulse_amp_freq",
    "pulse_amp_time",
    "pulse_flux_remaining",
    "frame_frequency",
    "fig2_params",
    "target_pulse",
    "control_pulse",
]


class Shape(enum.Enum):
    """Temporal shape of a single-photon wave packet.

    ``DECAYING`` is a spontaneous-emission packet, switched on abruptly at the
    arrival time and decaying afterwards.  ``INVERTING`` is its time reverse,
    rising exponentially and ending abruptly at the arrival time.
    """

    DECAYING = "decaying"
    INVERTING = "inverting"

    @classmethod
    def parse(cls, value: "Shape | str") -> "Shape":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


@dataclass(frozen=True)
class SystemParams:
    """The scattering center: two ZZ-coupled qubits, each on its own line.

    Attributes
    ----------
    omega1, omega2 : float
        Bare qubit transition frequencies.
    coupling_j : float
        ZZ coupling ``J`` of ``H = w1/2 s1z + w2/2 s2z - J s1z s2z``.
    tau1, tau2 : float
        Lifetimes of qubit 1 (infinite line) and qubit 2 (semi-infinite line)
        due to their line coupling.  The line-induced population decay rate
        is ``2 / tau_i``.
    gamma_r, gamma_phi : float
        Relaxation and pure dephasing rates (same for both qubits).
    """

    omega1: float = 1.0
    omega2: float = 1.0
    coupling_j: float = 0.01
    tau1: float = 200.0
    tau2: float = 1.0e4
    gamma_r: float = 0.0
    gamma_phi: float = 0.0

    def __post_init__(self):
        for name in ("omega1", "omega2", "coupling_j", "tau1", "tau2"):
            value = getattr(self, name)
            # J = 0 is the uncoupled reference case and is allowed.
            if name == "coupling_j":
                if not value >= 0.0:
                    raise ValueError(f"{name} must be >= 0, got {value!r}")
            elif not value > 0.0:
                raise ValueError(f"{name} must be > 0, got {value!r}")
        for name in ("gamma_r", "gamma_phi"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")

    @property
    def gamma(self) -> float:
        """Total coherence decay rate ``gamma_r / 2 + gamma_phi``."""
        return 0.5 * self.gamma_r + self.gamma_phi

    @property
    def t2_star(self) -> float:
        g = self.gamma
        return math.inf if g == 0.0 else 1.0 / g

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @classmethod
    def from_gamma(cls, gamma: float, **kwargs) -> "SystemParams":
        """Split a total rate ``gamma`` as ``gamma_r = gamma_phi = gamma / 1.5``."""
        rate = gamma / 1.5
        return cls(gamma_r=rate, gamma_phi=rate, **kwargs)


@dataclass(frozen=True)
class PulseSpec:
    """A single-photon wave packet with a Lorentzian spectrum.

    ``delay`` is the arrival time; a positive value means the pulse arrives
    later.  For ``DECAYING`` the packet starts at ``delay``, for
    ``INVERTING`` it ends there.
    """

    shape: Shape = Shape.DECAYING
    carrier: float = 1.02
    width: float = 2000.0
    delay: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape.parse(self.shape))
        if not self.width > 0.0:
            raise ValueError(f"pulse width must be > 0, got {self.width!r}")

    def replace(self, **changes) -> "PulseSpec":
        return replace(self, **changes)

    @property
    def linewidth(self) -> float:
        return 1.0 / self.width


@dataclass(frozen=True)
class LevelScheme:
    e_gg: float
    e_eg: float
    e_ge: float
    e_ee: float
    f_gg_eg: float = field(init=False)
    f_gg_ge: float = field(init=False)
    f_ge_ee: float = field(init=False)
    f_eg_ee: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "f_gg_eg", self.e_eg - self.e_gg)
        object.__setattr__(self, "f_gg_ge", self.e_ge - self.e_gg)
        object.__setattr__(self, "f_ge_ee", self.e_ee - self.e_ge)
        object.__setattr__(self, "f_eg_ee", self.e_ee - self.e_eg)


def _eigenenergy(params: SystemParams, z1: int, z2: int, offset: float = 0.0) -> float:
    return (0.5 * params.omega1 * z1 + 0.5 * params.omega2 * z2
            - params.coupling_j * z1 * z2 + offset)


def level_scheme(params: SystemParams, offset: float = 0.0) -> LevelScheme:
    """Eigenenergies and transition frequencies of the two-qubit Hamiltonian.

    The Hamiltonian is diagonal in the computational basis, so this is exact.
    Labels are ``|q1 q2>``; ``e_eg`` is qubit 1 excited, qubit 2 ground.
    """
    return LevelScheme(
        e_gg=_eigenenergy(params, -1, -1, offset),
        e_eg=_eigenenergy(params, +1, -1, offset),
        e_ge=_eigenenergy(params, -1, +1, offset),
        e_ee=_eigenenergy(params, +1, +1, offset),
    )


def frame_frequency(params: SystemParams) -> float:
    """Rotating-frame frequency used by all time-domain backends."""
    return params.omega1


def pulse_amp_freq(pulse: PulseSpec, k):
    """Frequency-domain amplitude ``alpha(k)``, normalized to ``int |alpha|^2 dk = 1``.

    Time-domain convention: ``alpha(t) = (2 pi)^-1/2 int dk alpha(k) exp(-i k t)``.
    """
    k = np.asarray(k, dtype=float)
    tau = pulse.width
    sign = 1.0 if pulse.shape is Shape.DECAYING else -1.0
    amp = 1.0 / (np.sqrt(np.pi * tau) * (sign * 1j * (pulse.carrier - k) + 1.0 / tau))
    if pulse.delay != 0.0:
        amp = amp * np.exp(1j * k * pulse.delay)
    return amp


def pulse_amp_time(pulse: PulseSpec, t, carrier_offset: float = 0.0):
    """Time-domain amplitude, normalized to ``int |alpha(t)|^2 dt = 1``.

    ``carrier_offset`` is subtracted from the carrier, which gives the
    envelope in a frame rotating at that frequency.
    """
    t = np.asarray(t, dtype=float)
    tau = pulse.width
    s = t - pulse.delay
    omega = pulse.carrier - carrier_offset
    if pulse.shape is Shape.DECAYING:
        support = s >= 0.0
        envelope = np.exp(-np.where(support, s, 0.0) / tau)
    else:
        support = s <= 0.0
        envelope = np.exp(np.where(support, s, 0.0) / tau)
    amp = np.sqrt(2.0 / tau) * envelope * np.exp(-1j * omega * s)
    return np.where(support, amp, 0.0)


def pulse_flux_remaining(pulse: PulseSpec, t):
    """Probability weight of the packet still to arrive after time ``t``."""
    t = np.asarray(t, dtype=float)
    s = t - pulse.delay
    tau = pulse.width
    if pulse.shape is Shape.DECAYING:
        return np.where(s <= 0.0, 1.0, np.exp(-2.0 * np.maximum(s, 0.0) / tau))
    return np.where(s >= 0.0, 0.0, -np.expm1(2.0 * np.minimum(s, 0.0) / tau))


def fig2_params(gamma_r: float = 0.0, gamma_phi: float = 0.0, tau2: float = 1.0e4,
                coupling_j: float = 0.01, tau1: float = 200.0) -> SystemParams:
    """Reference operating point: ``omega2 = omega1``, ``J = 0.01``, ``tau1 = 200``."""
    return SystemParams(omega1=1.0, omega2=1.0, coupling_j=coupling_j, tau1=tau1,
                        tau2=tau2, gamma_r=gamma_r, gamma_phi=gamma_phi)


def target_pulse(params: SystemParams, width: float, delay: float = 0.0,
                 shape: Shape | str = Shape.INVERTING) -> PulseSpec:
    """Target photon resonant with the ``|gg> -> |eg>`` transition."""
    return PulseSpec(shape=shape, carrier=level_scheme(params).f_gg_eg,
                     width=width, delay=delay)


def control_pulse(params: SystemParams, width: float | None = None,
                  delay: float = 0.0) -> PulseSpec:
    """Inverting control photon resonant with ``|gg> -> |ge>``; width defaults to ``tau2``."""
    return PulseSpec(shape=Shape.INVERTING, carrier=level_scheme(params).f_gg_ge,
                     width=params.tau2 if width is None else width, delay=delay)
