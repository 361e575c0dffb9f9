"""Circuit model of two transmons coupled through a capacitively shunted SQUID.

Units: ``hbar = 1`` and the electron charge ``e = 1``, so the reduced flux
quantum is ``PHI0 = 1/2`` and a capacitance ``C`` has the charging energy
``1 / (8 PHI0**2 C) = 1 / (2 C)``.  Energies and frequencies share one unit.

Charging energies use the cross-index form: ``E_C1`` carries ``C_2 + C_m``
in its numerator.  This is the form that reduces to the single-transmon
``1 / (8 PHI0**2 C_1)`` when the coupling capacitance vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from .errors import Infeasible, MappingInvalid
from .model import SystemParams

__all__ = [
    "PHI0",
    "Capacitances",
    "CircuitParams",
    "DerivedCircuit",
    "derive",
    "capacitive_ratio",
    "solve_coupling",
    "to_system_params",
]

PHI0 = 0.5
_CHARGE_SCALE = 1.0 / (8.0 * PHI0 * PHI0)

# A capacitance ratio counts as "much smaller" below this value.
SECONDARY_COUPLING_LIMIT = 0.1
# Largest tunneling residual, relative to the density coupling, for which the
# circuit maps onto the ZZ Hamiltonian.
MAPPING_TOLERANCE = 1e-3


def _positive(**values):
    for name, value in values.items():
        if not (value > 0.0 and math.isfinite(value)):
            raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Capacitances:
    """Shunt and line-coupling capacitances of the two transmons."""

    c_j1: float
    c_j2: float
    c_g1: float
    c_g2: float

    def __post_init__(self):
        _positive(c_j1=self.c_j1, c_j2=self.c_j2, c_g1=self.c_g1, c_g2=self.c_g2)

    @property
    def c_1(self) -> float:
        return self.c_j1 + self.c_g1

    @property
    def c_2(self) -> float:
        return self.c_j2 + self.c_g2


@dataclass(frozen=True)
class CircuitParams:
    """Circuit elements.

    Attributes
    ----------
    c_j1, c_j2 : float
        Transmon shunt capacitances.
    c_g1, c_g2 : float
        Capacitances coupling each transmon to its line.
    c_m : float
        Shunt capacitance of the coupling SQUID.
    e_j1, e_j2, e_jm : float
        Josephson energies of the transmons and of the coupling SQUID.
    """

    c_j1: float
    c_j2: float
    c_g1: float
    c_g2: float
    c_m: float
    e_j1: float
    e_j2: float
    e_jm: float

    def __post_init__(self):
        _positive(**{k: getattr(self, k) for k in
                     ("c_j1", "c_j2", "c_g1", "c_g2", "e_j1", "e_j2")})
        for name in ("c_m", "e_jm"):
            value = getattr(self, name)
            # Zero is the uncoupled reference circuit.
            if not (value >= 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be non-negative and finite, got {value!r}")

    @property
    def c_1(self) -> float:
        return self.c_j1 + self.c_g1

    @property
    def c_2(self) -> float:
        return self.c_j2 + self.c_g2

    @property
    def capacitances(self) -> Capacitances:
        return Capacitances(self.c_j1, self.c_j2, self.c_g1, self.c_g2)

    def swapped(self) -> "CircuitParams":
        """The same circuit with the labels of the transmons exchanged."""
        return CircuitParams(self.c_j2, self.c_j1, self.c_g2, self.c_g1, self.c_m,
                             self.e_j2, self.e_j1, self.e_jm)


@dataclass(frozen=True)
class DerivedCircuit:
    """Effective parameters of the coupled transmons.

    Attributes
    ----------
    e_c1, e_c2, e_cm : float
        Charging energies and the cross charging energy.
    e_j1_eff, e_j2_eff : float
        Josephson energies including the local part of the coupling SQUID.
    omega1, omega2 : float
        Transmon frequencies ``sqrt(8 E_C E_J_eff)``.
    j_zz : float
        Coefficient of ``-sigma_z sigma_z``, the convention of SystemParams.
    j_nn : float
        Coefficient of the density-density term, ``4 * j_zz``.
    tunnel_residual : float
        Coefficient of the excitation-exchange term; zero when the flux
        condition holds.
    rwa_ratio : float
        ``e_jm`` divided by the scale it must stay well below for the
        rotating-wave treatment of the coupling.
    j_bound : float
        ``sqrt(e_c1 e_c2) / 10``.
    secondary_coupling_ok : tuple of bool
        Whether line 1 barely couples to transmon 2 and line 2 to transmon 1.
    secondary_ratios : tuple of float
        ``c_m / ((c_g2/c_g1) c_1)`` and ``c_m / ((c_g1/c_g2) c_2)``.
    """

    e_c1: float
    e_c2: float
    e_cm: float
    e_j1_eff: float
    e_j2_eff: float
    omega1: float
    omega2: float
    j_zz: float
    j_nn: float
    tunnel_residual: float
    rwa_ratio: float
    j_bound: float
    secondary_coupling_ok: tuple
    secondary_ratios: tuple

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "e_c1", "e_c2", "e_cm", "e_j1_eff", "e_j2_eff", "omega1", "omega2",
            "j_zz", "j_nn", "tunnel_residual", "rwa_ratio", "j_bound")}
        out["secondary_ok_1"], out["secondary_ok_2"] = self.secondary_coupling_ok
        out["secondary_ratio_1"], out["secondary_ratio_2"] = self.secondary_ratios
        return out


def _charging(c_1: float, c_2: float, c_m: float) -> tuple[float, float, float]:
    det = c_2 * c_m + c_1 * (c_2 + c_m)
    return (_CHARGE_SCALE * (c_2 + c_m) / det,
            _CHARGE_SCALE * (c_1 + c_m) / det,
            _CHARGE_SCALE * c_m / det)


def capacitive_ratio(c_1: float, c_2: float, c_m: float) -> float:
    """``c_m / sqrt((c_1 + c_m)(c_2 + c_m))``, the value ``e_jm / sqrt(E1 E2)``
    must take to cancel tunneling."""
    return c_m / math.sqrt((c_1 + c_m) * (c_2 + c_m))


def derive(cp: CircuitParams) -> DerivedCircuit:
    """Effective charging energies, frequencies and couplings of a circuit.

    Parameters
    ----------
    cp : CircuitParams

    Returns
    -------
    DerivedCircuit
    """
    c_1, c_2 = cp.c_1, cp.c_2
    e_c1, e_c2, e_cm = _charging(c_1, c_2, cp.c_m)
    ej1 = cp.e_j1 + cp.e_jm
    ej2 = cp.e_j2 + cp.e_jm
    root_c = math.sqrt(e_c1 * e_c2)
    root_j = math.sqrt(ej1 * ej2)
    j_ratio = cp.e_jm / root_j
    residual = (math.sqrt(2.0) * (ej1 * ej2) ** 0.25 * (e_c1 * e_c2) ** 0.25
                * (e_cm / root_c - j_ratio))
    j_zz = 0.5 * root_c * j_ratio
    rwa_scale = ((e_c1 * ej1 ** 3 * ej2 / e_c2) ** 0.25
                 + (e_c2 * ej2 ** 3 * ej1 / e_c1) ** 0.25)
    ratios = (cp.c_m / (cp.c_g2 / cp.c_g1 * c_1), cp.c_m / (cp.c_g1 / cp.c_g2 * c_2))
    return DerivedCircuit(
        e_c1=e_c1, e_c2=e_c2, e_cm=e_cm, e_j1_eff=ej1, e_j2_eff=ej2,
        omega1=math.sqrt(8.0 * e_c1 * ej1), omega2=math.sqrt(8.0 * e_c2 * ej2),
        j_zz=j_zz, j_nn=4.0 * j_zz, tunnel_residual=residual,
        rwa_ratio=cp.e_jm / rwa_scale, j_bound=0.1 * root_c,
        secondary_coupling_ok=tuple(r < SECONDARY_COUPLING_LIMIT for r in ratios),
        secondary_ratios=ratios,
    )


def _coupling_at(caps: Capacitances, c_m: float) -> float:
    e_c1, e_c2, _ = _charging(caps.c_1, caps.c_2, c_m)
    return 0.5 * math.sqrt(e_c1 * e_c2) * capacitive_ratio(caps.c_1, caps.c_2, c_m)


def solve_coupling(caps: Capacitances, omega: float, j_zz: float) -> CircuitParams:
    """Circuit elements giving two transmons at ``omega`` with ZZ coupling ``j_zz``.

    Once tunneling is cancelled the coupling depends only on capacitances,
    so the coupling capacitance ``c_m`` is solved for while the transmon and
    line capacitances stay fixed.  The Josephson energies then follow in
    closed form from the frequency and the flux condition.

    Parameters
    ----------
    caps : Capacitances
    omega : float
        Common transition frequency of both transmons.
    j_zz : float
        Target ZZ coupling.

    Returns
    -------
    CircuitParams

    Raises
    ------
    Infeasible
        If ``j_zz`` exceeds ``sqrt(E_C1 E_C2) / 10`` at the solution, is out
        of reach of any coupling capacitance, or a Josephson energy would be
        non-positive.
    """
    _positive(omega=omega, j_zz=j_zz)
    scale = max(caps.c_1, caps.c_2)
    # The coupling grows monotonically with c_m and saturates.
    upper = 1e6 * scale
    if j_zz >= _coupling_at(caps, upper):
        raise Infeasible(f"j_zz={j_zz!r} exceeds the largest coupling these capacitances allow")
    c_m = optimize.brentq(lambda c: _coupling_at(caps, c) - j_zz, 0.0, upper,
                          xtol=1e-15 * scale, rtol=1e-15, maxiter=500)
    e_c1, e_c2, _ = _charging(caps.c_1, caps.c_2, c_m)
    bound = 0.1 * math.sqrt(e_c1 * e_c2)
    if j_zz > bound:
        raise Infeasible(f"j_zz={j_zz!r} exceeds the bound sqrt(E_C1 E_C2)/10 = {bound!r}")
    ej1 = omega * omega / (8.0 * e_c1)
    ej2 = omega * omega / (8.0 * e_c2)
    e_jm = capacitive_ratio(caps.c_1, caps.c_2, c_m) * math.sqrt(ej1 * ej2)
    e_j1, e_j2 = ej1 - e_jm, ej2 - e_jm
    if not (e_j1 > 0.0 and e_j2 > 0.0):
        raise Infeasible("no positive transmon Josephson energies reach the target")
    return CircuitParams(caps.c_j1, caps.c_j2, caps.c_g1, caps.c_g2, c_m, e_j1, e_j2, e_jm)


def to_system_params(dc: DerivedCircuit, tau1: float, tau2: float,
                     gamma_r: float = 0.0, gamma_phi: float = 0.0) -> SystemParams:
    """Scattering-center parameters of a circuit, in units of its ``omega1``.

    Parameters
    ----------
    dc : DerivedCircuit
    tau1, tau2 : float
        Line-induced lifetimes, in units of ``1 / omega1``.
    gamma_r, gamma_phi : float
        Relaxation and dephasing rates, in units of ``omega1``.

    Raises
    ------
    MappingInvalid
        If the tunneling residual exceeds ``1e-3`` of ``j_nn``.
    """
    if dc.j_nn == 0.0:
        if dc.tunnel_residual != 0.0:
            raise MappingInvalid("tunneling without density coupling")
    elif abs(dc.tunnel_residual) / dc.j_nn > MAPPING_TOLERANCE:
        raise MappingInvalid(
            f"tunneling residual is {abs(dc.tunnel_residual) / dc.j_nn:.3g} of the density "
            f"coupling; the ZZ description needs at most {MAPPING_TOLERANCE:g}")
    unit = dc.omega1
    return SystemParams(omega1=1.0, omega2=dc.omega2 / unit, coupling_j=dc.j_zz / unit,
                        tau1=tau1, tau2=tau2, gamma_r=gamma_r, gamma_phi=gamma_phi)
