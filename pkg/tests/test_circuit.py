import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, reject
from hypothesis import strategies as st

from photon_transistor.circuit import (
    Capacitances, CircuitParams, capacitive_ratio, derive, solve_coupling, to_system_params)
from photon_transistor.errors import Infeasible, MappingInvalid
from photon_transistor.model import SystemParams, control_pulse, target_pulse
from photon_transistor.pheno import metrics, optimize_pulses

FIELDS = ("e_c1", "e_c2", "e_cm", "omega1", "omega2", "j_zz", "j_nn",
          "tunnel_residual", "rwa_ratio", "j_bound")


def coupling_for_condition(e_j1, e_j2, kappa):
    """``e_jm`` with ``e_jm / sqrt((e_j1 + e_jm)(e_j2 + e_jm)) = kappa``."""
    k2 = kappa * kappa
    s, p = e_j1 + e_j2, e_j1 * e_j2
    return (k2 * s + math.sqrt(k2 * k2 * s * s + 4.0 * (1.0 - k2) * k2 * p)) / (2.0 * (1.0 - k2))


def random_circuit(rng, condition=True, max_ratio=None):
    c_j1, c_j2 = rng.uniform(0.5, 2.0, 2)
    c_g1, c_g2 = rng.uniform(0.01, 0.3, 2)
    c_1, c_2 = c_j1 + c_g1, c_j2 + c_g2
    if max_ratio is None:
        c_m = rng.uniform(0.001, 1.0)
    else:
        c_m = rng.uniform(1e-4, 1.0) * max_ratio / (1 - max_ratio) * min(c_1, c_2)
    e_j1, e_j2 = rng.uniform(5.0, 200.0, 2)
    kappa = capacitive_ratio(c_1, c_2, c_m)
    e_jm = coupling_for_condition(e_j1, e_j2, kappa)
    if not condition:
        e_jm *= 1.0 + rng.choice([-1, 1]) * rng.uniform(1e-3, 0.5)
    return CircuitParams(c_j1, c_j2, c_g1, c_g2, c_m, e_j1, e_j2, e_jm)


def flux_condition_gap(cp):
    ej1, ej2 = cp.e_j1 + cp.e_jm, cp.e_j2 + cp.e_jm
    return cp.e_jm / math.sqrt(ej1 * ej2) - capacitive_ratio(cp.c_1, cp.c_2, cp.c_m)


class TestDerive:
    def test_uncoupled_limit(self):
        cp = CircuitParams(0.9, 1.3, 0.1, 0.2, 0.0, 40.0, 50.0, 0.0)
        dc = derive(cp)
        assert dc.e_cm == 0 and dc.j_zz == 0 and dc.tunnel_residual == 0
        assert dc.e_c1 == pytest.approx(1 / (2 * 1.0), rel=1e-15)
        assert dc.e_c2 == pytest.approx(1 / (2 * 1.5), rel=1e-15)
        assert dc.omega1 == pytest.approx(math.sqrt(8 * dc.e_c1 * 40.0), rel=1e-15)

    def test_symmetric_condition(self):
        c, c_m, e_j = 1.25, 0.07, 60.0
        cp = CircuitParams(1.0, 1.0, 0.25, 0.25, c_m, e_j, e_j, e_j * c_m / c)
        dc = derive(cp)
        assert abs(dc.tunnel_residual) <= 1e-13 * dc.j_nn

    def test_coupling_formula(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            cp = random_circuit(rng)
            dc = derive(cp)
            c_1, c_2, c_m = cp.c_1, cp.c_2, cp.c_m
            ref = c_m / (2 * math.sqrt((c_1 + c_m) * (c_2 + c_m))) * math.sqrt(dc.e_c1 * dc.e_c2)
            assert dc.j_zz == pytest.approx(ref, rel=1e-12)
            assert dc.j_nn == 4 * dc.j_zz

    def test_charging_energies(self):
        cp = CircuitParams(0.8, 1.1, 0.2, 0.1, 0.3, 30.0, 40.0, 1.0)
        dc = derive(cp)
        det = 1.2 * 0.3 + 1.0 * (1.2 + 0.3)
        assert dc.e_c1 == pytest.approx(0.5 * (1.2 + 0.3) / det, rel=1e-14)
        assert dc.e_c2 == pytest.approx(0.5 * (1.0 + 0.3) / det, rel=1e-14)
        assert dc.e_cm == pytest.approx(0.5 * 0.3 / det, rel=1e-14)

    def test_condition_iff_zero_residual(self):
        rng = np.random.default_rng(2024)
        for i in range(1000):
            cp = random_circuit(rng, condition=i % 2 == 0)
            dc = derive(cp)
            holds = abs(flux_condition_gap(cp)) <= 1e-14
            vanishes = abs(dc.tunnel_residual) <= 1e-12 * dc.j_nn
            assert holds == vanishes == (i % 2 == 0)

    def test_weak_coupling_limit_is_smooth(self):
        caps = (0.9, 1.2, 0.1, 0.15)
        previous = None
        for c_m in np.geomspace(1e-1, 1e-12, 23):
            c_1, c_2 = caps[0] + caps[2], caps[1] + caps[3]
            e_jm = coupling_for_condition(30.0, 45.0, capacitive_ratio(c_1, c_2, c_m))
            dc = derive(CircuitParams(*caps, c_m, 30.0, 45.0, e_jm))
            assert dc.j_zz > 0
            if previous is not None:
                assert dc.j_zz < previous
            previous = dc.j_zz
        assert dc.j_zz < 1e-12
        assert dc.e_c1 == pytest.approx(1 / (2 * c_1), rel=1e-10)
        assert dc.e_c2 == pytest.approx(1 / (2 * c_2), rel=1e-10)

    def test_bound_under_small_coupling_capacitance(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            cp = random_circuit(rng, max_ratio=0.2)
            assert cp.c_m / (cp.c_1 + cp.c_m) < 0.2 and cp.c_m / (cp.c_2 + cp.c_m) < 0.2
            dc = derive(cp)
            assert dc.j_zz < dc.j_bound

    def test_swap_symmetry(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            cp = random_circuit(rng, condition=bool(rng.integers(2)))
            a, b = derive(cp), derive(cp.swapped())
            for x, y in (("e_c1", "e_c2"), ("omega1", "omega2"), ("e_j1_eff", "e_j2_eff")):
                assert getattr(a, x) == pytest.approx(getattr(b, y), rel=1e-14)
            for name in ("e_cm", "j_zz", "j_nn", "tunnel_residual", "rwa_ratio", "j_bound"):
                assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-12,
                                                          abs=1e-12 * a.j_nn)
            assert a.secondary_ratios == pytest.approx(b.secondary_ratios[::-1], rel=1e-14)

    def test_secondary_coupling_flags(self):
        weak = derive(CircuitParams(1.0, 1.0, 0.1, 0.1, 0.01, 40.0, 40.0, 0.4))
        strong = derive(CircuitParams(1.0, 1.0, 0.1, 0.1, 0.5, 40.0, 40.0, 13.0))
        assert weak.secondary_coupling_ok == (True, True)
        assert strong.secondary_coupling_ok == (False, False)

    @pytest.mark.parametrize("field", ["c_j1", "c_g2", "e_j1"])
    def test_rejects_non_positive(self, field):
        kw = dict(c_j1=1.0, c_j2=1.0, c_g1=0.1, c_g2=0.1, c_m=0.1, e_j1=1.0, e_j2=1.0, e_jm=0.1)
        kw[field] = 0.0
        with pytest.raises(ValueError):
            CircuitParams(**kw)
        with pytest.raises(ValueError):
            CircuitParams(**{**kw, field: 1.0, "c_m": -0.1})


class TestSolve:
    @given(st.floats(0.5, 2.0), st.floats(0.5, 2.0), st.floats(0.01, 0.3), st.floats(0.01, 0.3),
           st.floats(5.0, 40.0), st.floats(1e-3, 1.0))
    def test_round_trip(self, c_j1, c_j2, c_g1, c_g2, omega_ratio, j_frac):
        caps = Capacitances(c_j1, c_j2, c_g1, c_g2)
        e_c = 0.5 / max(caps.c_1, caps.c_2)
        omega = omega_ratio * e_c
        # Stay inside the bound evaluated at zero coupling capacitance.
        j = j_frac * 0.09 * math.sqrt(0.25 / (caps.c_1 * caps.c_2))
        try:
            cp = solve_coupling(caps, omega, j)
        except Infeasible:
            reject()
        dc = derive(cp)
        assert dc.omega1 == pytest.approx(omega, rel=1e-8)
        assert dc.omega2 == pytest.approx(omega, rel=1e-8)
        assert dc.j_zz == pytest.approx(j, rel=1e-6)
        assert abs(dc.tunnel_residual) <= 1e-10 * dc.j_nn

    def test_transmon_regime(self):
        caps = Capacitances(0.9, 0.9, 0.1, 0.1)
        e_c_target = derive(CircuitParams(0.9, 0.9, 0.1, 0.1, 0.1, 1.0, 1.0, 0.0)).e_c1
        omega = math.sqrt(8 * 50) * e_c_target
        j = 0.5 * e_c_target * capacitive_ratio(1.0, 1.0, 0.1)
        cp = solve_coupling(caps, omega, j)
        dc = derive(cp)
        assert cp.c_m == pytest.approx(0.1, rel=1e-9)
        assert dc.e_j1_eff / dc.e_c1 == pytest.approx(50.0, rel=1e-9)
        assert dc.rwa_ratio < 0.2

    def test_bound_violation(self):
        caps = Capacitances(0.9, 0.9, 0.1, 0.1)
        # At Ebar/E_C = 50 the ratio J/omega = 0.01 needs J/E_C = 0.2.
        with pytest.raises(Infeasible):
            solve_coupling(caps, 20.0 * 0.5, 0.01 * 20.0 * 0.5)

    def test_unreachable_coupling(self):
        with pytest.raises(Infeasible):
            solve_coupling(Capacitances(0.9, 0.9, 0.1, 0.1), 10.0, 1.0)

    def test_rejects_bad_targets(self):
        caps = Capacitances(0.9, 0.9, 0.1, 0.1)
        with pytest.raises(ValueError):
            solve_coupling(caps, -1.0, 0.01)
        with pytest.raises(ValueError):
            solve_coupling(caps, 10.0, 0.0)


class TestMapping:
    def solved(self, omega_over_ec=8.0, j_over_omega=0.01):
        caps = Capacitances(0.9, 0.9, 0.1, 0.1)
        omega = omega_over_ec * 0.5
        return derive(solve_coupling(caps, omega, j_over_omega * omega))

    def test_symmetric_packaging(self):
        dc = self.solved()
        p = to_system_params(dc, 200.0, 1e4, gamma_r=1e-6)
        assert p.omega1 == 1.0 and p.omega2 == pytest.approx(1.0, rel=1e-10)
        assert p.coupling_j == pytest.approx(0.01, rel=1e-8)
        assert (p.tau1, p.tau2, p.gamma_r, p.gamma_phi) == (200.0, 1e4, 1e-6, 0.0)

    def test_residual_rejected(self):
        dc = self.solved()
        bad = dataclasses.replace(dc, tunnel_residual=0.1 * dc.j_nn)
        with pytest.raises(MappingInvalid):
            to_system_params(bad, 200.0, 1e4)
        ok = dataclasses.replace(dc, tunnel_residual=0.5e-3 * dc.j_nn)
        to_system_params(ok, 200.0, 1e4)

    def test_pipeline_reproduces_reference_transistor(self):
        p = to_system_params(self.solved(), 200.0, 1e4, 1e-6, 1e-6)
        ref = SystemParams(gamma_r=1e-6, gamma_phi=1e-6)
        m = optimize_pulses(p)
        assert m.c_s == pytest.approx(optimize_pulses(ref).c_s, abs=1e-6)
        q = p.replace(tau2=m.tau_c_opt)
        assert metrics(q, target_pulse(q, m.tau_t_opt), control_pulse(q)).r_s > 10

    def test_as_dict(self):
        d = self.solved().as_dict()
        for name in FIELDS:
            assert name in d
        assert d["secondary_ok_1"] in (True, False)
