import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from photon_transistor.analytic import (
    p_ex, pt_closed, pt_detuned, pt_detuned_closed, smatrix_elastic)
from photon_transistor.model import PulseSpec, Shape, SystemParams, pulse_amp_freq

taus = st.floats(20.0, 1e5)
rates = st.floats(0.0, 1e-3)


def params(tau1=200.0, gamma_r=0.0, gamma_phi=0.0, tau2=1e4):
    return SystemParams(tau1=tau1, tau2=tau2, gamma_r=gamma_r, gamma_phi=gamma_phi)


def brute_force(p, tau_t, detuning):
    """Integrate the pulse spectrum against the elastic amplitudes directly."""
    pulse = PulseSpec(shape=Shape.DECAYING, carrier=0.0, width=tau_t)

    def weight(k, which):
        t, r = smatrix_elastic(p, k, detuning)
        return abs(complex(pulse_amp_freq(pulse, k))) ** 2 * abs([t, r][which]) ** 2

    pts = sorted({0.0, detuning})
    out = []
    for which in (0, 1):
        total = integrate.quad(weight, -np.inf, pts[0], args=(which,), epsabs=1e-13, limit=400)[0]
        if pts[-1] > pts[0]:
            total += integrate.quad(weight, pts[0], pts[-1], args=(which,), epsabs=1e-13, limit=400)[0]
        total += integrate.quad(weight, pts[-1], np.inf, args=(which,), epsabs=1e-13, limit=400)[0]
        out.append(total)
    return out


class TestClosedForm:
    def test_equal_lifetimes(self):
        out = pt_closed(params(), 200.0)
        assert out.p_t == pytest.approx(0.5, abs=1e-15)
        assert out.p_r == pytest.approx(0.5, abs=1e-15)
        assert out.p_loss == pytest.approx(0.0, abs=1e-15)

    def test_weak_dissipation(self):
        out = pt_closed(SystemParams.from_gamma(1e-6, tau1=200.0), 2000.0)
        # Direct evaluation of the closed form in exact rational arithmetic.
        t1, tt, g = 200.0, 2000.0, 1e-6
        den = (1 + t1 * g) * (t1 + tt + tt * t1 * g)
        assert out.p_t == pytest.approx((t1 + t1 ** 2 * g + (t1 * g) ** 2 * tt) / den, rel=1e-14)
        assert out.p_t == pytest.approx(0.090893, abs=5e-7)
        assert out.p_r == pytest.approx(tt / den, rel=1e-14)
        # The reference figure 0.908739 is 5e-6 below the exact value; see notes.
        assert out.p_r == pytest.approx(0.908744, abs=5e-7)

    def test_long_pulse_mirror(self):
        assert pt_closed(params(), 2e4).p_r == pytest.approx(100 / 101, rel=1e-14)

    def test_rejects_bad_width(self):
        with pytest.raises(ValueError):
            pt_closed(params(), 0.0)
        with pytest.raises(ValueError):
            pt_detuned(params(), -1.0, 0.0)
        with pytest.raises(ValueError):
            p_ex(params(), 0.0, 0.0)

    @given(taus, taus)
    def test_lossless_conserves(self, tau1, tau_t):
        out = pt_closed(params(tau1=tau1), tau_t)
        assert out.p_t + out.p_r == pytest.approx(1.0, abs=1e-12)

    @given(taus, taus, st.floats(1e-9, 1e-3), st.floats(0.0, 1e-3))
    def test_lossy_leaks(self, tau1, tau_t, gr, gp):
        out = pt_closed(params(tau1=tau1, gamma_r=gr, gamma_phi=gp), tau_t)
        assert 0.0 <= out.p_t <= 1.0 and 0.0 <= out.p_r <= 1.0
        assert out.p_t + out.p_r < 1.0

    def test_pure_dephasing_leaks(self):
        out = pt_closed(params(gamma_phi=1e-3), 500.0)
        assert out.p_loss > 0.0

    @given(taus)
    def test_transmission_decreases_with_length(self, tau1):
        widths = np.geomspace(1.0, 1e6, 40)
        values = [pt_closed(params(tau1=tau1), w).p_t for w in widths]
        assert np.all(np.diff(values) < 0)


class TestDetuned:
    @given(taus, taus, rates, rates)
    def test_reduces_at_resonance(self, tau1, tau_t, gr, gp):
        p = params(tau1=tau1, gamma_r=gr, gamma_phi=gp)
        ref = pt_closed(p, tau_t)
        for out in (pt_detuned(p, tau_t, 0.0), pt_detuned_closed(p, tau_t, 0.0)):
            assert out.p_t == pytest.approx(ref.p_t, rel=1e-9)
            assert out.p_r == pytest.approx(ref.p_r, rel=1e-9)

    def test_resonance_over_random_draws(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            tau1, tau_t = 10.0 ** rng.uniform(1, 4, 2)
            gr, gp = 10.0 ** rng.uniform(-9, -3, 2)
            p = params(tau1=tau1, gamma_r=gr, gamma_phi=gp)
            ref, out = pt_closed(p, tau_t), pt_detuned(p, tau_t, 0.0)
            assert out.p_t == pytest.approx(ref.p_t, rel=1e-9)
            assert out.p_r == pytest.approx(ref.p_r, rel=1e-9)

    @given(st.floats(20.0, 2e3), st.floats(20.0, 2e4), rates, st.floats(-0.2, 0.2))
    def test_quadrature_matches_closed_form(self, tau1, tau_t, gamma, detuning):
        p = params(tau1=tau1, gamma_phi=gamma)
        a, b = pt_detuned(p, tau_t, detuning), pt_detuned_closed(p, tau_t, detuning)
        assert a.p_t == pytest.approx(b.p_t, rel=1e-9, abs=1e-12)
        assert a.p_r == pytest.approx(b.p_r, rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("detuning", [0.0, 0.003, -0.01, 0.04])
    def test_against_independent_quadrature(self, detuning):
        p = params(gamma_r=2e-4, gamma_phi=1e-4)
        out = pt_detuned(p, 700.0, detuning)
        p_t, p_r = brute_force(p, 700.0, detuning)
        assert out.p_t == pytest.approx(p_t, abs=1e-8)
        assert out.p_r == pytest.approx(p_r, abs=1e-8)

    def test_large_detuning_transmits(self):
        out = pt_detuned(params(), 2000.0, 0.04)
        assert out.p_t >= 0.98

    def test_far_detuned_decouples(self):
        out = pt_detuned(params(gamma_r=1e-4), 2000.0, 1e3)
        assert out.p_t == pytest.approx(1.0, abs=1e-6)
        assert out.p_r == pytest.approx(0.0, abs=1e-6)

    @given(taus, taus, st.floats(-0.1, 0.1))
    def test_lossless_conserves(self, tau1, tau_t, detuning):
        out = pt_detuned_closed(params(tau1=tau1), tau_t, detuning)
        assert out.p_t + out.p_r == pytest.approx(1.0, abs=1e-12)


class TestSMatrix:
    def test_perfect_mirror(self):
        t, r = smatrix_elastic(params(), 1.0, 1.0)
        assert t == 0 and r == -1
        assert abs(r) ** 2 == 1.0

    def test_far_detuned(self):
        t, r = smatrix_elastic(params(), 1e6, 1.0)
        assert abs(t - 1) < 1e-6 and abs(r) < 1e-6

    def test_matched_loss_halves(self):
        p = SystemParams(tau1=200.0, gamma_phi=1.0 / 200.0)
        t, _ = smatrix_elastic(p, 1.0, 1.0)
        assert t == pytest.approx(0.5, abs=1e-15)

    def test_vectorized(self):
        t, r = smatrix_elastic(params(), np.array([0.99, 1.0, 1.01]), 1.0)
        assert t.shape == (3,) and np.allclose(t - r, 1.0)

    @given(st.floats(-1.0, 1.0), taus, rates)
    def test_unitarity_deficit(self, k, tau1, gamma):
        p = params(tau1=tau1, gamma_phi=gamma)
        t, r = smatrix_elastic(p, k, 0.0)
        total = abs(t) ** 2 + abs(r) ** 2
        if gamma == 0.0:
            assert total == pytest.approx(1.0, abs=1e-12)
        else:
            assert total <= 1.0 + 1e-15


class TestExcitation:
    def test_matched_full_inversion(self):
        assert p_ex(params(tau2=200.0), 200.0, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_decay_branch(self):
        assert p_ex(params(tau2=200.0), 200.0, 200.0) == pytest.approx(math.exp(-2.0), rel=1e-14)

    def test_matched_loss(self):
        p = SystemParams(tau2=200.0, gamma_phi=1.0 / 200.0)
        assert p_ex(p, 200.0, 0.0) == pytest.approx(4.0 / 9.0, rel=1e-14)

    @given(taus, taus, rates, st.floats(1.0, 1e5))
    def test_symmetric_peaked_profile(self, tau2, tau_c, gamma, t):
        p = params(tau2=tau2, gamma_phi=gamma)
        peak = p_ex(p, tau_c, 0.0)
        assert peak <= 1.0 + 1e-15
        assert p_ex(p, tau_c, t) == pytest.approx(p_ex(p, tau_c, -t), rel=1e-14)
        assert p_ex(p, tau_c, t) <= peak
        rate = 2 * p.gamma + 2 / tau2
        assert p_ex(p, tau_c, t) == pytest.approx(peak * math.exp(-rate * t), rel=1e-12)
