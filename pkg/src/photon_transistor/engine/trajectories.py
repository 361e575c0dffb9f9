"""Pure-state wave-packet trajectories on a time-bin grid.

Each line is cut into time bins of width ``h`` and the two-photon state is
propagated in the sector with at most two excitations.  A photon that has
left the scattering center lives in a bin ``s``; the amplitudes of all bins
evolve with the same linear equation, so only their moments
``sum_s conj(f_s) e_s`` are carried forward.  This keeps every bin exactly
while the cost per step stays independent of the number of bins.

State components (indices of the kernel vector):

* ``cff, cef, cfe, cee`` - both photons not yet emitted, labelled by which
  qubit holds an excitation (``f``: photon still in its input packet).
* target-emitted moments for the channels ``r``, ``l`` and ``x`` (lost by
  relaxation), each ``(ff, fe, ee)`` with the control still unresolved.
* control-emitted moments for ``b`` and ``y`` (lost), each ``(ff, fe, ee)``.
* the six finished joint weights ``(target channel, control channel)``.

Relaxation and dephasing are Monte Carlo quantum jumps.  The no-jump pass is
exact and gives the coherent-convention numbers directly; jumped histories
are sampled by stratified first-jump times.  Seeding: ``SeedSequence(seed)``
spawns ``n_traj + 1`` children; child 0 draws the strata offsets and child
``i`` seeds the random stream of fork ``i``.
"""

from __future__ import annotations

import math

import numpy as np

from ..model import pulse_flux_remaining
from .config import EngineConfig, Problem
from ._select import kernels

__all__ = ["run_trajectories", "step_size", "TrajectoryResult"]

N_STATE = 25
_FORK_FLAG_TARGET = 1
_FORK_FLAG_CONTROL = 2


class TrajectoryResult:
    def __init__(self, coh, flux, sigma, sigma_flux, steps, n_forks, record=None):
        self.coh = coh
        self.flux = flux
        self.sigma = sigma
        self.sigma_flux = sigma_flux
        self.steps = steps
        self.n_forks = n_forks
        self.record = record


def step_size(prob: Problem, cfg: EngineConfig) -> float:
    e = np.abs(prob.energies[1:]).max(initial=0.0)
    offsets = [abs(prob.pulse_t[2])] + ([abs(prob.pulse_c[2])] if prob.pair else [])
    fastest = max([e] + offsets)
    h = prob.tau_min / 50.0
    if fastest > 0.0:
        h = min(h, 0.2 / fastest)
    if cfg.time_step is not None:
        h = min(h, cfg.time_step)
    if cfg.n_modes is not None:
        h = min(h, (prob.t1 - prob.t0) / cfg.n_modes)
    return h


def _system_vector(prob: Problem) -> np.ndarray:
    p = prob.params
    kappa1 = 1.0 / p.tau1
    d = 0.5 * p.gamma_r + p.gamma_phi
    if prob.pair:
        kappa2, gb, d2 = 1.0 / p.tau2, math.sqrt(2.0 / p.tau2), d
        r2, f2 = p.gamma_r, 2.0 * p.gamma_phi
    else:
        # Qubit 2 is frozen in its initial state.
        kappa2 = gb = d2 = r2 = f2 = 0.0
    e = prob.energies
    return np.array([e[1], e[2], e[3], kappa1, kappa2, gb, d, d2,
                     p.gamma_r, 2.0 * p.gamma_phi, r2, f2], dtype=float)


def _initial(prob: Problem) -> np.ndarray:
    y = np.zeros(N_STATE, dtype=complex)
    y[2 if prob.qubit2_excited else 0] = 1.0
    return y


def _tables(states: np.ndarray, pair: bool, ft: float, fc: float):
    """Raw 3x2 channel tables of final states (rows ch r, l, x; cols b, y).

    ``ft`` and ``fc`` are the weights of the input packets still to arrive at
    the end of the window; the table sums to the state norm.
    """
    states = np.atleast_2d(states)
    n = states.shape[0]
    tab = np.zeros((n, 3, 2))
    for ch in range(3):
        for c in range(2):
            tab[:, ch, c] = states[:, 19 + 2 * ch + c].real
    col_open = 1 if pair else 0
    for ch in range(3):
        # Unresolved control packet has passed by the end of the window.
        tab[:, ch, col_open] += states[:, 4 + 3 * ch].real * fc + states[:, 6 + 3 * ch].real
    for c in range(2):
        tab[:, 2, c] += states[:, 13 + 3 * c].real * ft + states[:, 15 + 3 * c].real
    amp = np.abs(states[:, :4]) ** 2
    tab[:, 2, col_open] += amp[:, 0] * ft * fc + amp[:, 1] * fc + amp[:, 2] * ft + amp[:, 3]
    return tab


def _coherent(tab: np.ndarray, flags: np.ndarray) -> np.ndarray:
    out = tab.copy()
    hit_t = (flags & _FORK_FLAG_TARGET) != 0
    out[hit_t, 2, :] += out[hit_t, 0, :] + out[hit_t, 1, :]
    out[hit_t, 0:2, :] = 0.0
    hit_c = (flags & _FORK_FLAG_CONTROL) != 0
    out[hit_c, :, 1] += out[hit_c, :, 0]
    out[hit_c, :, 0] = 0.0
    return out


def run_trajectories(prob: Problem, cfg: EngineConfig, t_rec=None) -> TrajectoryResult:
    k = kernels()
    h = step_size(prob, cfg)
    sysv = _system_vector(prob)
    y0 = _initial(prob)
    bp = np.ascontiguousarray(prob.breakpoints, dtype=float)
    empty = np.zeros(0)
    rec_times = np.zeros(0) if t_rec is None else np.ascontiguousarray(t_rec, dtype=float)
    y_end, _, _, rec = k.traj_integrate(y0, bp, prob.pulse_t, prob.pulse_c, sysv, h,
                                        empty, np.zeros(0, dtype=np.uint64), rec_times)
    ft = float(pulse_flux_remaining(prob.target, prob.t1))
    fc = float(pulse_flux_remaining(prob.control, prob.t1)) if prob.pair else 1.0
    steps = int(sum(max(1, math.ceil((b - a) / h - 1e-9)) for a, b in zip(bp[:-1], bp[1:]) if b > a))
    base = _tables(y_end, prob.pair, ft, fc)[0]
    n_end = float(base.sum())
    p = prob.params
    dissipative = p.gamma_r > 0.0 or p.gamma_phi > 0.0
    lost = max(0.0, 1.0 - n_end)
    if not dissipative or lost <= 0.0:
        return TrajectoryResult(base, base.copy(), 0.0, 0.0, steps, 0, rec)

    n = cfg.n_traj
    children = np.random.SeedSequence(cfg.rng_seed).spawn(n + 1)
    jitter = np.random.default_rng(children[0]).random(n)
    seeds = np.array([c.generate_state(1, dtype=np.uint64)[0] for c in children[1:]],
                     dtype=np.uint64)
    # Stratified first-jump thresholds, in decreasing order.
    u = (np.arange(n) + jitter) / n
    thresholds = np.ascontiguousarray(n_end + lost * (1.0 - u))
    _, forks, flags, _ = k.traj_integrate(y0, bp, prob.pulse_t, prob.pulse_c, sysv, h,
                                          thresholds, seeds, empty)
    tab = _tables(forks, prob.pair, ft, fc)
    norms = tab.sum(axis=(1, 2))
    tab = tab / np.where(norms > 0.0, norms, 1.0)[:, None, None]
    flags = np.asarray(flags, dtype=np.int64)
    coh_f = _coherent(tab, flags)
    # No-jump histories are coherent by definition.
    coh = base + lost * coh_f.mean(axis=0)
    flux = base + lost * tab.mean(axis=0)
    sigma = lost * float(coh_f[:, 0, :].sum(axis=1).std(ddof=1)) / math.sqrt(n) if n > 1 else lost
    sigma_flux = lost * float(tab[:, 0, :].sum(axis=1).std(ddof=1)) / math.sqrt(n) if n > 1 else lost
    return TrajectoryResult(coh, flux, sigma, sigma_flux, steps, n, rec)
