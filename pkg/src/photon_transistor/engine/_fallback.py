"""Pure-Python implementations of the engine kernels.

These follow the compiled kernels line by line and are selected when the
extension is unavailable (or forced with ``PHOTON_TRANSISTOR_PURE=1``).
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

NAME = "python"

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def envelope(row, t, mid):
    """Pulse amplitude in the rotating frame; ``mid`` fixes the support side."""
    if row[0] == 0.0:
        return 0j
    shape, omega, tau, delay = row[1], row[2], row[3], row[4]
    if shape * (mid - delay) < 0.0:
        return 0j
    s = t - delay
    return math.sqrt(2.0 / tau) * math.exp(-shape * s / tau) * complex(
        math.cos(omega * s), -math.sin(omega * s))


def future(row, t, mid):
    """Weight of the pulse still to arrive after ``t``."""
    if row[0] == 0.0:
        return 1.0
    shape, tau, delay = row[1], row[3], row[4]
    s = t - delay
    if shape > 0.0:
        return 1.0 if mid < delay else math.exp(-2.0 * s / tau)
    return -math.expm1(2.0 * s / tau) if mid < delay else 0.0


def _coefficients(pt, pc, t, mid):
    xt = envelope(pt, t, mid)
    xc = envelope(pc, t, mid)
    return (1.0, xt, xt.conjugate(), abs(xt) ** 2, xc, xc.conjugate(), abs(xc) ** 2)


def hier_integrate(indptr, indices, data, tags, y0, breakpoints, pulse_t, pulse_c,
                   rtol, atol, h0, hmax, t_out, readout):
    """Integrate ``dy/dt = sum_f f(t) M_f y`` with adaptive DOPRI5.

    ``t_out`` lists times at which ``readout @ y`` is recorded.  Returns the
    final state, the recorded readouts and the number of accepted steps.
    """
    n = y0.size
    mats = []
    for tag in range(7):
        sel = tags == tag
        rows = np.repeat(np.arange(n), np.diff(indptr))[sel]
        mats.append(sp.csr_matrix((data[sel], (rows, indices[sel])), shape=(n, n)))
    active = [k for k in range(1, 7) if mats[k].nnz]

    def rhs(t, y, mid):
        coef = _coefficients(pulse_t, pulse_c, t, mid)
        out = mats[0] @ y
        for k in active:
            if coef[k] != 0.0:
                out += coef[k] * (mats[k] @ y)
        return out

    t_out = np.asarray(t_out, dtype=float)
    rec = np.zeros((t_out.size, readout.shape[0]), dtype=complex)
    marks = np.union1d(np.asarray(breakpoints, float), t_out)
    y = np.array(y0, dtype=complex)
    n_out = 0
    while n_out < t_out.size and t_out[n_out] <= marks[0]:
        rec[n_out] = readout @ y
        n_out += 1
    h = h0
    steps = 0
    for a, b in zip(marks[:-1], marks[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        t = a
        k1 = rhs(t, y, mid)
        while t < b:
            h = min(h, hmax)
            last = t + h >= b - 1e-12 * max(1.0, abs(b))
            if last:
                h = b - t
            ks = [k1]
            for i in range(1, 7):
                yi = y.copy()
                for j, aij in enumerate(_A[i]):
                    if aij != 0.0:
                        yi += (h * aij) * ks[j]
                ks.append(rhs(t + _C[i] * h, yi, mid))
            y_new = y.copy()
            for j in range(6):
                if _B[j] != 0.0:
                    y_new += (h * _B[j]) * ks[j]
            err = np.zeros(n, dtype=complex)
            for j in range(7):
                if _E[j] != 0.0:
                    err += (h * _E[j]) * ks[j]
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            enorm = math.sqrt(float(np.mean((np.abs(err) / scale) ** 2))) if n else 0.0
            if enorm <= 1.0:
                t = b if last else t + h
                y = y_new
                k1 = ks[6]
                steps += 1
                fac = 5.0 if enorm == 0.0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
                h = h * fac
            else:
                h = h * max(0.2, 0.9 * enorm ** -0.2)
        while n_out < t_out.size and t_out[n_out] <= b:
            rec[n_out] = readout @ y
            n_out += 1
    return y, rec, steps


# ---------------------------------------------------------------------------
# Time-binned pure-state trajectories.
#
# State layout (see trajectories.py): 0-3 qubit amplitudes cff, cef, cfe, cee;
# 4-12 bin moments of the target channels r, l, x (ff, fe, ee each);
# 13-18 bin moments of the control channels b, y; 19-24 finished pairs.
# ---------------------------------------------------------------------------

N_TRAJ_STATE = 25
_MASK64 = (1 << 64) - 1


def splitmix_next(state):
    """One step of splitmix64: returns (new_state, uniform in [0, 1))."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, (z >> 11) * (1.0 / 9007199254740992.0)


def traj_rhs(y, t, mid, sysv, pt, pc):
    e1, e2, e12, k1, k2, gb, d1, d2 = sysv[0], sysv[1], sysv[2], sysv[3], sysv[4], sysv[5], sysv[6], sysv[7]
    xt = envelope(pt, t, mid)
    xc = envelope(pc, t, mid)
    sk = math.sqrt(k1)
    cff, cef, cfe, cee = y[0], y[1], y[2], y[3]
    a1 = complex(-(k1 + d1), -e1)
    a2 = complex(-(k2 + d2), -e2)
    aee = complex(-(k1 + k2 + d1 + d2), -e12)
    mi = -1j
    out = [0j] * N_TRAJ_STATE
    out[0] = 0j
    out[1] = a1 * cef + mi * sk * xt * cff
    out[2] = a2 * cfe + mi * gb * xc * cff
    out[3] = aee * cee + mi * sk * xt * cfe + mi * gb * xc * cef
    bf = (xt * cff + mi * sk * cef, mi * sk * cef, 0j)
    be = (xt * cfe + mi * sk * cee, mi * sk * cee, 0j)
    b2 = mi * gb * xc
    xc2 = abs(xc) ** 2
    for ch in range(3):
        o = 4 + 3 * ch
        gff, gfe, gee = y[o], y[o + 1], y[o + 2]
        out[o] = abs(bf[ch]) ** 2
        out[o + 1] = bf[ch].conjugate() * be[ch] + a2 * gfe + b2 * gff
        out[o + 2] = abs(be[ch]) ** 2 + 2.0 * a2.real * gee.real + 2.0 * (b2 * gfe.conjugate()).real
        out[19 + 2 * ch] = (xc2 * gff.real + gb * gb * gee.real
                            + 2.0 * (mi * gb * xc.conjugate() * gfe).real)
    gf = (xc * cff + mi * gb * cfe, 0j)
    ge = (xc * cef + mi * gb * cee, 0j)
    b1 = mi * sk * xt
    xt2 = abs(xt) ** 2
    for c in range(2):
        o = 13 + 3 * c
        hff, hfe, hee = y[o], y[o + 1], y[o + 2]
        out[o] = abs(gf[c]) ** 2
        out[o + 1] = gf[c].conjugate() * ge[c] + a1 * hfe + b1 * hff
        out[o + 2] = abs(ge[c]) ** 2 + 2.0 * a1.real * hee.real + 2.0 * (b1 * hfe.conjugate()).real
        out[19 + c] += xt2 * hff.real + k1 * hee.real + 2.0 * (mi * sk * xt.conjugate() * hfe).real
        out[21 + c] += k1 * hee.real
    return out


def traj_norm(y, t, mid, pt, pc):
    ft = future(pt, t, mid)
    fc = future(pc, t, mid)
    n = (abs(y[0]) ** 2 * ft * fc + abs(y[1]) ** 2 * fc + abs(y[2]) ** 2 * ft + abs(y[3]) ** 2)
    for ch in range(3):
        n += y[4 + 3 * ch].real * fc + y[6 + 3 * ch].real
    for c in range(2):
        n += y[13 + 3 * c].real * ft + y[15 + 3 * c].real
    for k in range(19, 25):
        n += y[k].real
    return n


def _populations(y, t, mid, pt, pc):
    ft = future(pt, t, mid)
    fc = future(pc, t, mid)
    pop1 = abs(y[1]) ** 2 * fc + abs(y[3]) ** 2 + y[15].real + y[18].real
    pop2 = abs(y[2]) ** 2 * ft + abs(y[3]) ** 2 + y[6].real + y[9].real + y[12].real
    return pop1, pop2


def traj_jump(y, kind):
    """Apply jump ``kind`` (0 relax1, 1 deph1, 2 relax2, 3 deph2), unnormalized."""
    z = [0j] * N_TRAJ_STATE
    if kind == 0:
        z[10] = complex(abs(y[1]) ** 2)
        z[11] = y[1].conjugate() * y[3]
        z[12] = complex(abs(y[3]) ** 2)
        z[23] = y[15]
        z[24] = y[18]
    elif kind == 1:
        z[1], z[3], z[15], z[18] = y[1], y[3], y[15], y[18]
    elif kind == 2:
        z[16] = complex(abs(y[2]) ** 2)
        z[17] = y[2].conjugate() * y[3]
        z[18] = complex(abs(y[3]) ** 2)
        z[20] = y[6]
        z[22] = y[9]
        z[24] = y[12]
    else:
        z[2], z[3], z[6], z[9], z[12] = y[2], y[3], y[6], y[9], y[12]
    return z


def _rk4(y, t, h, mid, sysv, pt, pc):
    k1 = traj_rhs(y, t, mid, sysv, pt, pc)
    y2 = [a + 0.5 * h * b for a, b in zip(y, k1)]
    k2 = traj_rhs(y2, t + 0.5 * h, mid, sysv, pt, pc)
    y3 = [a + 0.5 * h * b for a, b in zip(y, k2)]
    k3 = traj_rhs(y3, t + 0.5 * h, mid, sysv, pt, pc)
    y4 = [a + h * b for a, b in zip(y, k3)]
    k4 = traj_rhs(y4, t + h, mid, sysv, pt, pc)
    return [a + (h / 6.0) * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]


def _choose_jump(y, t, mid, sysv, pt, pc, u):
    pop1, pop2 = _populations(y, t, mid, pt, pc)
    rates = (sysv[8] * pop1, sysv[9] * pop1, sysv[10] * pop2, sysv[11] * pop2)
    total = sum(rates)
    acc = 0.0
    for kind, r in enumerate(rates):
        acc += r
        if u * total < acc:
            return kind
    return max(range(4), key=lambda k: rates[k])


def _grid(breakpoints, h):
    pieces = []
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b > a:
            n = max(1, int(math.ceil((b - a) / h - 1e-9)))
            pieces.append((float(a), float(b), n))
    return pieces


def _static(y, sysv):
    # Without a control line, a fork whose qubit and packet amplitudes have
    # all vanished holds only static moments and can stop early.
    if sysv[4] != 0.0 or sysv[5] != 0.0 or sysv[7] != 0.0 or sysv[1] != 0.0:
        return False
    return all(y[i] == 0.0 for i in (0, 1, 2, 3, 15, 18))


def _continue(y, t, piece, step, pieces, sysv, pt, pc, seed, flags):
    """Run a jumped trajectory from time ``t`` (inside ``step`` of ``piece``) to the end."""
    seed, norm_mark = splitmix_next(seed)
    for ip in range(piece, len(pieces)):
        a, b, n = pieces[ip]
        hh = (b - a) / n
        mid = 0.5 * (a + b)
        for k in range(step if ip == piece else 0, n):
            if _static(y, sysv):
                return y, flags
            t_end = b if k == n - 1 else a + (k + 1) * hh
            while t < t_end:
                y_new = _rk4(y, t, t_end - t, mid, sysv, pt, pc)
                n_new = traj_norm(y_new, t_end, mid, pt, pc)
                if n_new >= norm_mark:
                    y, t = y_new, t_end
                    break
                n_old = traj_norm(y, t, mid, pt, pc)
                frac = (n_old - norm_mark) / (n_old - n_new) if n_old > n_new else 1.0
                tj = t + min(max(frac, 0.0), 1.0) * (t_end - t)
                if tj > t:
                    y = _rk4(y, t, tj - t, mid, sysv, pt, pc)
                t = tj
                seed, u = splitmix_next(seed)
                kind = _choose_jump(y, t, mid, sysv, pt, pc, u)
                flags |= _FLAG[kind]
                y = _normalized(traj_jump(y, kind), t, mid, pt, pc)
                seed, norm_mark = splitmix_next(seed)
    return y, flags


_FLAG = (0, 1, 0, 2)


def _normalized(y, t, mid, pt, pc):
    nrm = traj_norm(y, t, mid, pt, pc)
    if nrm <= 0.0:
        return y
    s = 1.0 / math.sqrt(nrm)
    return [v * s if i < 4 else v / nrm for i, v in enumerate(y)]


def traj_integrate(y0, breakpoints, pulse_t, pulse_c, sysv, h, thresholds, seeds, t_rec):
    """No-jump pass plus forks at the given norm thresholds.

    ``thresholds`` must be sorted in decreasing order; fork ``i`` starts when
    the no-jump norm drops below ``thresholds[i]`` and continues with its own
    random stream seeded by ``seeds[i]``.  ``t_rec`` are grid times at which the
    coherent target amplitudes are recorded.  Returns the final no-jump state,
    the fork final states, their dephasing flags and the records.
    """
    pieces = _grid(breakpoints, h)
    y = [complex(v) for v in y0]
    n_fork = len(thresholds)
    forks = np.zeros((n_fork, N_TRAJ_STATE), dtype=complex)
    flags = np.zeros(n_fork, dtype=np.int64)
    t_rec = np.asarray(t_rec, dtype=float)
    rec = np.zeros((t_rec.size, 2), dtype=complex)
    n_rec = 0
    nxt = 0
    sk = math.sqrt(sysv[3])

    def record(yv, t, mid):
        xt = envelope(pulse_t, t, mid)
        return (xt * yv[0] - 1j * sk * yv[1], -1j * sk * yv[1])

    t = pieces[0][0] if pieces else 0.0
    norm_prev = traj_norm(y, t, 0.5 * (pieces[0][0] + pieces[0][1]), pulse_t, pulse_c) if pieces else 1.0
    for ip, (a, b, n) in enumerate(pieces):
        hh = (b - a) / n
        mid = 0.5 * (a + b)
        while n_rec < t_rec.size and t_rec[n_rec] <= a + 1e-9 * max(1.0, abs(a)):
            rec[n_rec] = record(y, a, mid)
            n_rec += 1
        for k in range(n):
            t = a + k * hh
            t_end = b if k == n - 1 else a + (k + 1) * hh
            dt = t_end - t
            y_new = _rk4(y, t, dt, mid, sysv, pulse_t, pulse_c)
            norm_new = traj_norm(y_new, t_end, mid, pulse_t, pulse_c)
            while nxt < n_fork and norm_new < thresholds[nxt]:
                thr = thresholds[nxt]
                frac = (norm_prev - thr) / (norm_prev - norm_new) if norm_prev > norm_new else 1.0
                frac = min(max(frac, 0.0), 1.0)
                tj = t + frac * dt
                yj = _rk4(y, t, tj - t, mid, sysv, pulse_t, pulse_c) if tj > t else list(y)
                seed, u = splitmix_next(int(seeds[nxt]))
                kind = _choose_jump(yj, tj, mid, sysv, pulse_t, pulse_c, u)
                fl = _FLAG[kind]
                yj = _normalized(traj_jump(yj, kind), tj, mid, pulse_t, pulse_c)
                yf, fl = _continue(yj, tj, ip, k, pieces, sysv, pulse_t, pulse_c, seed, fl)
                forks[nxt] = yf
                flags[nxt] = fl
                nxt += 1
            y = y_new
            norm_prev = norm_new
            while n_rec < t_rec.size and t_rec[n_rec] <= t_end + 1e-9 * max(1.0, abs(t_end)):
                rec[n_rec] = record(y, t_end, mid)
                n_rec += 1
    return np.array(y), forks, flags, rec
