# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled engine kernels; same algorithms and signatures as _fallback."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, expm1, cos, sin, ceil, fabs
from libc.stdint cimport uint64_t

cnp.import_array()

NAME = "cython"

cdef double complex I = 1j

# Dormand-Prince 5(4) tableau.
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9


cdef inline double complex envelope(double[::1] row, double t, double mid) nogil:
    cdef double shape, omega, tau, delay, s, amp
    if row[0] == 0.0:
        return 0.0
    shape = row[1]
    omega = row[2]
    tau = row[3]
    delay = row[4]
    if shape * (mid - delay) < 0.0:
        return 0.0
    s = t - delay
    amp = sqrt(2.0 / tau) * exp(-shape * s / tau)
    return amp * cos(omega * s) - I * (amp * sin(omega * s))


cdef inline double future(double[::1] row, double t, double mid) nogil:
    cdef double s
    if row[0] == 0.0:
        return 1.0
    s = t - row[4]
    if row[1] > 0.0:
        return 1.0 if mid < row[4] else exp(-2.0 * s / row[3])
    return -expm1(2.0 * s / row[3]) if mid < row[4] else 0.0


cdef inline double abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef void tagged_matvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                        const double complex[::1] data, const cnp.int32_t[::1] tags,
                        double complex* coef, double complex* y, double complex* out,
                        Py_ssize_t n) nogil:
    cdef Py_ssize_t i, p
    cdef double complex acc
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc = acc + coef[tags[p]] * data[p] * y[indices[p]]
        out[i] = acc


cdef void coefficients(double[::1] pt, double[::1] pc, double t, double mid,
                       double complex* coef) nogil:
    cdef double complex xt = envelope(pt, t, mid)
    cdef double complex xc = envelope(pc, t, mid)
    coef[0] = 1.0
    coef[1] = xt
    coef[2] = xt.conjugate()
    coef[3] = abs2(xt)
    coef[4] = xc
    coef[5] = xc.conjugate()
    coef[6] = abs2(xc)


def hier_integrate(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                   double complex[::1] data, cnp.int32_t[::1] tags,
                   y0, breakpoints, double[::1] pulse_t, double[::1] pulse_c,
                   double rtol, double atol, double h0, double hmax, t_out, readout):
    """Integrate ``dy/dt = sum_f f(t) M_f y`` with adaptive DOPRI5."""
    cdef Py_ssize_t n = y0.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] ks_arr = np.zeros((7, n), dtype=np.complex128)
    cdef double complex[:, ::1] ks = ks_arr
    cdef double complex[::1] y = np.array(y0, dtype=np.complex128)
    cdef double complex[::1] yi = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] ynew = np.zeros(n, dtype=np.complex128)
    cdef double complex coef[7]
    cdef double[::1] tout = np.ascontiguousarray(t_out, dtype=np.float64)
    cdef double[::1] marks = np.union1d(np.asarray(breakpoints, dtype=np.float64), np.asarray(tout))
    R = np.ascontiguousarray(readout, dtype=np.complex128)
    rec = np.zeros((tout.shape[0], R.shape[0]), dtype=np.complex128)
    cdef Py_ssize_t n_out = 0, im, j, steps = 0
    cdef double a, b, mid, t, h = h0, enorm, sc, fac, e_abs
    cdef double complex err
    cdef bint last
    while n_out < tout.shape[0] and tout[n_out] <= marks[0]:
        rec[n_out] = R @ np.asarray(y)
        n_out += 1
    for im in range(marks.shape[0] - 1):
        a = marks[im]
        b = marks[im + 1]
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        t = a
        with nogil:
            coefficients(pulse_t, pulse_c, t, mid, coef)
            tagged_matvec(indptr, indices, data, tags, coef, &y[0], &ks[0, 0], n)
            while t < b:
                if h > hmax:
                    h = hmax
                last = t + h >= b - 1e-12 * (fabs(b) if fabs(b) > 1.0 else 1.0)
                if last:
                    h = b - t
                for j in range(n):
                    yi[j] = y[j] + h * A21 * ks[0, j]
                coefficients(pulse_t, pulse_c, t + C2 * h, mid, coef)
                tagged_matvec(indptr, indices, data, tags, coef, &yi[0], &ks[1, 0], n)
                for j in range(n):
                    yi[j] = y[j] + h * (A31 * ks[0, j] + A32 * ks[1, j])
                coefficients(pulse_t, pulse_c, t + C3 * h, mid, coef)
                tagged_matvec(indptr, indices, data, tags, coef, &yi[0], &ks[2, 0], n)
                for j in range(n):
                    yi[j] = y[j] + h * (A41 * ks[0, j] + A42 * ks[1, j] + A43 * ks[2, j])
                coefficients(pulse_t, pulse_c, t + C4 * h, mid, coef)
                tagged_matvec(indptr, indices, data, tags, coef, &yi[0], &ks[3, 0], n)
                for j in range(n):
                    yi[j] = y[j] + h * (A51 * ks[0, j] + A52 * ks[1, j] + A53 * ks[2, j]
                                        + A54 * ks[3, j])
                coefficients(pulse_t, pulse_c, t + C5 * h, mid, coef)
                tagged_matvec(indptr, indices, data, tags, coef, &yi[0], &ks[4, 0], n)
                for j in range(n):
                    yi[j] = y[j] + h * (A61 * ks[0, j] + A62 * ks[1, j] + A63 * ks[2, j]
                                        + A64 * ks[3, j] + A65 * ks[4, j])
                coefficients(pulse_t, pulse_c, t + h, mid, coef)
                tagged_matvec(indptr, indices, data, tags, coef, &yi[0], &ks[5, 0], n)
                for j in range(n):
                    ynew[j] = y[j] + h * (B1 * ks[0, j] + B3 * ks[2, j] + B4 * ks[3, j]
                                          + B5 * ks[4, j] + B6 * ks[5, j])
                coefficients(pulse_t, pulse_c, t + h, mid, coef)
                tagged_matvec(indptr, indices, data, tags, coef, &ynew[0], &ks[6, 0], n)
                enorm = 0.0
                for j in range(n):
                    err = h * (E1 * ks[0, j] + E3 * ks[2, j] + E4 * ks[3, j] + E5 * ks[4, j]
                               + E6 * ks[5, j] + E7 * ks[6, j])
                    e_abs = sqrt(abs2(y[j]))
                    sc = sqrt(abs2(ynew[j]))
                    if e_abs > sc:
                        sc = e_abs
                    sc = atol + rtol * sc
                    enorm += abs2(err) / (sc * sc)
                enorm = sqrt(enorm / n) if n > 0 else 0.0
                if enorm <= 1.0:
                    t = b if last else t + h
                    for j in range(n):
                        y[j] = ynew[j]
                        ks[0, j] = ks[6, j]
                    steps += 1
                    if enorm == 0.0:
                        fac = 5.0
                    else:
                        fac = 0.9 * enorm ** -0.2
                        fac = 5.0 if fac > 5.0 else (0.2 if fac < 0.2 else fac)
                    h = h * fac
                else:
                    fac = 0.9 * enorm ** -0.2
                    h = h * (0.2 if fac < 0.2 else fac)
        while n_out < tout.shape[0] and tout[n_out] <= b:
            rec[n_out] = R @ np.asarray(y)
            n_out += 1
    return np.asarray(y).copy(), rec, steps


# ---------------------------------------------------------------------------
# Time-binned trajectories (layout documented in trajectories.py).
# ---------------------------------------------------------------------------

DEF NS = 25


cdef inline double splitmix_next(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return (z >> 11) * (1.0 / 9007199254740992.0)


cdef struct Sys:
    double e1, e2, e12, k1, k2, gb, d1, d2, r1, f1, r2, f2


cdef void traj_rhs(double complex* y, double t, double mid, Sys* s,
                   double[::1] pt, double[::1] pc, double complex* out) nogil:
    cdef double complex xt = envelope(pt, t, mid)
    cdef double complex xc = envelope(pc, t, mid)
    cdef double sk = sqrt(s.k1)
    cdef double complex cff = y[0], cef = y[1], cfe = y[2], cee = y[3]
    cdef double complex a1 = -(s.k1 + s.d1) - I * s.e1
    cdef double complex a2 = -(s.k2 + s.d2) - I * s.e2
    cdef double complex aee = -(s.k1 + s.k2 + s.d1 + s.d2) - I * s.e12
    cdef double complex bf[3]
    cdef double complex be[3]
    cdef double complex gf[2]
    cdef double complex ge[2]
    cdef double complex b2 = -I * s.gb * xc
    cdef double complex b1 = -I * sk * xt
    cdef double xc2 = abs2(xc), xt2 = abs2(xt)
    cdef double complex gff, gfe, gee
    cdef int ch, c, o
    out[0] = 0.0
    out[1] = a1 * cef - I * sk * xt * cff
    out[2] = a2 * cfe - I * s.gb * xc * cff
    out[3] = aee * cee - I * sk * xt * cfe - I * s.gb * xc * cef
    bf[0] = xt * cff - I * sk * cef
    bf[1] = -I * sk * cef
    bf[2] = 0.0
    be[0] = xt * cfe - I * sk * cee
    be[1] = -I * sk * cee
    be[2] = 0.0
    for ch in range(3):
        o = 4 + 3 * ch
        gff = y[o]
        gfe = y[o + 1]
        gee = y[o + 2]
        out[o] = abs2(bf[ch])
        out[o + 1] = bf[ch].conjugate() * be[ch] + a2 * gfe + b2 * gff
        out[o + 2] = abs2(be[ch]) + 2.0 * a2.real * gee.real + 2.0 * (b2 * gfe.conjugate()).real
        out[19 + 2 * ch] = (xc2 * gff.real + s.gb * s.gb * gee.real
                            + 2.0 * (-I * s.gb * xc.conjugate() * gfe).real)
        out[20 + 2 * ch] = 0.0
    gf[0] = xc * cff - I * s.gb * cfe
    gf[1] = 0.0
    ge[0] = xc * cef - I * s.gb * cee
    ge[1] = 0.0
    for c in range(2):
        o = 13 + 3 * c
        gff = y[o]
        gfe = y[o + 1]
        gee = y[o + 2]
        out[o] = abs2(gf[c])
        out[o + 1] = gf[c].conjugate() * ge[c] + a1 * gfe + b1 * gff
        out[o + 2] = abs2(ge[c]) + 2.0 * a1.real * gee.real + 2.0 * (b1 * gfe.conjugate()).real
        out[19 + c] = out[19 + c] + (xt2 * gff.real + s.k1 * gee.real
                                     + 2.0 * (-I * sk * xt.conjugate() * gfe).real)
        out[21 + c] = out[21 + c] + s.k1 * gee.real


cdef double traj_norm(double complex* y, double t, double mid,
                      double[::1] pt, double[::1] pc) nogil:
    cdef double ft = future(pt, t, mid)
    cdef double fc = future(pc, t, mid)
    cdef double n = abs2(y[0]) * ft * fc + abs2(y[1]) * fc + abs2(y[2]) * ft + abs2(y[3])
    cdef int k
    for k in range(3):
        n += y[4 + 3 * k].real * fc + y[6 + 3 * k].real
    for k in range(2):
        n += y[13 + 3 * k].real * ft + y[15 + 3 * k].real
    for k in range(19, 25):
        n += y[k].real
    return n


cdef void rk4(double complex* y, double t, double h, double mid, Sys* s,
              double[::1] pt, double[::1] pc, double complex* out) nogil:
    cdef double complex k1[NS]
    cdef double complex k2[NS]
    cdef double complex k3[NS]
    cdef double complex k4[NS]
    cdef double complex tmp[NS]
    cdef int i
    traj_rhs(y, t, mid, s, pt, pc, k1)
    for i in range(NS):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    traj_rhs(tmp, t + 0.5 * h, mid, s, pt, pc, k2)
    for i in range(NS):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    traj_rhs(tmp, t + 0.5 * h, mid, s, pt, pc, k3)
    for i in range(NS):
        tmp[i] = y[i] + h * k3[i]
    traj_rhs(tmp, t + h, mid, s, pt, pc, k4)
    for i in range(NS):
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


cdef int choose_jump(double complex* y, double t, double mid, Sys* s,
                     double[::1] pt, double[::1] pc, double u) nogil:
    cdef double ft = future(pt, t, mid)
    cdef double fc = future(pc, t, mid)
    cdef double pop1 = abs2(y[1]) * fc + abs2(y[3]) + y[15].real + y[18].real
    cdef double pop2 = abs2(y[2]) * ft + abs2(y[3]) + y[6].real + y[9].real + y[12].real
    cdef double rates[4]
    cdef double total, acc
    cdef int k, best
    rates[0] = s.r1 * pop1
    rates[1] = s.f1 * pop1
    rates[2] = s.r2 * pop2
    rates[3] = s.f2 * pop2
    total = rates[0] + rates[1] + rates[2] + rates[3]
    acc = 0.0
    for k in range(4):
        acc += rates[k]
        if u * total < acc:
            return k
    best = 0
    for k in range(1, 4):
        if rates[k] > rates[best]:
            best = k
    return best


cdef void apply_jump(double complex* y, int kind, double t, double mid,
                     double[::1] pt, double[::1] pc) nogil:
    cdef double complex z[NS]
    cdef int i
    cdef double nrm, sc
    for i in range(NS):
        z[i] = 0.0
    if kind == 0:
        z[10] = abs2(y[1])
        z[11] = y[1].conjugate() * y[3]
        z[12] = abs2(y[3])
        z[23] = y[15]
        z[24] = y[18]
    elif kind == 1:
        z[1] = y[1]
        z[3] = y[3]
        z[15] = y[15]
        z[18] = y[18]
    elif kind == 2:
        z[16] = abs2(y[2])
        z[17] = y[2].conjugate() * y[3]
        z[18] = abs2(y[3])
        z[20] = y[6]
        z[22] = y[9]
        z[24] = y[12]
    else:
        z[2] = y[2]
        z[3] = y[3]
        z[6] = y[6]
        z[9] = y[9]
        z[12] = y[12]
    nrm = traj_norm(z, t, mid, pt, pc)
    if nrm > 0.0:
        sc = 1.0 / sqrt(nrm)
        for i in range(4):
            z[i] = z[i] * sc
        for i in range(4, NS):
            z[i] = z[i] / nrm
    for i in range(NS):
        y[i] = z[i]


cdef int FLAG[4]
FLAG[0] = 0
FLAG[1] = 1
FLAG[2] = 0
FLAG[3] = 2


cdef bint fork_static(double complex* y, Sys* s) nogil:
    # Without a control line, a fork whose qubit and packet amplitudes have
    # all vanished holds only static moments and can stop early.
    if s.k2 != 0.0 or s.gb != 0.0 or s.d2 != 0.0 or s.e2 != 0.0:
        return False
    return (y[0] == 0.0 and y[1] == 0.0 and y[2] == 0.0 and y[3] == 0.0
            and y[15] == 0.0 and y[18] == 0.0)


cdef int continue_fork(double complex* y, double t, Py_ssize_t piece, Py_ssize_t step,
                       double[::1] pa, double[::1] pb, cnp.int64_t[::1] pn,
                       Sys* s, double[::1] pt, double[::1] pc, uint64_t seed, int flags) nogil:
    cdef double norm_mark = splitmix_next(&seed)
    cdef Py_ssize_t ip, k, k0
    cdef double a, b, hh, mid, t_end, n_new, n_old, frac, tj, u
    cdef double complex ynew[NS]
    cdef int i, kind
    for ip in range(piece, pa.shape[0]):
        a = pa[ip]
        b = pb[ip]
        hh = (b - a) / pn[ip]
        mid = 0.5 * (a + b)
        k0 = step if ip == piece else 0
        for k in range(k0, pn[ip]):
            if fork_static(y, s):
                return flags
            t_end = b if k == pn[ip] - 1 else a + (k + 1) * hh
            while t < t_end:
                rk4(y, t, t_end - t, mid, s, pt, pc, ynew)
                n_new = traj_norm(ynew, t_end, mid, pt, pc)
                if n_new >= norm_mark:
                    for i in range(NS):
                        y[i] = ynew[i]
                    t = t_end
                    break
                n_old = traj_norm(y, t, mid, pt, pc)
                frac = (n_old - norm_mark) / (n_old - n_new) if n_old > n_new else 1.0
                frac = 0.0 if frac < 0.0 else (1.0 if frac > 1.0 else frac)
                tj = t + frac * (t_end - t)
                if tj > t:
                    rk4(y, t, tj - t, mid, s, pt, pc, ynew)
                    for i in range(NS):
                        y[i] = ynew[i]
                t = tj
                u = splitmix_next(&seed)
                kind = choose_jump(y, t, mid, s, pt, pc, u)
                flags = flags | FLAG[kind]
                apply_jump(y, kind, t, mid, pt, pc)
                norm_mark = splitmix_next(&seed)
    return flags


def traj_integrate(y0, breakpoints, double[::1] pulse_t, double[::1] pulse_c,
                   double[::1] sysv, double h, thresholds, seeds, t_rec):
    """No-jump pass plus forks at decreasing norm thresholds (see _fallback)."""
    cdef Sys s
    s.e1 = sysv[0]; s.e2 = sysv[1]; s.e12 = sysv[2]; s.k1 = sysv[3]
    s.k2 = sysv[4]; s.gb = sysv[5]; s.d1 = sysv[6]; s.d2 = sysv[7]
    s.r1 = sysv[8]; s.f1 = sysv[9]; s.r2 = sysv[10]; s.f2 = sysv[11]
    bp = np.asarray(breakpoints, dtype=np.float64)
    la, lb, ln = [], [], []
    for a_, b_ in zip(bp[:-1], bp[1:]):
        if b_ > a_:
            la.append(a_)
            lb.append(b_)
            ln.append(max(1, int(np.ceil((b_ - a_) / h - 1e-9))))
    cdef double[::1] pa = np.array(la, dtype=np.float64)
    cdef double[::1] pb = np.array(lb, dtype=np.float64)
    cdef cnp.int64_t[::1] pn = np.array(ln, dtype=np.int64)
    cdef double[::1] thr = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef cnp.uint64_t[::1] sd = np.ascontiguousarray(seeds, dtype=np.uint64)
    cdef double[::1] trec = np.ascontiguousarray(t_rec, dtype=np.float64)
    cdef Py_ssize_t n_fork = thr.shape[0]
    forks_arr = np.zeros((n_fork, NS), dtype=np.complex128)
    cdef double complex[:, ::1] forks = forks_arr
    flags_arr = np.zeros(n_fork, dtype=np.int64)
    cdef cnp.int64_t[::1] flags = flags_arr
    rec_arr = np.zeros((trec.shape[0], 2), dtype=np.complex128)
    cdef double complex[:, ::1] rec = rec_arr
    cdef double complex y[NS]
    cdef double complex ynew[NS]
    cdef double complex yj[NS]
    cdef double complex xt
    cdef Py_ssize_t ip, k, nxt = 0, n_rec = 0
    cdef int i, kind, fl
    cdef double a, b, hh, mid, t, t_end, dt, norm_prev, norm_new, thrv, frac, tj, u, tol
    cdef uint64_t seed
    cdef double sk = sqrt(s.k1)
    cdef cnp.ndarray y0a = np.ascontiguousarray(y0, dtype=np.complex128)
    cdef double complex[::1] y0v = y0a
    for i in range(NS):
        y[i] = y0v[i]
    if pa.shape[0] == 0:
        return np.array([y[i] for i in range(NS)]), forks_arr, flags_arr, rec_arr
    norm_prev = traj_norm(y, pa[0], 0.5 * (pa[0] + pb[0]), pulse_t, pulse_c)
    with nogil:
        for ip in range(pa.shape[0]):
            a = pa[ip]
            b = pb[ip]
            hh = (b - a) / pn[ip]
            mid = 0.5 * (a + b)
            tol = 1e-9 * (fabs(a) if fabs(a) > 1.0 else 1.0)
            while n_rec < trec.shape[0] and trec[n_rec] <= a + tol:
                xt = envelope(pulse_t, a, mid)
                rec[n_rec, 0] = xt * y[0] - I * sk * y[1]
                rec[n_rec, 1] = -I * sk * y[1]
                n_rec += 1
            for k in range(pn[ip]):
                t = a + k * hh
                t_end = b if k == pn[ip] - 1 else a + (k + 1) * hh
                dt = t_end - t
                rk4(y, t, dt, mid, &s, pulse_t, pulse_c, ynew)
                norm_new = traj_norm(ynew, t_end, mid, pulse_t, pulse_c)
                while nxt < n_fork and norm_new < thr[nxt]:
                    thrv = thr[nxt]
                    frac = (norm_prev - thrv) / (norm_prev - norm_new) if norm_prev > norm_new else 1.0
                    frac = 0.0 if frac < 0.0 else (1.0 if frac > 1.0 else frac)
                    tj = t + frac * dt
                    if tj > t:
                        rk4(y, t, tj - t, mid, &s, pulse_t, pulse_c, yj)
                    else:
                        for i in range(NS):
                            yj[i] = y[i]
                    seed = sd[nxt]
                    u = splitmix_next(&seed)
                    kind = choose_jump(yj, tj, mid, &s, pulse_t, pulse_c, u)
                    fl = FLAG[kind]
                    apply_jump(yj, kind, tj, mid, pulse_t, pulse_c)
                    fl = continue_fork(yj, tj, ip, k, pa, pb, pn, &s, pulse_t, pulse_c, seed, fl)
                    for i in range(NS):
                        forks[nxt, i] = yj[i]
                    flags[nxt] = fl
                    nxt += 1
                for i in range(NS):
                    y[i] = ynew[i]
                norm_prev = norm_new
                tol = 1e-9 * (fabs(t_end) if fabs(t_end) > 1.0 else 1.0)
                while n_rec < trec.shape[0] and trec[n_rec] <= t_end + tol:
                    xt = envelope(pulse_t, t_end, mid)
                    rec[n_rec, 0] = xt * y[0] - I * sk * y[1]
                    rec[n_rec, 1] = -I * sk * y[1]
                    n_rec += 1
    return np.array([y[i] for i in range(NS)]), forks_arr, flags_arr, rec_arr
