# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince 5(4) kernel for polynomial-in-features fields.

Mirrors ``_dopri.PolyKernel``.  The stepping loop runs without the GIL, so
trajectories started from different points can integrate on separate
threads.
"""
from libc.math cimport exp, sqrt, fabs, isfinite, INFINITY
from libc.stdlib cimport malloc, free

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double SAFETY = 0.9, FAC_MIN = 0.2, FAC_MAX = 5.0


cdef struct Field:
    int d            # chart dimension
    int m            # number of quadratures
    int nr           # rhs terms
    int no           # observable terms
    long *flags
    long *rcomp
    double *rcoef
    long *rexps
    long *ocomp
    double *ocoef
    long *oexps
    long *phys
    int np
    double *u        # feature scratch, length d (owned by run)


cdef void feval(Field *f, const double *y, double *out) noexcept nogil:
    cdef int j, i, p, e
    cdef double mono
    for j in range(f.d):
        if f.flags[j]:
            f.u[j] = exp(y[j]) if y[j] < 700.0 else INFINITY
        else:
            f.u[j] = y[j]
    for i in range(f.d + f.m):
        out[i] = 0.0
    for i in range(f.nr):
        mono = f.rcoef[i]
        for j in range(f.d):
            e = f.rexps[i * f.d + j]
            for p in range(e):
                mono *= f.u[j]
        out[f.rcomp[i]] += mono
    for i in range(f.no):
        mono = f.ocoef[i]
        for j in range(f.d):
            e = f.oexps[i * f.d + j]
            for p in range(e):
                mono *= f.u[j]
        out[f.d + f.ocomp[i]] += mono


cdef bint all_finite(const double *v, int n) noexcept nogil:
    cdef int i
    for i in range(n):
        if not isfinite(v[i]):
            return False
    return True


cdef double phys_dist(Field *f, const double *a, const double *b) noexcept nogil:
    cdef int i, j
    cdef double pa, pb, s = 0.0
    for i in range(f.np):
        j = f.phys[i]
        if f.flags[j]:
            pa = exp(a[j])
            pb = exp(b[j])
        else:
            pa = a[j]
            pb = b[j]
        s += (pa - pb) * (pa - pb)
    return sqrt(s)


cdef int run(Field *f, double *y, double *t_io, double t_end, double *h_io, double rtol, double atol,
             double hmax, double dmax, double *rec_t, double *rec_y, int rec_cap, int *n_rec,
             long max_steps, long *counts) noexcept nogil:
    cdef int n = f.d + f.m
    cdef int i
    cdef double t = t_io[0], h = h_io[0], hs, err, acc, sc, ei, fac, disp
    cdef bint last, ok
    cdef double *work = <double *> malloc(sizeof(double) * (n * 9 + f.d + 1))
    if work == NULL:
        return -1
    cdef double *k1 = work
    cdef double *k2 = work + n
    cdef double *k3 = work + 2 * n
    cdef double *k4 = work + 3 * n
    cdef double *k5 = work + 4 * n
    cdef double *k6 = work + 5 * n
    cdef double *k7 = work + 6 * n
    cdef double *yt = work + 7 * n
    cdef double *yn = work + 8 * n
    cdef double *swap
    cdef int status = 0
    f.u = work + 9 * n  # per-call scratch keeps concurrent calls independent
    feval(f, y, k1)
    counts[2] += 1
    if h <= 0:
        h = hmax if hmax < 1e-2 else 1e-2
    while t < t_end:
        if counts[0] + counts[1] >= max_steps:
            status = 3
            break
        if h < 1e-13 * (fabs(t) if fabs(t) > 1.0 else 1.0):
            status = 2
            break
        if h > hmax:
            h = hmax
        last = t + h >= t_end - 1e-13 * (fabs(t_end) if fabs(t_end) > 1.0 else 1.0)
        hs = t_end - t if last else h
        for i in range(n):
            yt[i] = y[i] + hs * A21 * k1[i]
        feval(f, yt, k2)
        for i in range(n):
            yt[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
        feval(f, yt, k3)
        for i in range(n):
            yt[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        feval(f, yt, k4)
        for i in range(n):
            yt[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        feval(f, yt, k5)
        for i in range(n):
            yt[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        feval(f, yt, k6)
        for i in range(n):
            yn[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        feval(f, yn, k7)
        counts[2] += 6
        ok = (all_finite(k2, n) and all_finite(k3, n) and all_finite(k4, n) and all_finite(k5, n)
              and all_finite(k6, n) and all_finite(k7, n))
        if ok:
            acc = 0.0
            for i in range(n):
                ei = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(yn[i]) else fabs(yn[i]))
                if isfinite(sc):
                    acc += (ei / sc) * (ei / sc)
            err = sqrt(acc / n)
        else:
            err = INFINITY
        if err <= 1.0 and dmax > 0 and f.np > 0:
            disp = phys_dist(f, y, yn)
            if disp > dmax:
                counts[1] += 1
                fac = 0.5 * dmax / disp
                h = hs * (fac if fac > 0.1 else 0.1)
                continue
        if err <= 1.0:
            t = t_end if last else t + hs
            for i in range(n):
                y[i] = yn[i]
            swap = k1
            k1 = k7
            k7 = swap
            counts[0] += 1
            if err == 0:
                fac = FAC_MAX
            else:
                fac = SAFETY * err ** -0.2
                fac = FAC_MIN if fac < FAC_MIN else (FAC_MAX if fac > FAC_MAX else fac)
            if not (last and hs < h):
                h = hs * fac
            if rec_cap > 0:
                rec_t[n_rec[0]] = t
                for i in range(n):
                    rec_y[n_rec[0] * n + i] = y[i]
                n_rec[0] += 1
                if n_rec[0] >= rec_cap and t < t_end:
                    status = 1
                    break
        else:
            counts[1] += 1
            if err == INFINITY:
                fac = 0.25
            else:
                fac = SAFETY * err ** -0.2
                fac = FAC_MIN if fac < FAC_MIN else (1.0 if fac > 1.0 else fac)
            h = hs * fac
    free(work)
    t_io[0] = t
    h_io[0] = h
    return status


cdef class PolyKernel:
    """Compiled polynomial-field stepper; see ``_dopri.PolyKernel``."""

    cdef long[::1] flags, rcomp, ocomp, phys
    cdef double[::1] rcoef, ocoef
    cdef long[:, ::1] rexps, oexps
    cdef int d, m, _nr, _no, _np
    cdef public str backend

    def __init__(self, log_flags, rhs, obs, phys_index):
        import numpy as np
        self.backend = "cython"
        self.d = len(log_flags)
        self.flags = np.ascontiguousarray(log_flags, dtype=np.int64)
        self.rcomp = np.ascontiguousarray(rhs.comp, dtype=np.int64)
        self.rcoef = np.ascontiguousarray(rhs.coef, dtype=np.float64)
        self.rexps = np.ascontiguousarray(rhs.exps.reshape(-1, self.d), dtype=np.int64)
        if obs is None:
            self.m = 0
            self.ocomp = np.zeros(1, dtype=np.int64)
            self.ocoef = np.zeros(1)
            self.oexps = np.zeros((1, self.d), dtype=np.int64)
            self._no = 0
        else:
            self.m = obs.n_out
            self.ocomp = np.ascontiguousarray(obs.comp, dtype=np.int64) if obs.coef.size else np.zeros(1, dtype=np.int64)
            self.ocoef = np.ascontiguousarray(obs.coef, dtype=np.float64) if obs.coef.size else np.zeros(1)
            self.oexps = (np.ascontiguousarray(obs.exps.reshape(-1, self.d), dtype=np.int64)
                          if obs.coef.size else np.zeros((1, self.d), dtype=np.int64))
            self._no = obs.coef.size
        self._nr = rhs.coef.size
        if self._nr == 0:
            self.rcomp = np.zeros(1, dtype=np.int64)
            self.rcoef = np.zeros(1)
            self.rexps = np.zeros((1, self.d), dtype=np.int64)
        self.phys = np.ascontiguousarray(list(phys_index) or [0], dtype=np.int64)
        self._np = len(phys_index)

    def advance(self, double[::1] y, double t, double t_end, double h, double rtol, double atol,
                double hmax, double dmax, double[::1] rec_t, double[:, ::1] rec_y, long max_steps=10_000_000):
        cdef Field f
        cdef int n_rec = 0, status, cap = 0
        cdef long counts[3]
        cdef double *rt = NULL
        cdef double *ry = NULL
        counts[0] = 0
        counts[1] = 0
        counts[2] = 0
        if y.shape[0] != self.d + self.m:
            raise ValueError("state length does not match the field")
        f.d = self.d
        f.m = self.m
        f.nr = self._nr
        f.no = self._no
        f.flags = &self.flags[0]
        f.rcomp = &self.rcomp[0]
        f.rcoef = &self.rcoef[0]
        f.rexps = &self.rexps[0, 0]
        f.ocomp = &self.ocomp[0]
        f.ocoef = &self.ocoef[0]
        f.oexps = &self.oexps[0, 0]
        f.phys = &self.phys[0]
        f.np = self._np
        f.u = NULL
        if rec_t is not None and rec_t.shape[0] > 0:
            if rec_y is None or rec_y.shape[0] < rec_t.shape[0] or rec_y.shape[1] != self.d + self.m:
                raise ValueError("record buffers have inconsistent shapes")
            cap = rec_t.shape[0]
            rt = &rec_t[0]
            ry = &rec_y[0, 0]
        with nogil:
            status = run(&f, &y[0], &t, t_end, &h, rtol, atol, hmax, dmax, rt, ry, cap, &n_rec,
                         max_steps, counts)
        if status < 0:
            raise MemoryError()
        return status, t, h, n_rec, counts[0], counts[1], counts[2]
