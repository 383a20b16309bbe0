# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the per-stage kernels.

Same contracts as ``_pykernels``; built-in models are selected by a family
code plus a parameter vector so no Python callbacks happen in the loops.
"""
from libc.math cimport log, log1p, pow, sqrt, fabs, copysign, floor, isfinite
from libc.stdlib cimport malloc, free

cdef enum:
    MAXQ = 32

cdef double LOG_FLOOR = 1e-12
# keeps squeezed minima on the safe side of the floor under rounding
cdef double SQUEEZE_MARGIN = 1.0 - 1e-12
# below this mean the squeeze has no precision left; flatten to the mean
cdef double TINY_MEAN = 1e-290

# family codes, keep in sync with esdg.models
cdef int KERNEL_POWER = 1
cdef int KERNEL_FP = 2


cdef inline double _pw(double u, double p) noexcept nogil:
    if p == 1.0:
        return u
    if p == 2.0:
        return u * u
    if p == 0.0:
        return 1.0
    if p == 3.0:
        return u * u * u
    if p == floor(p):
        return pow(u, p)
    if u < 0.0:
        u = 0.0
    return pow(u, p)


cdef inline double _f(int code, const double* prm, double u) noexcept nogil:
    if code == KERNEL_POWER:
        return prm[0] * _pw(u, prm[1])
    return u * (1.0 + prm[0] * pow(u, prm[1]))


cdef inline double _hp(int code, const double* prm, double u) noexcept nogil:
    if code == KERNEL_POWER:
        return prm[2] * _pw(u, prm[3])
    if u < LOG_FLOOR:
        u = LOG_FLOOR
    return log(u) - log1p(prm[0] * pow(u, prm[1])) / prm[1]


cdef inline double _hpp(int code, const double* prm, double u) noexcept nogil:
    if code == KERNEL_POWER:
        return prm[2] * prm[3] * _pw(u, prm[3] - 1.0)
    if u < LOG_FLOOR:
        u = LOG_FLOOR
    return 1.0 / (u * (1.0 + prm[0] * pow(u, prm[1])))


cdef inline double _mob(int code, const double* prm, int trivial, double u) noexcept nogil:
    if trivial:
        return _f(code, prm, u) * _hpp(code, prm, u)
    return _f(code, prm, u)


def mobility(int code, const double[::1] params, int trivial, double u):
    return _mob(code, &params[0], trivial, u)


def hprime(int code, const double[::1] params, double u):
    return _hp(code, &params[0], u)


cdef class CompiledOperator:
    """Spatial operator plus fused explicit stepping for built-in models.

    Holds copies of the reference tables and scratch buffers so a whole run
    of steps executes without returning to Python.
    """

    cdef double[:, ::1] V, P, Vd, phi_q
    cdef double[::1] w, Lp1, Lm1, Dp1, Dm1, Dvec, Evec, minv, prm
    cdef int code, trivial, needs_pos, dirichlet
    cdef double beta0, h, mob_a, mob_b, q_a, q_b
    cdef Py_ssize_t n, nm, nq
    cdef double* fr
    cdef double* fl
    cdef double[:, ::1] qbuf, kbuf, u0buf

    def __cinit__(self, *args, **kwargs):
        self.fr = NULL
        self.fl = NULL

    def __init__(self, tabs, phi_q, int code, params, int trivial, int needs_positivity,
                 double h, dirichlet=None):
        import numpy as np

        def arr(a):
            return np.array(a, dtype=float, order="C", copy=True)

        self.V, self.P, self.Vd = arr(tabs.V), arr(tabs.P), arr(tabs.Vd)
        self.phi_q = arr(phi_q)
        self.w, self.Lp1, self.Lm1 = arr(tabs.w), arr(tabs.Lp1), arr(tabs.Lm1)
        self.Dp1, self.Dm1 = arr(tabs.Dp1), arr(tabs.Dm1)
        self.Dvec, self.Evec, self.minv = arr(tabs.Dvec), arr(tabs.Evec), arr(tabs.minv)
        self.prm = arr(params if len(params) else [0.0])
        self.code, self.trivial, self.needs_pos = code, trivial, needs_positivity
        self.beta0, self.h = tabs.beta0, h
        self.n, self.nm, self.nq = self.phi_q.shape[0], self.V.shape[1], self.V.shape[0]
        if self.nq > MAXQ:
            raise ValueError("too many quadrature points for compiled kernel")
        if self.nm > 4:
            raise ValueError("compiled kernels support degree <= 3")
        self.dirichlet = dirichlet is not None
        if dirichlet is not None:
            self.mob_a, self.mob_b, self.q_a, self.q_b = dirichlet
        self.fr = <double*> malloc(self.n * sizeof(double))
        self.fl = <double*> malloc(self.n * sizeof(double))
        if self.fr == NULL or self.fl == NULL:
            raise MemoryError()
        self.qbuf = np.empty((self.n, self.nm))
        self.kbuf = np.empty((self.n, self.nm))
        self.u0buf = np.empty((self.n, self.nm))

    def __dealloc__(self):
        free(self.fr)
        free(self.fl)

    cdef Py_ssize_t _q(self, const double[:, ::1] u, double[:, ::1] out) noexcept nogil:
        cdef Py_ssize_t j, i, s
        cdef double acc, uq
        cdef double vals[MAXQ]
        cdef const double* prm = &self.prm[0]
        for j in range(self.n):
            for s in range(self.nq):
                uq = 0.0
                for i in range(self.nm):
                    uq = uq + u[j, i] * self.V[s, i]
                if self.needs_pos and uq <= 0.0:
                    return j
                vals[s] = self.phi_q[j, s] + _hp(self.code, prm, uq)
                if not isfinite(vals[s]):
                    return j
            for i in range(self.nm):
                acc = 0.0
                for s in range(self.nq):
                    acc = acc + self.P[i, s] * vals[s]
                out[j, i] = acc
        return -1

    cdef void _rhs(self, const double[:, ::1] u, const double[:, ::1] q,
                   double[:, ::1] out) noexcept nogil:
        cdef Py_ssize_t n = self.n, nm = self.nm, nq = self.nq
        cdef Py_ssize_t j, i, s
        cdef double uq, qx, acc, fs, g, jmp, ql, qr, qd
        cdef double h = self.h
        cdef const double* prm = &self.prm[0]
        cdef double tmp[MAXQ]
        for j in range(n):
            # volume term: tmp[s] = w_s f(u(s)) q_xi(s)
            for s in range(nq):
                uq = 0.0
                qx = 0.0
                for i in range(nm):
                    uq = uq + u[j, i] * self.V[s, i]
                    qx = qx + q[j, i] * self.Vd[s, i]
                tmp[s] = self.w[s] * _mob(self.code, prm, self.trivial, uq) * qx
            for i in range(nm):
                acc = 0.0
                for s in range(nq):
                    acc = acc + tmp[s] * self.Vd[s, i]
                out[j, i] = -(2.0 / h) * acc
            ql = 0.0
            qr = 0.0
            for i in range(nm):
                ql = ql + u[j, i] * self.Lm1[i]
                qr = qr + u[j, i] * self.Lp1[i]
            self.fl[j] = _mob(self.code, prm, self.trivial, ql)
            self.fr[j] = _mob(self.code, prm, self.trivial, qr)

        for j in range(n - 1):
            fs = self.fr[j] + self.fl[j + 1]
            g = 0.0
            jmp = 0.0
            for i in range(nm):
                g = g - self.Dvec[i] * q[j, i] + self.Evec[i] * q[j + 1, i]
                jmp = jmp + self.Lp1[i] * q[j, i] - self.Lm1[i] * q[j + 1, i]
            g = g * fs * (0.5 / h)
            jmp = jmp * fs * (0.5 / h)
            for i in range(nm):
                out[j, i] = out[j, i] + g * self.Lp1[i] + jmp * self.Dp1[i]
                out[j + 1, i] = out[j + 1, i] - g * self.Lm1[i] + jmp * self.Dm1[i]

        if self.dirichlet:
            fs = (self.mob_a + self.fl[0]) * (0.5 / h)
            ql = 0.0
            qd = 0.0
            for i in range(nm):
                ql = ql + self.Lm1[i] * q[0, i]
                qd = qd + self.Dm1[i] * q[0, i]
            g = self.beta0 * (ql - self.q_a) + 2.0 * qd
            for i in range(nm):
                out[0, i] = out[0, i] - fs * g * self.Lm1[i] + fs * (self.q_a - ql) * self.Dm1[i]
            fs = (self.fr[n - 1] + self.mob_b) * (0.5 / h)
            qr = 0.0
            qd = 0.0
            for i in range(nm):
                qr = qr + self.Lp1[i] * q[n - 1, i]
                qd = qd + self.Dp1[i] * q[n - 1, i]
            g = -self.beta0 * (qr - self.q_b) + 2.0 * qd
            for i in range(nm):
                out[n - 1, i] = out[n - 1, i] + fs * g * self.Lp1[i] + fs * (qr - self.q_b) * self.Dp1[i]

        for j in range(n):
            for i in range(nm):
                out[j, i] = out[j, i] * self.minv[i]

    cdef Py_ssize_t _qq(self, const double[:, ::1] u) noexcept nogil:
        """q into qbuf; on the q = u path this is a copy."""
        cdef Py_ssize_t j, i
        if self.trivial:
            for j in range(self.n):
                for i in range(self.nm):
                    self.qbuf[j, i] = u[j, i]
            return -1
        return self._q(u, self.qbuf)

    def compute_q(self, const double[:, ::1] u, double[:, ::1] out):
        """Project Phi + H'(u) cell-wise; returns -1 or the first bad cell."""
        cdef Py_ssize_t bad
        with nogil:
            bad = self._q(u, out)
        return bad

    def rhs(self, const double[:, ::1] u, const double[:, ::1] q, double[:, ::1] out):
        with nogil:
            self._rhs(u, q, out)

    def advance(self, double[:, ::1] u, double dt, long n_steps, int heun,
                int limit_on, int limit_stage1, double delta, int skip_zero, int fallback,
                int stop_below):
        """Take up to ``n_steps`` explicit steps in place.

        Returns (steps_done, status, cell, first_below_step, first_negative_step,
        n_limited, n_flattened, n_mass_changed).  status: 0 ok, 1 limiter
        failure, 2 q undefined, 3 non-finite values, 4 stopped below the floor.
        On status 1-3 ``u`` holds the state before the failing step.
        Step indices are 0-based within this call, -1 when not observed.
        """
        cdef Py_ssize_t n = self.n, nm = self.nm, j, i, bad = -1
        cdef long step, done = 0, n_lim = 0, n_fail = 0, n_flat = 0, n_mass = 0
        cdef long first_below = -1, first_neg = -1
        cdef int status = 0, finite
        cdef double amin
        cdef double[:, ::1] u0 = self.u0buf, kb = self.kbuf
        with nogil:
            for step in range(n_steps):
                for j in range(n):
                    for i in range(nm):
                        u0[j, i] = u[j, i]
                bad = self._qq(u)
                if bad >= 0:
                    status = 2
                    break
                self._rhs(u, self.qbuf, kb)
                for j in range(n):
                    for i in range(nm):
                        u[j, i] = u0[j, i] + dt * kb[j, i]
                if heun:
                    if limit_stage1:
                        status = self._stage_end(u, step, limit_on, delta, skip_zero, fallback,
                                                 &first_below, &first_neg, &n_lim, &n_flat,
                                                 &n_mass, &bad)
                        if status:
                            break
                    bad = self._qq(u)
                    if bad >= 0:
                        status = 2
                        break
                    self._rhs(u, self.qbuf, kb)
                    for j in range(n):
                        for i in range(nm):
                            u[j, i] = 0.5 * u0[j, i] + 0.5 * (u[j, i] + dt * kb[j, i])
                status = self._stage_end(u, step, limit_on, delta, skip_zero, fallback,
                                         &first_below, &first_neg, &n_lim, &n_flat, &n_mass, &bad)
                if status:
                    break
                finite = 1
                for j in range(n):
                    for i in range(nm):
                        if not isfinite(u[j, i]):
                            finite = 0
                if not finite:
                    status = 3
                    break
                done += 1
                if stop_below and first_below >= 0:
                    status = 4
                    break
            if status != 0 and status != 4:
                for j in range(n):
                    for i in range(nm):
                        u[j, i] = u0[j, i]
        return done, status, bad, first_below, first_neg, n_lim, n_flat, n_mass

    cdef int _stage_end(self, double[:, ::1] u, long step, int limit_on, double delta,
                        int skip_zero, int fallback, long* first_below, long* first_neg,
                        long* n_lim, long* n_flat, long* n_mass, Py_ssize_t* bad) noexcept nogil:
        cdef Py_ssize_t j, i
        cdef double amin = u[0, 0]
        cdef long nf = 0
        for j in range(1, self.n):
            if u[j, 0] < amin:
                amin = u[j, 0]
        if first_below[0] < 0 and amin < delta:
            first_below[0] = step
        if first_neg[0] < 0 and amin < 0.0:
            first_neg[0] = step
        if not limit_on:
            return 0
        for j in range(self.n):
            i = _limit_cell(u, j, self.nm, delta, skip_zero, fallback)
            if i == 1:
                n_lim[0] += 1
            elif i == 2:
                if fallback != 1:
                    bad[0] = j
                    return 1
                n_flat[0] += 1
                if u[j, 0] == delta:
                    n_mass[0] += 1
        return 0


cdef int _limit_cell(double[:, ::1] u, Py_ssize_t j, Py_ssize_t nm, double delta,
                     int skip_zero, int fallback) noexcept nogil:
    """0 untouched, 1 squeezed, 2 failed (flattened when fallback == 1)."""
    cdef Py_ssize_t i
    cdef double mn, avg, theta
    mn = _cell_min(&u[j, 0], nm)
    if not (mn < delta):
        return 0
    if skip_zero:
        for i in range(nm):
            if u[j, i] != 0.0:
                break
        else:
            return 0
    avg = u[j, 0]
    if avg <= delta:
        if fallback == 1:
            if avg < delta:
                u[j, 0] = delta
            for i in range(1, nm):
                u[j, i] = 0.0
        return 2
    theta = 0.0 if avg < TINY_MEAN else SQUEEZE_MARGIN * (avg - delta) / (avg - mn)
    for i in range(1, nm):
        u[j, i] = u[j, i] * theta
    return 1


cdef inline double _poly(double a0, double a1, double a2, double a3, double x) noexcept nogil:
    return a0 + x * (a1 + x * (a2 + x * a3))


cdef double _cell_min(const double* c, Py_ssize_t nm) noexcept nogil:
    cdef double c0 = c[0], c1 = 0.0, c2 = 0.0, c3 = 0.0
    cdef double a0, a1, a2, a3, A, B, C, disc, sq, qq, r, best, v
    if nm > 1:
        c1 = c[1]
    if nm > 2:
        c2 = c[2]
    if nm > 3:
        c3 = c[3]
    a0 = c0 - 0.5 * c2
    a1 = c1 - 1.5 * c3
    a2 = 1.5 * c2
    a3 = 2.5 * c3
    best = _poly(a0, a1, a2, a3, -1.0)
    v = _poly(a0, a1, a2, a3, 1.0)
    if v < best:
        best = v
    A = 3.0 * a3
    B = 2.0 * a2
    C = a1
    if A != 0.0:
        disc = B * B - 4.0 * A * C
        if disc >= 0.0:
            sq = sqrt(disc)
            qq = -0.5 * (B + copysign(sq, B))
            r = qq / A
            if r > -1.0 and r < 1.0:
                v = _poly(a0, a1, a2, a3, r)
                if v < best:
                    best = v
            if qq != 0.0:
                r = C / qq
                if r > -1.0 and r < 1.0:
                    v = _poly(a0, a1, a2, a3, r)
                    if v < best:
                        best = v
    elif B != 0.0:
        r = -C / B
        if r > -1.0 and r < 1.0:
            v = _poly(a0, a1, a2, a3, r)
            if v < best:
                best = v
    return best


def cell_min(const double[:, ::1] u, double[::1] out):
    cdef Py_ssize_t n = u.shape[0], nm = u.shape[1], j
    if nm > 4:
        raise ValueError("compiled cell_min supports degree <= 3")
    with nogil:
        for j in range(n):
            out[j] = _cell_min(&u[j, 0], nm)


def limit(double[:, ::1] u, double delta, int skip_zero, int fallback,
          long[::1] failed):
    """In-place squeeze; returns (n_limited, n_failed).

    With fallback == 0 failed cells are left untouched and listed in
    ``failed``; with fallback == 1 they are flattened to max(avg, delta).
    """
    cdef Py_ssize_t n = u.shape[0], nm = u.shape[1], j
    cdef long n_lim = 0, n_fail = 0
    cdef int r
    if nm > 4:
        raise ValueError("compiled limiter supports degree <= 3")
    with nogil:
        for j in range(n):
            r = _limit_cell(u, j, nm, delta, skip_zero, fallback)
            if r == 1:
                n_lim += 1
            elif r == 2:
                failed[n_fail] = j
                n_fail += 1
    return n_lim, n_fail
