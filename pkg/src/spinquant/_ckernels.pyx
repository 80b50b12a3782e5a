# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernel.

Mirrors :func:`spinquant.engine.simulate_path` operation for operation:
same Philox4x64-10 streams, same draw order, same floating-point expression
order, so both routes give the same paths up to libm/numpy ``sin`` rounding.
"""
import numpy as np

from libc.math cimport sin, cos, log, fmod, fabs, M_PI, INFINITY, NAN, isfinite
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport uint64_t, int64_t

cdef extern from *:
    """
    #include <stdint.h>
    typedef struct { uint64_t v[4]; } sq_philox_block;

    static inline uint64_t sq_mulhilo(uint64_t a, uint64_t b, uint64_t *hi) {
        unsigned __int128 p = (unsigned __int128)a * (unsigned __int128)b;
        *hi = (uint64_t)(p >> 64);
        return (uint64_t)p;
    }

    static inline sq_philox_block sq_philox4x64_10(uint64_t c0, uint64_t c1, uint64_t c2, uint64_t c3,
                                                   uint64_t k0, uint64_t k1) {
        uint64_t x0 = c0, x1 = c1, x2 = c2, x3 = c3, hi0, hi1, lo0, lo1;
        int i;
        for (i = 0; i < 10; i++) {
            if (i) { k0 += 0x9E3779B97F4A7C15ULL; k1 += 0xBB67AE8584CAA73BULL; }
            lo0 = sq_mulhilo(0xD2E7470EE14C6C93ULL, x0, &hi0);
            lo1 = sq_mulhilo(0xCA5A826395121157ULL, x2, &hi1);
            x0 = hi1 ^ x1 ^ k0;
            x1 = lo1;
            x2 = hi0 ^ x3 ^ k1;
            x3 = lo0;
        }
        sq_philox_block r = {{x0, x1, x2, x3}};
        return r;
    }
    """
    ctypedef struct sq_philox_block:
        uint64_t v[4]
    sq_philox_block sq_philox4x64_10(uint64_t c0, uint64_t c1, uint64_t c2, uint64_t c3,
                                     uint64_t k0, uint64_t k1) nogil


cdef double TWO_PI = 2.0 * M_PI
cdef double INV_2_52 = 2.220446049250313e-16
cdef double TAYLOR_SWITCH = 1e-6


cdef struct Stream:
    uint64_t key0
    uint64_t key1
    uint64_t block
    int pos
    uint64_t buf[4]


cdef inline void stream_init(Stream* s, uint64_t seed, uint64_t path) noexcept nogil:
    s.key0 = seed
    s.key1 = path
    s.block = 0
    s.pos = 4


cdef inline uint64_t stream_raw(Stream* s) noexcept nogil:
    cdef sq_philox_block b
    if s.pos >= 4:
        b = sq_philox4x64_10(s.block, 0, 0, 0, s.key0, s.key1)
        s.buf[0] = b.v[0]
        s.buf[1] = b.v[1]
        s.buf[2] = b.v[2]
        s.buf[3] = b.v[3]
        s.block += 1
        s.pos = 0
    s.pos += 1
    return s.buf[s.pos - 1]


cdef inline double stream_uniform(Stream* s) noexcept nogil:
    return (<double>(stream_raw(s) >> 12) + 0.5) * INV_2_52


cdef inline double reduce_phi(double phi) noexcept nogil:
    phi = fmod(phi, TWO_PI)
    if phi < 0.0:
        phi += TWO_PI
    if phi >= TWO_PI:
        phi = 0.0
    return phi


cdef inline double delta_kernel(double x, double tau) noexcept nogil:
    cdef double a = (0.5 * tau) * x
    cdef double s
    if fabs(a) < TAYLOR_SWITCH:
        return (tau / (2.0 * M_PI)) * (1.0 - a * a / 3.0)
    s = sin(a)
    return (s * s) / (M_PI * x * x * (0.5 * tau))


cdef struct Grid:
    int n
    double h
    const double* theta
    const double* sinv
    const double* sin2
    const double* cos2


cdef struct Table:
    int n
    const double* tau
    const double* cum_plus
    const double* cum_minus


cdef double flight_time(double theta, const Table* tb, double u) noexcept nogil:
    cdef double c = cos(0.5 * theta)
    cdef double cw = c * c
    cdef double sw = 1.0 - cw
    cdef double target = -log(u)
    cdef int lo, hi, mid
    cdef double lam_lo, lam_hi, lam_mid
    lam_hi = cw * tb.cum_plus[tb.n - 1] + sw * tb.cum_minus[tb.n - 1]
    if target > lam_hi:
        return INFINITY
    # first index with cum >= target
    lo = 0
    hi = tb.n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        lam_mid = cw * tb.cum_plus[mid] + sw * tb.cum_minus[mid]
        if lam_mid >= target:
            hi = mid
        else:
            lo = mid
    if hi < 1:
        hi = 1
    lo = hi - 1
    lam_lo = cw * tb.cum_plus[lo] + sw * tb.cum_minus[lo]
    lam_hi = cw * tb.cum_plus[hi] + sw * tb.cum_minus[hi]
    return tb.tau[lo] + (target - lam_lo) / (lam_hi - lam_lo) * (tb.tau[hi] - tb.tau[lo])


cdef double theta_prime(double theta_from, double tau_f, const Grid* g, double u,
                        double* dbuf, double* cdf, bint* degenerate) noexcept nogil:
    cdef int n = g.n, k, lo, hi, mid
    cdef double c = cos(0.5 * theta_from)
    cdef double cw = c * c
    cdef double sw = 1.0 - cw
    cdef double w_prev, w, total, target, den, th
    for k in range(n):
        dbuf[k] = delta_kernel(-g.sin2[k], tau_f)
    cdf[0] = 0.0
    w_prev = g.sinv[0] * (cw * g.cos2[0] * dbuf[0] + sw * g.sin2[0] * dbuf[n - 1])
    for k in range(1, n):
        w = g.sinv[k] * (cw * g.cos2[k] * dbuf[k] + sw * g.sin2[k] * dbuf[n - 1 - k])
        cdf[k] = cdf[k - 1] + 0.5 * (w + w_prev) * g.h
        w_prev = w
    total = cdf[n - 1]
    if not (total > 0.0 and isfinite(total)):
        degenerate[0] = True
        return theta_from
    degenerate[0] = False
    target = u * total
    # numpy.searchsorted(side="left") semantics: first index with cdf >= target
    lo = -1
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if cdf[mid] >= target:
            hi = mid
        else:
            lo = mid
    if hi < 1:
        hi = 1
    lo = hi - 1
    den = cdf[hi] - cdf[lo]
    th = g.theta[lo]
    if den > 0.0:
        th = th + (target - cdf[lo]) / den * g.h
    if th < 0.0:
        th = 0.0
    if th > M_PI:
        th = M_PI
    return th


cdef struct EventBuf:
    Py_ssize_t n
    Py_ssize_t cap
    double* tau
    double* th_b
    double* ph_b
    double* th_a
    double* ph_a


cdef int evbuf_push(EventBuf* e, double t, double thb, double phb, double tha, double pha) noexcept nogil:
    cdef Py_ssize_t cap
    if e.n >= e.cap:
        cap = e.cap * 2 if e.cap > 0 else 1024
        e.tau = <double*>realloc(e.tau, cap * sizeof(double))
        e.th_b = <double*>realloc(e.th_b, cap * sizeof(double))
        e.ph_b = <double*>realloc(e.ph_b, cap * sizeof(double))
        e.th_a = <double*>realloc(e.th_a, cap * sizeof(double))
        e.ph_a = <double*>realloc(e.ph_a, cap * sizeof(double))
        if e.tau == NULL or e.th_b == NULL or e.ph_b == NULL or e.th_a == NULL or e.ph_a == NULL:
            return -1
        e.cap = cap
    e.tau[e.n] = t
    e.th_b[e.n] = thb
    e.ph_b[e.n] = phb
    e.th_a[e.n] = tha
    e.ph_a[e.n] = pha
    e.n += 1
    return 0


cdef void evbuf_free(EventBuf* e) noexcept nogil:
    free(e.tau)
    free(e.th_b)
    free(e.ph_b)
    free(e.th_a)
    free(e.ph_a)


cdef int run_chunk(const int64_t[::1] idx, uint64_t seed, double tau_end,
                   const Grid* g, const Table* tb, bint fixed_initial,
                   double theta_init, double phi_init,
                   double[::1] th0, double[::1] ph0, int64_t[::1] counts,
                   EventBuf* ev, double* dbuf, double* cdf) noexcept nogil:
    cdef Py_ssize_t p
    cdef Stream s
    cdef double theta, phi, t, tau_f, phib, thn, u_t, u_p, theta_before
    cdef int64_t nev
    cdef bint degenerate
    for p in range(idx.shape[0]):
        stream_init(&s, seed, <uint64_t>idx[p])
        if fixed_initial:
            theta = theta_init
            phi = phi_init
        else:
            theta = M_PI * stream_uniform(&s)
            phi = reduce_phi(TWO_PI * stream_uniform(&s))
        th0[p] = theta
        ph0[p] = phi
        t = 0.0
        nev = 0
        while True:
            tau_f = flight_time(theta, tb, stream_uniform(&s))
            if t + tau_f > tau_end:
                break
            t = t + tau_f
            phib = reduce_phi(phi + tau_f)
            u_t = stream_uniform(&s)
            u_p = stream_uniform(&s)
            theta_before = theta
            thn = theta_prime(theta, tau_f, g, u_t, dbuf, cdf, &degenerate)
            if degenerate:
                phi = phib
            else:
                theta = thn
                phi = reduce_phi(TWO_PI * u_p)
            if evbuf_push(ev, t, theta_before, phib, theta, phi) != 0:
                return -1
            nev += 1
        counts[p] = nev
    return 0


def simulate_chunk_arrays(const int64_t[::1] path_indices, uint64_t master_seed, double tau_end,
                          const double[::1] tau_grid, const double[::1] cum_plus,
                          const double[::1] cum_minus, const double[::1] theta,
                          const double[::1] sinv, const double[::1] sin2,
                          const double[::1] cos2, double h,
                          initial=None):
    """Simulate the given paths; returns ``(theta0, phi0, counts, tau, th_b, ph_b, th_a, ph_a)``."""
    cdef Py_ssize_t m = path_indices.shape[0]
    cdef Grid g
    cdef Table tb
    cdef EventBuf ev
    cdef bint fixed = initial is not None
    cdef double th_i = 0.0, ph_i = 0.0
    cdef int rc
    if fixed:
        th_i = float(initial[0])
        ph_i = float(initial[1])
    g.n = theta.shape[0]
    g.h = h
    g.theta = &theta[0]
    g.sinv = &sinv[0]
    g.sin2 = &sin2[0]
    g.cos2 = &cos2[0]
    tb.n = tau_grid.shape[0]
    tb.tau = &tau_grid[0]
    tb.cum_plus = &cum_plus[0]
    tb.cum_minus = &cum_minus[0]
    th0 = np.empty(m)
    ph0 = np.empty(m)
    counts = np.zeros(m, dtype=np.int64)
    cdef double[::1] th0_v = th0
    cdef double[::1] ph0_v = ph0
    cdef int64_t[::1] counts_v = counts
    ev.n = 0
    ev.cap = 0
    ev.tau = NULL
    ev.th_b = NULL
    ev.ph_b = NULL
    ev.th_a = NULL
    ev.ph_a = NULL
    cdef double* dbuf = <double*>malloc(g.n * sizeof(double))
    cdef double* cdf = <double*>malloc(g.n * sizeof(double))
    if dbuf == NULL or cdf == NULL:
        free(dbuf)
        free(cdf)
        raise MemoryError()
    try:
        with nogil:
            rc = run_chunk(path_indices, master_seed, tau_end, &g, &tb, fixed, th_i, ph_i,
                           th0_v, ph0_v, counts_v, &ev, dbuf, cdf)
        if rc != 0:
            raise MemoryError()
        out = [_to_array(ev.tau, ev.n), _to_array(ev.th_b, ev.n), _to_array(ev.ph_b, ev.n),
               _to_array(ev.th_a, ev.n), _to_array(ev.ph_a, ev.n)]
        return (th0, ph0, counts, *out)
    finally:
        free(dbuf)
        free(cdf)
        evbuf_free(&ev)


cdef object _to_array(double* src, Py_ssize_t n):
    if n == 0:
        return np.empty(0)
    return np.asarray(<double[:n]> src).copy()


def sample_theta_prime_batch(const double[::1] theta_from, const double[::1] tau_f,
                             const double[::1] theta, const double[::1] sinv,
                             const double[::1] sin2, const double[::1] cos2, double h,
                             const double[::1] u):
    """Vectorized theta' draws for benchmarking; NaN marks a degenerate weight."""
    cdef Py_ssize_t m = theta_from.shape[0], i
    cdef Grid g
    cdef bint degenerate
    g.n = theta.shape[0]
    g.h = h
    g.theta = &theta[0]
    g.sinv = &sinv[0]
    g.sin2 = &sin2[0]
    g.cos2 = &cos2[0]
    out = np.empty(m)
    cdef double[::1] o = out
    cdef double* dbuf = <double*>malloc(g.n * sizeof(double))
    cdef double* cdf = <double*>malloc(g.n * sizeof(double))
    try:
        with nogil:
            for i in range(m):
                o[i] = theta_prime(theta_from[i], tau_f[i], &g, u[i], dbuf, cdf, &degenerate)
                if degenerate:
                    o[i] = NAN
    finally:
        free(dbuf)
        free(cdf)
    return out


def philox_raw(uint64_t master_seed, uint64_t path_index, Py_ssize_t n):
    """First ``n`` raw 64-bit words of stream ``(master_seed, path_index)``."""
    cdef Stream s
    cdef Py_ssize_t i
    stream_init(&s, master_seed, path_index)
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    for i in range(n):
        o[i] = stream_raw(&s)
    return out
