# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling kernels: scalar per-replica loops over Philox streams.

Each replica owns the stream SeedSequence((seed, replica_index)), so results
are bit-reproducible for a given seed regardless of batching or scheduling.
The chain kernels consume one uniform for the initial state and one per step;
``_core_py.chain_path_reference`` replays the same arithmetic in Python and
is the equivalence oracle for the tests.
"""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport cos, fabs, log, sqrt
from libc.stdint cimport INT64_MAX, int64_t
from numpy.random cimport bitgen_t

cnp.import_array()

cdef double TWO_PI = 6.283185307179586476925286766559


cdef inline double next_u(bitgen_t *bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline Py_ssize_t pick1(const double *prob, const cnp.int32_t *alias,
                             Py_ssize_t n, double u) noexcept nogil:
    cdef double un = u * n
    cdef Py_ssize_t j = <Py_ssize_t>un
    if j > n - 1:
        j = n - 1
    if un - j < prob[j]:
        return j
    return alias[j]


cdef inline Py_ssize_t pick2(const double *prob, const cnp.int32_t *alias,
                             Py_ssize_t s, Py_ssize_t n, double u) noexcept nogil:
    cdef const double *row = prob + s * n
    cdef double un = u * n
    cdef Py_ssize_t j = <Py_ssize_t>un
    if j > n - 1:
        j = n - 1
    if un - j < row[j]:
        return j
    return (alias + s * n)[j]


cdef bitgen_t *_bitgen_ptr(object bg):
    return <bitgen_t *>PyCapsule_GetPointer(bg.capsule, "BitGenerator")


def _stream(seed, replica):
    return np.random.Philox(np.random.SeedSequence((int(seed), int(replica))))


def chain_paths(const double[::1] init_prob, const cnp.int32_t[::1] init_alias,
                const double[:, ::1] step_prob, const cnp.int32_t[:, ::1] step_alias,
                Py_ssize_t n_steps, seed, Py_ssize_t rep_start, Py_ssize_t n_reps):
    """Index paths of the grid chain: (n_reps, n_steps + 1) uint16."""
    cdef Py_ssize_t n = init_prob.shape[0]
    out_arr = np.empty((n_reps, n_steps + 1), dtype=np.uint16)
    cdef cnp.uint16_t[:, ::1] out = out_arr
    cdef Py_ssize_t r, k, s
    cdef bitgen_t *bg
    for r in range(n_reps):
        stream = _stream(seed, rep_start + r)
        bg = _bitgen_ptr(stream)
        with nogil:
            s = pick1(&init_prob[0], &init_alias[0], n, next_u(bg))
            out[r, 0] = <cnp.uint16_t>s
            for k in range(1, n_steps + 1):
                s = pick2(&step_prob[0, 0], &step_alias[0, 0], s, n, next_u(bg))
                out[r, k] = <cnp.uint16_t>s
    return out_arr


def chain_hit_zero(const double[::1] init_prob, const cnp.int32_t[::1] init_alias,
                   const double[:, ::1] step_prob, const cnp.int32_t[:, ::1] step_alias,
                   const cnp.int8_t[::1] signs, Py_ssize_t max_steps,
                   seed, Py_ssize_t rep_start, Py_ssize_t n_reps):
    """Step index of the first zero hit (center landing or sign change), -1 if censored."""
    cdef Py_ssize_t n = init_prob.shape[0]
    res_arr = np.full(n_reps, -1, dtype=np.int64)
    cdef int64_t[::1] res = res_arr
    cdef Py_ssize_t r, k, s
    cdef int sg, sgn
    cdef bitgen_t *bg
    for r in range(n_reps):
        stream = _stream(seed, rep_start + r)
        bg = _bitgen_ptr(stream)
        with nogil:
            s = pick1(&init_prob[0], &init_alias[0], n, next_u(bg))
            sg = signs[s]
            if sg == 0:
                res[r] = 0
            else:
                for k in range(1, max_steps + 1):
                    s = pick2(&step_prob[0, 0], &step_alias[0, 0], s, n, next_u(bg))
                    sgn = signs[s]
                    if sgn == 0 or sgn * sg < 0:
                        res[r] = k
                        break
                    sg = sgn
    return res_arr


def chain_first_transition(const double[::1] init_prob, const cnp.int32_t[::1] init_alias,
                           const double[:, ::1] step_prob, const cnp.int32_t[:, ::1] step_alias,
                           const cnp.int8_t[::1] signs, Py_ssize_t sep_steps, Py_ssize_t max_steps,
                           seed, Py_ssize_t rep_start, Py_ssize_t n_reps):
    """First sign-changing zero return; see the NumPy twin for the exact semantics."""
    cdef Py_ssize_t n = init_prob.shape[0]
    res_arr = np.full(n_reps, -1, dtype=np.int64)
    ret_arr = np.zeros(n_reps, dtype=np.int64)
    cdef int64_t[::1] res = res_arr
    cdef int64_t[::1] nret = ret_arr
    cdef Py_ssize_t r, k, s
    cdef int sg, sg_prev, ref
    cdef int64_t resume, probe_at, tau, cnt
    cdef bitgen_t *bg
    for r in range(n_reps):
        stream = _stream(seed, rep_start + r)
        bg = _bitgen_ptr(stream)
        with nogil:
            s = pick1(&init_prob[0], &init_alias[0], n, next_u(bg))
            sg_prev = signs[s]
            ref = 0
            resume = sep_steps
            probe_at = INT64_MAX
            tau = 0
            cnt = 0
            for k in range(1, max_steps + 1):
                s = pick2(&step_prob[0, 0], &step_alias[0, 0], s, n, next_u(bg))
                sg = signs[s]
                if k == sep_steps:
                    ref = sg
                if probe_at == k:
                    if ref * sg < 0:
                        res[r] = tau
                        break
                    ref = sg
                    resume = k
                    probe_at = INT64_MAX
                if probe_at == INT64_MAX and k >= resume:
                    if sg == 0 or (k - 1 >= resume and sg_prev * sg < 0):
                        probe_at = k + sep_steps
                        tau = k
                        cnt += 1
                sg_prev = sg
            nret[r] = cnt
    return res_arr, ret_arr


cdef inline double dinterp(const double[::1] drift, double x_lo, double h, double x) noexcept nogil:
    cdef Py_ssize_t nd = drift.shape[0]
    cdef double t = (x - x_lo) / h
    cdef Py_ssize_t j = <Py_ssize_t>t
    if j < 0:
        j = 0
    if j > nd - 2:
        j = nd - 2
    cdef double f = t - j
    return drift[j] * (1.0 - f) + drift[j + 1] * f


def em_paths(const double[::1] x0, const double[::1] drift, double x_lo, double h,
             Py_ssize_t n_steps, double dt, double beta, seed, Py_ssize_t rep_start,
             bint noise=True):
    """Euler-Maruyama paths: (n_reps, n_steps + 1) float64, clamped to the node range."""
    cdef Py_ssize_t n_reps = x0.shape[0]
    cdef double x_hi = x_lo + (drift.shape[0] - 1) * h
    cdef double sig = sqrt(dt / beta) if noise else 0.0
    out_arr = np.empty((n_reps, n_steps + 1))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, k
    cdef double x, u1, u2, rad, z
    cdef bint blown = False
    cdef bitgen_t *bg
    for r in range(n_reps):
        stream = _stream(seed, rep_start + r)
        bg = _bitgen_ptr(stream)
        with nogil:
            x = x0[r]
            if x < x_lo:
                x = x_lo
            if x > x_hi:
                x = x_hi
            out[r, 0] = x
            for k in range(1, n_steps + 1):
                x = x + dinterp(drift, x_lo, h, x) * dt
                if sig != 0.0:
                    u1 = next_u(bg)
                    u2 = next_u(bg)
                    rad = sqrt(-2.0 * log(1.0 - u1))
                    z = rad * cos(TWO_PI * u2)
                    x += sig * z
                if fabs(x) > x_hi + 1.0:
                    blown = True
                    break
                if x < x_lo:
                    x = x_lo
                if x > x_hi:
                    x = x_hi
                out[r, k] = x
        if blown:
            raise RuntimeError("trajectory blow-up: dt too large")
    return out_arr


def em_occupation(const double[::1] x0, const double[::1] drift, double x_lo, double h,
                  Py_ssize_t n_steps, double dt, double beta, seed, Py_ssize_t rep_start,
                  Py_ssize_t n_bins, double lo, double hi):
    """Pooled occupation histogram over uniform bins on [lo, hi], accumulated in-loop."""
    cdef Py_ssize_t n_reps = x0.shape[0]
    cdef double x_hi = x_lo + (drift.shape[0] - 1) * h
    cdef double sig = sqrt(dt / beta)
    counts_arr = np.zeros(n_bins, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef double inv = n_bins / (hi - lo)
    cdef Py_ssize_t r, k, b
    cdef double x, u1, u2, rad, z
    cdef bint blown = False
    cdef bitgen_t *bg
    for r in range(n_reps):
        stream = _stream(seed, rep_start + r)
        bg = _bitgen_ptr(stream)
        with nogil:
            x = x0[r]
            if x < x_lo:
                x = x_lo
            if x > x_hi:
                x = x_hi
            for k in range(n_steps):
                u1 = next_u(bg)
                u2 = next_u(bg)
                rad = sqrt(-2.0 * log(1.0 - u1))
                z = rad * cos(TWO_PI * u2)
                x = x + dinterp(drift, x_lo, h, x) * dt + sig * z
                if fabs(x) > x_hi + 1.0:
                    blown = True
                    break
                if x < x_lo:
                    x = x_lo
                if x > x_hi:
                    x = x_hi
                b = <Py_ssize_t>((x - lo) * inv)
                if b < 0:
                    b = 0
                if b > n_bins - 1:
                    b = n_bins - 1
                counts[b] += 1
        if blown:
            raise RuntimeError("trajectory blow-up: dt too large")
    return counts_arr


def em_hit_zero(const double[::1] x0, const double[::1] drift, double x_lo, double h,
                Py_ssize_t max_steps, double dt, double beta, seed, Py_ssize_t rep_start):
    """Step index of the first sign change of an EM trajectory, -1 if censored."""
    cdef Py_ssize_t n_reps = x0.shape[0]
    cdef double x_hi = x_lo + (drift.shape[0] - 1) * h
    cdef double sig = sqrt(dt / beta)
    res_arr = np.full(n_reps, -1, dtype=np.int64)
    cdef int64_t[::1] res = res_arr
    cdef Py_ssize_t r, k
    cdef double x, u1, u2, rad, z, sg, sgn
    cdef bitgen_t *bg
    for r in range(n_reps):
        stream = _stream(seed, rep_start + r)
        bg = _bitgen_ptr(stream)
        with nogil:
            x = x0[r]
            if x < x_lo:
                x = x_lo
            if x > x_hi:
                x = x_hi
            sg = (x > 0) - (x < 0)
            if sg == 0:
                res[r] = 0
            else:
                for k in range(1, max_steps + 1):
                    u1 = next_u(bg)
                    u2 = next_u(bg)
                    rad = sqrt(-2.0 * log(1.0 - u1))
                    z = rad * cos(TWO_PI * u2)
                    x = x + dinterp(drift, x_lo, h, x) * dt + sig * z
                    if x < x_lo:
                        x = x_lo
                    if x > x_hi:
                        x = x_hi
                    sgn = (x > 0) - (x < 0)
                    if sgn == 0 or sgn * sg < 0:
                        res[r] = k
                        break
                    sg = sgn
    return res_arr
