# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Each routine mirrors ``_kernels_py`` operation by
operation so both backends give bit-identical results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY
from libc.stdint cimport int64_t, uint8_t

cnp.import_array()


def subset_flows(double[::1] pi, double[::1] exit_flow, int64_t[::1] indptr,
                 int64_t[::1] indices, double[::1] qvals, chunk=None):
    cdef Py_ssize_t k = pi.shape[0]
    cdef int64_t total = (<int64_t>1) << k
    cdef cnp.ndarray[double, ndim=1] mass_a = np.empty(total)
    cdef cnp.ndarray[double, ndim=1] cut_a = np.empty(total)
    cdef double[::1] mass = mass_a
    cdef double[::1] cut = cut_a
    cdef int64_t mask, e
    cdef Py_ssize_t x
    cdef double m, c
    with nogil:
        for mask in range(total):
            m = 0.0
            c = 0.0
            for x in range(k):
                if (mask >> x) & 1:
                    m += pi[x]
                    c += exit_flow[x]
                    for e in range(indptr[x], indptr[x + 1]):
                        if not ((mask >> indices[e]) & 1):
                            c += qvals[e]
            mass[mask] = m
            cut[mask] = c
    return mass_a, cut_a


cdef inline int64_t _choose(const double[:, ::1] util, const int64_t[::1] radices,
                            const int64_t[::1] strides, double beta, int64_t x,
                            double u0, double u1, int64_t n) noexcept nogil:
    cdef int64_t i = <int64_t>(u0 * n)
    if i >= n:
        i = n - 1
    cdef int64_t m = radices[i]
    cdef int64_t stride = strides[i]
    cdef int64_t xi = (x // stride) % m
    cdef int64_t base = x - xi * stride
    cdef double mx = -INFINITY
    cdef double v, total = 0.0, target, cum = 0.0
    cdef int64_t s, pick = m - 1
    for s in range(m):
        v = beta * util[i, base + s * stride]
        if v > mx:
            mx = v
    for s in range(m):
        total += exp(beta * util[i, base + s * stride] - mx)
    target = u1 * total
    for s in range(m):
        cum += exp(beta * util[i, base + s * stride] - mx)
        if target < cum:
            pick = s
            break
    return base + pick * stride


def simulate_path(const double[:, ::1] util, const int64_t[::1] radices,
                  const int64_t[::1] strides, double beta, int64_t x0,
                  const double[:, ::1] uniforms, int64_t t_offset,
                  const uint8_t[:, ::1] tracked, int64_t[::1] first_hit,
                  int64_t[:, ::1] occupancy, int64_t window, int64_t[::1] visits,
                  int64_t[::1] path):
    cdef int64_t n = radices.shape[0]
    cdef Py_ssize_t n_tracked = tracked.shape[0]
    cdef bint want_visits = visits.shape[0] > 0
    cdef bint want_path = path.shape[0] > 0
    cdef bint want_occ = occupancy.shape[1] > 0
    cdef int64_t x = x0, step
    cdef Py_ssize_t t, k
    with nogil:
        for t in range(uniforms.shape[0]):
            x = _choose(util, radices, strides, beta, x, uniforms[t, 0], uniforms[t, 1], n)
            step = t_offset + t + 1
            for k in range(n_tracked):
                if tracked[k, x]:
                    if first_hit[k] < 0:
                        first_hit[k] = step
                    if want_occ:
                        occupancy[k, (step - 1) // window] += 1
            if want_visits:
                visits[x] += 1
            if want_path:
                path[t] = x
    return x


def step_batch(const double[:, ::1] util, const int64_t[::1] radices,
               const int64_t[::1] strides, double beta, int64_t[::1] states,
               const double[:, ::1] uniforms):
    cdef int64_t n = radices.shape[0]
    cdef Py_ssize_t j
    with nogil:
        for j in range(states.shape[0]):
            states[j] = _choose(util, radices, strides, beta, states[j],
                                uniforms[j, 0], uniforms[j, 1], n)
