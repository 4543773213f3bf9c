# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled resampling core.

Mirrors :mod:`cipround._fallback` draw for draw: both consume the same
``next_double`` stream of a numpy bit generator, so a given seed yields the
same bits and the same trace from either backend.
"""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

from cipround.errors import ResampleCapExceeded

cnp.import_array()


cdef inline double _activity(const cnp.int64_t[::1] indptr,
                             const cnp.int64_t[::1] indices,
                             const double[::1] data,
                             const cnp.int64_t[::1] base,
                             const cnp.int8_t[::1] x,
                             Py_ssize_t k) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t j, i
    for j in range(indptr[k], indptr[k + 1]):
        i = indices[j]
        s += data[j] * <double>(base[i] + x[i])
    return s


cdef inline Py_ssize_t _next_violated(const cnp.int64_t[::1] indptr,
                                      const cnp.int64_t[::1] indices,
                                      const double[::1] data,
                                      const double[::1] rhs,
                                      const cnp.int64_t[::1] base,
                                      const cnp.int8_t[::1] x,
                                      Py_ssize_t k, Py_ssize_t m) noexcept nogil:
    # satisfied rows stay satisfied, so the scan pointer never moves back
    while k < m and _activity(indptr, indices, data, base, x, k) >= rhs[k]:
        k += 1
    return k


cdef inline void _resample(const cnp.int64_t[::1] indptr,
                           const cnp.int64_t[::1] indices,
                           const double[::1] data,
                           const double[::1] p,
                           double sigma,
                           cnp.int8_t[::1] x,
                           Py_ssize_t k,
                           bitgen_t *rng,
                           cnp.int64_t[::1] ybuf,
                           cnp.int64_t[::1] nbuf,
                           Py_ssize_t *ny,
                           Py_ssize_t *nnew) noexcept nogil:
    cdef Py_ssize_t j, i, t
    cdef Py_ssize_t cy = 0, cn = 0
    for j in range(indptr[k], indptr[k + 1]):
        i = indices[j]
        if x[i] == 0:
            if rng.next_double(rng.state) < sigma * data[j]:
                ybuf[cy] = i
                cy += 1
    for t in range(cy):
        i = ybuf[t]
        if rng.next_double(rng.state) < p[i]:
            x[i] = 1
            nbuf[cn] = i
            cn += 1
    ny[0] = cy
    nnew[0] = cn


def relax(const cnp.int64_t[::1] indptr not None,
          const cnp.int64_t[::1] indices not None,
          const double[::1] data not None,
          const double[::1] rhs not None,
          const cnp.int64_t[::1] base not None,
          const double[::1] p not None,
          double sigma,
          object bitgen,
          Py_ssize_t cap,
          bint record=False):
    """Run the resampling loop; see ``cipround._fallback.relax``."""
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t m = rhs.shape[0]
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")
    cdef cnp.ndarray[cnp.int8_t, ndim=1] x_arr = np.zeros(n, dtype=np.int8)
    cdef cnp.int8_t[::1] x = x_arr
    cdef cnp.int64_t[::1] ybuf = np.empty(max(n, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] nbuf = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t i, k = 0, events = 0, ny = 0, nnew = 0
    cdef bint capped = False

    for i in range(n):
        if rng.next_double(rng.state) < p[i]:
            x[i] = 1

    if not record:
        with nogil:
            while True:
                k = _next_violated(indptr, indices, data, rhs, base, x, k, m)
                if k >= m:
                    break
                if events >= cap:
                    capped = True
                    break
                _resample(indptr, indices, data, p, sigma, x, k, rng, ybuf, nbuf, &ny, &nnew)
                events += 1
        if capped:
            raise ResampleCapExceeded(f"cap exceeded: more than {cap} resampling events")
        return x_arr, events, None, None

    initial = x_arr.copy()
    trace = []
    while True:
        k = _next_violated(indptr, indices, data, rhs, base, x, k, m)
        if k >= m:
            break
        if events >= cap:
            raise ResampleCapExceeded(f"cap exceeded: more than {cap} resampling events")
        _resample(indptr, indices, data, p, sigma, x, k, rng, ybuf, nbuf, &ny, &nnew)
        events += 1
        trace.append((k,
                      [int(ybuf[i]) for i in range(ny)],
                      [int(nbuf[i]) for i in range(nnew)]))
    return x_arr, events, trace, initial


def row_activity(const cnp.int64_t[::1] indptr not None,
                 const cnp.int64_t[::1] indices not None,
                 const double[::1] data not None,
                 const cnp.int64_t[::1] x not None):
    """Sequential per-row sums ``sum_j data[j] * x[indices[j]]``."""
    cdef Py_ssize_t m = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t k, j
    cdef double s
    with nogil:
        for k in range(m):
            s = 0.0
            for j in range(indptr[k], indptr[k + 1]):
                s += data[j] * <double>x[indices[j]]
            out[k] = s
    return out
