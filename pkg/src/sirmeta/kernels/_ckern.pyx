# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels; see pykern.py for the reference semantics."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, sin

cnp.import_array()

DEF DAMP_CUTOFF = 45.0


def transform_sums(double[:, ::1] Lre, double[:, ::1] Lim, double[::1] wts,
                   complex[::1] ray, double[::1] omegas):
    cdef Py_ssize_t nom = omegas.shape[0]
    cdef Py_ssize_t nw = Lre.shape[0]
    cdef Py_ssize_t nq = Lre.shape[1]
    cdef cnp.ndarray[complex, ndim=1] out = np.empty(nom, dtype=np.complex128)
    cdef Py_ssize_t io, iw, iq
    cdef double om, d, m, ph, sr, si, tr, ti, accr, acci, rr, ri
    for io in range(nom):
        om = omegas[io]
        accr = 0.0
        acci = 0.0
        for iw in range(nw):
            sr = 0.0
            si = 0.0
            for iq in range(nq):
                d = om * Lim[iw, iq]
                if d > DAMP_CUTOFF:
                    break  # Lim grows with q (atoms sorted ascending)
                m = wts[iq] * exp(-d)
                ph = om * Lre[iw, iq]
                sr += m * cos(ph)
                si += m * sin(ph)
            tr = 1.0 - sr
            ti = -si
            rr = ray[iw].real
            ri = ray[iw].imag
            accr += tr * rr - ti * ri
            acci += tr * ri + ti * rr
        out[io] = accr + 1j * acci
    return out


def slot_chunk(double[::1] v, long long[::1] buf, unsigned char[::1] active,
               int[::1] indptr, int[::1] indices, float[::1] data,
               unsigned char[:, ::1] arrivals, double[:, ::1] su,
               unsigned char[:, ::1] success_out, unsigned char[::1] count,
               long long[::1] attempts, long long[::1] successes,
               long long[::1] active_slots):
    cdef Py_ssize_t nslots = arrivals.shape[0]
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t t, j
    cdef int p0, p1, ptr
    cdef double p
    cdef unsigned char s, tally, na
    for t in range(nslots):
        tally = count[t]
        for j in range(n):
            if active[j]:
                p = exp(-v[j])
                s = su[t, j] < p
                success_out[t, j] = s
                if tally:
                    attempts[j] += 1
                    active_slots[j] += 1
                    if s:
                        successes[j] += 1
                if s:
                    buf[j] -= 1
            buf[j] += arrivals[t, j]
        for j in range(n):
            na = buf[j] > 0
            if na != active[j]:
                p0 = indptr[j]
                p1 = indptr[j + 1]
                if na:
                    for ptr in range(p0, p1):
                        v[indices[ptr]] += data[ptr]
                else:
                    for ptr in range(p0, p1):
                        v[indices[ptr]] -= data[ptr]
                active[j] = na
