# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot kernels in ``_fallback``."""
import numpy as np
from libc.math cimport cos, sin, fabs

# the elementwise integrand gains nothing from compilation
from ._fallback import osc_integrand_s  # noqa: F401

# points per uniformly spaced run between exact evaluations
cdef int _RUN = 32
# rows handled by the fused loop; more go through BLAS
cdef int _FUSED_ROWS = 4
cdef Py_ssize_t _CHUNK = 1 << 22


def _runs(double[::1] xs):
    """Run starts and mean spacings of the near-uniform pieces of ``xs``."""
    cdef Py_ssize_t n = xs.shape[0], j = 0, k
    seed = np.zeros(n, dtype=np.int8)
    hrun = np.zeros(n)
    cdef signed char[::1] sd = seed
    cdef double[::1] hr = hrun
    cdef double h0
    while j < n:
        sd[j] = 1
        k = j + 1
        if k < n:
            h0 = xs[k] - xs[j]
            # linspace spacings differ at the rounding level of x
            while (k + 1 < n and k - j < _RUN
                   and fabs(xs[k + 1] - xs[k] - h0) <= 1e-14 * (fabs(xs[k + 1]) + 1.0)):
                k += 1
            if k - j > 1:
                hr[j] = (xs[k] - xs[j]) / (k - j)
            else:
                k = j + 1
        j = k
    return seed, hrun


def phase_matrix(double[::1] xi, double[::1] xs):
    """``exp(i xi_q x_j)`` of shape ``(len(xi), len(xs))`` using rotations on uniform runs."""
    cdef Py_ssize_t nq = xi.shape[0], nx = xs.shape[0], q, j
    seed_arr, hrun_arr = _runs(xs)
    cdef signed char[::1] seed = seed_arr
    cdef double[::1] hrun = hrun_arr
    out = np.empty((nq, nx), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double w, er = 1.0, ei = 0.0, rr = 1.0, ri = 0.0, tr
    for q in range(nq):
        w = xi[q]
        for j in range(nx):
            if seed[j]:
                er = cos(w * xs[j])
                ei = sin(w * xs[j])
                if hrun[j] != 0.0:
                    rr = cos(w * hrun[j])
                    ri = sin(w * hrun[j])
            else:
                tr = er * rr - ei * ri
                ei = er * ri + ei * rr
                er = tr
            o[q, j].real = er
            o[q, j].imag = ei
    return out


def fourier_sum(double complex[:, ::1] coeff, double complex[:, ::1] coeff_a,
                double[::1] xi, double[::1] xs, double[:, ::1] u, double[:, ::1] a):
    """Accumulate ``Re sum_q c[:, q] exp(i xi_q x)`` into ``u`` (and ``a`` for ``coeff_a``).

    Inside a uniformly spaced run the exponential is advanced by rotation;
    each run starts from an exact evaluation.  With more than a few rows the
    products go through a BLAS matrix multiply instead of the fused loop.
    """
    cdef Py_ssize_t ny = coeff.shape[0], nq = xi.shape[0], nx = xs.shape[0]
    cdef Py_ssize_t c, step
    if ny > _FUSED_ROWS:
        cn = np.asarray(coeff)
        ca = np.asarray(coeff_a)
        un = np.asarray(u)
        an = np.asarray(a)
        xn = np.asarray(xs)
        step = max(1, _CHUNK // max(nq, 1))
        for c in range(0, nx, step):
            ph = phase_matrix(xi, np.ascontiguousarray(xn[c:c + step]))
            un[:, c:c + step] += (cn @ ph).real
            an[:, c:c + step] += (ca @ ph).real
        return
    _fused(coeff, coeff_a, xi, xs, u, a)


cdef void _fused(double complex[:, ::1] coeff, double complex[:, ::1] coeff_a,
                 double[::1] xi, double[::1] xs, double[:, ::1] u, double[:, ::1] a):
    cdef Py_ssize_t ny = coeff.shape[0], nq = xi.shape[0], nx = xs.shape[0]
    cdef Py_ssize_t q, j, r
    seed_arr, hrun_arr = _runs(xs)
    cdef signed char[::1] seed = seed_arr
    cdef double[::1] hrun = hrun_arr
    cdef double w, er, ei, rr = 1.0, ri = 0.0, tr, cr, ci
    for q in range(nq):
        w = xi[q]
        er = 1.0
        ei = 0.0
        for j in range(nx):
            if seed[j]:
                er = cos(w * xs[j])
                ei = sin(w * xs[j])
                if hrun[j] != 0.0:
                    rr = cos(w * hrun[j])
                    ri = sin(w * hrun[j])
            else:
                tr = er * rr - ei * ri
                ei = er * ri + ei * rr
                er = tr
            for r in range(ny):
                cr = coeff[r, q].real
                ci = coeff[r, q].imag
                u[r, j] += cr * er - ci * ei
                cr = coeff_a[r, q].real
                ci = coeff_a[r, q].imag
                a[r, j] += cr * er - ci * ei
