# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled engine for the hot (x, h, sigma) loops over catalog fields.

Mirrors the node semantics of ``_core_py`` exactly (same inner loop
order, same p-modulus and indicator conventions); only evaluation speed
differs.  Fields and potentials arrive as small descriptors: an integer
code plus a parameter vector (see ``magsob.fields`` for the codes).
"""

from libc.math cimport cos, exp, fabs, pow, sin, sqrt

import numpy as np

IS_COMPILED = True

# keep in sync with magsob.fields
DEF F_GAUSSIAN = 1
DEF F_MODULATED_GAUSSIAN = 2
DEF F_BUMP = 3
DEF F_TRUNCATED = 4
DEF A_ZERO = 1
DEF A_CONSTANT = 2
DEF A_ROTATIONAL = 3
DEF A_GRADIENT = 4


cdef inline void f_eval(int code, const double* par, const double* y, int N,
                        double* out_re, double* out_im) noexcept nogil:
    cdef double r2 = 0.0, kd = 0.0, g, t2, m, aw, wr, wi
    cdef int d
    if code == F_GAUSSIAN:
        for d in range(N):
            r2 += y[d] * y[d]
        out_re[0] = exp(-0.5 * par[0] * r2)
        out_im[0] = 0.0
    elif code == F_MODULATED_GAUSSIAN:
        for d in range(N):
            r2 += y[d] * y[d]
            kd += par[1 + d] * y[d]
        g = exp(-0.5 * par[0] * r2)
        out_re[0] = g * cos(kd)
        out_im[0] = g * sin(kd)
    elif code == F_BUMP:
        for d in range(N):
            r2 += y[d] * y[d]
        t2 = r2 / (par[0] * par[0])
        if t2 >= 1.0:
            out_re[0] = 0.0
            out_im[0] = 0.0
        else:
            out_re[0] = exp(1.0 - 1.0 / (1.0 - t2))
            out_im[0] = 0.0
    elif code == F_TRUNCATED:
        m = par[0]
        f_eval(<int> par[1], par + 2, y, N, &wr, &wi)
        aw = sqrt(wr * wr + wi * wi)
        if aw > m:
            out_re[0] = m * wr / aw
            out_im[0] = m * wi / aw
        else:
            out_re[0] = wr
            out_im[0] = wi
    else:
        out_re[0] = 0.0
        out_im[0] = 0.0


cdef inline void a_eval(int code, const double* par, const double* x, int N,
                        double* out) noexcept nogil:
    cdef int d
    if code == A_ZERO:
        for d in range(N):
            out[d] = 0.0
    elif code == A_CONSTANT:
        for d in range(N):
            out[d] = par[d]
    elif code == A_ROTATIONAL:
        out[0] = -0.5 * par[0] * x[1]
        out[1] = 0.5 * par[0] * x[0]
        if N == 3:
            out[2] = 0.0
    elif code == A_GRADIENT:
        for d in range(N):
            out[d] = par[0] * x[d]
    else:
        for d in range(N):
            out[d] = 0.0


def bbm_partials(int fcode, double[::1] fpar, int acode, double[::1] apar,
                 double p, double[:, ::1] X,
                 double[::1] ux_re, double[::1] ux_im,
                 double[::1] h, double[::1] wq,
                 double[:, ::1] sig, double[::1] ws,
                 double[::1] out, Py_ssize_t i0, Py_ssize_t i1):
    """out[i] = sum_{j,k} |Psi_diff(x_i, h_j, sig_k)|_p^p wq_j ws_k, i in [i0, i1)."""
    cdef Py_ssize_t N = X.shape[1], nh = h.shape[0], ns = sig.shape[0]
    cdef Py_ssize_t i, j, k, d
    cdef double y[3]
    cdef double mm[3]
    cdef double av[3]
    cdef double acc, inner, hj, wqj, ph, c, s, uyr, uyi, wr, wi, q, uxr, uxi
    cdef bint p_is_two = (p == 2.0)
    cdef const double* fp = &fpar[0]
    cdef const double* ap = NULL
    if apar.shape[0] > 0:
        ap = &apar[0]
    with nogil:
        for i in range(i0, i1):
            uxr = ux_re[i]
            uxi = ux_im[i]
            acc = 0.0
            for j in range(nh):
                wqj = wq[j]
                if wqj == 0.0:
                    continue
                hj = h[j]
                inner = 0.0
                for k in range(ns):
                    for d in range(N):
                        y[d] = X[i, d] + hj * sig[k, d]
                        mm[d] = X[i, d] + 0.5 * hj * sig[k, d]
                    f_eval(fcode, fp, y, N, &uyr, &uyi)
                    if acode == A_ZERO:
                        wr = uyr - uxr
                        wi = uyi - uxi
                    else:
                        a_eval(acode, ap, mm, N, av)
                        ph = 0.0
                        for d in range(N):
                            ph -= hj * sig[k, d] * av[d]
                        if ph == 0.0:
                            wr = uyr - uxr
                            wi = uyi - uxi
                        else:
                            c = cos(ph)
                            s = sin(ph)
                            wr = c * uyr - s * uyi - uxr
                            wi = s * uyr + c * uyi - uxi
                    if p_is_two:
                        q = wr * wr + wi * wi
                    else:
                        q = pow(fabs(wr), p) + pow(fabs(wi), p)
                    inner += q * ws[k]
                acc += inner * wqj
            out[i] = acc


def jdelta_partials(int fcode, double[::1] fpar, int acode, double[::1] apar,
                    double p, double deltap, double[:, ::1] X,
                    double[::1] ux_re, double[::1] ux_im,
                    double[::1] h, double[::1] wj,
                    double[:, ::1] sig, double[::1] ws,
                    double[::1] out, Py_ssize_t i0, Py_ssize_t i1):
    """out[i] = sum_{j,k} 1{|Psi_diff|_p^p > deltap} wj_j ws_k, i in [i0, i1)."""
    cdef Py_ssize_t N = X.shape[1], nh = h.shape[0], ns = sig.shape[0]
    cdef Py_ssize_t i, j, k, d
    cdef double y[3]
    cdef double mm[3]
    cdef double av[3]
    cdef double acc, inner, hj, wjj, ph, c, s, uyr, uyi, wr, wi, q, uxr, uxi
    cdef bint p_is_two = (p == 2.0)
    cdef const double* fp = &fpar[0]
    cdef const double* ap = NULL
    if apar.shape[0] > 0:
        ap = &apar[0]
    with nogil:
        for i in range(i0, i1):
            uxr = ux_re[i]
            uxi = ux_im[i]
            acc = 0.0
            for j in range(nh):
                wjj = wj[j]
                if wjj == 0.0:
                    continue
                hj = h[j]
                inner = 0.0
                for k in range(ns):
                    for d in range(N):
                        y[d] = X[i, d] + hj * sig[k, d]
                        mm[d] = X[i, d] + 0.5 * hj * sig[k, d]
                    f_eval(fcode, fp, y, N, &uyr, &uyi)
                    if acode == A_ZERO:
                        wr = uyr - uxr
                        wi = uyi - uxi
                    else:
                        a_eval(acode, ap, mm, N, av)
                        ph = 0.0
                        for d in range(N):
                            ph -= hj * sig[k, d] * av[d]
                        if ph == 0.0:
                            wr = uyr - uxr
                            wi = uyi - uxi
                        else:
                            c = cos(ph)
                            s = sin(ph)
                            wr = c * uyr - s * uyi - uxr
                            wi = s * uyr + c * uyi - uxi
                    if p_is_two:
                        q = wr * wr + wi * wi
                    else:
                        q = pow(fabs(wr), p) + pow(fabs(wi), p)
                    if q > deltap:
                        inner += ws[k]
                acc += inner * wjj
            out[i] = acc
