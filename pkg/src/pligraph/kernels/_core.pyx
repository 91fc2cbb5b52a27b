# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled gated-attention block kernels.

Mirrors kernels._pure exactly: fused forward and hand-derived backward for
one block. Matrix products go through BLAS (scipy's exported dgemm); the
softmax, gating, and elementwise plumbing run as C loops, so one block
costs a single Python call instead of ~15 numpy dispatches. All arrays are
C-contiguous float64; the mask is uint8.
"""

import numpy as np

from libc.math cimport exp as c_exp, INFINITY
from scipy.linalg.cython_blas cimport dgemm


# Row-major helpers on top of Fortran-order dgemm: a row-major (r, c) array
# is the column-major transpose, so C = A @ B becomes C^T = B^T A^T.

cdef void _mm(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c,
              double beta) noexcept nogil:
    # c = a @ b (+ beta * c); a: (m, k), b: (k, n), c: (m, n)
    cdef int m = <int> a.shape[0], k = <int> a.shape[1], n = <int> b.shape[1]
    cdef double alpha = 1.0
    if m == 0 or n == 0 or k == 0:
        return
    dgemm(b"N", b"N", &n, &m, &k, &alpha, &b[0, 0], &n,
          &a[0, 0], &k, &beta, &c[0, 0], &n)


cdef void _mm_bt(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c,
                 double beta) noexcept nogil:
    # c = a @ b.T (+ beta * c); a: (m, k), b: (n, k), c: (m, n)
    cdef int m = <int> a.shape[0], k = <int> a.shape[1], n = <int> b.shape[0]
    cdef double alpha = 1.0
    if m == 0 or n == 0 or k == 0:
        return
    dgemm(b"T", b"N", &n, &m, &k, &alpha, &b[0, 0], &k,
          &a[0, 0], &k, &beta, &c[0, 0], &n)


cdef void _mm_at(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c,
                 double beta) noexcept nogil:
    # c = a.T @ b (+ beta * c); a: (p, m), b: (p, n), c: (m, n)
    cdef int p = <int> a.shape[0], m = <int> a.shape[1], n = <int> b.shape[1]
    cdef double alpha = 1.0
    if m == 0 or n == 0 or p == 0:
        return
    dgemm(b"N", b"T", &n, &m, &p, &alpha, &b[0, 0], &n,
          &a[0, 0], &m, &beta, &c[0, 0], &n)


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + c_exp(-x))
    e = c_exp(x)
    return e / (1.0 + e)


def block_forward(object h_arr, object a_arr, object mask_arr,
                  object wt_arr, object wa_arr, object u_arr, double b):
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] A = a_arr
    cdef unsigned char[:, ::1] mask = mask_arr
    cdef double[:, ::1] Wt = wt_arr
    cdef double[:, ::1] Wa = wa_arr
    cdef double[:, ::1] U = u_arr
    cdef Py_ssize_t n = h.shape[0], d = h.shape[1]
    cdef Py_ssize_t i, j, k

    z_arr = np.empty((n, d))
    zw_arr = np.empty((n, d))
    e_arr = np.empty((n, n))
    s_arr = np.empty((n, n))
    at_arr = np.empty((n, n))
    t_arr = np.empty((n, d))
    h2_arr = np.empty((n, d))
    gate_arr = np.empty((n, 1))
    out_arr = np.empty((n, d))

    cdef double[:, ::1] z = z_arr, zw = zw_arr, e = e_arr, s = s_arr
    cdef double[:, ::1] a = at_arr, t = t_arr, h2 = h2_arr
    cdef double[:, ::1] gate = gate_arr, out = out_arr
    cdef double m, tot, v, q, g

    _mm(h, Wt, z, 0.0)
    _mm(z, Wa, zw, 0.0)
    _mm_bt(zw, z, e, 0.0)           # e holds z Wa z^T for now
    for i in range(n):
        for j in range(i + 1, n):
            v = e[i, j] + e[j, i]   # symmetrize in place
            e[i, j] = v
            e[j, i] = v
        e[i, i] = 2.0 * e[i, i]

    for i in range(n):
        m = -INFINITY
        for j in range(n):
            if mask[i, j] and e[i, j] > m:
                m = e[i, j]
        if m == -INFINITY:
            for j in range(n):
                s[i, j] = 0.0
            continue
        tot = 0.0
        for j in range(n):
            if mask[i, j]:
                v = c_exp(e[i, j] - m)
                s[i, j] = v
                tot += v
            else:
                s[i, j] = 0.0
        for j in range(n):
            s[i, j] /= tot

    for i in range(n):
        for j in range(n):
            a[i, j] = s[i, j] * A[i, j]
    _mm(a, z, t, 0.0)
    for i in range(n):
        for k in range(d):
            h2[i, k] = t[i, k] if t[i, k] > 0.0 else 0.0

    for i in range(n):
        q = b
        for k in range(d):
            q += h[i, k] * U[k, 0] + h2[i, k] * U[d + k, 0]
        g = _sigmoid(q)
        gate[i, 0] = g
        for k in range(d):
            out[i, k] = g * h[i, k] + (1.0 - g) * h2[i, k]

    ctx = (h_arr, a_arr, wt_arr, wa_arr, u_arr,
           z_arr, s_arr, at_arr, t_arr, h2_arr, gate_arr)
    return out_arr, ctx


def block_backward(tuple ctx, object g_out_arr):
    h_arr, a_full_arr, wt_arr, wa_arr, u_arr, z_arr, s_arr, at_arr, t_arr, h2_arr, gate_arr = ctx
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] A = a_full_arr
    cdef double[:, ::1] Wt = wt_arr
    cdef double[:, ::1] Wa = wa_arr
    cdef double[:, ::1] U = u_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] s = s_arr
    cdef double[:, ::1] a = at_arr
    cdef double[:, ::1] t = t_arr
    cdef double[:, ::1] h2 = h2_arr
    cdef double[:, ::1] gate = gate_arr
    cdef double[:, ::1] G = g_out_arr
    cdef Py_ssize_t n = h.shape[0], d = h.shape[1]
    cdef Py_ssize_t i, j, k

    gh_arr = np.empty((n, d))
    gh2_arr = np.empty((n, d))
    gq_arr = np.empty((n, 1))
    gu_arr = np.zeros((2 * d, 1))
    gb_arr = np.zeros((1, 1))
    p_arr = np.empty((n, d))
    ga_arr = np.empty((n, n))
    gz_arr = np.empty((n, d))
    gs_arr = np.empty((n, n))
    gA_arr = np.empty((n, n))
    ge_arr = np.empty((n, n))
    gS_arr = np.empty((n, n))
    gwa_arr = np.empty((d, d))
    gwt_arr = np.empty((d, d))
    tmp_nd_arr = np.empty((n, d))

    cdef double[:, ::1] gh = gh_arr, gh2 = gh2_arr, gq = gq_arr
    cdef double[:, ::1] gU = gu_arr, gb = gb_arr, p = p_arr
    cdef double[:, ::1] ga = ga_arr, gz = gz_arr, gs = gs_arr
    cdef double[:, ::1] gA = gA_arr, ge = ge_arr, gS = gS_arr
    cdef double[:, ::1] gWa = gwa_arr, gWt = gwt_arr
    cdef double[:, ::1] tmp_nd = tmp_nd_arr
    cdef double acc, g, dot

    for i in range(n):
        acc = 0.0
        g = gate[i, 0]
        for k in range(d):
            acc += G[i, k] * (h[i, k] - h2[i, k])
        gq[i, 0] = acc * g * (1.0 - g)
        for k in range(d):
            gh[i, k] = G[i, k] * g + gq[i, 0] * U[k, 0]
            gh2[i, k] = G[i, k] * (1.0 - g) + gq[i, 0] * U[d + k, 0]

    for i in range(n):
        gb[0, 0] += gq[i, 0]
        for k in range(d):
            gU[k, 0] += h[i, k] * gq[i, 0]
            gU[d + k, 0] += h2[i, k] * gq[i, 0]

    for i in range(n):
        for k in range(d):
            p[i, k] = gh2[i, k] if t[i, k] > 0.0 else 0.0

    _mm_bt(p, z, ga, 0.0)       # ga = p @ z.T
    _mm_at(a, p, gz, 0.0)       # gz = a.T @ p

    for i in range(n):
        for j in range(n):
            gs[i, j] = ga[i, j] * A[i, j]
            gA[i, j] = ga[i, j] * s[i, j]

    for i in range(n):
        dot = 0.0
        for j in range(n):
            dot += gs[i, j] * s[i, j]
        for j in range(n):
            ge[i, j] = s[i, j] * (gs[i, j] - dot)
    for i in range(n):
        for j in range(n):
            gS[i, j] = ge[i, j] + ge[j, i]

    _mm(gS, z, tmp_nd, 0.0)         # tmp = gS @ z
    _mm_at(z, tmp_nd, gWa, 0.0)     # gWa = z.T @ tmp

    _mm_bt(z, Wa, tmp_nd, 0.0)      # tmp = z @ Wa.T
    _mm(gS, tmp_nd, gz, 1.0)        # gz += gS @ tmp
    _mm(z, Wa, tmp_nd, 0.0)         # tmp = z @ Wa
    _mm_at(gS, tmp_nd, gz, 1.0)     # gz += gS.T @ tmp

    _mm_bt(gz, Wt, gh, 1.0)         # gh += gz @ Wt.T
    _mm_at(h, gz, gWt, 0.0)         # gWt = h.T @ gz

    return gh_arr, gA_arr, gwt_arr, gwa_arr, gu_arr, gb_arr
