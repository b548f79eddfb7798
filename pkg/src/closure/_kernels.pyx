# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: batched PURSE margins and the move-to-front miniball.

Mirrors ``closure._kernels_py`` operation for operation; the two backends are
expected to agree bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


def margins_3d3d(const double[:, :, ::1] R, const double[:, ::1] t, const double[:, ::1] a,
                 const double[:, ::1] b, const double[:, :, ::1] U, const double[::1] beta,
                 bint identity):
    cdef Py_ssize_t B = R.shape[0], N = a.shape[0], n, i, k
    margin_arr = np.empty(B)
    index_arr = np.zeros(B, dtype=np.int64)
    cdef double[::1] margin = margin_arr
    cdef cnp.int64_t[::1] index = index_arr
    cdef double p[3]
    cdef double r[3]
    cdef double q[3]
    cdef double nrm, slack, best
    cdef Py_ssize_t besti
    if N == 0:
        margin_arr[:] = np.inf
        return margin_arr, index_arr
    with nogil:
        for n in range(B):
            best = 0.0
            besti = -1
            for i in range(N):
                for k in range(3):
                    p[k] = ((R[n, k, 0] * a[i, 0] + R[n, k, 1] * a[i, 1]) + R[n, k, 2] * a[i, 2]) + t[n, k]
                    r[k] = b[i, k] - p[k]
                if identity:
                    q[0] = r[0]; q[1] = r[1]; q[2] = r[2]
                else:
                    for k in range(3):
                        q[k] = (U[i, k, 0] * r[0] + U[i, k, 1] * r[1]) + U[i, k, 2] * r[2]
                nrm = sqrt((q[0] * q[0] + q[1] * q[1]) + q[2] * q[2])
                slack = beta[i] - nrm
                if besti < 0 or slack < best:
                    best = slack
                    besti = i
            margin[n] = best
            index[n] = besti
    return margin_arr, index_arr


def margins_2d3d(const double[:, :, ::1] R, const double[:, ::1] t, const double[:, ::1] z,
                 const double[:, ::1] Z, const double[:, :, ::1] U, const double[::1] beta,
                 bint identity, double depth_floor):
    cdef Py_ssize_t B = R.shape[0], N = Z.shape[0], n, i, k
    margin_arr = np.empty(B)
    index_arr = np.zeros(B, dtype=np.int64)
    cdef double[::1] margin = margin_arr
    cdef cnp.int64_t[::1] index = index_arr
    cdef double v[3]
    cdef double r0, r1, q0, q1, nrm, slack, best, sentinel
    cdef Py_ssize_t besti
    if N == 0:
        margin_arr[:] = np.inf
        return margin_arr, index_arr
    sentinel = beta[0]
    for i in range(N):
        if beta[i] < sentinel:
            sentinel = beta[i]
    sentinel = -sentinel - 1.0
    with nogil:
        for n in range(B):
            best = 0.0
            besti = -1
            for i in range(N):
                for k in range(3):
                    v[k] = ((R[n, k, 0] * Z[i, 0] + R[n, k, 1] * Z[i, 1]) + R[n, k, 2] * Z[i, 2]) + t[n, k]
                if v[2] <= depth_floor:
                    slack = sentinel
                else:
                    r0 = z[i, 0] - v[0] / v[2]
                    r1 = z[i, 1] - v[1] / v[2]
                    if identity:
                        q0 = r0; q1 = r1
                    else:
                        q0 = U[i, 0, 0] * r0 + U[i, 0, 1] * r1
                        q1 = U[i, 1, 0] * r0 + U[i, 1, 1] * r1
                    nrm = sqrt(q0 * q0 + q1 * q1)
                    slack = beta[i] - nrm
                if besti < 0 or slack < best:
                    best = slack
                    besti = i
            margin[n] = best
            index[n] = besti
    return margin_arr, index_arr


def margins_reg(const double[:, :, ::1] R, const double[:, ::1] t, const double[:, :, ::1] Rh,
                const double[:, ::1] th, const double[:, :, ::1] UR, const double[::1] bR,
                const double[:, :, ::1] Ut, const double[::1] bt, bint identity):
    cdef Py_ssize_t B = R.shape[0], N = Rh.shape[0], n, i, k, q
    margin_arr = np.empty(B)
    index_arr = np.zeros(B, dtype=np.int64)
    cdef double[::1] margin = margin_arr
    cdef cnp.int64_t[::1] index = index_arr
    cdef double r[9]
    cdef double e[9]
    cdef double rt[3]
    cdef double et[3]
    cdef double acc, n2, sr, st, best
    cdef Py_ssize_t besti
    if N == 0:
        margin_arr[:] = np.inf
        return margin_arr, index_arr
    with nogil:
        for n in range(B):
            best = 0.0
            besti = -1
            for i in range(N):
                for q in range(9):
                    r[q] = R[n, q // 3, q % 3] - Rh[i, q // 3, q % 3]
                if identity:
                    for q in range(9):
                        e[q] = r[q]
                else:
                    for k in range(9):
                        acc = UR[i, k, 0] * r[0]
                        for q in range(1, 9):
                            acc = acc + UR[i, k, q] * r[q]
                        e[k] = acc
                n2 = e[0] * e[0]
                for q in range(1, 9):
                    n2 = n2 + e[q] * e[q]
                sr = (bR[i] - sqrt(n2)) / bR[i]

                for k in range(3):
                    rt[k] = t[n, k] - th[i, k]
                if identity:
                    et[0] = rt[0]; et[1] = rt[1]; et[2] = rt[2]
                else:
                    for k in range(3):
                        et[k] = (Ut[i, k, 0] * rt[0] + Ut[i, k, 1] * rt[1]) + Ut[i, k, 2] * rt[2]
                st = (bt[i] - sqrt((et[0] * et[0] + et[1] * et[1]) + et[2] * et[2])) / bt[i]

                if besti < 0 or sr < best:
                    best = sr
                    besti = 2 * i
                if st < best:
                    best = st
                    besti = 2 * i + 1
            margin[n] = best
            index[n] = besti
    return margin_arr, index_arr


# -- miniball ----------------------------------------------------------------

cdef struct MBState:
    Py_ssize_t n
    Py_ssize_t d
    double* P          # n x d
    Py_ssize_t* order
    double* center     # d
    double r2
    Py_ssize_t* support
    Py_ssize_t nsupport
    double* work       # scratch: (d+1) x (d+2) matrix + d*(d+1) vectors


cdef bint ball_through(MBState* s, Py_ssize_t* sup, Py_ssize_t k, double* center, double* r2) noexcept nogil:
    cdef Py_ssize_t d = s.d, m, i, j, c, col, piv, rr, c2
    cdef double* q0
    cdef double* V
    cdef double* A
    cdef double* lam
    cdef double sm, scale, best, f, tmp, diff
    if k == 0:
        for c in range(d):
            center[c] = 0.0
        r2[0] = -1.0
        return True
    q0 = s.P + sup[0] * d
    if k == 1:
        for c in range(d):
            center[c] = q0[c]
        r2[0] = 0.0
        return True
    m = k - 1
    V = s.work
    A = V + m * d
    lam = A + m * (m + 1)
    for j in range(m):
        for c in range(d):
            V[j * d + c] = s.P[sup[j + 1] * d + c] - q0[c]
    for i in range(m):
        for j in range(m):
            sm = 0.0
            for c in range(d):
                sm += V[i * d + c] * V[j * d + c]
            A[i * (m + 1) + j] = 2.0 * sm
        sm = 0.0
        for c in range(d):
            sm += V[i * d + c] * V[i * d + c]
        A[i * (m + 1) + m] = sm
    scale = 0.0
    for i in range(m):
        if fabs(A[i * (m + 1) + i]) > scale:
            scale = fabs(A[i * (m + 1) + i])
    for col in range(m):
        piv = col
        best = fabs(A[col * (m + 1) + col])
        for rr in range(col + 1, m):
            if fabs(A[rr * (m + 1) + col]) > best:
                best = fabs(A[rr * (m + 1) + col])
                piv = rr
        if best <= 1e-13 * scale or best == 0.0:
            return False
        if piv != col:
            for c2 in range(m + 1):
                tmp = A[col * (m + 1) + c2]
                A[col * (m + 1) + c2] = A[piv * (m + 1) + c2]
                A[piv * (m + 1) + c2] = tmp
        for rr in range(col + 1, m):
            f = A[rr * (m + 1) + col] / A[col * (m + 1) + col]
            for c2 in range(col, m + 1):
                A[rr * (m + 1) + c2] -= f * A[col * (m + 1) + c2]
    for i in range(m - 1, -1, -1):
        sm = A[i * (m + 1) + m]
        for j in range(i + 1, m):
            sm -= A[i * (m + 1) + j] * lam[j]
        lam[i] = sm / A[i * (m + 1) + i]
    for c in range(d):
        center[c] = q0[c]
    for j in range(m):
        for c in range(d):
            center[c] += lam[j] * V[j * d + c]
    sm = 0.0
    for c in range(d):
        diff = center[c] - q0[c]
        sm += diff * diff
    r2[0] = sm
    return True


cdef bint outside(MBState* s, Py_ssize_t p) noexcept nogil:
    cdef double r, lim, sm, diff
    cdef Py_ssize_t c
    if s.r2 < 0.0:
        return True
    r = sqrt(s.r2)
    lim = r + 1e-10 * (1.0 + r)
    sm = 0.0
    for c in range(s.d):
        diff = s.P[p * s.d + c] - s.center[c]
        sm += diff * diff
    return sm > lim * lim


cdef bint mtf(MBState* s, Py_ssize_t end, Py_ssize_t* sup, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t d = s.d, i, p, c, j
    cdef double* saved_center
    cdef double saved_r2
    cdef Py_ssize_t saved_ns
    cdef Py_ssize_t* saved_sup
    if not ball_through(s, sup, k, s.center, &s.r2):
        return False
    for j in range(k):
        s.support[j] = sup[j]
    s.nsupport = k
    if k == d + 1:
        return True
    saved_center = <double*> malloc(d * sizeof(double))
    saved_sup = <Py_ssize_t*> malloc((d + 1) * sizeof(Py_ssize_t))
    i = 0
    while i < end:
        p = s.order[i]
        if outside(s, p):
            for c in range(d):
                saved_center[c] = s.center[c]
            saved_r2 = s.r2
            saved_ns = s.nsupport
            for j in range(saved_ns):
                saved_sup[j] = s.support[j]
            sup[k] = p
            if not mtf(s, i, sup, k + 1):
                for c in range(d):
                    s.center[c] = saved_center[c]
                s.r2 = saved_r2
                s.nsupport = saved_ns
                for j in range(saved_ns):
                    s.support[j] = saved_sup[j]
                i += 1
                continue
            for j in range(i, 0, -1):
                s.order[j] = s.order[j - 1]
            s.order[0] = p
        i += 1
    free(saved_center)
    free(saved_sup)
    return True


def miniball_support(points):
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], d = P.shape[1] if P.shape[0] else 0, i
    cdef MBState s
    cdef Py_ssize_t* sup
    if n == 0:
        return np.zeros(0), -1.0, []
    s.n = n
    s.d = d
    s.P = &P[0, 0]
    s.order = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    s.center = <double*> malloc(d * sizeof(double))
    s.support = <Py_ssize_t*> malloc((d + 1) * sizeof(Py_ssize_t))
    s.work = <double*> malloc(((d + 1) * d + (d + 1) * (d + 2) + d + 2) * sizeof(double))
    sup = <Py_ssize_t*> malloc((d + 2) * sizeof(Py_ssize_t))
    try:
        for i in range(n):
            s.order[i] = i
        for i in range(d):
            s.center[i] = 0.0
        s.r2 = -1.0
        s.nsupport = 0
        with nogil:
            mtf(&s, n, sup, 0)
        center = np.array([s.center[i] for i in range(d)])
        support = [int(s.support[i]) for i in range(s.nsupport)]
        return center, s.r2, support
    finally:
        free(s.order)
        free(s.center)
        free(s.support)
        free(s.work)
        free(sup)
