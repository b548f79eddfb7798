"""Pure-Python / numpy kernels; the fallback for ``closure._kernels``.

Every floating-point expression here is evaluated in the same order as the
Cython version, so both backends return identical bits for margins and the
miniball support search.
"""

from __future__ import annotations

import math

import numpy as np

CHUNK = 4096


def _min_slack(slack: np.ndarray):
    idx = np.argmin(slack, axis=1)
    return slack[np.arange(len(slack)), idx], idx.astype(np.int64)


def _chunks(B: int):
    for s in range(0, B, CHUNK):
        yield s, min(B, s + CHUNK)


def _transform(R, t, P):
    # (B,1,.) x (1,N,.) -> camera/world points (B,N,3), fixed summation order
    out = []
    for k in range(3):
        v = (R[:, None, k, 0] * P[None, :, 0] + R[:, None, k, 1] * P[None, :, 1]) + R[
            :, None, k, 2
        ] * P[None, :, 2]
        out.append(v + t[:, None, k])
    return out


def margins_3d3d(R, t, a, b, U, beta, identity):
    B, N = len(R), len(a)
    margin = np.empty(B)
    index = np.zeros(B, dtype=np.int64)
    if N == 0:
        margin[:] = np.inf
        return margin, index
    for s, e in _chunks(B):
        p = _transform(R[s:e], t[s:e], a)
        r = [b[None, :, k] - p[k] for k in range(3)]
        if identity:
            q = r
        else:
            q = [(U[None, :, k, 0] * r[0] + U[None, :, k, 1] * r[1]) + U[None, :, k, 2] * r[2] for k in range(3)]
        n = np.sqrt((q[0] * q[0] + q[1] * q[1]) + q[2] * q[2])
        margin[s:e], index[s:e] = _min_slack(beta[None, :] - n)
    return margin, index


def margins_2d3d(R, t, z, Z, U, beta, identity, depth_floor):
    B, N = len(R), len(Z)
    margin = np.empty(B)
    index = np.zeros(B, dtype=np.int64)
    if N == 0:
        margin[:] = np.inf
        return margin, index
    sentinel = -float(np.min(beta)) - 1.0
    for s, e in _chunks(B):
        v = _transform(R[s:e], t[s:e], Z)
        behind = v[2] <= depth_floor
        depth = np.where(behind, 1.0, v[2])
        r0 = z[None, :, 0] - v[0] / depth
        r1 = z[None, :, 1] - v[1] / depth
        if identity:
            q0, q1 = r0, r1
        else:
            q0 = U[None, :, 0, 0] * r0 + U[None, :, 0, 1] * r1
            q1 = U[None, :, 1, 0] * r0 + U[None, :, 1, 1] * r1
        n = np.sqrt(q0 * q0 + q1 * q1)
        slack = np.where(behind, sentinel, beta[None, :] - n)
        margin[s:e], index[s:e] = _min_slack(slack)
    return margin, index


def margins_reg(R, t, Rh, th, UR, bR, Ut, bt, identity):
    B, N = len(R), len(Rh)
    margin = np.empty(B)
    index = np.zeros(B, dtype=np.int64)
    if N == 0:
        margin[:] = np.inf
        return margin, index
    Rf = R.reshape(B, 9)
    Hf = Rh.reshape(N, 9)
    for s, e in _chunks(B):
        r = [Rf[s:e, None, q] - Hf[None, :, q] for q in range(9)]
        if identity:
            qv = r
        else:
            qv = []
            for k in range(9):
                acc = UR[None, :, k, 0] * r[0]
                for q in range(1, 9):
                    acc = acc + UR[None, :, k, q] * r[q]
                qv.append(acc)
        n2 = qv[0] * qv[0]
        for q in range(1, 9):
            n2 = n2 + qv[q] * qv[q]
        sr = (bR[None, :] - np.sqrt(n2)) / bR[None, :]

        rt = [t[s:e, None, k] - th[None, :, k] for k in range(3)]
        if identity:
            qt = rt
        else:
            qt = [(Ut[None, :, k, 0] * rt[0] + Ut[None, :, k, 1] * rt[1]) + Ut[None, :, k, 2] * rt[2] for k in range(3)]
        nt = np.sqrt((qt[0] * qt[0] + qt[1] * qt[1]) + qt[2] * qt[2])
        st = (bt[None, :] - nt) / bt[None, :]

        slack = np.empty((e - s, 2 * N))
        slack[:, 0::2] = sr
        slack[:, 1::2] = st
        margin[s:e], index[s:e] = _min_slack(slack)
    return margin, index


# -- miniball ----------------------------------------------------------------


def _ball_through(P, support, d):
    """Smallest sphere with every support point on it (circumsphere in the affine hull).

    Returns (center list, squared radius); the empty support gives radius^2 = -1.
    Affinely dependent supports return ``None``.
    """
    k = len(support)
    if k == 0:
        return [0.0] * d, -1.0
    q0 = P[support[0]]
    if k == 1:
        return list(q0), 0.0
    m = k - 1
    V = [[P[support[j + 1]][c] - q0[c] for c in range(d)] for j in range(m)]
    A = [[0.0] * (m + 1) for _ in range(m)]
    for i in range(m):
        for j in range(m):
            s = 0.0
            for c in range(d):
                s += V[i][c] * V[j][c]
            A[i][j] = 2.0 * s
        s = 0.0
        for c in range(d):
            s += V[i][c] * V[i][c]
        A[i][m] = s
    scale = 0.0
    for i in range(m):
        scale = max(scale, abs(A[i][i]))
    # Gaussian elimination with partial pivoting
    for col in range(m):
        piv = col
        best = abs(A[col][col])
        for r in range(col + 1, m):
            if abs(A[r][col]) > best:
                best = abs(A[r][col])
                piv = r
        if best <= 1e-13 * scale or best == 0.0:
            return None
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
        for r in range(col + 1, m):
            f = A[r][col] / A[col][col]
            for c2 in range(col, m + 1):
                A[r][c2] -= f * A[col][c2]
    lam = [0.0] * m
    for i in range(m - 1, -1, -1):
        s = A[i][m]
        for j in range(i + 1, m):
            s -= A[i][j] * lam[j]
        lam[i] = s / A[i][i]
    center = list(q0)
    for j in range(m):
        for c in range(d):
            center[c] += lam[j] * V[j][c]
    r2 = 0.0
    for c in range(d):
        diff = center[c] - q0[c]
        r2 += diff * diff
    return center, r2


def _dist2(p, c, d):
    s = 0.0
    for i in range(d):
        diff = p[i] - c[i]
        s += diff * diff
    return s


def _outside(p, center, r2, d):
    if r2 < 0.0:
        return True
    r = math.sqrt(r2)
    lim = r + 1e-10 * (1.0 + r)
    return _dist2(p, center, d) > lim * lim


def miniball_support(points):
    """Move-to-front Welzl search.

    Returns ``(center, radius_squared, support_indices)``. Points are visited in
    the given order; callers that need order invariance canonicalize the
    support afterwards.
    """
    P = [list(map(float, row)) for row in np.asarray(points, dtype=float)]
    n = len(P)
    d = len(P[0]) if n else 0
    order = list(range(n))
    state = {"center": [0.0] * d, "r2": -1.0, "support": []}

    def mtf(end, support):
        res = _ball_through(P, support, d)
        if res is None:
            return False
        center, r2 = res
        state["center"], state["r2"], state["support"] = center, r2, list(support)
        if len(support) == d + 1:
            return True
        i = 0
        while i < end:
            p = order[i]
            if _outside(P[p], state["center"], state["r2"], d):
                saved = (state["center"], state["r2"], state["support"])
                if not mtf(i, support + [p]):
                    # dependent support: keep the previous ball and move on
                    state["center"], state["r2"], state["support"] = saved
                    i += 1
                    continue
                order.pop(i)
                order.insert(0, p)
            i += 1
        return True

    mtf(n, [])
    return np.array(state["center"]), state["r2"], list(state["support"])
