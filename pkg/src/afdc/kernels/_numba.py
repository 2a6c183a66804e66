"""numba-compiled kernels mirroring ``_numpy``.

Loops without reductions replicate the numpy arithmetic exactly; the
``fastmath`` kernels may reorder sums for vectorization.
"""
import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi


@njit(cache=True)
def im2col3x3(x):
    n, c, h, w = x.shape
    cols = np.zeros((n, c * 9, h * w))
    for s in range(n):
        for ch in range(c):
            for m in range(3):
                for k in range(3):
                    row = ch * 9 + 3 * m + k
                    i_lo = max(0, 1 - m)
                    i_hi = min(h, h + 1 - m)
                    j_lo = max(0, 1 - k)
                    j_hi = min(w, w + 1 - k)
                    for i in range(i_lo, i_hi):
                        base = i * w
                        si = i + m - 1
                        for j in range(j_lo, j_hi):
                            cols[s, row, base + j] = x[s, ch, si, j + k - 1]
    return cols


@njit(cache=True)
def col2im3x3(cols, h, w):
    n, ck, _ = cols.shape
    c = ck // 9
    xp = np.zeros((n, c, h + 2, w + 2))
    for s in range(n):
        for ch in range(c):
            for m in range(3):
                for k in range(3):
                    row = ch * 9 + 3 * m + k
                    for i in range(h):
                        base = i * w
                        for j in range(w):
                            xp[s, ch, i + m, j + k] += cols[s, row, base + j]
    return np.ascontiguousarray(xp[:, :, 1:h + 1, 1:w + 1])


@njit(cache=True)
def maxpool2x2_fwd(x):
    n, c, h, w = x.shape
    h2 = h // 2
    w2 = w // 2
    y = np.empty((n, c, h2, w2))
    idx = np.empty((n, c, h2, w2), dtype=np.int8)
    for s in range(n):
        for ch in range(c):
            for i in range(h2):
                for j in range(w2):
                    best = x[s, ch, 2 * i, 2 * j]
                    arg = 0
                    for q in range(1, 4):
                        v = x[s, ch, 2 * i + q // 2, 2 * j + q % 2]
                        if v > best:
                            best = v
                            arg = q
                    y[s, ch, i, j] = best
                    idx[s, ch, i, j] = arg
    return y, idx


@njit(cache=True)
def maxpool2x2_bwd(dy, idx):
    n, c, h2, w2 = dy.shape
    dx = np.empty((n, c, 2 * h2, 2 * w2))
    for s in range(n):
        for ch in range(c):
            for i in range(h2):
                for j in range(w2):
                    q = idx[s, ch, i, j]
                    g = dy[s, ch, i, j]
                    dx[s, ch, 2 * i, 2 * j] = g if q == 0 else 0.0
                    dx[s, ch, 2 * i, 2 * j + 1] = g if q == 1 else 0.0
                    dx[s, ch, 2 * i + 1, 2 * j] = g if q == 2 else 0.0
                    dx[s, ch, 2 * i + 1, 2 * j + 1] = g if q == 3 else 0.0
    return dx


@njit(cache=True)
def points_in_polygon(px, py, poly, edge_tol):
    m = px.shape[0]
    k = poly.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    for p in range(m):
        x = px[p]
        y = py[p]
        inside = False
        on_edge = False
        for e in range(k):
            ax = poly[e, 0]
            ay = poly[e, 1]
            bx = poly[(e + 1) % k, 0]
            by = poly[(e + 1) % k, 1]
            ex = bx - ax
            ey = by - ay
            seg2 = ex * ex + ey * ey
            if seg2 == 0.0:
                continue
            dx = x - ax
            dy = y - ay
            cross = ex * dy - ey * dx
            dot = ex * dx + ey * dy
            if abs(cross) <= edge_tol * math.sqrt(seg2) and dot >= 0.0 and dot <= seg2:
                on_edge = True
                break
            if (ay > y) != (by > y) and ey != 0.0:
                xint = ex * (y - ay) / ey + ax
                if x < xint:
                    inside = not inside
        out[p] = inside or on_edge
    return out


@njit(cache=True)
def vortex_influence(xc, yc, nx, ny, xv, yv, image):
    n = xc.shape[0]
    nv = xv.shape[0]
    a = np.empty((n, nv))
    for i in range(n):
        for j in range(nv):
            dx = xc[i] - xv[j]
            dy = yc[i] - yv[j]
            r2 = dx * dx + dy * dy
            u = dy / (TWO_PI * r2)
            v = -dx / (TWO_PI * r2)
            val = u * nx[i] + v * ny[i]
            if image:
                dyi = yc[i] + yv[j]
                r2i = dx * dx + dyi * dyi
                ui = -dyi / (TWO_PI * r2i)
                vi = dx / (TWO_PI * r2i)
                val = val + (ui * nx[i] + vi * ny[i])
            a[i, j] = val
    return a


@njit(cache=True, fastmath=True)
def conv3x3_fwd(x, w, b):
    n, c, h, wd = x.shape
    co = w.shape[0]
    y = np.empty((n, co, h, wd))
    xp = np.zeros((c, h + 2, wd + 2))
    for s in range(n):
        for ch in range(c):
            for i in range(h):
                for j in range(wd):
                    xp[ch, i + 1, j + 1] = x[s, ch, i, j]
        for o in range(co):
            for i in range(h):
                row = y[s, o, i]
                for j in range(wd):
                    row[j] = b[o]
                for ch in range(c):
                    for m in range(3):
                        xr = xp[ch, i + m]
                        w0 = w[o, ch, m, 0]
                        w1 = w[o, ch, m, 1]
                        w2 = w[o, ch, m, 2]
                        for j in range(wd):
                            row[j] += w0 * xr[j] + w1 * xr[j + 1] + w2 * xr[j + 2]
    return y


@njit(cache=True)
def conv3x3_bwd_input(dy, w):
    # correlation of dy with the channel-transposed, spatially flipped kernel
    co, c = w.shape[0], w.shape[1]
    wt = np.empty((c, co, 3, 3))
    for o in range(co):
        for ch in range(c):
            for m in range(3):
                for k in range(3):
                    wt[ch, o, 2 - m, 2 - k] = w[o, ch, m, k]
    return conv3x3_fwd(dy, wt, np.zeros(c))


@njit(cache=True, fastmath=True)
def conv3x3_bwd_weight(dy, x):
    n, co, h, wd = dy.shape
    c = x.shape[1]
    dw = np.zeros((co, c, 3, 3))
    xp = np.zeros((c, h + 2, wd + 2))
    for s in range(n):
        for ch in range(c):
            for i in range(h):
                for j in range(wd):
                    xp[ch, i + 1, j + 1] = x[s, ch, i, j]
        for o in range(co):
            for ch in range(c):
                for m in range(3):
                    a0 = 0.0
                    a1 = 0.0
                    a2 = 0.0
                    for i in range(h):
                        g = dy[s, o, i]
                        xr = xp[ch, i + m]
                        for j in range(wd):
                            gj = g[j]
                            a0 += gj * xr[j]
                            a1 += gj * xr[j + 1]
                            a2 += gj * xr[j + 2]
                    dw[o, ch, m, 0] += a0
                    dw[o, ch, m, 1] += a1
                    dw[o, ch, m, 2] += a2
    return dw


@njit(cache=True, fastmath=True)
def batchnorm_train_fwd(x, gamma, beta, eps):
    n, c, h, wd = x.shape
    cnt = n * h * wd
    y = np.empty_like(x)
    mean = np.empty(c)
    var = np.empty(c)
    for ch in range(c):
        acc = 0.0
        for s in range(n):
            for i in range(h):
                for j in range(wd):
                    acc += x[s, ch, i, j]
        mu = acc / cnt
        acc = 0.0
        for s in range(n):
            for i in range(h):
                for j in range(wd):
                    d = x[s, ch, i, j] - mu
                    acc += d * d
        va = acc / cnt
        scale = gamma[ch] / np.sqrt(va + eps)
        shift = beta[ch]
        for s in range(n):
            for i in range(h):
                for j in range(wd):
                    y[s, ch, i, j] = (x[s, ch, i, j] - mu) * scale + shift
        mean[ch] = mu
        var[ch] = va
    return y, mean, var


@njit(cache=True, fastmath=True)
def batchnorm_train_bwd(dy, x, mean, inv, gamma):
    n, c, h, wd = x.shape
    cnt = n * h * wd
    dx = np.empty_like(x)
    dgamma = np.empty(c)
    dbeta = np.empty(c)
    for ch in range(c):
        sb = 0.0
        sg = 0.0
        mu = mean[ch]
        iv = inv[ch]
        for s in range(n):
            for i in range(h):
                for j in range(wd):
                    g = dy[s, ch, i, j]
                    sb += g
                    sg += g * (x[s, ch, i, j] - mu) * iv
        k = gamma[ch] * iv / cnt
        for s in range(n):
            for i in range(h):
                for j in range(wd):
                    xh = (x[s, ch, i, j] - mu) * iv
                    dx[s, ch, i, j] = k * (cnt * dy[s, ch, i, j] - sb - xh * sg)
        dgamma[ch] = sg
        dbeta[ch] = sb
    return dx, dgamma, dbeta


@njit(cache=True)
def relu_maxpool2x2_fwd(x):
    y, idx = maxpool2x2_fwd(x)
    n, c, h2, w2 = y.shape
    for s in range(n):
        for ch in range(c):
            for i in range(h2):
                for j in range(w2):
                    if not y[s, ch, i, j] > 0.0:
                        y[s, ch, i, j] = 0.0
    return y, idx


@njit(cache=True)
def relu_maxpool2x2_bwd(dy, idx, x):
    dx = maxpool2x2_bwd(dy, idx)
    n, c, h2, w2 = dy.shape
    for s in range(n):
        for ch in range(c):
            for i in range(h2):
                for j in range(w2):
                    q = idx[s, ch, i, j]
                    r = 2 * i + q // 2
                    col = 2 * j + q % 2
                    if not x[s, ch, r, col] > 0.0:
                        dx[s, ch, r, col] = 0.0
    return dx


@njit(cache=True, fastmath=True)
def conv3x3_maxpool_relu(x, w, b):
    """relu(maxpool2x2(conv3x3(x))) without materializing the conv output."""
    n, c, h, wd = x.shape
    co = w.shape[0]
    h2 = h // 2
    w2 = wd // 2
    y = np.empty((n, co, h2, w2))
    xp = np.zeros((c, h + 2, wd + 2))
    r0 = np.empty(wd)
    r1 = np.empty(wd)
    for s in range(n):
        for ch in range(c):
            for i in range(h):
                for j in range(wd):
                    xp[ch, i + 1, j + 1] = x[s, ch, i, j]
        for o in range(co):
            for pi in range(h2):
                i = 2 * pi
                for j in range(wd):
                    r0[j] = b[o]
                    r1[j] = b[o]
                for ch in range(c):
                    for m in range(3):
                        w0 = w[o, ch, m, 0]
                        w1 = w[o, ch, m, 1]
                        w2_ = w[o, ch, m, 2]
                        xa = xp[ch, i + m]
                        xb = xp[ch, i + m + 1]
                        for j in range(wd):
                            r0[j] += w0 * xa[j] + w1 * xa[j + 1] + w2_ * xa[j + 2]
                            r1[j] += w0 * xb[j] + w1 * xb[j + 1] + w2_ * xb[j + 2]
                for pj in range(w2):
                    v = max(max(r0[2 * pj], r0[2 * pj + 1]), max(r1[2 * pj], r1[2 * pj + 1]))
                    y[s, o, pi, pj] = v if v > 0.0 else 0.0
    return y



@njit(cache=True)
def uniform_pool_classes(cls):
    """Classes of conv3x3 -> maxpool2x2 outputs given per-pixel input classes.

    An output keeps class ``u`` when every input in its receptive field has
    class ``u`` and the window stays clear of the padding; otherwise it is -1.
    """
    n, h, wd = cls.shape
    h2 = h // 2
    w2 = wd // 2
    out = np.empty((n, h2, w2), dtype=np.int8)
    for s in range(n):
        for pi in range(h2):
            for pj in range(w2):
                i0 = 2 * pi - 1
                j0 = 2 * pj - 1
                u = -1
                if i0 >= 0 and j0 >= 0 and i0 + 4 <= h and j0 + 4 <= wd:
                    u = cls[s, i0, j0]
                    for a in range(4):
                        for c in range(4):
                            if cls[s, i0 + a, j0 + c] != u:
                                u = -1
                                break
                        if u < 0:
                            break
                out[s, pi, pj] = u
    return out


@njit(cache=True, fastmath=True)
def conv3x3_maxpool_relu_masked(x, w, b, cls, vals):
    """Fused block that only evaluates pooled positions with ``cls < 0``.

    Positions with ``cls[s, i, j] = u >= 0`` have a uniform receptive field
    and take the precomputed output ``vals[u]``. Evaluated positions are
    vectorized over output channels and skip zero inputs.
    """
    n, c, h, wd = x.shape
    co = w.shape[0]
    h2 = h // 2
    w2 = wd // 2
    wt = np.empty((c, 3, 3, co))
    for o in range(co):
        for ch in range(c):
            for m in range(3):
                for k in range(3):
                    wt[ch, m, k, o] = w[o, ch, m, k]
    y = np.empty((n, co, h2, w2))
    xp = np.zeros((c, h + 2, wd + 2))
    acc = np.empty(co)
    best = np.empty(co)
    for s in range(n):
        for ch in range(c):
            for i in range(h):
                for j in range(wd):
                    xp[ch, i + 1, j + 1] = x[s, ch, i, j]
        for pi in range(h2):
            for pj in range(w2):
                u = cls[s, pi, pj]
                if u >= 0:
                    for o in range(co):
                        y[s, o, pi, pj] = vals[u, o]
                    continue
                for q in range(4):
                    i = 2 * pi + q // 2
                    j = 2 * pj + q % 2
                    for o in range(co):
                        acc[o] = b[o]
                    for ch in range(c):
                        for m in range(3):
                            for k in range(3):
                                xv = xp[ch, i + m, j + k]
                                if xv != 0.0:
                                    for o in range(co):
                                        acc[o] += wt[ch, m, k, o] * xv
                    if q == 0:
                        for o in range(co):
                            best[o] = acc[o]
                    else:
                        for o in range(co):
                            best[o] = max(best[o], acc[o])
                for o in range(co):
                    v = best[o]
                    y[s, o, pi, pj] = v if v > 0.0 else 0.0
    return y
