"""Pure-numpy kernels.

Each function has a numba twin in ``_numba`` with the same signature.
"""
import numpy as np

TWO_PI = 2.0 * np.pi


def im2col3x3(x):
    """(N, C, H, W) -> (N, C*9, H*W) patch matrix for a 3x3, pad-1 window."""
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2, w + 2))
    xp[:, :, 1:-1, 1:-1] = x
    cols = np.empty((n, c, 9, h, w))
    for m in range(3):
        for k in range(3):
            cols[:, :, 3 * m + k] = xp[:, :, m:m + h, k:k + w]
    return cols.reshape(n, c * 9, h * w)


def col2im3x3(cols, h, w):
    """Adjoint of :func:`im2col3x3`: scatter-add patches back onto the image."""
    n, ck, _ = cols.shape
    c = ck // 9
    d = cols.reshape(n, c, 9, h, w)
    xp = np.zeros((n, c, h + 2, w + 2))
    for m in range(3):
        for k in range(3):
            xp[:, :, m:m + h, k:k + w] += d[:, :, 3 * m + k]
    return np.ascontiguousarray(xp[:, :, 1:-1, 1:-1])


def maxpool2x2_fwd(x):
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    win = x.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    idx = np.argmax(win, axis=-1).astype(np.int8)
    y = np.take_along_axis(win, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx


def maxpool2x2_bwd(dy, idx):
    n, c, h2, w2 = dy.shape
    win = np.zeros((n, c, h2, w2, 4))
    np.put_along_axis(win, idx[..., None].astype(np.intp), dy[..., None], axis=-1)
    dx = win.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
    return np.ascontiguousarray(dx)


def points_in_polygon(px, py, poly, edge_tol):
    """Even-odd test of each (px[i], py[i]); points on an edge count as inside."""
    inside = np.zeros(px.shape[0], dtype=np.bool_)
    on_edge = np.zeros(px.shape[0], dtype=np.bool_)
    k = poly.shape[0]
    for e in range(k):
        ax, ay = poly[e, 0], poly[e, 1]
        bx, by = poly[(e + 1) % k, 0], poly[(e + 1) % k, 1]
        ex = bx - ax
        ey = by - ay
        seg2 = ex * ex + ey * ey
        if seg2 == 0.0:
            # repeated vertex, e.g. an explicitly closed loop
            continue
        dx = px - ax
        dy = py - ay
        cross = ex * dy - ey * dx
        dot = ex * dx + ey * dy
        on_edge |= (np.abs(cross) <= edge_tol * np.sqrt(seg2)) & (dot >= 0.0) & (dot <= seg2)
        straddle = (ay > py) != (by > py)
        if ey != 0.0:
            xint = ex * (py - ay) / ey + ax
            inside ^= straddle & (px < xint)
    return inside | on_edge


def vortex_influence(xc, yc, nx, ny, xv, yv, image):
    """Normal velocity at collocation i induced by a unit clockwise vortex j."""
    dx = xc[:, None] - xv[None, :]
    dy = yc[:, None] - yv[None, :]
    r2 = dx * dx + dy * dy
    u = dy / (TWO_PI * r2)
    v = -dx / (TWO_PI * r2)
    a = u * nx[:, None] + v * ny[:, None]
    if image:
        dyi = yc[:, None] + yv[None, :]
        r2i = dx * dx + dyi * dyi
        ui = -dyi / (TWO_PI * r2i)
        vi = dx / (TWO_PI * r2i)
        a = a + (ui * nx[:, None] + vi * ny[:, None])
    return a


def conv3x3_fwd(x, w, b):
    n, c, h, wd = x.shape
    y = np.matmul(w.reshape(w.shape[0], -1), im2col3x3(x))
    y += b[None, :, None]
    return y.reshape(n, w.shape[0], h, wd)


def conv3x3_bwd_input(dy, w):
    n, co, h, wd = dy.shape
    dcols = np.matmul(w.reshape(co, -1).T, dy.reshape(n, co, h * wd))
    return col2im3x3(dcols, h, wd)


def conv3x3_bwd_weight(dy, x):
    n, co, h, wd = dy.shape
    cols = im2col3x3(x)
    dw = np.matmul(dy.reshape(n, co, h * wd), cols.transpose(0, 2, 1)).sum(axis=0)
    return dw.reshape(co, x.shape[1], 3, 3)


def batchnorm_train_fwd(x, gamma, beta, eps):
    axes = (0, 2, 3)
    mean = x.mean(axis=axes)
    xc = x - mean[None, :, None, None]
    var = (xc * xc).mean(axis=axes)
    scale = gamma / np.sqrt(var + eps)
    y = xc * scale[None, :, None, None] + beta[None, :, None, None]
    return y, mean, var


def batchnorm_train_bwd(dy, x, mean, inv, gamma):
    axes = (0, 2, 3)
    cnt = dy.size // dy.shape[1]
    xhat = (x - mean[None, :, None, None]) * inv[None, :, None, None]
    dbeta = dy.sum(axis=axes)
    dgamma = (dy * xhat).sum(axis=axes)
    k = gamma * inv / cnt
    dx = k[None, :, None, None] * (cnt * dy - dbeta[None, :, None, None] - xhat * dgamma[None, :, None, None])
    return dx, dgamma, dbeta


def relu_maxpool2x2_fwd(x):
    y, idx = maxpool2x2_fwd(x)
    return np.maximum(y, 0.0), idx


def relu_maxpool2x2_bwd(dy, idx, x):
    return maxpool2x2_bwd(dy, idx) * (x > 0)


def conv3x3_maxpool_relu(x, w, b):
    y, _ = maxpool2x2_fwd(conv3x3_fwd(x, w, b))
    return np.maximum(y, 0.0)


def uniform_pool_classes(cls):
    n, h, w = cls.shape
    pre = np.full((n, h, w), -1, dtype=np.int8)
    centre = cls[:, 1:-1, 1:-1]
    ok = centre >= 0
    for dm in (0, 1, 2):
        for dk in (0, 1, 2):
            ok &= cls[:, dm:h - 2 + dm, dk:w - 2 + dk] == centre
    pre[:, 1:-1, 1:-1] = np.where(ok, centre, -1)
    q = pre.reshape(n, h // 2, 2, w // 2, 2)
    first = q[:, :, 0, :, 0]
    same = (q == first[:, :, None, :, None]).all(axis=(2, 4))
    return np.where(same, first, -1).astype(np.int8)


def conv3x3_maxpool_relu_masked(x, w, b, cls, vals):
    y = conv3x3_maxpool_relu(x, w, b)
    s, i, j = np.nonzero(cls >= 0)
    y[s, :, i, j] = vals[cls[s, i, j]]
    return y
