"""Hot loop kernels, each in a numba and a numpy flavour.

The public names (``fk_frames``, ``adam_update``, ``draw_disk``,
``draw_segment``, ``diff_blob_stats``) resolve to the backend picked in
:mod:`reachbench._accel`. Both flavours stay importable for tests and the
benchmark as ``<name>_numba`` / ``<name>_numpy``.
"""
import math

import numpy as np

from ._accel import njit, pick


# --------------------------------------------------------------------------
# forward kinematics: all frame origins plus the end effector

def _axis_squares(axes):
    out = np.empty((axes.shape[0], 3, 3))
    for i in range(axes.shape[0]):
        kx, ky, kz = axes[i]
        K = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
        out[i] = K @ K
    return out


@njit(cache=True)
def fk_frames_numba(axes, trans, base_rot, base_pos, ee_offset, q):
    n = q.shape[0]
    nj = axes.shape[0]
    out = np.empty((n, nj + 2, 3))
    R = np.empty((3, 3))
    Rn = np.empty((3, 3))
    rot = np.empty((3, 3))
    for s in range(n):
        for a in range(3):
            out[s, 0, a] = base_pos[a]
            for b in range(3):
                R[a, b] = base_rot[a, b]
        for j in range(nj):
            kx = axes[j, 0]
            ky = axes[j, 1]
            kz = axes[j, 2]
            sn = math.sin(q[s, j])
            cs = 1.0 - math.cos(q[s, j])
            # Rodrigues: I + sin K + (1 - cos) K^2
            k2xx = -(ky * ky + kz * kz)
            k2yy = -(kx * kx + kz * kz)
            k2zz = -(kx * kx + ky * ky)
            rot[0, 0] = 1.0 + cs * k2xx
            rot[0, 1] = -sn * kz + cs * (kx * ky)
            rot[0, 2] = sn * ky + cs * (kx * kz)
            rot[1, 0] = sn * kz + cs * (kx * ky)
            rot[1, 1] = 1.0 + cs * k2yy
            rot[1, 2] = -sn * kx + cs * (ky * kz)
            rot[2, 0] = -sn * ky + cs * (kx * kz)
            rot[2, 1] = sn * kx + cs * (ky * kz)
            rot[2, 2] = 1.0 + cs * k2zz
            for a in range(3):
                for b in range(3):
                    Rn[a, b] = R[a, 0] * rot[0, b] + R[a, 1] * rot[1, b] + R[a, 2] * rot[2, b]
            for a in range(3):
                for b in range(3):
                    R[a, b] = Rn[a, b]
                out[s, j + 1, a] = out[s, j, a] + (
                    R[a, 0] * trans[j, 0] + R[a, 1] * trans[j, 1] + R[a, 2] * trans[j, 2])
        for a in range(3):
            out[s, nj + 1, a] = out[s, nj, a] + (
                R[a, 0] * ee_offset[0] + R[a, 1] * ee_offset[1] + R[a, 2] * ee_offset[2])
    return out


def fk_frames_numpy(axes, trans, base_rot, base_pos, ee_offset, q):
    n, nj = q.shape[0], axes.shape[0]
    out = np.empty((n, nj + 2, 3))
    out[:, 0] = base_pos
    R = np.broadcast_to(base_rot, (n, 3, 3)).copy()
    ksq = _axis_squares(axes)
    eye = np.eye(3)
    for j in range(nj):
        kx, ky, kz = axes[j]
        K = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
        sn = np.sin(q[:, j])[:, None, None]
        cs = (1.0 - np.cos(q[:, j]))[:, None, None]
        rot = eye + sn * K + cs * ksq[j]
        R = np.einsum("nab,nbc->nac", R, rot)
        out[:, j + 1] = out[:, j] + R @ trans[j]
    out[:, nj + 1] = out[:, nj] + R @ ee_offset
    return out


# --------------------------------------------------------------------------
# fused Adam update, in place on flat float64 arrays

@njit(cache=True)
def adam_update_numba(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    for i in range(p.shape[0]):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)


def adam_update_numpy(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


# --------------------------------------------------------------------------
# rasterisation on (h, w, 3) uint8 images; pixel (row, col) has its center
# at (col, row) in continuous pixel coordinates

@njit(cache=True)
def draw_disk_numba(img, cx, cy, radius, color):
    h, w = img.shape[0], img.shape[1]
    r2 = radius * radius
    c0 = max(0, int(math.floor(cx - radius)))
    c1 = min(w - 1, int(math.ceil(cx + radius)))
    r0 = max(0, int(math.floor(cy - radius)))
    r1 = min(h - 1, int(math.ceil(cy + radius)))
    for row in range(r0, r1 + 1):
        dy = row - cy
        for col in range(c0, c1 + 1):
            dx = col - cx
            if dx * dx + dy * dy <= r2:
                img[row, col, 0] = color[0]
                img[row, col, 1] = color[1]
                img[row, col, 2] = color[2]


def draw_disk_numpy(img, cx, cy, radius, color):
    h, w = img.shape[:2]
    c0 = max(0, int(math.floor(cx - radius)))
    c1 = min(w - 1, int(math.ceil(cx + radius)))
    r0 = max(0, int(math.floor(cy - radius)))
    r1 = min(h - 1, int(math.ceil(cy + radius)))
    if c0 > c1 or r0 > r1:
        return
    rows = np.arange(r0, r1 + 1)[:, None] - cy
    cols = np.arange(c0, c1 + 1)[None, :] - cx
    inside = cols * cols + rows * rows <= radius * radius
    img[r0:r1 + 1, c0:c1 + 1][inside] = color


@njit(cache=True)
def draw_segment_numba(img, x0, y0, x1, y1, half_width, color):
    h, w = img.shape[0], img.shape[1]
    c0 = max(0, int(math.floor(min(x0, x1) - half_width)))
    c1 = min(w - 1, int(math.ceil(max(x0, x1) + half_width)))
    r0 = max(0, int(math.floor(min(y0, y1) - half_width)))
    r1 = min(h - 1, int(math.ceil(max(y0, y1) + half_width)))
    ex = x1 - x0
    ey = y1 - y0
    len2 = ex * ex + ey * ey
    hw2 = half_width * half_width
    for row in range(r0, r1 + 1):
        for col in range(c0, c1 + 1):
            px = col - x0
            py = row - y0
            t = 0.0
            if len2 > 0.0:
                t = (px * ex + py * ey) / len2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            dx = px - t * ex
            dy = py - t * ey
            if dx * dx + dy * dy <= hw2:
                img[row, col, 0] = color[0]
                img[row, col, 1] = color[1]
                img[row, col, 2] = color[2]


def draw_segment_numpy(img, x0, y0, x1, y1, half_width, color):
    h, w = img.shape[:2]
    c0 = max(0, int(math.floor(min(x0, x1) - half_width)))
    c1 = min(w - 1, int(math.ceil(max(x0, x1) + half_width)))
    r0 = max(0, int(math.floor(min(y0, y1) - half_width)))
    r1 = min(h - 1, int(math.ceil(max(y0, y1) + half_width)))
    if c0 > c1 or r0 > r1:
        return
    py = np.arange(r0, r1 + 1, dtype=np.float64)[:, None] - y0
    px = np.arange(c0, c1 + 1, dtype=np.float64)[None, :] - x0
    ex, ey = x1 - x0, y1 - y0
    len2 = ex * ex + ey * ey
    if len2 > 0.0:
        t = np.clip((px * ex + py * ey) / len2, 0.0, 1.0)
    else:
        t = np.zeros(np.broadcast(px, py).shape)
    dx = px - t * ex
    dy = py - t * ey
    inside = dx * dx + dy * dy <= half_width * half_width
    img[r0:r1 + 1, c0:c1 + 1][inside] = color


# --------------------------------------------------------------------------
# mask differencing: count and centroid sums of pixels whose max-channel
# absolute difference to the mask reaches the threshold

@njit(cache=True)
def diff_blob_stats_numba(img, mask, threshold):
    h, w = img.shape[0], img.shape[1]
    count = 0
    sum_col = 0.0
    sum_row = 0.0
    for row in range(h):
        for col in range(w):
            best = 0
            for ch in range(3):
                d = np.int64(img[row, col, ch]) - np.int64(mask[row, col, ch])
                if d < 0:
                    d = -d
                if d > best:
                    best = d
            if best >= threshold:
                count += 1
                sum_col += col
                sum_row += row
    return count, sum_col, sum_row


def diff_blob_stats_numpy(img, mask, threshold):
    diff = np.abs(img.astype(np.int16) - mask.astype(np.int16)).max(axis=2)
    rows, cols = np.nonzero(diff >= threshold)
    return int(rows.size), float(cols.sum()), float(rows.sum())


fk_frames = pick(fk_frames_numba, fk_frames_numpy)
adam_update = pick(adam_update_numba, adam_update_numpy)
draw_disk = pick(draw_disk_numba, draw_disk_numpy)
draw_segment = pick(draw_segment_numba, draw_segment_numpy)
diff_blob_stats = pick(diff_blob_stats_numba, diff_blob_stats_numpy)
