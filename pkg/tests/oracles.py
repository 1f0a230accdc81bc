"""Independent reference implementations used only by the tests.

Nothing here imports the package's rendering or network code paths; the
oracles are deliberately naive scalar loops.
"""

import math

import numpy as np


def philox_gradient(seed, p, q, radius):
    """Lattice gradient drawn straight from Philox keyed (seed, p<<32|q)."""
    gen = np.random.Generator(np.random.Philox(key=[seed, (p << 32) | q]))
    u1, u2 = gen.random(), gen.random()
    mag = radius * u1
    ang = 2.0 * math.pi * u2
    return mag * math.cos(ang), mag * math.sin(ang)


def noise_at(vectors, n, m, u, v):
    """Bilinear blend of the four corner dot products at grid point (u, v)."""
    cx, cy = 2**n, 2**m
    i = int(math.floor(u))
    j = int(math.floor(v))
    if i == cx:
        i = cx - 1
    if j == cy:
        j = cy - 1
    fx = u - i
    fy = v - j
    corners = {}
    for di in (0, 1):
        for dj in (0, 1):
            gx, gy = vectors[i + di][j + dj]
            corners[di, dj] = gx * (fx - di) + gy * (fy - dj)
    lower = corners[0, 0] * (1 - fx) + corners[1, 0] * fx
    upper = corners[0, 1] * (1 - fx) + corners[1, 1] * fx
    return lower * (1 - fy) + upper * fy


def noise_plane(vectors, n, m, width, height):
    out = [[0.0] * height for _ in range(width)]
    for x in range(width):
        for y in range(height):
            u = (x + 0.5) * (2**n) / width
            v = (y + 0.5) * (2**m) / height
            out[x][y] = noise_at(vectors, n, m, u, v)
    return np.array(out)


def naive_matmul(a, b):
    rows, inner = len(a), len(a[0])
    cols = len(b[0])
    return np.array([[sum(a[i][k] * b[k][j] for k in range(inner)) for j in range(cols)] for i in range(rows)])


def naive_conv(x, w, b, stride, pad):
    """x: (B, W, H, C), w: (O, C, k, k) -> (B, Wo, Ho, O), scalar loops."""
    B, W, H, C = x.shape
    O, _, k, _ = w.shape
    Wo = (W + 2 * pad - k) // stride + 1
    Ho = (H + 2 * pad - k) // stride + 1
    out = np.zeros((B, Wo, Ho, O))
    for bi in range(B):
        for ox in range(Wo):
            for oy in range(Ho):
                for o in range(O):
                    acc = b[o]
                    for c in range(C):
                        for a in range(k):
                            for e in range(k):
                                xx = ox * stride + a - pad
                                yy = oy * stride + e - pad
                                if 0 <= xx < W and 0 <= yy < H:
                                    acc += x[bi, xx, yy, c] * w[o, c, a, e]
                    out[bi, ox, oy, o] = acc
    return out


def naive_maxpool(x, size, stride):
    B, W, H, C = x.shape
    Wo = (W - size) // stride + 1
    Ho = (H - size) // stride + 1
    out = np.zeros((B, Wo, Ho, C))
    for bi in range(B):
        for ox in range(Wo):
            for oy in range(Ho):
                for c in range(C):
                    out[bi, ox, oy, c] = max(
                        x[bi, ox * stride + a, oy * stride + e, c] for a in range(size) for e in range(size)
                    )
    return out


def naive_cross_entropy(logits, labels):
    total = 0.0
    for row, y in zip(logits, labels):
        mx = max(row)
        s = sum(math.exp(z - mx) for z in row)
        total += -(row[y] - mx - math.log(s))
    return total / len(labels)


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f with respect to array x (in place perturbation)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        grad[idx] = (fp - fm) / (2 * h)
    return grad
