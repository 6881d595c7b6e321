"""Small vector/quaternion helpers shared by the dynamics kernels.

Quaternions are stored as (w, x, y, z). Every operation that appears on the
forward path of a simulation step has a matching hand-written VJP so the
reverse sweep stays fully analytic.
"""

import numpy as np


def normalize(v, eps=0.0):
    n = np.linalg.norm(v)
    if eps:
        n = max(n, eps)
    return v / n


def normalize_vjp(v, cot):
    """VJP of v -> v/|v|."""
    n = np.linalg.norm(v)
    vn = v / n
    return (cot - vn * np.dot(vn, cot)) / n


def quat_mul(a, b):
    aw, av = a[0], a[1:]
    bw, bv = b[0], b[1:]
    w = aw * bw - np.dot(av, bv)
    v = aw * bv + bw * av + np.cross(av, bv)
    return np.concatenate(([w], v))


def quat_mul_vjp(a, b, cot):
    """Returns (a_bar, b_bar) for c = a*b given c_bar."""
    cw, cv = cot[0], cot[1:]
    aw, av = a[0], a[1:]
    bw, bv = b[0], b[1:]
    a_bar = np.empty(4)
    b_bar = np.empty(4)
    a_bar[0] = cw * bw + np.dot(cv, bv)
    a_bar[1:] = -cw * bv + bw * cv + np.cross(bv, cv)
    b_bar[0] = cw * aw + np.dot(cv, av)
    b_bar[1:] = -cw * av + aw * cv + np.cross(cv, av)
    return a_bar, b_bar


def quat_rotate(q, p):
    """Rotate point(s) p by unit quaternion q. p may be (3,) or (N, 3)."""
    qw, qv = q[0], q[1:]
    t = 2.0 * np.cross(qv, p)
    return p + qw * t + np.cross(qv, t)


def quat_rotate_vjp(q, p, cot):
    """VJP of quat_rotate; cot has the shape of the output."""
    qw, qv = q[0], q[1:]
    t = 2.0 * np.cross(qv, p)
    t_bar = qw * cot + np.cross(cot, qv)
    q_bar = np.zeros(4)
    q_bar[0] = np.sum(cot * t)
    if p.ndim == 1:
        q_bar[1:] = np.cross(t, cot) + 2.0 * np.cross(p, t_bar)
    else:
        q_bar[1:] = np.cross(t, cot).sum(axis=0) + 2.0 * np.cross(p, t_bar).sum(axis=0)
    p_bar = cot + 2.0 * np.cross(t_bar, qv)
    return q_bar, p_bar


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def cross_rows(a, b):
    return np.cross(a, b)


def cofactor(F):
    """Cofactor matrices for a batch of 3x3 matrices, shape (M, 3, 3).

    cof(F) = det(F) F^{-T}, computed via column cross products so it stays
    valid for singular/inverted elements.
    """
    c0 = np.cross(F[:, :, 1], F[:, :, 2])
    c1 = np.cross(F[:, :, 2], F[:, :, 0])
    c2 = np.cross(F[:, :, 0], F[:, :, 1])
    return np.stack([c0, c1, c2], axis=2)


def cofactor_jvp(F, dF):
    """Directional derivative of cofactor(F) along dF (batched 3x3)."""
    f0, f1, f2 = F[:, :, 0], F[:, :, 1], F[:, :, 2]
    d0, d1, d2 = dF[:, :, 0], dF[:, :, 1], dF[:, :, 2]
    c0 = np.cross(d1, f2) + np.cross(f1, d2)
    c1 = np.cross(d2, f0) + np.cross(f2, d0)
    c2 = np.cross(d0, f1) + np.cross(f0, d1)
    return np.stack([c0, c1, c2], axis=2)
