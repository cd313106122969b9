"""Unit quaternions as elements of SU(2).

Quaternions are stored as ``(w, x, y, z)`` arrays. The identification with
SU(2) is

    q  ->  [[w + i x,   y + i z],
            [-y + i z,  w - i x]]

which is a group isomorphism for the Hamilton product.
"""

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def multiply(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def conjugate(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


inverse = conjugate


def to_matrix(q):
    """SU(2) matrix of ``q``; works on stacks of shape (..., 4)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = w + 1j * x
    out[..., 0, 1] = y + 1j * z
    out[..., 1, 0] = -y + 1j * z
    out[..., 1, 1] = w - 1j * x
    return out


def from_matrix(m):
    m = np.asarray(m, dtype=complex)
    w = m[..., 0, 0].real
    x = m[..., 0, 0].imag
    y = m[..., 0, 1].real
    z = m[..., 0, 1].imag
    return np.stack([w, x, y, z], axis=-1)


def exp_imaginary(v):
    """exp of the pure quaternion ``v`` (shape (..., 3))."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    safe = np.where(theta > 0, theta, 1.0)
    s = np.where(theta > 0, np.sin(theta) / safe, 1.0)
    return np.concatenate([np.cos(theta)[..., None], s[..., None] * v], axis=-1)


def rotation_angle(q):
    """Angle ``phi`` in [0, pi] with ``q`` conjugate to diag(e^{i phi}, e^{-i phi})."""
    w = np.clip(np.asarray(q, dtype=float)[..., 0], -1.0, 1.0)
    return np.arccos(w)


def distance(p, q):
    """Bi-invariant distance: great-circle angle on the unit 3-sphere."""
    dot = np.sum(np.asarray(p, dtype=float) * np.asarray(q, dtype=float), axis=-1)
    return np.arccos(np.clip(dot, -1.0, 1.0))


def hopf(q):
    """Image of ``q`` in SU(2)/T = S^2, as a unit vector ``q e_3 q^{-1}``-style projection."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    # Column of the rotation matrix of q fixing the torus axis (the x-axis here,
    # since the diagonal torus exp(t i) sits along the quaternion unit i).
    return np.stack(
        [
            w * w + x * x - y * y - z * z,
            2.0 * (x * y + w * z),
            2.0 * (x * z - w * y),
        ],
        axis=-1,
    )


def random_unit(rng, size=None):
    shape = (4,) if size is None else (size, 4)
    q = rng.standard_normal(shape)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)
