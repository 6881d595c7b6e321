"""Pinhole projection to normalized device coordinates, with adjoint."""

import numpy as np

from ..mathutil import normalize


def view_basis(cam):
    """Right-handed camera frame: rows (right, up, forward into the scene)."""
    pos = np.asarray(cam.position, dtype=np.float64)
    fwd = normalize(np.asarray(cam.target, dtype=np.float64) - pos)
    right = normalize(np.cross(fwd, np.asarray(cam.up, dtype=np.float64)))
    up = np.cross(right, fwd)
    return pos, np.stack([right, up, fwd])


def project(cam, pts):
    """World points (N, 3) -> NDC (N, 2) and view depth (N,).

    NDC x spans [-1, 1] across the image width; y is scaled by the aspect
    ratio so pixels stay square. Depth is distance along the view axis.
    """
    pos, basis = view_basis(cam)
    d = pts - pos
    xv = d @ basis[0]
    yv = d @ basis[1]
    z = d @ basis[2]
    tanh_f = np.tan(0.5 * cam.fov)
    aspect = cam.width / cam.height
    ndc = np.stack([xv / (z * tanh_f), yv * aspect / (z * tanh_f)], axis=1)
    return ndc, z


def project_vjp(cam, pts, ndc_bar, z_bar):
    """Adjoint of project; returns cotangent on the world points."""
    pos, basis = view_basis(cam)
    d = pts - pos
    xv = d @ basis[0]
    yv = d @ basis[1]
    z = d @ basis[2]
    tanh_f = np.tan(0.5 * cam.fov)
    aspect = cam.width / cam.height
    xv_bar = ndc_bar[:, 0] / (z * tanh_f)
    yv_bar = ndc_bar[:, 1] * aspect / (z * tanh_f)
    zt = z_bar - ndc_bar[:, 0] * xv / (z**2 * tanh_f) \
        - ndc_bar[:, 1] * aspect * yv / (z**2 * tanh_f)
    return (xv_bar[:, None] * basis[0] + yv_bar[:, None] * basis[1]
            + zt[:, None] * basis[2])


def pixel_centers(cam):
    """NDC coordinates of pixel centers, row 0 at the top of the image."""
    xs = (np.arange(cam.width) + 0.5) / cam.width * 2.0 - 1.0
    ys = 1.0 - (np.arange(cam.height) + 0.5) / cam.height * 2.0
    px, py = np.meshgrid(xs, ys)
    return np.stack([px.ravel(), py.ravel()], axis=1)
