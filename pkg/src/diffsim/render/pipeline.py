"""Frame rendering for a simulated state, and its adjoint back to body
vertex positions.

All renderable bodies are concatenated into one triangle soup: deformable and
cloth bodies contribute their current surface vertices directly, rigid bodies
contribute their rotated and translated surface mesh. Pendula are abstract
(angles only) and are not rendered. Shading is per-vertex; the view direction
used for highlights is the fixed camera axis, so specular gradients flow only
through the normals.
"""

import numpy as np

from ..dynamics.rigid import world_vertices
from ..mathutil import normalize
from .camera import project, project_vjp, view_basis
from .raster import soft_rasterize, soft_rasterize_vjp
from .shading import (shade, shade_vjp, texture_sample, vertex_normals,
                      vertex_normals_vjp)

RENDERED_KINDS = ("fem", "shell", "rigid")


def _gather(scene, state):
    """Concatenate world-space geometry. Returns (verts, tris, spans, mats)
    where spans[i] = (lo, hi) vertex range of body i (None if unrendered)."""
    verts, tris, spans, mats = [], [], [], []
    off = 0
    for b, s in zip(scene.bodies, state):
        if b.kind == "rigid":
            v = world_vertices(s["x"], s["r"], b.verts)
            t = b.tris
        elif b.kind == "fem":
            v = s["x"]
            t = b.mesh.surface
        elif b.kind == "shell":
            v = s["x"]
            t = b.mesh.triangles
        else:
            spans.append(None)
            mats.append(None)
            continue
        verts.append(v)
        tris.append(t + off)
        spans.append((off, off + v.shape[0]))
        mats.append(b.material)
        off += v.shape[0]
    if not verts:
        raise ValueError("scene has no renderable bodies")
    return np.concatenate(verts), np.concatenate(tris), spans, mats


def _base_colors(mat, n):
    if mat.mode == "textured":
        if mat.texture is None or mat.uv is None:
            raise ValueError("textured material needs texture and uv")
        return texture_sample(mat.texture, mat.uv)
    return np.broadcast_to(np.asarray(mat.color, dtype=np.float64),
                           (n, 3)).copy()


def render_frame(scene, state):
    """Rasterize one frame. Returns (rgb (H, W, 3), sil (H, W), cache)."""
    cam = scene.camera
    verts, tris, spans, mats = _gather(scene, state)
    normals = vertex_normals(verts, tris)
    light_dir = scene.light.unit_direction()
    light_color = np.asarray(scene.light.color, dtype=np.float64)
    _, basis = view_basis(cam)
    view_dir = -basis[2]
    colors = np.empty_like(verts)
    for span, mat in zip(spans, mats):
        if span is None:
            continue
        lo, hi = span
        base = _base_colors(mat, hi - lo)
        colors[lo:hi] = shade(base, normals[lo:hi], light_dir, light_color,
                              view_dir, mat)
    ndc, depth = project(cam, verts)
    rgb, sil, rcache = soft_rasterize(ndc, depth, tris, colors, cam,
                                      scene.raster)
    cache = {"scene": scene, "state": state, "verts": verts, "tris": tris,
             "spans": spans, "mats": mats, "normals": normals,
             "light_dir": light_dir, "light_color": light_color,
             "view_dir": view_dir, "rcache": rcache}
    return rgb, sil, cache


def render_frame_vjp(cache, rgb_bar, sil_bar):
    """Adjoint of render_frame.

    Returns dict body_idx -> (N_i, 3) cotangent on that body's world-space
    vertices (rigid bodies included; the engine maps those through the
    rigid transform).
    """
    scene = cache["scene"]
    cam = scene.camera
    verts, tris = cache["verts"], cache["tris"]
    if rgb_bar is None:
        rgb_bar = np.zeros((cam.height, cam.width, 3))
    if sil_bar is None:
        sil_bar = np.zeros((cam.height, cam.width))
    ndc_bar, depth_bar, colors_bar = soft_rasterize_vjp(cache["rcache"],
                                                        rgb_bar, sil_bar)
    v_bar = project_vjp(cam, verts, ndc_bar, depth_bar)

    n_bar = np.zeros_like(verts)
    for span, mat in zip(cache["spans"], cache["mats"]):
        if span is None:
            continue
        lo, hi = span
        base = _base_colors(mat, hi - lo)
        _, nb = shade_vjp(base, cache["normals"][lo:hi], cache["light_dir"],
                          cache["light_color"], cache["view_dir"], mat,
                          colors_bar[lo:hi])
        n_bar[lo:hi] = nb
    v_bar += vertex_normals_vjp(verts, tris, n_bar)

    out = {}
    for i, span in enumerate(cache["spans"]):
        if span is None:
            continue
        out[i] = v_bar[span[0]:span[1]]
    return out
