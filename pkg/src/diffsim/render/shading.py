"""Per-vertex (Gouraud) shading: flat, Lambert+Phong, and textured."""

import numpy as np


def vertex_normals(verts, tris):
    """Area-weighted vertex normals, normalized per vertex."""
    e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    fn = np.cross(e1, e2)
    acc = np.zeros_like(verts)
    for k in range(3):
        np.add.at(acc, tris[:, k], fn)
    nl = np.maximum(np.linalg.norm(acc, axis=1, keepdims=True), 1e-30)
    return acc / nl


def vertex_normals_vjp(verts, tris, cot):
    """Adjoint of vertex_normals w.r.t. vertex positions."""
    e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    fn = np.cross(e1, e2)
    acc = np.zeros_like(verts)
    for k in range(3):
        np.add.at(acc, tris[:, k], fn)
    nl = np.maximum(np.linalg.norm(acc, axis=1, keepdims=True), 1e-30)
    n = acc / nl
    # normalize: acc_bar = (cot - (cot . n) n) / |acc|
    acc_bar = (cot - (cot * n).sum(axis=1, keepdims=True) * n) / nl
    fn_bar = acc_bar[tris[:, 0]] + acc_bar[tris[:, 1]] + acc_bar[tris[:, 2]]
    e1_bar = np.cross(e2, fn_bar)
    e2_bar = np.cross(fn_bar, e1)
    v_bar = np.zeros_like(verts)
    np.add.at(v_bar, tris[:, 1], e1_bar)
    np.add.at(v_bar, tris[:, 2], e2_bar)
    np.add.at(v_bar, tris[:, 0], -(e1_bar + e2_bar))
    return v_bar


def shade(base, normals, light_dir, light_color, view_dir, mat):
    """Blinn-style per-vertex shade; returns colors clipped to [0, 1].

    light_dir points from the light toward the scene; view_dir from the
    scene toward the camera (both unit). Flat materials pass base through.
    """
    if mat.mode == "flat":
        return np.clip(base, 0.0, 1.0)
    ndl_raw = -(normals @ light_dir)
    ndl = np.maximum(ndl_raw, 0.0)
    refl = light_dir[None] + 2.0 * ndl_raw[:, None] * normals
    rdv = np.maximum(refl @ view_dir, 0.0)
    c = mat.ambient * base \
        + mat.diffuse * ndl[:, None] * base * light_color[None] \
        + mat.specular * (rdv ** mat.shininess)[:, None] * light_color[None]
    return np.clip(c, 0.0, 1.0)


def shade_vjp(base, normals, light_dir, light_color, view_dir, mat, cot):
    """Returns (base_bar, normals_bar)."""
    if mat.mode == "flat":
        inside = (base > 0.0) & (base < 1.0)
        return np.where(inside, cot, 0.0), np.zeros_like(normals)
    ndl_raw = -(normals @ light_dir)
    ndl = np.maximum(ndl_raw, 0.0)
    refl = light_dir[None] + 2.0 * ndl_raw[:, None] * normals
    rdv_raw = refl @ view_dir
    rdv = np.maximum(rdv_raw, 0.0)
    c = mat.ambient * base \
        + mat.diffuse * ndl[:, None] * base * light_color[None] \
        + mat.specular * (rdv ** mat.shininess)[:, None] * light_color[None]
    cot = np.where((c > 0.0) & (c < 1.0), cot, 0.0)

    base_bar = mat.ambient * cot \
        + mat.diffuse * ndl[:, None] * light_color[None] * cot
    ndl_bar = mat.diffuse * ((base * light_color[None] * cot).sum(axis=1))
    rdv_bar = mat.specular * mat.shininess \
        * np.where(rdv_raw > 0.0, rdv ** (mat.shininess - 1.0), 0.0) \
        * (light_color[None] * cot).sum(axis=1)
    refl_bar = rdv_bar[:, None] * view_dir[None]
    ndl_raw_bar = np.where(ndl_raw > 0.0, ndl_bar, 0.0) \
        + 2.0 * (refl_bar * normals).sum(axis=1)
    n_bar = -ndl_raw_bar[:, None] * light_dir[None] \
        + 2.0 * ndl_raw[:, None] * refl_bar
    return base_bar, n_bar


def texture_sample(texture, uv):
    """Bilinear sample; uv in [0, 1]^2 with (0, 0) the top-left texel."""
    th, tw = texture.shape[:2]
    fx = np.clip(uv[:, 0], 0.0, 1.0) * (tw - 1)
    fy = np.clip(uv[:, 1], 0.0, 1.0) * (th - 1)
    x0 = np.clip(np.floor(fx).astype(int), 0, tw - 2) if tw > 1 else np.zeros(len(fx), int)
    y0 = np.clip(np.floor(fy).astype(int), 0, th - 2) if th > 1 else np.zeros(len(fy), int)
    ax = (fx - x0)[:, None]
    ay = (fy - y0)[:, None]
    x1 = np.minimum(x0 + 1, tw - 1)
    y1 = np.minimum(y0 + 1, th - 1)
    return ((1 - ax) * (1 - ay) * texture[y0, x0] + ax * (1 - ay) * texture[y0, x1]
            + (1 - ax) * ay * texture[y1, x0] + ax * ay * texture[y1, x1])


def texture_sample_vjp(texture, uv, cot):
    """Adjoint of texture_sample; returns (texture_bar, uv_bar).

    uv_bar treats the clamp and texel-cell choice as locally constant, so it
    is exact away from texel boundaries and the [0, 1] border.
    """
    th, tw = texture.shape[:2]
    fx = np.clip(uv[:, 0], 0.0, 1.0) * (tw - 1)
    fy = np.clip(uv[:, 1], 0.0, 1.0) * (th - 1)
    x0 = np.clip(np.floor(fx).astype(int), 0, tw - 2) if tw > 1 else np.zeros(len(fx), int)
    y0 = np.clip(np.floor(fy).astype(int), 0, th - 2) if th > 1 else np.zeros(len(fy), int)
    ax = (fx - x0)[:, None]
    ay = (fy - y0)[:, None]
    x1 = np.minimum(x0 + 1, tw - 1)
    y1 = np.minimum(y0 + 1, th - 1)
    tex_bar = np.zeros_like(texture)
    np.add.at(tex_bar, (y0, x0), (1 - ax) * (1 - ay) * cot)
    np.add.at(tex_bar, (y0, x1), ax * (1 - ay) * cot)
    np.add.at(tex_bar, (y1, x0), (1 - ax) * ay * cot)
    np.add.at(tex_bar, (y1, x1), ax * ay * cot)
    c00 = np.sum(texture[y0, x0] * cot, axis=1)
    c10 = np.sum(texture[y0, x1] * cot, axis=1)
    c01 = np.sum(texture[y1, x0] * cot, axis=1)
    c11 = np.sum(texture[y1, x1] * cot, axis=1)
    dax = (c10 - c00) * (1 - ay[:, 0]) + (c11 - c01) * ay[:, 0]
    day = (c01 - c00) * (1 - ax[:, 0]) + (c11 - c10) * ax[:, 0]
    inside_x = (uv[:, 0] > 0.0) & (uv[:, 0] < 1.0)
    inside_y = (uv[:, 1] > 0.0) & (uv[:, 1] < 1.0)
    uv_bar = np.stack([dax * (tw - 1) * inside_x,
                       day * (th - 1) * inside_y], axis=1)
    return tex_bar, uv_bar
