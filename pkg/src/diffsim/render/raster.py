"""Soft rasterizer with probabilistic coverage and depth-weighted color
aggregation, plus its hand-written adjoint.

Per pixel p and triangle j the coverage is D_j = sigmoid(delta_j * d_j^2 /
sigma) where d_j^2 is the squared NDC distance from the pixel center to the
triangle boundary and delta_j is +1 inside / -1 outside. Colors aggregate by
softmax of logit l_j = log D_j + zbar_j / gamma against a background logit of
0, where zbar is depth remapped so near-to-far spans 1 to 0. The silhouette
is 1 - prod_j (1 - D_j). Everything is evaluated in log space so sigma and
gamma as small as 1e-7 stay finite; as sigma, gamma -> 0 the image converges
to hard z-buffer rasterization.
"""

import numpy as np

from .camera import pixel_centers

_EDGE = ((0, 1), (1, 2), (2, 0))


def _softplus(x):
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _pair_terms(pix, v2, td, valid, near, far, sigma):
    """Per pixel x triangle quantities shared by forward and adjoint.

    pix: (P, 2) pixel centers; v2: (T, 3, 2) NDC corners; td: (T, 3) corner
    depths. Returns a dict of (P, T, ...) arrays.
    """
    P = pix.shape[0]
    A, B, C = v2[:, 0], v2[:, 1], v2[:, 2]
    den = _cross2(B - A, C - A)  # (T,)
    pp = pix[:, None, :]  # (P, 1, 2)
    w0 = _cross2(B - pp, C - pp)
    w1 = _cross2(pp - A, C - A)
    w2 = _cross2(B - A, pp - A)
    safe_den = np.where(np.abs(den) < 1e-12, 1.0, den)
    lam = np.stack([w0, w1, w2], axis=-1) / safe_den[None, :, None]
    inside = np.all(lam >= 0.0, axis=-1) & valid[None, :]

    u = np.clip(lam, 0.0, 1.0)
    s = u.sum(axis=-1)
    lamc = u / s[..., None]
    z = (lamc * td[None, :, :]).sum(axis=-1)
    zbar_raw = (far - z) / (far - near)
    zbar = np.clip(zbar_raw, 0.0, 1.0)

    # squared distance from pixel center to the nearest boundary edge
    d2e = np.empty((P, v2.shape[0], 3))
    te = np.empty_like(d2e)
    for k, (i0, i1) in enumerate(_EDGE):
        s1, s2 = v2[:, i0], v2[:, i1]
        e = s2 - s1
        q = pp - s1
        ee = np.maximum((e * e).sum(axis=-1), 1e-30)
        t = np.clip((q * e[None]).sum(axis=-1) / ee[None], 0.0, 1.0)
        r = q - t[..., None] * e[None]
        d2e[:, :, k] = (r * r).sum(axis=-1)
        te[:, :, k] = t
    kmin = np.argmin(d2e, axis=-1)
    d2 = np.take_along_axis(d2e, kmin[..., None], axis=-1)[..., 0]

    delta = np.where(inside, 1.0, -1.0)
    arg = delta * d2 / sigma
    logd = -_softplus(-arg)  # log D
    log1md = np.where(valid[None, :], -_softplus(arg), 0.0)  # log(1 - D)
    return {
        "lam": lam, "lamc": lamc, "u": u, "s": s, "den": den,
        "safe_den": safe_den, "z": z, "zbar_raw": zbar_raw, "zbar": zbar,
        "kmin": kmin, "te": te, "d2": d2, "delta": delta, "arg": arg,
        "logd": logd, "log1md": log1md, "inside": inside,
    }


def _aggregate(tm, colors_tri, valid, gamma, bg):
    """Softmax color aggregation; returns rgb (P, 3), sil (P), probs.

    Triangle logit: log D_j + zbar_j / gamma. The background competes with
    weight (1 - S) * exp(zbar_max / gamma), i.e. the probability no triangle
    covers the pixel, promoted to the depth of the best candidate: at a lone
    edge this reduces to D * color + (1 - D) * background, and far from all
    triangles to the background exactly, so the hard-rasterizer limit holds
    for rgb as well as for the silhouette.
    """
    zterm = np.where(valid[None, :], tm["zbar"] / gamma, -np.inf)
    logit = tm["logd"] + zterm
    Lsum = tm["log1md"].sum(axis=1)
    if valid.any():
        zmax = zterm[:, valid].max(axis=1)
        argz = np.flatnonzero(valid)[zterm[:, valid].argmax(axis=1)]
    else:
        zmax = np.full(logit.shape[0], -np.inf)
        argz = np.zeros(logit.shape[0], dtype=int)
    lbg = np.where(np.isfinite(zmax), Lsum + zmax, 0.0)
    m = np.maximum(np.max(logit, axis=1, initial=-np.inf), lbg)
    wgt = np.where(valid[None, :], np.exp(logit - m[:, None]), 0.0)
    wbg = np.exp(lbg - m)
    Z = wbg + wgt.sum(axis=1)
    cpix = np.einsum("pti,tic->ptc", tm["lamc"], colors_tri)
    rgb = (np.einsum("pt,ptc->pc", wgt, cpix) + wbg[:, None] * bg[None]) / Z[:, None]
    sil = -np.expm1(Lsum)
    return rgb, sil, wgt / Z[:, None], wbg / Z, cpix, argz


def soft_rasterize(ndc, depth, tris, colors, cam, settings,
                   chunk=2_000_000):
    """Returns (rgb (H, W, 3), sil (H, W), cache).

    ndc: (N, 2); depth: (N,) view depth; colors: (N, 3) vertex colors.
    Triangles with any corner at depth < cam.near are dropped.
    """
    H, W = cam.height, cam.width
    near, far = cam.near, cam.far
    sigma, gamma = settings.sigma, settings.gamma
    bg = np.asarray(settings.background, dtype=np.float64)
    v2 = ndc[tris]
    td = depth[tris]
    A, B, C = v2[:, 0], v2[:, 1], v2[:, 2]
    den = _cross2(B - A, C - A)
    valid = np.all(td >= near, axis=1) & (np.abs(den) > 1e-12)

    pix = pixel_centers(cam)
    P = pix.shape[0]
    rgb = np.empty((P, 3))
    sil = np.empty(P)
    step = max(1, chunk // max(1, tris.shape[0]))
    for lo in range(0, P, step):
        hi = min(P, lo + step)
        tm = _pair_terms(pix[lo:hi], v2, td, valid, near, far, sigma)
        r, s, _, _, _, _ = _aggregate(tm, colors[tris], valid, gamma, bg)
        rgb[lo:hi] = r
        sil[lo:hi] = s
    cache = {"ndc": ndc, "depth": depth, "tris": tris, "colors": colors,
             "cam": cam, "settings": settings, "valid": valid,
             "chunk_step": step}
    return rgb.reshape(H, W, 3), sil.reshape(H, W), cache


def soft_rasterize_vjp(cache, rgb_bar, sil_bar):
    """Adjoint of soft_rasterize.

    Returns (ndc_bar (N, 2), depth_bar (N,), colors_bar (N, 3)). Forward
    intermediates are recomputed chunk by chunk to bound memory.
    """
    st = cache["settings"]
    cam = cache["cam"]
    sigma, gamma = st.sigma, st.gamma
    bg = np.asarray(st.background, dtype=np.float64)
    ndc, depth, tris, colors = (cache["ndc"], cache["depth"], cache["tris"],
                                cache["colors"])
    near, far, valid = cam.near, cam.far, cache["valid"]
    v2 = ndc[tris]
    td = depth[tris]
    colors_tri = colors[tris]
    pix = pixel_centers(cam)
    rgb_bar = rgb_bar.reshape(-1, 3)
    sil_bar = sil_bar.reshape(-1)

    v2_bar = np.zeros_like(v2)
    td_bar = np.zeros_like(td)
    ct_bar = np.zeros_like(colors_tri)

    P = pix.shape[0]
    step = cache["chunk_step"]
    for lo in range(0, P, step):
        hi = min(P, lo + step)
        pp = pix[lo:hi][:, None, :]
        tm = _pair_terms(pix[lo:hi], v2, td, valid, near, far, sigma)
        _, _, prob, pbg, cpix, argz = _aggregate(tm, colors_tri, valid, gamma,
                                                 bg)
        rb = rgb_bar[lo:hi]
        sb = sil_bar[lo:hi]

        # color aggregation: softmax over triangle logits plus background
        cpix_bar = prob[..., None] * rb[:, None, :]
        gj = np.einsum("ptc,pc->pt", cpix, rb)
        gbg_dot = bg @ rb.T
        mean_g = (prob * gj).sum(axis=1) + pbg * gbg_dot
        logit_bar = prob * (gj - mean_g[:, None])
        lbg_bar = pbg * (gbg_dot - mean_g)
        logd_bar = logit_bar.copy()
        zbar_bar = logit_bar / gamma

        # silhouette: 1 - exp(sum log(1 - D))
        Lsum = tm["log1md"].sum(axis=1)
        log1md_bar = (-np.exp(Lsum) * sb)[:, None] * np.ones_like(tm["log1md"])
        if valid.any():
            # background logit = sum log(1 - D) + zbar_max / gamma
            log1md_bar += lbg_bar[:, None]
            rows = np.arange(argz.shape[0])
            zb_extra = np.zeros_like(zbar_bar)
            zb_extra[rows, argz] = lbg_bar / gamma
            zbar_bar = zbar_bar + zb_extra

        # cpix = sum_i lamc_i color_i
        lamc_bar = np.einsum("ptc,tic->pti", cpix_bar, colors_tri)
        ct_bar += np.einsum("ptc,pti->tic", cpix_bar, tm["lamc"])

        # coverage D through the signed squared distance
        arg_bar = _sigmoid(-tm["arg"]) * logd_bar
        arg_bar -= np.where(valid[None, :], _sigmoid(tm["arg"]), 0.0) * log1md_bar
        d2_bar = tm["delta"] / sigma * arg_bar

        # nearest-edge squared distance: only the argmin edge carries grad
        for k, (i0, i1) in enumerate(_EDGE):
            sel = (tm["kmin"] == k)
            if not sel.any():
                continue
            db = np.where(sel, d2_bar, 0.0)
            s1, s2 = v2[:, i0], v2[:, i1]
            e = (s2 - s1)[None]
            q = pp - s1[None]
            t = tm["te"][:, :, k][..., None]
            r = q - t * e
            r_bar = 2.0 * db[..., None] * r
            e_bar = -t * r_bar  # q_bar = r_bar; projection term vanishes
            v2_bar[:, i0] += (-r_bar - e_bar).sum(axis=0)
            v2_bar[:, i1] += e_bar.sum(axis=0)

        # depth proxy zbar, clipped outside [near, far]
        zr = tm["zbar_raw"]
        z_bar = np.where((zr > 0.0) & (zr < 1.0), -zbar_bar / (far - near), 0.0)
        lamc_bar += z_bar[..., None] * td[None]
        td_bar += np.einsum("pt,pti->ti", z_bar, tm["lamc"])

        # clamp-renormalized barycentrics
        s = tm["s"][..., None]
        dotp = (tm["lamc"] * lamc_bar).sum(axis=-1, keepdims=True)
        u_bar = (lamc_bar - dotp) / s
        lam = tm["lam"]
        lam_bar = np.where((lam > 0.0) & (lam < 1.0), u_bar, 0.0)

        # affine barycentrics from signed areas
        den = tm["safe_den"][None, :, None]
        w_bar = lam_bar / den
        den_bar = -(lam * lam_bar).sum(axis=-1) / tm["safe_den"][None, :]
        A, B, C = v2[:, 0], v2[:, 1], v2[:, 2]

        def perp(a):
            return np.stack([a[..., 1], -a[..., 0]], axis=-1)

        # cross2(a, b): a_bar = perp(b) * c, b_bar = -perp(a) * c
        # w0 = cross2(B - pp, C - pp)
        c0 = w_bar[..., 0:1]
        v2_bar[:, 1] += (perp(C - pp) * c0).sum(axis=0)
        v2_bar[:, 2] += (-perp(B - pp) * c0).sum(axis=0)
        # w1 = cross2(pp - A, C - A)
        c1 = w_bar[..., 1:2]
        a1, b1 = pp - A[None], (C - A)[None]
        v2_bar[:, 0] += (-(perp(b1) - perp(a1)) * c1).sum(axis=0)
        v2_bar[:, 2] += (-perp(a1) * c1).sum(axis=0)
        # w2 = cross2(B - A, pp - A)
        c2 = w_bar[..., 2:3]
        a2, b2 = (B - A)[None], pp - A[None]
        v2_bar[:, 0] += (-(perp(b2) - perp(a2)) * c2).sum(axis=0)
        v2_bar[:, 1] += (perp(b2) * c2).sum(axis=0)
        # den = cross2(B - A, C - A)
        cd = den_bar[..., None]
        ad, bd = (B - A)[None], (C - A)[None]
        v2_bar[:, 0] += (-(perp(bd) - perp(ad)) * cd).sum(axis=0)
        v2_bar[:, 1] += (perp(bd) * cd).sum(axis=0)
        v2_bar[:, 2] += (-perp(ad) * cd).sum(axis=0)

    ndc_bar = np.zeros_like(ndc)
    depth_bar = np.zeros_like(depth)
    colors_bar = np.zeros_like(colors)
    for i in range(3):
        np.add.at(ndc_bar, tris[:, i], v2_bar[:, i])
        np.add.at(depth_bar, tris[:, i], td_bar[:, i])
        np.add.at(colors_bar, tris[:, i], ct_bar[:, i])
    return ndc_bar, depth_bar, colors_bar


def hard_rasterize(ndc, depth, tris, colors, cam, settings):
    """Z-buffer reference: nearest covering triangle wins each pixel."""
    H, W = cam.height, cam.width
    near, far = cam.near, cam.far
    bg = np.asarray(settings.background, dtype=np.float64)
    v2 = ndc[tris]
    td = depth[tris]
    A, B, C = v2[:, 0], v2[:, 1], v2[:, 2]
    den = _cross2(B - A, C - A)
    valid = np.all(td >= near, axis=1) & (np.abs(den) > 1e-12)
    pix = pixel_centers(cam)
    tm = _pair_terms(pix, v2, td, valid, near, far, 1.0)
    cover = tm["inside"]
    z = np.where(cover, tm["z"], np.inf)
    best = np.argmin(z, axis=1)
    any_cover = cover.any(axis=1)
    lam = np.take_along_axis(tm["lamc"], best[:, None, None], axis=1)[:, 0]
    cbest = np.einsum("pi,pic->pc", lam, colors[tris][best])
    rgb = np.where(any_cover[:, None], cbest, bg[None])
    sil = any_cover.astype(np.float64)
    return rgb.reshape(H, W, 3), sil.reshape(H, W)
