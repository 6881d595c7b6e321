"""Penalty ground contact with relaxed Coulomb friction.

Normal force: f_n = n*(ke*C + kd*Cdot) with C = max(0, -(n.x - offset)) the
penetration depth and Cdot = -n.v its rate; active only for vertices within
the generation threshold of the plane. Friction acts in the fixed tangent
basis of the plane with magnitude min(kf*||u_s||, mu_c*|f_n|), so the
Coulomb cap ||f_f|| <= mu_c*|f_n| holds exactly.

Both force terms are only C0 continuous (hinge at C=0, cap at the Coulomb
limit); the adjoint uses the one-sided derivative of the active branch.
"""

import numpy as np

from ..mathutil import normalize


class ContactPlane:
    """Plane {p : n.p = offset} with unit normal n and contact threshold d."""

    def __init__(self, normal=(0.0, 1.0, 0.0), offset=0.0, threshold=0.0):
        self.normal = normalize(np.asarray(normal, dtype=np.float64))
        self.offset = float(offset)
        self.threshold = float(threshold)
        # deterministic tangent basis from the normal
        a = np.zeros(3)
        a[int(np.argmin(np.abs(self.normal)))] = 1.0
        t1 = normalize(np.cross(self.normal, a))
        t2 = np.cross(self.normal, t1)
        self.tangents = np.stack([t1, t2])  # (2, 3)


def ground_contact_forces(x, v, plane, ke, kd, kf, mu_c):
    """Per-vertex contact forces against one plane, shape like x."""
    n = plane.normal
    s = x @ n - plane.offset
    active = (s < plane.threshold) & (s < 0.0)
    C = np.maximum(0.0, -s)
    Cdot = -(v @ n)
    fn = (ke * C + kd * Cdot) * active
    fn_abs = np.abs(fn)

    us = v @ plane.tangents.T  # (N, 2) sliding velocity
    us_norm = np.linalg.norm(us, axis=1)
    raw = kf * us_norm
    ff_mag = np.minimum(raw, mu_c * fn_abs)
    safe = np.maximum(us_norm, 1e-30)
    ff = -(ff_mag / safe)[:, None] * (us @ plane.tangents)

    return fn[:, None] * n + np.where(active[:, None], ff, 0.0)


def ground_contact_forces_vjp(x, v, plane, ke, kd, kf, mu_c, cot):
    """Adjoint: returns (x_bar, v_bar, ke_bar, kd_bar, kf_bar, mu_bar)."""
    n = plane.normal
    s = x @ n - plane.offset
    active = (s < plane.threshold) & (s < 0.0)
    C = np.maximum(0.0, -s)
    Cdot = -(v @ n)
    fn = (ke * C + kd * Cdot) * active
    fn_abs = np.abs(fn)
    sgn_fn = np.sign(fn)

    us = v @ plane.tangents.T
    us_norm = np.linalg.norm(us, axis=1)
    raw = kf * us_norm
    capped = raw >= mu_c * fn_abs
    safe = np.maximum(us_norm, 1e-30)
    ushat = us / safe[:, None]

    # normal part: f += fn*n
    fn_bar = cot @ n
    # friction part: f += -min(kf*|us|, mu*|fn|) * ushat (in world space)
    cot_t = cot @ plane.tangents.T  # (N, 2)
    cot_t = np.where(active[:, None], cot_t, 0.0)
    mmag_bar = -np.einsum("ni,ni->n", cot_t, ushat)
    # direction term: d(ushat) = (I - ushat ushat^T)/|us| dus
    ff_mag = np.minimum(raw, mu_c * fn_abs)
    dir_bar = -(ff_mag / safe)[:, None] * (cot_t - ushat * np.einsum("ni,ni->n", cot_t, ushat)[:, None])

    kf_bar = np.sum(np.where(capped, 0.0, us_norm * mmag_bar))
    mu_bar = np.sum(np.where(capped, fn_abs * mmag_bar, 0.0))
    fn_bar = fn_bar + np.where(capped, mu_c * sgn_fn * mmag_bar, 0.0)
    us_bar = np.where(capped, 0.0, kf * mmag_bar)[:, None] * ushat + dir_bar

    fn_bar = fn_bar * active
    ke_bar = float(np.sum(fn_bar * C))
    kd_bar = float(np.sum(fn_bar * Cdot))
    C_bar = ke * fn_bar
    Cdot_bar = kd * fn_bar

    x_bar = (-C_bar * active)[:, None] * n
    v_bar = (-Cdot_bar)[:, None] * n + us_bar @ plane.tangents
    return x_bar, v_bar, ke_bar, kd_bar, kf_bar, float(mu_bar)
