"""Thin-shell (cloth) forces: in-plane membrane, hinge bending, lift/drag.

Membrane: the stable neo-Hookean energy restricted to a 3x2 deformation
gradient per triangle,

    Psi = mu/2*(I_C - 2) + lam/2*(J - act)^2 - mu/2*log(I_C + 1)

with J = ||F_0 x F_1|| the area stretch. Bending follows the discrete hinge
of Bridson et al. with force magnitude kb*sin(phi/2 + act_edge), phi being
the deviation of the dihedral from its rest value. The aerodynamic model
applies quadratic normal drag and a tangential-speed-scaled lift along the
face normal, distributed equally to the three vertices.

All kernels come with hand-written reverse passes.
"""

import numpy as np


def shell_passive_activation(mu, lam):
    """Membrane activation making a rest-shaped triangle force-free."""
    return 1.0 + 2.0 * mu / (3.0 * lam)


# ---------------------------------------------------------------------------
# membrane


def _membrane_core(x, mesh):
    tri = mesh.triangles
    e1 = x[tri[:, 1]] - x[tri[:, 0]]
    e2 = x[tri[:, 2]] - x[tri[:, 0]]
    Di = mesh.Dm_inv
    F0 = e1 * Di[:, 0, 0, None] + e2 * Di[:, 1, 0, None]
    F1 = e1 * Di[:, 0, 1, None] + e2 * Di[:, 1, 1, None]
    IC = np.einsum("ei,ei->e", F0, F0) + np.einsum("ei,ei->e", F1, F1)
    n = np.cross(F0, F1)
    J = np.linalg.norm(n, axis=1)
    nh = n / J[:, None]
    G0 = np.cross(F1, nh)
    G1 = np.cross(nh, F0)
    return F0, F1, IC, n, J, nh, G0, G1


def membrane_energy(x, mesh, mu, lam, act):
    _, _, IC, _, J, _, _, _ = _membrane_core(x, mesh)
    psi = 0.5 * mu * (IC - 2.0) + 0.5 * lam * (J - act) ** 2 - 0.5 * mu * np.log(IC + 1.0)
    return float(np.sum(mesh.rest_area * psi))


def membrane_forces(x, mesh, mu, lam, act):
    F0, F1, IC, _, J, _, G0, G1 = _membrane_core(x, mesh)
    s = (1.0 - 1.0 / (IC + 1.0))[:, None]
    k = (lam * (J - act))[:, None]
    P0 = mu[:, None] * F0 * s + k * G0
    P1 = mu[:, None] * F1 * s + k * G1
    A = mesh.rest_area[:, None]
    Di = mesh.Dm_inv
    h1 = -A * (P0 * Di[:, 0, 0, None] + P1 * Di[:, 0, 1, None])
    h2 = -A * (P0 * Di[:, 1, 0, None] + P1 * Di[:, 1, 1, None])
    f = np.zeros_like(x)
    tri = mesh.triangles
    np.add.at(f, tri[:, 1], h1)
    np.add.at(f, tri[:, 2], h2)
    np.add.at(f, tri[:, 0], -(h1 + h2))
    return f


def membrane_forces_vjp(x, mesh, mu, lam, act, cot):
    """Returns (x_bar, mu_bar, lam_bar, act_bar)."""
    tri = mesh.triangles
    F0, F1, IC, n, J, nh, G0, G1 = _membrane_core(x, mesh)
    s = 1.0 - 1.0 / (IC + 1.0)

    u1 = cot[tri[:, 1]] - cot[tri[:, 0]]
    u2 = cot[tri[:, 2]] - cot[tri[:, 0]]
    A = mesh.rest_area[:, None]
    Di = mesh.Dm_inv
    # P_bar = -A * U * Dm_inv  (U columns u1, u2)
    W0 = -A * (u1 * Di[:, 0, 0, None] + u2 * Di[:, 1, 0, None])
    W1 = -A * (u1 * Di[:, 0, 1, None] + u2 * Di[:, 1, 1, None])

    dP_dmu0 = F0 * s[:, None]
    dP_dmu1 = F1 * s[:, None]
    PG = np.einsum("ei,ei->e", W0, G0) + np.einsum("ei,ei->e", W1, G1)
    mu_bar = np.einsum("ei,ei->e", W0, dP_dmu0) + np.einsum("ei,ei->e", W1, dP_dmu1)
    lam_bar = (J - act) * PG
    act_bar = -lam * PG

    # Hessian of Psi applied to W (symmetric)
    dIC = 2.0 * (np.einsum("ei,ei->e", F0, W0) + np.einsum("ei,ei->e", F1, W1))
    dn = np.cross(W0, F1) + np.cross(F0, W1)
    dJ = np.einsum("ei,ei->e", nh, dn)
    dnh = (dn - nh * dJ[:, None]) / J[:, None]
    dG0 = np.cross(W1, nh) + np.cross(F1, dnh)
    dG1 = np.cross(dnh, F0) + np.cross(nh, W0)
    k = lam * (J - act)
    c2 = (mu * dIC / (IC + 1.0) ** 2)[:, None]
    HW0 = mu[:, None] * W0 * s[:, None] + c2 * F0 + (lam * dJ)[:, None] * G0 + k[:, None] * dG0
    HW1 = mu[:, None] * W1 * s[:, None] + c2 * F1 + (lam * dJ)[:, None] * G1 + k[:, None] * dG1

    e1_bar = HW0 * Di[:, 0, 0, None] + HW1 * Di[:, 0, 1, None]
    e2_bar = HW0 * Di[:, 1, 0, None] + HW1 * Di[:, 1, 1, None]
    x_bar = np.zeros_like(x)
    np.add.at(x_bar, tri[:, 1], e1_bar)
    np.add.at(x_bar, tri[:, 2], e2_bar)
    np.add.at(x_bar, tri[:, 0], -(e1_bar + e2_bar))
    return x_bar, mu_bar, lam_bar, act_bar


# ---------------------------------------------------------------------------
# bending


def _hinge_geometry(x, edges):
    x1, x2 = x[edges[:, 0]], x[edges[:, 1]]  # wings
    x3, x4 = x[edges[:, 2]], x[edges[:, 3]]  # shared edge
    n1 = np.cross(x3 - x1, x4 - x1)
    n2 = np.cross(x4 - x2, x3 - x2)
    e = x4 - x3
    el = np.linalg.norm(e, axis=1)
    eh = e / el[:, None]
    a = np.einsum("ei,ei->e", np.cross(n2, n1), eh)
    b = np.einsum("ei,ei->e", n1, n2)
    theta = np.arctan2(a, b)
    return x1, x2, x3, x4, n1, n2, e, el, eh, a, b, theta


def dihedral_angles(x, edges):
    """Signed dihedral angle per hinge (0 for coplanar faces)."""
    return _hinge_geometry(x, edges)[-1]


def bending_forces(x, edges, rest_angle, kb, act):
    f = np.zeros_like(x)
    if len(edges) == 0:
        return f
    x1, x2, x3, x4, n1, n2, e, el, eh, a, b, theta = _hinge_geometry(x, edges)
    l1sq = np.einsum("ei,ei->e", n1, n1)
    l2sq = np.einsum("ei,ei->e", n2, n2)
    n1h = n1 / l1sq[:, None]
    n2h = n2 / l2sq[:, None]
    phi = theta - rest_angle
    mag = (-kb * np.sin(0.5 * phi + act) * el)[:, None]
    t14 = np.einsum("ei,ei->e", x1 - x4, eh)
    t24 = np.einsum("ei,ei->e", x2 - x4, eh)
    t31 = np.einsum("ei,ei->e", x3 - x1, eh)
    t32 = np.einsum("ei,ei->e", x3 - x2, eh)
    d1 = el[:, None] * n1h
    d2 = el[:, None] * n2h
    d3 = t14[:, None] * n1h + t24[:, None] * n2h
    d4 = t31[:, None] * n1h + t32[:, None] * n2h
    np.add.at(f, edges[:, 0], mag * d1)
    np.add.at(f, edges[:, 1], mag * d2)
    np.add.at(f, edges[:, 2], mag * d3)
    np.add.at(f, edges[:, 3], mag * d4)
    return f


def bending_forces_vjp(x, edges, rest_angle, kb, act, cot):
    """Returns (x_bar, kb_bar, act_bar); manual reverse of bending_forces."""
    x_bar = np.zeros_like(x)
    if len(edges) == 0:
        return x_bar, np.zeros_like(kb), np.zeros_like(act)
    x1, x2, x3, x4, n1, n2, e, el, eh, a, b, theta = _hinge_geometry(x, edges)
    l1sq = np.einsum("ei,ei->e", n1, n1)
    l2sq = np.einsum("ei,ei->e", n2, n2)
    n1h = n1 / l1sq[:, None]
    n2h = n2 / l2sq[:, None]
    phi = theta - rest_angle
    ph2 = 0.5 * phi + act
    mag = -kb * np.sin(ph2) * el
    t14 = np.einsum("ei,ei->e", x1 - x4, eh)
    t24 = np.einsum("ei,ei->e", x2 - x4, eh)
    t31 = np.einsum("ei,ei->e", x3 - x1, eh)
    t32 = np.einsum("ei,ei->e", x3 - x2, eh)
    d1 = el[:, None] * n1h
    d2 = el[:, None] * n2h
    d3 = t14[:, None] * n1h + t24[:, None] * n2h
    d4 = t31[:, None] * n1h + t32[:, None] * n2h

    g1, g2 = cot[edges[:, 0]], cot[edges[:, 1]]
    g3, g4 = cot[edges[:, 2]], cot[edges[:, 3]]

    dot = lambda p, q: np.einsum("ei,ei->e", p, q)
    mag_bar = dot(g1, d1) + dot(g2, d2) + dot(g3, d3) + dot(g4, d4)
    d1_bar = mag[:, None] * g1
    d2_bar = mag[:, None] * g2
    d3_bar = mag[:, None] * g3
    d4_bar = mag[:, None] * g4

    n1h_bar = el[:, None] * d1_bar + t14[:, None] * d3_bar + t31[:, None] * d4_bar
    n2h_bar = el[:, None] * d2_bar + t24[:, None] * d3_bar + t32[:, None] * d4_bar
    el_bar = dot(d1_bar, n1h) + dot(d2_bar, n2h)
    t14_bar = dot(d3_bar, n1h)
    t24_bar = dot(d3_bar, n2h)
    t31_bar = dot(d4_bar, n1h)
    t32_bar = dot(d4_bar, n2h)

    x1b = np.zeros_like(g1)
    x2b = np.zeros_like(g1)
    x3b = np.zeros_like(g1)
    x4b = np.zeros_like(g1)
    eh_bar = (
        t14_bar[:, None] * (x1 - x4)
        + t24_bar[:, None] * (x2 - x4)
        + t31_bar[:, None] * (x3 - x1)
        + t32_bar[:, None] * (x3 - x2)
    )
    x1b += t14_bar[:, None] * eh - t31_bar[:, None] * eh
    x2b += t24_bar[:, None] * eh - t32_bar[:, None] * eh
    x3b += (t31_bar + t32_bar)[:, None] * eh
    x4b += -(t14_bar + t24_bar)[:, None] * eh

    # mag = -kb*sin(ph2)*el
    kb_bar = -np.sin(ph2) * el * mag_bar
    ph2_bar = -kb * np.cos(ph2) * el * mag_bar
    el_bar += -kb * np.sin(ph2) * mag_bar
    act_bar = ph2_bar
    theta_bar = 0.5 * ph2_bar

    # theta = atan2(a, b)
    denom = a * a + b * b
    a_bar = b / denom * theta_bar
    b_bar = -a / denom * theta_bar

    n1_bar = b_bar[:, None] * n2
    n2_bar = b_bar[:, None] * n1
    # a = (n2 x n1) . eh
    c = np.cross(n2, n1)
    c_bar = a_bar[:, None] * eh
    eh_bar += a_bar[:, None] * c
    n2_bar += np.cross(n1, c_bar)
    n1_bar += np.cross(c_bar, n2)

    # n1h = n1/l1sq, l1sq = n1.n1
    n1_bar += n1h_bar / l1sq[:, None]
    l1sq_bar = -dot(n1h_bar, n1) / l1sq**2
    n1_bar += 2.0 * l1sq_bar[:, None] * n1
    n2_bar += n2h_bar / l2sq[:, None]
    l2sq_bar = -dot(n2h_bar, n2) / l2sq**2
    n2_bar += 2.0 * l2sq_bar[:, None] * n2

    # eh = e/el, el = |e|
    e_bar = eh_bar / el[:, None]
    el_bar += -dot(eh_bar, e) / el**2
    e_bar += el_bar[:, None] * eh
    x4b += e_bar
    x3b -= e_bar

    # n1 = (x3-x1) x (x4-x1), n2 = (x4-x2) x (x3-x2)
    v31_bar = np.cross(x4 - x1, n1_bar)
    v41_bar = np.cross(n1_bar, x3 - x1)
    x3b += v31_bar
    x4b += v41_bar
    x1b -= v31_bar + v41_bar
    v42_bar = np.cross(x3 - x2, n2_bar)
    v32_bar = np.cross(n2_bar, x4 - x2)
    x4b += v42_bar
    x3b += v32_bar
    x2b -= v42_bar + v32_bar

    np.add.at(x_bar, edges[:, 0], x1b)
    np.add.at(x_bar, edges[:, 1], x2b)
    np.add.at(x_bar, edges[:, 2], x3b)
    np.add.at(x_bar, edges[:, 3], x4b)
    return x_bar, kb_bar, act_bar


# ---------------------------------------------------------------------------
# aerodynamics


def aero_forces(x, v, mesh, c_drag, c_lift, wind):
    tri = mesh.triangles
    e1 = x[tri[:, 1]] - x[tri[:, 0]]
    e2 = x[tri[:, 2]] - x[tri[:, 0]]
    n = np.cross(e1, e2)
    nl = np.linalg.norm(n, axis=1)
    nh = n / nl[:, None]
    area = 0.5 * nl
    vmid = (v[tri[:, 0]] + v[tri[:, 1]] + v[tri[:, 2]]) / 3.0 - wind
    vn = np.einsum("ei,ei->e", nh, vmid)
    vt = vmid - vn[:, None] * nh
    vtn = np.linalg.norm(vt, axis=1)
    coef = -area * (c_drag * np.abs(vn) * vn + c_lift * vtn * vn)
    ftri = coef[:, None] * nh / 3.0
    f = np.zeros_like(x)
    for k in range(3):
        np.add.at(f, tri[:, k], ftri)
    return f


def aero_forces_vjp(x, v, mesh, c_drag, c_lift, wind, cot):
    """Returns (x_bar, v_bar); manual reverse of aero_forces."""
    tri = mesh.triangles
    e1 = x[tri[:, 1]] - x[tri[:, 0]]
    e2 = x[tri[:, 2]] - x[tri[:, 0]]
    n = np.cross(e1, e2)
    nl = np.linalg.norm(n, axis=1)
    nh = n / nl[:, None]
    area = 0.5 * nl
    vmid = (v[tri[:, 0]] + v[tri[:, 1]] + v[tri[:, 2]]) / 3.0 - wind
    vn = np.einsum("ei,ei->e", nh, vmid)
    vt = vmid - vn[:, None] * nh
    vtn = np.linalg.norm(vt, axis=1)
    coef = -area * (c_drag * np.abs(vn) * vn + c_lift * vtn * vn)

    g = cot[tri[:, 0]] + cot[tri[:, 1]] + cot[tri[:, 2]]  # cot on ftri (shared)
    dot = lambda p, q: np.einsum("ei,ei->e", p, q)
    coef_bar = dot(g, nh) / 3.0
    nh_bar = coef[:, None] * g / 3.0

    area_bar = -(c_drag * np.abs(vn) * vn + c_lift * vtn * vn) * coef_bar
    vn_bar = -area * (2.0 * c_drag * np.abs(vn) + c_lift * vtn) * coef_bar
    vtn_bar = -area * c_lift * vn * coef_bar

    # vtn = |vt|, vt = vmid - vn*nh
    safe = np.maximum(vtn, 1e-30)
    vt_bar = (vtn_bar / safe)[:, None] * vt
    vmid_bar = vt_bar
    vn_bar += -dot(vt_bar, nh)
    nh_bar += -vn[:, None] * vt_bar

    # vn = nh . vmid
    nh_bar += vn_bar[:, None] * vmid
    vmid_bar = vmid_bar + vn_bar[:, None] * nh

    # area = nl/2, nh = n/nl, nl = |n|
    nl_bar = 0.5 * area_bar
    n_bar = nh_bar / nl[:, None]
    nl_bar += -dot(nh_bar, n) / nl**2
    n_bar += nl_bar[:, None] * nh

    e1_bar = np.cross(e2, n_bar)
    e2_bar = np.cross(n_bar, e1)

    x_bar = np.zeros_like(x)
    np.add.at(x_bar, tri[:, 1], e1_bar)
    np.add.at(x_bar, tri[:, 2], e2_bar)
    np.add.at(x_bar, tri[:, 0], -(e1_bar + e2_bar))
    v_bar = np.zeros_like(v)
    for k in range(3):
        np.add.at(v_bar, tri[:, k], vmid_bar / 3.0)
    return x_bar, v_bar
