"""Newton-Euler rigid body stepping with quaternion pose, plus contact
wrench assembly from mesh vertices, all with analytic adjoints.

The inertia tensor is stored per unit mass (uniform density), so I = m*Iu
and the mass gradient picks up both the linear and rotational channels.
The gyroscopic term uses omega at the start of the step (explicit) inside
the semi-implicit scheme.
"""

import numpy as np

from ..mathutil import normalize, normalize_vjp, quat_mul, quat_mul_vjp, quat_rotate, quat_rotate_vjp
from .contact import ground_contact_forces, ground_contact_forces_vjp


def rigid_step(x, r, v, w, f, tau, m, Iu, Iu_inv, dt):
    """One semi-implicit step. Returns (x1, r1, v1, w1)."""
    v1 = v + dt * f / m
    gyro = Iu_inv @ np.cross(w, Iu @ w)  # mass cancels in the gyroscopic term
    w1 = w + dt * (Iu_inv @ tau) / m - dt * gyro
    x1 = x + dt * v1
    qw = np.concatenate(([0.0], w1))
    r_pre = r + 0.5 * dt * quat_mul(qw, r)
    r1 = normalize(r_pre)
    return x1, r1, v1, w1


def rigid_step_vjp(x, r, v, w, f, tau, m, Iu, Iu_inv, dt, x1_bar, r1_bar, v1_bar, w1_bar):
    """Adjoint of rigid_step.

    Returns (x_bar, r_bar, v_bar, w_bar, f_bar, tau_bar, m_bar).
    """
    v1 = v + dt * f / m
    w1 = w + dt * (Iu_inv @ tau) / m - dt * (Iu_inv @ np.cross(w, Iu @ w))
    qw = np.concatenate(([0.0], w1))
    r_pre = r + 0.5 * dt * quat_mul(qw, r)

    # r1 = normalize(r_pre)
    rp_bar = normalize_vjp(r_pre, r1_bar)
    r_bar = rp_bar.copy()
    dq_bar = 0.5 * dt * rp_bar
    qw_bar, r_bar2 = quat_mul_vjp(qw, r, dq_bar)
    r_bar += r_bar2
    w1_tot = w1_bar + qw_bar[1:]

    # x1 = x + dt*v1
    x_bar = x1_bar.copy()
    v1_tot = v1_bar + dt * x1_bar

    # v1 = v + dt*f/m
    v_bar = v1_tot.copy()
    f_bar = dt * v1_tot / m
    m_bar = -dt * np.dot(f, v1_tot) / m**2

    # w1 = w + dt*Iu_inv@tau/m - dt*Iu_inv@(w x Iu w)
    tau_bar = dt * (Iu_inv @ w1_tot) / m
    m_bar += -dt * np.dot(Iu_inv @ tau, w1_tot) / m**2
    u = Iu_inv @ w1_tot
    w_bar = w1_tot - dt * (np.cross(Iu @ w, u) + Iu @ np.cross(u, w))
    return x_bar, r_bar, v_bar, w_bar, f_bar, tau_bar, m_bar


def world_vertices(x, r, verts_local):
    return x + quat_rotate(r, verts_local)


def rigid_contact_wrench(x, r, v, w, verts_local, plane, ke, kd, kf, mu_c):
    """Contact force/torque on a rigid body from plane contact at its
    mesh vertices. Returns (f, tau)."""
    arms = quat_rotate(r, verts_local)
    p = x + arms
    vp = v + np.cross(w, arms)
    fc = ground_contact_forces(p, vp, plane, ke, kd, kf, mu_c)
    f = fc.sum(axis=0)
    tau = np.cross(arms, fc).sum(axis=0)
    return f, tau


def rigid_contact_wrench_vjp(x, r, v, w, verts_local, plane, ke, kd, kf, mu_c, f_bar, tau_bar):
    """Adjoint of rigid_contact_wrench.

    Returns (x_bar, r_bar, v_bar, w_bar, ke_bar, kd_bar, kf_bar, mu_bar).
    """
    arms = quat_rotate(r, verts_local)
    p = x + arms
    vp = v + np.cross(w, arms)
    fc = ground_contact_forces(p, vp, plane, ke, kd, kf, mu_c)

    fc_bar = f_bar[None, :] + np.cross(tau_bar[None, :], arms)
    arms_bar = np.cross(fc, tau_bar[None, :])

    p_bar, vp_bar, ke_bar, kd_bar, kf_bar, mu_bar = ground_contact_forces_vjp(
        p, vp, plane, ke, kd, kf, mu_c, fc_bar
    )
    x_bar = p_bar.sum(axis=0)
    arms_bar = arms_bar + p_bar
    v_bar = vp_bar.sum(axis=0)
    w_bar = np.cross(arms, vp_bar).sum(axis=0)
    arms_bar = arms_bar + np.cross(vp_bar, w[None, :])
    r_bar, _ = quat_rotate_vjp(r, verts_local, arms_bar)
    return x_bar, r_bar, v_bar, w_bar, ke_bar, kd_bar, kf_bar, mu_bar
