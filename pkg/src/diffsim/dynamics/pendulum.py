"""Simple and double pendula in generalized coordinates (angles from the
downward vertical), semi-implicit Euler, with analytic adjoints.

The double pendulum uses point masses on massless rods and solves the 2x2
mass-matrix system explicitly.
"""

import numpy as np


def pendulum_accel(ang, rate, lengths, masses, g):
    """Generalized accelerations for a 1- or 2-link pendulum."""
    if len(ang) == 1:
        return np.array([-(g / lengths[0]) * np.sin(ang[0])])
    t1, t2 = ang
    w1, w2 = rate
    L1, L2 = lengths
    m1, m2 = masses
    d = t1 - t2
    cd, sd = np.cos(d), np.sin(d)
    M11 = (m1 + m2) * L1**2
    M12 = m2 * L1 * L2 * cd
    M22 = m2 * L2**2
    b1 = -m2 * L1 * L2 * w2**2 * sd - (m1 + m2) * g * L1 * np.sin(t1)
    b2 = m2 * L1 * L2 * w1**2 * sd - m2 * g * L2 * np.sin(t2)
    det = M11 * M22 - M12 * M12
    a1 = (M22 * b1 - M12 * b2) / det
    a2 = (M11 * b2 - M12 * b1) / det
    return np.array([a1, a2])


def pendulum_energy(ang, rate, lengths, masses, g):
    """Total mechanical energy (zero potential at the pivot)."""
    if len(ang) == 1:
        L, m = lengths[0], masses[0]
        return 0.5 * m * (L * rate[0]) ** 2 - m * g * L * np.cos(ang[0])
    t1, t2 = ang
    w1, w2 = rate
    L1, L2 = lengths
    m1, m2 = masses
    ke = 0.5 * m1 * (L1 * w1) ** 2 + 0.5 * m2 * (
        (L1 * w1) ** 2 + (L2 * w2) ** 2 + 2 * L1 * L2 * w1 * w2 * np.cos(t1 - t2)
    )
    pe = -(m1 + m2) * g * L1 * np.cos(t1) - m2 * g * L2 * np.cos(t2)
    return ke + pe


def pendulum_step(ang, rate, lengths, masses, g, dt):
    acc = pendulum_accel(ang, rate, lengths, masses, g)
    rate1 = rate + dt * acc
    ang1 = ang + dt * rate1
    return ang1, rate1


def _accel_vjp(ang, rate, lengths, masses, g, cot):
    """VJP of pendulum_accel: returns (ang_bar, rate_bar, L_bar, m_bar, g_bar)."""
    if len(ang) == 1:
        L = lengths[0]
        s, c = np.sin(ang[0]), np.cos(ang[0])
        a_bar = cot[0]
        return (
            np.array([-(g / L) * c * a_bar]),
            np.zeros(1),
            np.array([g * s / L**2 * a_bar]),
            np.zeros(1),
            -s / L * a_bar,
        )
    t1, t2 = ang
    w1, w2 = rate
    L1, L2 = lengths
    m1, m2 = masses
    d = t1 - t2
    cd, sd = np.cos(d), np.sin(d)
    s1, c1 = np.sin(t1), np.cos(t1)
    s2, c2 = np.sin(t2), np.cos(t2)
    M11 = (m1 + m2) * L1**2
    M12 = m2 * L1 * L2 * cd
    M22 = m2 * L2**2
    b1 = -m2 * L1 * L2 * w2**2 * sd - (m1 + m2) * g * L1 * s1
    b2 = m2 * L1 * L2 * w1**2 * sd - m2 * g * L2 * s2
    det = M11 * M22 - M12 * M12

    a1_bar, a2_bar = cot
    # a1 = (M22*b1 - M12*b2)/det, a2 = (M11*b2 - M12*b1)/det
    a1 = (M22 * b1 - M12 * b2) / det
    a2 = (M11 * b2 - M12 * b1) / det
    b1_bar = (M22 * a1_bar - M12 * a2_bar) / det
    b2_bar = (M11 * a2_bar - M12 * a1_bar) / det
    M11_bar = a2_bar * b2 / det
    M22_bar = a1_bar * b1 / det
    M12_bar = -(a1_bar * b2 + a2_bar * b1) / det
    det_bar = -(a1 * a1_bar + a2 * a2_bar) / det
    M11_bar += det_bar * M22
    M22_bar += det_bar * M11
    M12_bar += -2.0 * det_bar * M12

    # b1, b2
    sd_bar = -m2 * L1 * L2 * w2**2 * b1_bar + m2 * L1 * L2 * w1**2 * b2_bar
    w2_bar = -2.0 * m2 * L1 * L2 * w2 * sd * b1_bar
    w1_bar = 2.0 * m2 * L1 * L2 * w1 * sd * b2_bar
    s1_bar = -(m1 + m2) * g * L1 * b1_bar
    s2_bar = -m2 * g * L2 * b2_bar
    g_bar = -(m1 + m2) * L1 * s1 * b1_bar - m2 * L2 * s2 * b2_bar
    L1_bar = -m2 * L2 * w2**2 * sd * b1_bar - (m1 + m2) * g * s1 * b1_bar + m2 * L2 * w1**2 * sd * b2_bar
    L2_bar = -m2 * L1 * w2**2 * sd * b1_bar + m2 * L1 * w1**2 * sd * b2_bar - m2 * g * s2 * b2_bar
    m1_bar = -g * L1 * s1 * b1_bar
    m2_bar = -L1 * L2 * w2**2 * sd * b1_bar - g * L1 * s1 * b1_bar + (
        L1 * L2 * w1**2 * sd - g * L2 * s2
    ) * b2_bar

    # mass matrix
    L1_bar += 2.0 * (m1 + m2) * L1 * M11_bar + m2 * L2 * cd * M12_bar
    L2_bar += m2 * L1 * cd * M12_bar + 2.0 * m2 * L2 * M22_bar
    m1_bar += L1**2 * M11_bar
    m2_bar += L1**2 * M11_bar + L1 * L2 * cd * M12_bar + L2**2 * M22_bar
    cd_bar = m2 * L1 * L2 * M12_bar

    d_bar = cd_bar * (-sd) + sd_bar * cd
    t1_bar = d_bar + s1_bar * c1
    t2_bar = -d_bar + s2_bar * c2
    return (
        np.array([t1_bar, t2_bar]),
        np.array([w1_bar, w2_bar]),
        np.array([L1_bar, L2_bar]),
        np.array([m1_bar, m2_bar]),
        float(g_bar),
    )


def pendulum_step_vjp(ang, rate, lengths, masses, g, dt, ang1_bar, rate1_bar):
    """Adjoint of pendulum_step.

    Returns (ang_bar, rate_bar, L_bar, m_bar, g_bar).
    """
    rb = rate1_bar + dt * ang1_bar  # cotangent reaching rate1
    acc_bar = dt * rb
    a_ang, a_rate, L_bar, m_bar, g_bar = _accel_vjp(ang, rate, lengths, masses, g, acc_bar)
    ang_bar = ang1_bar + a_ang
    rate_bar = rb + a_rate
    return ang_bar, rate_bar, L_bar, m_bar, g_bar
