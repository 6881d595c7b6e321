"""Semi-implicit Euler particle integration and its adjoint.

Convention: the gravity vector g enters the velocity update with a minus
sign, so a scene with downward gravity along -y stores g = (0, 9.8, 0).
Static particles (inv_mass == 0) are immune to both forces and gravity.
"""

import numpy as np


class SimulationError(RuntimeError):
    """Raised when non-finite state or forces are detected mid-rollout."""


def integrate_particles(x, v, f, w, g, dt):
    """One symplectic Euler step: returns (x1, v1).

    v1 = v + (f*w - g*step(w))*dt,  x1 = x + v1*dt,
    with step(w) = 1 for dynamic particles (w > 0) and 0 for static ones.
    """
    if not np.all(np.isfinite(f)):
        bad = int(np.argwhere(~np.isfinite(f).all(axis=1))[0])
        raise SimulationError(f"non-finite force on particle {bad}")
    dyn = (w > 0.0)[:, None]
    v1 = v + (f * w[:, None] - g * dyn) * dt
    x1 = x + v1 * dt
    return x1, v1


def integrate_particles_vjp(x, v, f, w, g, dt, x1_bar, v1_bar):
    """Adjoint of integrate_particles.

    Returns (x_bar, v_bar, f_bar, w_bar, g_bar). w_bar treats step(w) as
    locally constant (it is piecewise constant).
    """
    dyn = (w > 0.0)[:, None]
    vb = v1_bar + dt * x1_bar  # total cotangent reaching v1
    x_bar = x1_bar.copy()
    v_bar = vb
    f_bar = vb * (w[:, None] * dt)
    w_bar = dt * np.sum(vb * f, axis=1)
    g_bar = -dt * np.sum(vb * dyn, axis=0)
    return x_bar, v_bar, f_bar, w_bar, g_bar
