import numpy as np

from diffsim import engine, meshes
from diffsim.dynamics.contact import ContactPlane
from diffsim.scene import FemBody, ModelParams, PendulumBody, RigidBody, Scene, ShellBody

rng = np.random.default_rng(0)


def state_loss_and_grads(scene, params, keys, controllers=None):
    """loss = sum over bodies of sum(q * final positions-ish); returns (loss, vec grad)."""
    tape, _ = engine.rollout(scene, params, controllers=controllers)
    fin = tape.final_state
    loss = 0.0
    cots = []
    for s in fin:
        cot = {}
        for k, v in s.items():
            q = np.sin(np.arange(np.size(v)) + 1.0).reshape(np.shape(v))
            loss += np.sum(q * v)
            cot[k] = q
        cots.append(cot)
    grads = engine.backward(tape, d_states={tape.horizon: cots})
    return loss, grads.to_vector(keys), grads


def fd_check(scene, base, keys, controllers=None, eps=1e-6, tag=""):
    loss, g, _ = state_loss_and_grads(scene, base, keys, controllers)
    x0 = base.to_vector(keys)

    def fun(vec):
        p = base.from_vector(keys, vec)
        l, _, _ = state_loss_and_grads(scene, p, keys, controllers)
        return l

    fd = np.zeros_like(x0)
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = eps * max(1.0, abs(x0[i]))
        fd[i] = (fun(x0 + e) - fun(x0 - e)) / (2 * e[i])
    err = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-3 * np.abs(fd).max() + 1e-9)
    print(f"{tag}: max rel err {err.max():.3e}  (|g| {np.abs(g).max():.3e})")
    assert err.max() < 1e-4, (g, fd)


# 1. free fall fem cube: dL/dv0 exact = T*dt * sum(q_x rows)
mesh = meshes.box_tet_mesh(1, 1, 1)
sc = Scene(bodies=[FemBody(mesh, mass=2.0, mu=1e4, lam=1e4, init_pos=(0, 5, 0))],
           horizon=12, dt=1e-3)
p = ModelParams.from_scene(sc)
loss, g, grads = state_loss_and_grads(sc, p, ["body.0.init_vel"])
qx = np.sin(np.arange(24) + 1.0).reshape(8, 3)
exact = (sc.horizon * sc.dt + 1.0) * qx.sum(axis=0)  # x and v cotangents
print("freefall v0 grad vs exact:", np.abs(g[:3] - exact).max())
assert np.abs(g[:3] - exact).max() < 1e-12

fd_check(sc, p, ["body.0.init_vel", "body.0.mu", "body.0.lam", "gravity"],
         tag="fem freefall")

# 2. fem cube hitting plane with friction
sc2 = Scene(bodies=[FemBody(mesh, mass=1.0, mu=5e3, lam=5e3, init_pos=(0, 0.4, 0),
                            init_vel=(1.0, -3.0, 0.2))],
            planes=[ContactPlane()], contact_ke=200.0, contact_kd=20.0,
            contact_kf=30.0, contact_mu=0.6, horizon=40, dt=1.0 / 240.0)
p2 = ModelParams.from_scene(sc2)
fd_check(sc2, p2, ["body.0.mass", "body.0.mu", "body.0.lam", "contact.ke",
                   "contact.kd", "contact.kf", "contact.mu_c",
                   "body.0.init_vel"], tag="fem contact")

# 3. rigid box bouncing
verts, tris = meshes.box_surface((0.4, 0.4, 0.4))
sc3 = Scene(bodies=[RigidBody(verts, tris, mass=2.0, init_pos=(0, 0.25, 0),
                              init_vel=(0.5, -2.0, 0.0), init_omega=(0.2, 1.0, -0.3))],
            planes=[ContactPlane()], contact_ke=300.0, contact_kd=15.0,
            contact_kf=25.0, contact_mu=0.4, horizon=40, dt=1.0 / 240.0)
p3 = ModelParams.from_scene(sc3)
fd_check(sc3, p3, ["body.0.mass", "body.0.init_vel", "body.0.init_omega",
                   "contact.ke", "contact.mu_c", "gravity"], tag="rigid contact")

# 4. double pendulum
sc4 = Scene(bodies=[PendulumBody(lengths=(1.0, 0.7), masses=(1.0, 0.5),
                                 init_angles=(0.8, -0.3), init_rates=(0.1, 0.4))],
            horizon=60, dt=1e-3)
p4 = ModelParams.from_scene(sc4)
fd_check(sc4, p4, ["body.0.length", "body.0.mass", "body.0.init_angle",
                   "body.0.init_rate"], tag="double pendulum")

# 5. pinned cloth in wind
cm = meshes.cloth_grid(4, 4, size=(1.0, 1.0))
cloth = ShellBody(cm, mass=0.2, mu=200.0, lam=200.0, kb=0.05, fixed=(0, 3),
                  init_pos=(0, 1.0, 0), wind=(1.0, 0.0, 0.5))
sc5 = Scene(bodies=[cloth], horizon=25, dt=1e-3)
p5 = ModelParams.from_scene(sc5)
fd_check(sc5, p5, ["body.0.mu", "body.0.lam", "body.0.kb", "body.0.init_vel",
                   "body.0.mass"], tag="cloth", eps=1e-5)

print("engine checks ok")
