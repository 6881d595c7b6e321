import time
import numpy as np
from diffsim import engine, meshes
from diffsim.estimation import Adam, LossSpec, frame_loss, render_target, project_box
from diffsim.engine import backward, rollout
from diffsim.scene import Camera, ModelParams, RasterSettings, RigidBody, Scene

def make_scene():
    verts, tris = meshes.box_surface((0.4, 0.4, 0.4))
    body = RigidBody(verts, tris, mass=1.0, init_pos=(-0.6, 0.4, 0.0))
    return Scene(bodies=[body],
                 camera=Camera(position=(0.0, 0.6, 3.2), target=(0.0, 0.5, 0.0),
                               width=64, height=64),
                 raster=RasterSettings(sigma=3e-3, gamma=3e-3,
                                       background=(1.0, 1.0, 1.0)),
                 dt=1.0/60.0, horizon=60, render_stride=1)

J = np.array([1.2, 2.4, 0.0])  # known impulse
spec = LossSpec("first-last-mse", "rgb")

def params_for(sc, m):
    p = ModelParams.from_scene(sc)
    p.set("body.0.mass", np.array(float(m)))
    p.set("body.0.init_vel", J / m)
    return p

sc = make_scene()
target = render_target(sc, params_for(sc, 1.0), spec)

def loss_grad(m):
    p = params_for(sc, m)
    tape, frames = rollout(sc, p, render=True,
                           frames_needed=set(spec.selected(target.num_frames)))
    loss, d_frames = frame_loss(frames, target, spec)
    g = backward(tape, d_frames=d_frames)
    gm = float(g.to_vector(["body.0.mass"])[0])
    gv = g.to_vector(["body.0.init_vel"])
    gm += float(gv @ (-J / m**2))
    return loss, gm

rng = np.random.default_rng(123)
t0 = time.time()
results = []
for seed in range(10):
    m = float(np.random.default_rng(seed).uniform(0.1, 5.0))
    ad = Adam(0.1)
    x = m
    for it in range(200):
        loss, g = loss_grad(x)
        if loss < 1e-12:
            break
        x = float(project_box(ad.step(np.array([x]), np.array([g])), 0.05, 10.0)[0])
    results.append((seed, m, x, abs(x-1.0), it))
    print(f"seed {seed}: init {m:.3f} -> {x:.5f} (err {abs(x-1.0)*100:.3f}%) iters {it}")
print("total s", time.time()-t0)
print("within 1%:", sum(abs(r[2]-1.0) < 0.01 for r in results))
