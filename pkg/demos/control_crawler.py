"""Teach a soft strip to crawl toward a goal image.

A deformable strip on a friction plane is actuated per tet element by a
small sinusoid-basis controller. The loss compares the final rendered
frame against a goal image of the strip shifted to the right; gradients of
the pixels with respect to the controller weights flow through both the
renderer and the physics.

Run:  python3 demos/control_crawler.py   (a few minutes)
"""

import numpy as np

from diffsim import engine
from diffsim.control import (ControlTask, SinusoidController, _image_loss,
                             optimize_policy)
from diffsim.dynamics.contact import ContactPlane
from diffsim.estimation import LossSpec, OptimizerConfig
from diffsim.meshes import box_tet_mesh
from diffsim.render.pipeline import render_frame
from diffsim.scene import Camera, FemBody, ModelParams, RasterSettings, Scene


def strip_scene(x0):
    mesh = box_tet_mesh(3, 1, 1, (0.6, 0.2, 0.2))
    body = FemBody(mesh, mass=0.5, mu=3e3, lam=3e3,
                   init_pos=(x0, 0.101, 0.0), actuated=True)
    return Scene(bodies=[body], planes=[ContactPlane()],
                 camera=Camera(position=(0.0, 0.25, 1.6),
                               target=(0.0, 0.15, 0.0), width=32, height=32),
                 raster=RasterSettings(sigma=3e-3, gamma=3e-3,
                                       background=(1.0, 1.0, 1.0)),
                 contact_ke=400.0, contact_kd=5.0, contact_kf=40.0,
                 contact_mu=0.6, dt=1.0 / 240.0, horizon=360,
                 render_stride=360)


def main():
    scene = strip_scene(-0.2)
    goal_scene = strip_scene(-0.05)
    goal_rgb, _, _ = render_frame(goal_scene, engine.initial_state(
        goal_scene, ModelParams.from_scene(goal_scene)))
    task = ControlTask(scene, target_rgb=goal_rgb,
                       spec=LossSpec("last-frame-mse", "rgb"))

    n_elem = scene.bodies[0].mesh.num_elements
    zero = SinusoidController(n_elem, weights=np.zeros((n_elem, 8)))
    zero_loss, _ = _image_loss(scene, None, task, {0: zero}, None)
    print(f"zero-policy loss : {zero_loss:.6f}")

    opt = OptimizerConfig(method="adam", lr=0.05, iters=50)
    _, result = optimize_policy(task, opt, seed=0)
    final = min(result.loss_trace)
    print(f"trained loss     : {final:.6f} "
          f"({final / zero_loss:.1%} of zero-policy)")


if __name__ == "__main__":
    main()
