"""Controller and visuomotor-control tests."""

import numpy as np
import pytest

from conftest import rel_err_scaled

from diffsim import engine, meshes
from diffsim.control import (ControlTask, SinusoidController,
                             com_trajectory_loss, optimize_initial_velocity,
                             optimize_policy)
from diffsim.estimation import LossSpec, OptimizerConfig
from diffsim.scene import Camera, FemBody, ModelParams, RasterSettings, Scene
from diffsim.dynamics.contact import ContactPlane


def test_controller_output_is_bounded_by_scale():
    rng = np.random.default_rng(0)
    c = SinusoidController(6, scale=0.25,
                           weights=rng.standard_normal((6, 8)) * 10.0)
    for t in np.linspace(0.0, 3.0, 50):
        out = c.forward(t)
        assert out.shape == (6,)
        # tanh saturates to 1.0 in floating point, so the bound is inclusive
        assert np.all(np.abs(out) <= 0.25)


def test_zero_weights_reproduce_passive_rollout_exactly():
    mesh = meshes.box_tet_mesh(1, 1, 1)
    sc = Scene(bodies=[FemBody(mesh, mass=1.0, mu=2e3, lam=2e3,
                               init_pos=(0, 0.5, 0), actuated=True)],
               planes=[ContactPlane()], horizon=30, dt=1.0 / 240.0)
    p = ModelParams.from_scene(sc)
    passive, _ = engine.rollout(sc, p)
    zero = SinusoidController(mesh.num_elements,
                              weights=np.zeros((mesh.num_elements, 8)))
    driven, _ = engine.rollout(sc, p, controllers={0: zero})
    for a, b in zip(passive.final_state, driven.final_state):
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])


def test_policy_loss_weight_gradient_vs_fd():
    # small actuated block on the ground, goal-image loss; FD over a sample
    # of controller weights
    from diffsim.control import _image_loss

    mesh = meshes.box_tet_mesh(1, 1, 1, size=(0.4, 0.4, 0.4))
    n_elem = mesh.num_elements
    sc = Scene(bodies=[FemBody(mesh, mass=0.5, mu=2e3, lam=2e3,
                               init_pos=(0, 0.21, 0), actuated=True)],
               planes=[ContactPlane()],
               camera=Camera(position=(0, 0.5, 2.0), target=(0, 0.2, 0),
                             width=20, height=20),
               raster=RasterSettings(sigma=3e-3, gamma=3e-3),
               horizon=24, dt=1.0 / 240.0, render_stride=8)
    task = ControlTask(sc, target_rgb=np.zeros((20, 20, 3)),
                       spec=LossSpec("last-frame-mse", "rgb"))
    rng = np.random.default_rng(3)
    W0 = rng.normal(0.0, 0.2, (n_elem, 8))

    def loss_of(W):
        c = SinusoidController(n_elem, weights=W)
        return _image_loss(sc, None, task, {0: c}, None)

    _, grads = loss_of(W0)
    g = grads.d_control[0]
    eps = 1e-5
    for (i, j) in [(0, 0), (1, 3), (3, 7), (4, 2)]:
        Wp = W0.copy()
        Wp[i, j] += eps
        Wm = W0.copy()
        Wm[i, j] -= eps
        fd = (loss_of(Wp)[0] - loss_of(Wm)[0]) / (2 * eps)
        assert abs(g[i, j] - fd) / max(abs(fd), 1e-8) < 1e-3


def test_com_trajectory_loss_gradient_vs_fd():
    # state-supervised tracking loss: FD over the initial velocity
    mesh = meshes.box_tet_mesh(1, 1, 1)
    sc = Scene(bodies=[FemBody(mesh, mass=1.0, mu=2e3, lam=2e3,
                               init_pos=(0, 0.5, 0))],
               horizon=20, dt=1.0 / 240.0)
    p = ModelParams.from_scene(sc)
    tgt = np.array([0.4, 0.2, 0.1])
    key = "body.0.init_vel"

    def loss_of(vec):
        return com_trajectory_loss(sc, p.from_vector([key], vec), 0, tgt)

    x0 = p.to_vector([key])
    _, grads = loss_of(x0)
    g = grads.to_vector([key])
    eps = 1e-6
    fd = np.zeros(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = eps
        fd[i] = (loss_of(x0 + e)[0] - loss_of(x0 - e)[0]) / (2 * eps)
    assert rel_err_scaled(g, fd) < 1e-4


def _toss_scene():
    mesh = meshes.box_tet_mesh(1, 1, 1, size=(0.4, 0.4, 0.4))
    sc = Scene(bodies=[FemBody(mesh, mass=0.5, mu=2e3, lam=2e3,
                               init_pos=(0.0, 0.5, 0.0))],
               camera=Camera(position=(0.0, 0.8, 3.0), target=(0.3, 0.5, 0),
                             width=24, height=24),
               raster=RasterSettings(sigma=3e-3, gamma=3e-3),
               horizon=48, dt=1.0 / 240.0, render_stride=8)
    return sc


def test_optimize_initial_velocity_reduces_goal_image_loss():
    sc = _toss_scene()
    # target: the same body rendered where a known velocity carries it
    p_true = ModelParams.from_scene(sc)
    p_true.set("body.0.init_vel", np.array([1.5, 1.0, 0.0]))
    from diffsim.estimation import render_target
    spec = LossSpec("last-frame-mse", "rgb")
    target = render_target(sc, p_true, spec)
    task = ControlTask(sc, target_rgb=target.rgb[target.num_frames - 1],
                       spec=spec)
    opt = OptimizerConfig(method="adam", lr=0.25, iters=15)
    params, res = optimize_initial_velocity(task, opt)
    assert res.loss_trace[-1] < 0.5 * res.loss_trace[0]


def test_optimize_policy_rejects_rigid_bodies():
    from diffsim.scene import RigidBody
    verts, tris = meshes.box_surface((0.4, 0.4, 0.4))
    sc = Scene(bodies=[RigidBody(verts, tris)], horizon=8, render_stride=2)
    task = ControlTask(sc, target_rgb=np.zeros((64, 64, 3)))
    with pytest.raises(ValueError):
        optimize_policy(task, OptimizerConfig(iters=1))
