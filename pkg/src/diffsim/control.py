"""Open-loop visuomotor control: a bank of phase-shifted sinusoids feeding a
zero-bias linear layer with tanh squashing, producing per-element activation
offsets; optimized against a single target image. Also initial-velocity
optimization for tossed cloth, and a 3D center-of-mass tracking loss used as
the state-supervised comparison arm."""

from dataclasses import dataclass, field

import numpy as np

from .dynamics.particles import SimulationError
from .engine import backward, rollout
from .estimation import (EstimationResult, LossSpec, frame_loss,
                         make_optimizer, project_box)


class SinusoidController:
    """out(t) = scale * tanh(W @ [sin(omega_i t + phi_i)]), one row per
    actuated element; |out| < scale for all t."""

    def __init__(self, num_elements, num_signals=8, omega=2.0 * np.pi,
                 phases=None, scale=0.3, rng=None, weights=None):
        self.num_signals = num_signals
        self.omega = np.full(num_signals, omega) if np.isscalar(omega) \
            else np.asarray(omega, dtype=np.float64)
        self.phases = (2.0 * np.pi * np.arange(num_signals) / num_signals
                       if phases is None
                       else np.asarray(phases, dtype=np.float64))
        self.scale = float(scale)
        if weights is not None:
            self.W = np.asarray(weights, dtype=np.float64).reshape(
                num_elements, num_signals)
        else:
            rng = rng or np.random.default_rng(0)
            self.W = rng.normal(0.0, 0.01, (num_elements, num_signals))
        if not np.all(np.isfinite(self.W)):
            raise ValueError("controller weights must be finite")
        self.dW = np.zeros_like(self.W)

    def signals(self, t):
        return np.sin(self.omega * t + self.phases)

    def forward(self, t):
        return self.scale * np.tanh(self.W @ self.signals(t))

    def backward(self, t, out_bar):
        s = self.signals(t)
        th = np.tanh(self.W @ s)
        pre_bar = self.scale * (1.0 - th * th) * out_bar
        self.dW += np.outer(pre_bar, s)

    def reset_grad(self):
        self.dW[:] = 0.0

    def weight_grad(self):
        return self.dW.copy()


@dataclass
class ControlTask:
    scene: object
    target_rgb: np.ndarray = None
    target_sil: np.ndarray = None
    body: int = 0
    spec: LossSpec = field(default_factory=lambda: LossSpec("last-frame-mse",
                                                            "rgb"))


def _target_frames(scene, task, num):
    """Wrap a single goal image as a FrameSequence holding the last frame."""
    from .engine import FrameSequence

    fr = FrameSequence(num, scene.camera, scene.render_stride)
    last = num - 1
    if task.spec.channel == "rgb":
        if task.target_rgb is None:
            raise ValueError("task needs target_rgb for an rgb loss")
        if task.target_rgb.shape != fr.rgb[last].shape:
            raise ValueError("target image size does not match the camera")
        fr.rgb[last] = task.target_rgb
    else:
        if task.target_sil is None:
            raise ValueError("task needs target_sil for a silhouette loss")
        if task.target_sil.shape != fr.sil[last].shape:
            raise ValueError("target image size does not match the camera")
        fr.sil[last] = task.target_sil
    fr.rendered[last] = True
    return fr


def _image_loss(scene, params, task, controllers, keys):
    num = scene.horizon // scene.render_stride
    target = _target_frames(scene, task, num)
    sel = set(task.spec.selected(num))
    tape, frames = rollout(scene, params, controllers=controllers,
                           render=True, frames_needed=sel)
    # the target holds only the goal frame; other selected frames must match
    for f in sel:
        target.rendered[f] = True
    loss, d_frames = frame_loss(frames, target, task.spec)
    for _, c in controllers.items():
        c.reset_grad()
    grads = backward(tape, d_frames=d_frames)
    return loss, grads


def optimize_policy(task, opt, seed=0, controller=None):
    """Train controller weights against the task's goal image.

    Returns (controller carrying the best-so-far weights, EstimationResult).
    """
    scene = task.scene
    body = scene.bodies[task.body]
    if body.kind == "fem":
        n_elem = body.mesh.num_elements
    elif body.kind == "shell":
        n_elem = body.mesh.num_edges
    else:
        raise ValueError("policy control needs a deformable or cloth body")
    if controller is None:
        controller = SinusoidController(n_elem,
                                        rng=np.random.default_rng(seed))
    controllers = {task.body: controller}
    optimizer = make_optimizer(opt)
    result = EstimationResult(None)
    best = (np.inf, controller.W.copy())
    halved = False
    for it in range(opt.iters + 1):
        try:
            loss, grads = _image_loss(scene, None, task, controllers, None)
        except SimulationError as err:
            if halved:
                result.diagnostics.append(
                    f"iteration {it}: diverged twice ({err}); aborting")
                break
            result.diagnostics.append(
                f"iteration {it}: diverged ({err}); halving lr and retrying")
            halved = True
            controller.W = best[1].copy()
            optimizer = make_optimizer(opt, opt.lr / 2.0)
            continue
        result.loss_trace.append(loss)
        result.param_trace.append(controller.W.ravel().copy())
        result.wall_ms.append(0.0)
        if loss < best[0]:
            best = (loss, controller.W.copy())
        if loss <= opt.tol or it == opt.iters:
            break
        g = grads.d_control[task.body].ravel()
        w = optimizer.step(controller.W.ravel(), g)
        controller.W = w.reshape(controller.W.shape)
    controller.W = best[1]
    return controller, result


def optimize_initial_velocity(task, opt, per_particle=False):
    """Optimize the initial velocity of a tossed body against a goal image.

    Default: one shared 3-vector. With per_particle=True the velocity field
    is free per vertex. Returns (params, EstimationResult).
    """
    from .scene import ModelParams

    scene = task.scene
    params = ModelParams.from_scene(scene)
    key = f"body.{task.body}.init_vel"
    if per_particle:
        n = scene.bodies[task.body].mesh.num_vertices
        params.body[task.body]["init_vel"] = np.broadcast_to(
            params.get(key), (n, 3)).copy()
    keys = [key]
    x = params.to_vector(keys)
    optimizer = make_optimizer(opt)
    result = EstimationResult(params)
    best = (np.inf, x.copy())
    halved = False
    for it in range(opt.iters + 1):
        cand = params.from_vector(keys, x)
        try:
            loss, grads = _image_loss(scene, cand, task, {}, keys)
        except SimulationError as err:
            if halved:
                result.diagnostics.append(
                    f"iteration {it}: diverged twice ({err}); aborting")
                break
            result.diagnostics.append(
                f"iteration {it}: diverged ({err}); halving lr and retrying")
            halved = True
            x = best[1].copy()
            optimizer = make_optimizer(opt, opt.lr / 2.0)
            continue
        result.loss_trace.append(loss)
        result.param_trace.append(x.copy())
        result.wall_ms.append(0.0)
        if loss < best[0]:
            best = (loss, x.copy())
        if loss <= opt.tol or it == opt.iters:
            break
        x = project_box(optimizer.step(x, grads.to_vector(keys)),
                        opt.lower, opt.upper)
    result.params = params.from_vector(keys, best[1])
    return result.params, result


def com_trajectory_loss(scene, params, body, target_point, controllers=None):
    """State-supervised comparison arm: mean squared distance between the
    body's center of mass and a fixed 3D target at every step. Returns
    (loss, GradBuffer)."""
    tape, _ = rollout(scene, params, controllers=controllers)
    T = tape.horizon
    tgt = np.asarray(target_point, dtype=np.float64)
    loss = 0.0
    d_states = {}
    for s in range(1, T + 1):
        x = tape.states[s][body]["x"]
        com = x.mean(axis=0)
        diff = com - tgt
        loss += np.dot(diff, diff) / T
        cots = [None] * len(scene.bodies)
        cots[body] = {"x": np.broadcast_to(
            2.0 * diff / (T * x.shape[0]), x.shape).copy()}
        d_states[s] = cots
    for c in (controllers or {}).values():
        c.reset_grad()
    grads = backward(tape, d_states=d_states)
    return loss, grads
