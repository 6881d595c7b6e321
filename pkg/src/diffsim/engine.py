"""Forward rollout and hand-written reverse sweep.

The integrator is semi-implicit Euler for every body type. A rollout records
the state entering each step on a tape; backward() replays each step in
reverse, applying the analytic adjoint of every kernel that contributed a
force, and accumulates gradients with respect to ModelParams, the initial
state, and any controller weights. Image-space losses inject their cotangents
at the steps whose post-state was rendered.
"""

import numpy as np

from .dynamics import contact as ct
from .dynamics import fem, pendulum, rigid, shell
from .dynamics.particles import (SimulationError, integrate_particles,
                                 integrate_particles_vjp)
from .mathutil import quat_rotate_vjp
from .scene import GradBuffer, ModelParams


class ConfigurationError(Exception):
    pass


# Forward kernels with a registered analytic adjoint. A step that records a
# kernel outside this set cannot be differentiated and must fail loudly.
ADJOINTS = {
    "integrate_particles": integrate_particles_vjp,
    "fem_forces": fem.fem_forces_vjp,
    "membrane_forces": shell.membrane_forces_vjp,
    "bending_forces": shell.bending_forces_vjp,
    "aero_forces": shell.aero_forces_vjp,
    "ground_contact_forces": ct.ground_contact_forces_vjp,
    "rigid_step": rigid.rigid_step_vjp,
    "rigid_contact_wrench": rigid.rigid_contact_wrench_vjp,
    "pendulum_step": pendulum.pendulum_step_vjp,
}

_KERNELS_BY_KIND = {
    "fem": ("fem_forces", "ground_contact_forces", "integrate_particles"),
    "shell": ("membrane_forces", "bending_forces", "aero_forces",
              "ground_contact_forces", "integrate_particles"),
    "rigid": ("rigid_contact_wrench", "rigid_step"),
    "pendulum": ("pendulum_step",),
}


class EpisodeTape:
    """States entering each step, plus everything needed to replay them."""

    def __init__(self, scene, params, controllers):
        self.scene = scene
        self.params = params
        self.controllers = controllers or {}
        self.states = []  # length T+1; states[i] enters step i
        self.kernels = []  # kernel names recorded for step i

    @property
    def horizon(self):
        return len(self.states) - 1

    @property
    def final_state(self):
        return self.states[-1]


class FrameSequence:
    """Rendered frames of a rollout; frame k shows the post-state of step
    (k + 1) * stride - 1. Frames skipped via frames_needed stay zero."""

    def __init__(self, num, cam, stride):
        self.rgb = np.zeros((num, cam.height, cam.width, 3))
        self.sil = np.zeros((num, cam.height, cam.width))
        self.rendered = np.zeros(num, dtype=bool)
        self.stride = stride

    @property
    def num_frames(self):
        return self.rgb.shape[0]


def _zero_state_like(state):
    return [{k: np.zeros_like(v) for k, v in s.items()} for s in state]


def initial_state(scene, params):
    state = []
    for b, p in zip(scene.bodies, params.body):
        if b.kind == "rigid":
            state.append({"x": b.init_pos.copy(), "r": b.init_quat.copy(),
                          "v": p["init_vel"] + b.impulse / p["mass"],
                          "w": p["init_omega"].copy()})
        elif b.kind in ("fem", "shell"):
            x = b.mesh.rest_positions + b.init_pos
            v = np.broadcast_to(p["init_vel"], x.shape).copy() \
                if p["init_vel"].ndim == 1 else p["init_vel"].copy()
            if b.kind == "fem" and np.any(b.impulse):
                v = v + b.impulse / p["mass"].sum()
            v = np.where(b.fixed[:, None], 0.0, v)
            state.append({"x": x, "v": v})
        elif b.kind == "pendulum":
            state.append({"ang": p["init_angle"].copy(),
                          "rate": p["init_rate"].copy()})
    return state


def _inv_mass(body, masses):
    w = 1.0 / masses
    return np.where(body.fixed, 0.0, w)


def _activation(body, p, controllers, idx, t):
    """Total per-element activation: rest-stable passive value plus any
    learned time-varying offset."""
    if body.kind == "fem":
        act = fem.passive_activation(p["mu"], p["lam"])
        ctrl = controllers.get(idx)
        if ctrl is not None:
            act = act + ctrl.forward(t)
    else:
        act = shell.shell_passive_activation(p["mu"], p["lam"])
    return act


def _particle_forces(scene, body, p, contact_p, state, act, edge_act):
    """Sum of force kernels for a deformable or cloth body."""
    x, v = state["x"], state["v"]
    if body.kind == "fem":
        f = fem.fem_forces(x, body.mesh, p["mu"], p["lam"], act)
    else:
        f = shell.membrane_forces(x, body.mesh, p["mu"], p["lam"], act)
        if body.mesh.num_edges:
            f = f + shell.bending_forces(x, body.mesh.edges,
                                         body.mesh.rest_dihedral, p["kb"],
                                         edge_act)
        f = f + shell.aero_forces(x, v, body.mesh, body.c_drag, body.c_lift,
                                  body.wind)
    for plane in scene.planes:
        f = f + ct.ground_contact_forces(x, v, plane, contact_p["ke"],
                                         contact_p["kd"], contact_p["kf"],
                                         contact_p["mu_c"])
    return f


def step(scene, params, state, t, controllers):
    """Advance every body by one semi-implicit Euler step of scene.dt."""
    dt = scene.dt
    cp = {k: float(v) for k, v in params.contact.items()}
    g = params.gravity
    out = []
    for i, (b, p, s) in enumerate(zip(scene.bodies, params.body, state)):
        if b.kind in ("fem", "shell"):
            act = _activation(b, p, controllers, i, t)
            edge_act = p.get("act_edge")
            if b.kind == "shell" and controllers.get(i) is not None:
                edge_act = edge_act + controllers[i].forward(t)
            f = _particle_forces(scene, b, p, cp, s, act, edge_act)
            w = _inv_mass(b, p["mass"])
            x1, v1 = integrate_particles(s["x"], s["v"], f, w, g, dt)
            out.append({"x": x1, "v": v1})
        elif b.kind == "rigid":
            m = float(p["mass"])
            f = -m * g
            tau = np.zeros(3)
            for plane in scene.planes:
                fc, tc = rigid.rigid_contact_wrench(
                    s["x"], s["r"], s["v"], s["w"], b.verts, plane, **cp)
                f = f + fc
                tau = tau + tc
            x1, r1, v1, w1 = rigid.rigid_step(
                s["x"], s["r"], s["v"], s["w"], f, tau, m,
                b.unit_inertia, b.unit_inertia_inv, dt)
            out.append({"x": x1, "r": r1, "v": v1, "w": w1})
        elif b.kind == "pendulum":
            gs = np.linalg.norm(g)
            a1, r1 = pendulum.pendulum_step(s["ang"], s["rate"], p["length"],
                                            p["mass"], gs, dt)
            out.append({"ang": a1, "rate": r1})
    return out


def _check_finite(state, i):
    for b, s in enumerate(state):
        for k, v in s.items():
            if not np.all(np.isfinite(v)):
                raise SimulationError(
                    f"non-finite {k} for body {b} after step {i}")


def rollout(scene, params=None, controllers=None, render=False,
            frames_needed=None):
    """Simulate scene.horizon steps; optionally rasterize frames.

    frames_needed: optional set of frame indices — other frames are skipped
    (their pixels stay zero) to avoid paying for rendering they won't feed a
    loss. Returns (tape, frames); frames is None when render=False.
    """
    scene.validate()
    if params is None:
        params = ModelParams.from_scene(scene)
    controllers = controllers or {}
    for i in controllers:
        if not (0 <= i < len(scene.bodies)):
            raise ConfigurationError(f"controller bound to missing body {i}")
    tape = EpisodeTape(scene, params, controllers)
    state = initial_state(scene, params)
    tape.states.append(state)

    stride = scene.render_stride
    frames = None
    if render:
        from .render.pipeline import render_frame
        frames = FrameSequence(scene.horizon // stride, scene.camera, stride)

    for i in range(scene.horizon):
        kernels = [k for b in scene.bodies for k in _KERNELS_BY_KIND[b.kind]]
        missing = [k for k in kernels if k not in ADJOINTS]
        if missing:
            raise ConfigurationError(f"no adjoint registered for {missing}")
        tape.kernels.append(kernels)
        state = step(scene, params, state, i * scene.dt, controllers)
        _check_finite(state, i)
        tape.states.append(state)
        if render and (i + 1) % stride == 0:
            fidx = (i + 1) // stride - 1
            if frames_needed is None or fidx in frames_needed:
                rgb, sil, _ = render_frame(scene, state)
                frames.rgb[fidx] = rgb
                frames.sil[fidx] = sil
                frames.rendered[fidx] = True
    return tape, frames


def _chain_passive(body, p, act_bar, grads_p):
    """Accumulate mu/lam gradients through the rest-stable activation."""
    mu, lam = p["mu"], p["lam"]
    if body.kind == "fem":
        grads_p["mu"] += 0.75 / lam * act_bar
        grads_p["lam"] += -0.75 * mu / lam**2 * act_bar
    else:
        grads_p["mu"] += (2.0 / 3.0) / lam * act_bar
        grads_p["lam"] += -(2.0 / 3.0) * mu / lam**2 * act_bar


def _particle_step_vjp(scene, body, p, cp, s, act, edge_act, g, dt,
                       x1_bar, v1_bar, grads_p, grads_c, idx, t,
                       controllers):
    """Reverse one particle-body step. Returns (x_bar, v_bar, g_bar)."""
    x, v = s["x"], s["v"]
    f = _particle_forces(scene, body, p, cp, s, act, edge_act)
    w = _inv_mass(body, p["mass"])
    x_bar, v_bar, f_bar, w_bar, g_bar = integrate_particles_vjp(
        x, v, f, w, g, dt, x1_bar, v1_bar)
    m_bar = np.where(body.fixed, 0.0, -w_bar / p["mass"]**2)
    grads_p["mass"] += m_bar

    if body.kind == "fem":
        xb, mu_b, lam_b, act_bar = fem.fem_forces_vjp(
            x, body.mesh, p["mu"], p["lam"], act, f_bar)
        x_bar += xb
        grads_p["mu"] += mu_b
        grads_p["lam"] += lam_b
        _chain_passive(body, p, act_bar, grads_p)
        ctrl = controllers.get(idx)
        if ctrl is not None:
            ctrl.backward(t, act_bar)
    else:
        xb, mu_b, lam_b, act_bar = shell.membrane_forces_vjp(
            x, body.mesh, p["mu"], p["lam"], act, f_bar)
        x_bar += xb
        grads_p["mu"] += mu_b
        grads_p["lam"] += lam_b
        _chain_passive(body, p, act_bar, grads_p)
        if body.mesh.num_edges:
            xb, kb_bar, ea_bar = shell.bending_forces_vjp(
                x, body.mesh.edges, body.mesh.rest_dihedral, p["kb"],
                edge_act, f_bar)
            x_bar += xb
            grads_p["kb"] += kb_bar
            grads_p["act_edge"] += ea_bar
            ctrl = controllers.get(idx)
            if ctrl is not None:
                ctrl.backward(t, ea_bar)
        xb, vb = shell.aero_forces_vjp(x, v, body.mesh, body.c_drag,
                                       body.c_lift, body.wind, f_bar)
        x_bar += xb
        v_bar += vb

    for plane in scene.planes:
        xb, vb, ke_b, kd_b, kf_b, mu_b = ct.ground_contact_forces_vjp(
            x, v, plane, cp["ke"], cp["kd"], cp["kf"], cp["mu_c"], f_bar)
        x_bar += xb
        v_bar += vb
        grads_c["ke"] += ke_b
        grads_c["kd"] += kd_b
        grads_c["kf"] += kf_b
        grads_c["mu_c"] += mu_b
    return x_bar, v_bar, g_bar


def _rigid_step_vjp(scene, body, p, cp, s, g, dt, adj, grads_p, grads_c):
    """Reverse one rigid-body step. Returns (state cotangents, g_bar)."""
    m = float(p["mass"])
    f = -m * g
    tau = np.zeros(3)
    wrenches = []
    for plane in scene.planes:
        fc, tc = rigid.rigid_contact_wrench(
            s["x"], s["r"], s["v"], s["w"], body.verts, plane, **cp)
        wrenches.append((fc, tc))
        f = f + fc
        tau = tau + tc
    x_bar, r_bar, v_bar, w_bar, f_bar, tau_bar, m_bar = rigid.rigid_step_vjp(
        s["x"], s["r"], s["v"], s["w"], f, tau, m,
        body.unit_inertia, body.unit_inertia_inv, dt,
        adj["x"], adj["r"], adj["v"], adj["w"])
    g_bar = -m * f_bar
    m_bar += -np.dot(g, f_bar)
    for plane in scene.planes:
        xb, rb, vb, wb, ke_b, kd_b, kf_b, mu_b = rigid.rigid_contact_wrench_vjp(
            s["x"], s["r"], s["v"], s["w"], body.verts, plane,
            cp["ke"], cp["kd"], cp["kf"], cp["mu_c"], f_bar, tau_bar)
        x_bar += xb
        r_bar += rb
        v_bar += vb
        w_bar += wb
        grads_c["ke"] += ke_b
        grads_c["kd"] += kd_b
        grads_c["kf"] += kf_b
        grads_c["mu_c"] += mu_b
    grads_p["mass"] += m_bar
    return {"x": x_bar, "r": r_bar, "v": v_bar, "w": w_bar}, g_bar


def _inject_frame_adjoint(scene, state, d_rgb, d_sil, adj):
    """Pull an image cotangent back to the states of the rendered bodies."""
    from .render.pipeline import render_frame, render_frame_vjp

    _, _, cache = render_frame(scene, state)
    d_world = render_frame_vjp(cache, d_rgb, d_sil)
    for i, b in enumerate(scene.bodies):
        dv = d_world.get(i)
        if dv is None:
            continue
        if b.kind in ("fem", "shell"):
            adj[i]["x"] += dv
        elif b.kind == "rigid":
            adj[i]["x"] += dv.sum(axis=0)
            qb, _ = quat_rotate_vjp(state[i]["r"], b.verts, dv)
            adj[i]["r"] += qb


def backward(tape, d_frames=None, d_states=None):
    """Reverse sweep over a recorded rollout.

    d_frames: dict frame_idx -> (d_rgb (H,W,3) or None, d_sil (H,W) or None).
    d_states: dict step_idx (1..T) -> list of per-body cotangent dicts with
        any subset of that body's state keys (for losses on raw state).
    Returns a GradBuffer.
    """
    scene, params = tape.scene, tape.params
    controllers = tape.controllers
    d_frames = d_frames or {}
    d_states = d_states or {}
    T = tape.horizon
    dt = scene.dt
    cp = {k: float(v) for k, v in params.contact.items()}
    g = params.gravity
    gs = np.linalg.norm(g)

    grads = params.zeros_like()
    g_vec_bar = np.zeros(3)
    adj = _zero_state_like(tape.states[-1])

    frame_steps = {(k + 1) * scene.render_stride: k
                   for k in ((i + 1) // scene.render_stride - 1
                             for i in range(T)
                             if (i + 1) % scene.render_stride == 0)}
    step_of_frame = {v: k for k, v in frame_steps.items()}
    for fidx in d_frames:
        if fidx not in step_of_frame:
            raise ConfigurationError(f"frame {fidx} was never rendered")

    for i in reversed(range(T)):
        for name in tape.kernels[i]:
            if name not in ADJOINTS:
                raise ConfigurationError(f"no adjoint registered for {name}")
        post = i + 1
        for fidx, (d_rgb, d_sil) in d_frames.items():
            if step_of_frame[fidx] == post:
                _inject_frame_adjoint(scene, tape.states[post], d_rgb, d_sil,
                                      adj)
        if post in d_states:
            for bi, cot in enumerate(d_states[post]):
                for k, v in (cot or {}).items():
                    adj[bi][k] += v

        s_all = tape.states[i]
        t = i * dt
        new_adj = []
        for bi, (b, p) in enumerate(zip(scene.bodies, params.body)):
            gp = grads.body[bi]
            if b.kind in ("fem", "shell"):
                act = _activation(b, p, controllers, bi, t)
                edge_act = p.get("act_edge")
                if b.kind == "shell" and controllers.get(bi) is not None:
                    edge_act = edge_act + controllers[bi].forward(t)
                xb, vb, gb = _particle_step_vjp(
                    scene, b, p, cp, s_all[bi], act, edge_act, g, dt,
                    adj[bi]["x"], adj[bi]["v"], gp, grads.contact, bi, t,
                    controllers)
                g_vec_bar += gb
                new_adj.append({"x": xb, "v": vb})
            elif b.kind == "rigid":
                cot, gb = _rigid_step_vjp(scene, b, p, cp, s_all[bi], g, dt,
                                          adj[bi], gp, grads.contact)
                g_vec_bar += gb
                new_adj.append(cot)
            elif b.kind == "pendulum":
                ab, rb, Lb, mb, gsb = pendulum.pendulum_step_vjp(
                    s_all[bi]["ang"], s_all[bi]["rate"], p["length"],
                    p["mass"], gs, dt, adj[bi]["ang"], adj[bi]["rate"])
                gp["length"] += Lb
                gp["mass"] += mb
                if gs > 0:
                    g_vec_bar += gsb * g / gs
                new_adj.append({"ang": ab, "rate": rb})
        adj = new_adj

    grads.gravity += g_vec_bar
    # Fold initial-state cotangents into the matching parameter slots.
    for bi, b in enumerate(scene.bodies):
        gp = grads.body[bi]
        if b.kind == "rigid":
            gp["init_vel"] += adj[bi]["v"]
            gp["init_omega"] += adj[bi]["w"]
            m = tape.params.body[bi]["mass"]
            gp["mass"] += adj[bi]["v"] @ (-b.impulse / m ** 2)
        elif b.kind in ("fem", "shell"):
            vb = np.where(b.fixed[:, None], 0.0, adj[bi]["v"])
            if tape.params.body[bi]["init_vel"].ndim == 1:
                gp["init_vel"] += vb.sum(axis=0)
            else:
                gp["init_vel"] += vb
            if b.kind == "fem" and np.any(b.impulse):
                total = tape.params.body[bi]["mass"].sum()
                gp["mass"] += vb.sum(axis=0) @ (-b.impulse / total ** 2)
        elif b.kind == "pendulum":
            gp["init_angle"] += adj[bi]["ang"]
            gp["init_rate"] += adj[bi]["rate"]
    d_control = {i: c.weight_grad() for i, c in controllers.items()
                 if hasattr(c, "weight_grad")}
    return GradBuffer(adj, grads, d_control or None)


def grad_check(fun, x, grad, eps=1e-5, floor=1e-8):
    """Max relative error between analytic grad and central differences.

    fun: callable vector -> scalar. Relative error is |a - fd| / max(|fd|,
    floor); the floor keeps near-zero components from dividing by noise.
    """
    x = np.asarray(x, dtype=np.float64)
    fd = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        fd[i] = (fun(x + e) - fun(x - e)) / (2 * eps)
    err = np.abs(np.asarray(grad) - fd) / np.maximum(np.abs(fd), floor)
    return float(err.max()), fd
