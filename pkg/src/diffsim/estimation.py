"""Image-space losses, first-order optimizers, and parameter-estimation
episodes (analysis-by-synthesis: targets come from the same simulator)."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics.particles import SimulationError
from .engine import backward, rollout
from .scene import ModelParams

LOSS_MODES = ("all-frames-mse", "first-last-mse", "last-frame-mse")
LOSS_CHANNELS = ("rgb", "silhouette")


@dataclass
class LossSpec:
    mode: str = "all-frames-mse"
    channel: str = "rgb"

    def __post_init__(self):
        if self.mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {self.mode!r}")
        if self.channel not in LOSS_CHANNELS:
            raise ValueError(f"unknown loss channel {self.channel!r}")

    def selected(self, num_frames):
        if self.mode == "all-frames-mse":
            return list(range(num_frames))
        if self.mode == "first-last-mse":
            return sorted({0, num_frames - 1})
        return [num_frames - 1]


@dataclass
class OptimizerConfig:
    method: str = "adam"
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    iters: int = 100
    tol: float = 0.0
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


class Adam:
    """Standard Adam with bias correction; lr may be a per-entry vector."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, x, g):
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        mh = self.m / (1 - self.beta1 ** self.t)
        vh = self.v / (1 - self.beta2 ** self.t)
        return x - self.lr * mh / (np.sqrt(vh) + self.eps)


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, x, g):
        return x - self.lr * g


def make_optimizer(opt, lr=None):
    lr = opt.lr if lr is None else lr
    if opt.method == "adam":
        return Adam(lr, opt.beta1, opt.beta2, opt.eps)
    if opt.method == "sgd":
        return SGD(lr)
    raise ValueError(f"unknown optimizer {opt.method!r}")


def project_box(x, lower, upper):
    if lower is not None:
        x = np.maximum(x, lower)
    if upper is not None:
        x = np.minimum(x, upper)
    return x


def frame_loss(pred, target, spec):
    """MSE over the frames selected by spec.mode on the chosen channel.

    pred/target: FrameSequence (or any object with rgb, sil, rendered).
    Returns (loss, d_frames) with d_frames in the format backward() expects;
    cotangent is 2 (pred - target) / count on selected frames.
    """
    if pred.rgb.shape != target.rgb.shape:
        raise ValueError("prediction and target frame shapes differ")
    sel = spec.selected(pred.rgb.shape[0])
    for f in sel:
        if not (pred.rendered[f] and target.rendered[f]):
            raise ValueError(f"frame {f} needed by the loss was not rendered")
    loss = 0.0
    d_frames = {}
    if spec.channel == "rgb":
        count = len(sel) * pred.rgb[0].size
        for f in sel:
            diff = pred.rgb[f] - target.rgb[f]
            loss += np.sum(diff * diff) / count
            d_frames[f] = (2.0 * diff / count, None)
    else:
        count = len(sel) * pred.sil[0].size
        for f in sel:
            diff = pred.sil[f] - target.sil[f]
            loss += np.sum(diff * diff) / count
            d_frames[f] = (None, 2.0 * diff / count)
    return loss, d_frames


@dataclass
class EstimationResult:
    params: ModelParams
    loss_trace: list = field(default_factory=list)
    param_trace: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


def render_target(scene, params, spec):
    """Ground-truth frames for the selected loss frames only."""
    num = scene.horizon // scene.render_stride
    _, frames = rollout(scene, params, render=True,
                        frames_needed=set(spec.selected(num)))
    return frames


def _episode_loss(scene, params, target, spec, keys, controllers=None):
    num = target.num_frames
    tape, frames = rollout(scene, params, controllers=controllers,
                           render=True, frames_needed=set(spec.selected(num)))
    loss, d_frames = frame_loss(frames, target, spec)
    grads = backward(tape, d_frames=d_frames)
    return loss, grads.to_vector(keys), grads


def _tie_maps(init_params, keys, tie):
    """Expand/reduce between the optimizer vector (tied blocks collapsed to
    one scalar each) and the full parameter vector.  Tied blocks start from
    the mean of their initial entries; their gradients are summed."""
    sizes = [np.atleast_1d(init_params.get(k)).size for k in keys]
    tied = [k in tie for k in keys]

    def reduce_x(full):
        out, i = [], 0
        for n, t in zip(sizes, tied):
            block = full[i:i + n]
            out.append(np.atleast_1d(block.mean()) if t else block)
            i += n
        return np.concatenate(out)

    def expand(red):
        out, i = [], 0
        for n, t in zip(sizes, tied):
            if t:
                out.append(np.full(n, red[i]))
                i += 1
            else:
                out.append(red[i:i + n])
                i += n
        return np.concatenate(out)

    def reduce_g(full):
        out, i = [], 0
        for n, t in zip(sizes, tied):
            block = full[i:i + n]
            out.append(np.atleast_1d(block.sum()) if t else block)
            i += n
        return np.concatenate(out)

    return reduce_x, expand, reduce_g


def estimate(scene, true_params, init_params, keys, spec, opt,
             lr_scales=None, tie=(), target=None):
    """Gradient-based recovery of the parameters named by keys.

    true_params are hidden ground truth used only to render the target.
    lr_scales: optional dict key -> multiplier on opt.lr for that block.
    tie: keys whose per-entry blocks are constrained to a single shared
    scalar (stepped once, broadcast back to the block).
    target: pre-rendered observation frames; when given, true_params are
    ignored and the frames may come from a different generating model
    (deliberate model mismatch, or recorded video).
    On a divergent rollout the learning rate is halved and the step retried;
    a second divergence aborts the episode with a diagnostic.
    """
    if target is None:
        target = render_target(scene, true_params, spec)
    reduce_x, expand, reduce_g = _tie_maps(init_params, keys, tie)
    x = reduce_x(init_params.to_vector(keys))
    lr = opt.lr * reduce_x(np.broadcast_to(
        _lr_vector(init_params, keys, lr_scales),
        init_params.to_vector(keys).shape).astype(float))
    optimizer = make_optimizer(opt, lr)
    result = EstimationResult(init_params.copy())
    best = (np.inf, x.copy())
    halved = False
    for it in range(opt.iters + 1):
        t0 = time.perf_counter()
        params = init_params.from_vector(keys, expand(x))
        try:
            loss, g, _ = _episode_loss(scene, params, target, spec, keys)
            g = reduce_g(g)
        except SimulationError as err:
            if halved:
                result.diagnostics.append(
                    f"iteration {it}: diverged twice ({err}); aborting")
                break
            result.diagnostics.append(
                f"iteration {it}: diverged ({err}); halving lr and retrying")
            halved = True
            x = best[1].copy()
            optimizer = make_optimizer(opt, lr / 2.0)
            continue
        result.loss_trace.append(loss)
        result.param_trace.append(x.copy())
        if loss < best[0]:
            best = (loss, x.copy())
        result.wall_ms.append((time.perf_counter() - t0) * 1e3)
        if loss <= opt.tol or it == opt.iters:
            break
        x = project_box(optimizer.step(x, g), opt.lower, opt.upper)
    result.params = init_params.from_vector(keys, expand(best[1]))
    return result


def _lr_vector(params, keys, lr_scales):
    if not lr_scales:
        return 1.0
    parts = []
    for k in keys:
        n = np.atleast_1d(params.get(k)).size
        parts.append(np.full(n, lr_scales.get(k, 1.0)))
    return np.concatenate(parts)


def sweep_landscape(scene, key, values, spec, base_params=None):
    """Loss as a function of one scalar parameter; no optimization.

    The target is rendered from base_params (scene defaults when omitted).
    Divergent grid points record +inf. Returns list of (value, loss).
    """
    base = base_params or ModelParams.from_scene(scene)
    target = render_target(scene, base, spec)
    curve = []
    num = target.num_frames
    for v in values:
        params = base.copy()
        params.set(key, np.broadcast_to(v, np.shape(params.get(key))))
        try:
            _, frames = rollout(scene, params, render=True,
                                frames_needed=set(spec.selected(num)))
            loss, _ = frame_loss(frames, target, spec)
        except SimulationError:
            loss = np.inf
        curve.append((float(v), float(loss)))
    return curve


def write_estimate_csv(path, result):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        k = len(result.param_trace[0]) if result.param_trace else 0
        w.writerow(["iter", "loss"] + [f"param_{i}" for i in range(k)]
                   + ["wall_ms"])
        for it, (loss, p, ms) in enumerate(zip(result.loss_trace,
                                               result.param_trace,
                                               result.wall_ms)):
            w.writerow([it, repr(float(loss))] + [repr(float(v)) for v in p]
                       + [repr(float(ms))])


def write_landscape_csv(path, curve):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["value", "loss"])
        for v, loss in curve:
            w.writerow([repr(float(v)), repr(float(loss))])
