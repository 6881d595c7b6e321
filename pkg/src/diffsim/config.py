"""Strict JSON scene configuration.

Every table has a closed key set; an unknown key anywhere raises ConfigError
naming the full field path (e.g. "bodies[1].shape.extent"). parse_scene
returns a Scene; scene_to_config canonicalizes back so accepted configs
round-trip."""

import json

import numpy as np

from . import meshes
from .dynamics.contact import ContactPlane
from .scene import (Camera, FemBody, Light, Material, PendulumBody,
                    RasterSettings, RigidBody, Scene, ShellBody)


class ConfigError(Exception):
    pass


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}: unknown key")


def _vec(v, n, path):
    try:
        a = np.asarray(v, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected {n} numbers")
    if a.shape != (n,):
        raise ConfigError(f"{path}: expected {n} numbers")
    return a


_MATERIAL_KEYS = {"mode", "color", "ambient", "diffuse", "specular",
                  "shininess", "texture", "uv"}


def _material(d, path):
    if d is None:
        return Material()
    _check_keys(d, _MATERIAL_KEYS, path)
    mat = Material(
        mode=d.get("mode", "flat"),
        color=tuple(_vec(d.get("color", (0.7, 0.7, 0.7)), 3, f"{path}.color")),
        ambient=float(d.get("ambient", 0.25)),
        diffuse=float(d.get("diffuse", 0.7)),
        specular=float(d.get("specular", 0.0)),
        shininess=float(d.get("shininess", 16.0)),
    )
    if mat.mode not in ("flat", "phong", "textured"):
        raise ConfigError(f"{path}.mode: must be flat, phong, or textured")
    if "texture" in d:
        from .render.imageio import read_ppm

        mat.texture = read_ppm(d["texture"])
        mat._texture_path = d["texture"]
    if "uv" in d:
        mat.uv = np.asarray(d["uv"], dtype=np.float64)
        if mat.uv.ndim != 2 or mat.uv.shape[1] != 2 \
                or np.any(mat.uv < 0) or np.any(mat.uv > 1):
            raise ConfigError(f"{path}.uv: expected rows of [0,1]^2 pairs")
    if not np.all((np.asarray(mat.color) >= 0) & (np.asarray(mat.color) <= 1)):
        raise ConfigError(f"{path}.color: components must lie in [0,1]")
    return mat


def _shape_mesh(d, kind, path):
    _check_keys(d, {"kind", "extents", "counts", "size", "origin", "path",
                    "plane"}, path)
    sk = d.get("kind")
    if kind == "rigid":
        if sk == "box":
            return meshes.box_surface(tuple(_vec(d.get("extents", (1, 1, 1)),
                                                 3, f"{path}.extents")))
        if sk == "obj":
            return meshes.load_obj(d["path"])
        raise ConfigError(f"{path}.kind: rigid shapes are box or obj")
    if kind == "fem":
        if sk == "box_tet":
            c = [int(v) for v in d.get("counts", (1, 1, 1))]
            return meshes.box_tet_mesh(*c,
                                       size=tuple(_vec(d.get("size", (1, 1, 1)),
                                                       3, f"{path}.size")),
                                       origin=tuple(d.get("origin", (0, 0, 0))))
        if sk == "tet_obj":
            return meshes.load_tet_mesh(d["path"])
        raise ConfigError(f"{path}.kind: fem shapes are box_tet or tet_obj")
    if sk == "grid":
        c = [int(v) for v in d.get("counts", (4, 4))]
        return meshes.cloth_grid(*c,
                                 size=tuple(_vec(d.get("size", (1, 1)), 2,
                                                 f"{path}.size")),
                                 origin=tuple(d.get("origin", (0, 0, 0))),
                                 plane=d.get("plane", "xz"))
    raise ConfigError(f"{path}.kind: shell shapes are grid")


_BODY_COMMON = {"type", "name", "material", "init_pos", "init_vel"}
_BODY_KEYS = {
    "rigid": _BODY_COMMON | {"shape", "mass", "init_quat", "init_omega",
              "impulse"},
    "fem": _BODY_COMMON | {"shape", "mass", "mu", "lam", "fixed", "actuated",
            "impulse"},
    "shell": _BODY_COMMON | {"shape", "mass", "mu", "lam", "kb", "fixed",
                             "wind", "c_drag", "c_lift", "actuated"},
    "pendulum": {"type", "name", "lengths", "masses", "init_angles",
                 "init_rates"},
}


def _body(d, i):
    path = f"bodies[{i}]"
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{path}: body needs a type")
    kind = d["type"]
    if kind not in _BODY_KEYS:
        raise ConfigError(f"{path}.type: unknown body type {kind!r}")
    _check_keys(d, _BODY_KEYS[kind], path)
    name = d.get("name", f"{kind}{i}")
    mat = _material(d.get("material"), f"{path}.material")
    try:
        if kind == "rigid":
            verts, tris = _shape_mesh(d.get("shape", {"kind": "box"}),
                                      "rigid", f"{path}.shape")
            return RigidBody(verts, tris, mass=d.get("mass", 1.0),
                             init_pos=d.get("init_pos", (0, 0, 0)),
                             init_quat=d.get("init_quat", (1, 0, 0, 0)),
                             init_vel=d.get("init_vel", (0, 0, 0)),
                             init_omega=d.get("init_omega", (0, 0, 0)),
                             impulse=d.get("impulse", (0, 0, 0)),
                             material=mat, name=name)
        if kind == "fem":
            mesh = _shape_mesh(d.get("shape", {"kind": "box_tet"}), "fem",
                               f"{path}.shape")
            return FemBody(mesh, mass=d.get("mass", 1.0),
                           mu=d.get("mu", 1e4), lam=d.get("lam", 1e4),
                           fixed=d.get("fixed", ()),
                           init_pos=d.get("init_pos", (0, 0, 0)),
                           init_vel=d.get("init_vel", (0, 0, 0)),
                           impulse=d.get("impulse", (0, 0, 0)),
                           material=mat, actuated=d.get("actuated", False),
                           name=name)
        if kind == "shell":
            mesh = _shape_mesh(d.get("shape", {"kind": "grid"}), "shell",
                               f"{path}.shape")
            return ShellBody(mesh, mass=d.get("mass", 0.2),
                             mu=d.get("mu", 500.0), lam=d.get("lam", 500.0),
                             kb=d.get("kb", 0.01), fixed=d.get("fixed", ()),
                             init_pos=d.get("init_pos", (0, 0, 0)),
                             init_vel=d.get("init_vel", (0, 0, 0)),
                             wind=d.get("wind", (0, 0, 0)),
                             c_drag=d.get("c_drag", 1.0),
                             c_lift=d.get("c_lift", 0.1),
                             material=mat, actuated=d.get("actuated", False),
                             name=name)
        return PendulumBody(lengths=d.get("lengths", (1.0,)),
                            masses=d.get("masses", (1.0,)),
                            init_angles=d.get("init_angles", (0.5,)),
                            init_rates=d.get("init_rates"), name=name)
    except (ValueError, KeyError, FileNotFoundError) as err:
        raise ConfigError(f"{path}: {err}")


_TOP_KEYS = {"seed", "dt", "horizon", "render_stride", "gravity", "contact",
             "planes", "camera", "light", "raster", "bodies"}
_CONTACT_KEYS = {"ke", "kd", "kf", "mu"}
_PLANE_KEYS = {"normal", "offset", "threshold"}
_CAMERA_KEYS = {"position", "target", "up", "fov", "near", "far", "width",
                "height"}
_LIGHT_KEYS = {"direction", "color"}
_RASTER_KEYS = {"sigma", "gamma", "background"}


def parse_scene(cfg):
    """Build a Scene from a config dict (already JSON-decoded)."""
    _check_keys(cfg, _TOP_KEYS, "config")
    sc = Scene()
    sc.seed = int(cfg.get("seed", 0))
    sc.dt = float(cfg.get("dt", 1.0 / 60.0))
    sc.horizon = int(cfg.get("horizon", 60))
    if sc.horizon < 1:
        raise ConfigError("config.horizon: horizon must be >= 1")
    sc.render_stride = int(cfg.get("render_stride", 1))
    if "gravity" in cfg:
        sc.gravity = _vec(cfg["gravity"], 3, "config.gravity")
    c = cfg.get("contact", {})
    _check_keys(c, _CONTACT_KEYS, "config.contact")
    sc.contact_ke = float(c.get("ke", 100.0))
    sc.contact_kd = float(c.get("kd", 10.0))
    sc.contact_kf = float(c.get("kf", 50.0))
    sc.contact_mu = float(c.get("mu", 0.5))
    for j, pd in enumerate(cfg.get("planes", [])):
        _check_keys(pd, _PLANE_KEYS, f"config.planes[{j}]")
        sc.planes.append(ContactPlane(
            normal=_vec(pd.get("normal", (0, 1, 0)), 3,
                        f"config.planes[{j}].normal"),
            offset=float(pd.get("offset", 0.0)),
            threshold=float(pd.get("threshold", 0.0))))
    cam = cfg.get("camera", {})
    _check_keys(cam, _CAMERA_KEYS, "config.camera")
    try:
        sc.camera = Camera(
            position=tuple(cam.get("position", (0.0, 1.0, 4.0))),
            target=tuple(cam.get("target", (0.0, 0.5, 0.0))),
            up=tuple(cam.get("up", (0.0, 1.0, 0.0))),
            fov=float(cam.get("fov", np.pi / 3)),
            near=float(cam.get("near", 0.05)),
            far=float(cam.get("far", 100.0)),
            width=int(cam.get("width", 64)),
            height=int(cam.get("height", 64)))
    except ValueError as err:
        raise ConfigError(f"config.camera: {err}")
    li = cfg.get("light", {})
    _check_keys(li, _LIGHT_KEYS, "config.light")
    sc.light = Light(direction=tuple(li.get("direction", (0.3, -1.0, 0.4))),
                     color=tuple(li.get("color", (1.0, 1.0, 1.0))))
    ra = cfg.get("raster", {})
    _check_keys(ra, _RASTER_KEYS, "config.raster")
    try:
        sc.raster = RasterSettings(
            sigma=float(ra.get("sigma", 1e-4)),
            gamma=float(ra.get("gamma", 1e-4)),
            background=tuple(ra.get("background", (0.0, 0.0, 0.0))))
    except ValueError as err:
        raise ConfigError(f"config.raster: {err}")
    for i, bd in enumerate(cfg.get("bodies", [])):
        sc.bodies.append(_body(bd, i))
    try:
        sc.validate()
    except ValueError as err:
        raise ConfigError(f"config: {err}")
    return sc, cfg.get("bodies", [])


def apply_model_flags(cfg, flags):
    """Estimator-side model mismatches for ablation runs.

    flags: any object with no_friction, perfect_elastic, rigid_as_deformable,
    deformable_as_rigid booleans. Returns a modified deep copy; the ground
    truth keeps the original config."""
    import copy

    out = copy.deepcopy(cfg)
    contact = out.setdefault("contact", {})
    if getattr(flags, "no_friction", False):
        contact["kf"] = 0.0
        contact["mu"] = 0.0
    if getattr(flags, "perfect_elastic", False):
        contact["kd"] = 0.0
    for i, b in enumerate(out.get("bodies", [])):
        if getattr(flags, "rigid_as_deformable", False) \
                and b.get("type") == "rigid":
            shape = b.get("shape", {"kind": "box"})
            if shape.get("kind") != "box":
                raise ConfigError(f"bodies[{i}]: --rigid-as-deformable only "
                                  f"supports box shapes")
            ext = shape.get("extents", (1, 1, 1))
            new = {"type": "fem",
                   "shape": {"kind": "box_tet", "counts": [1, 1, 1],
                             "size": list(ext)},
                   "mass": b.get("mass", 1.0)}
            for k in ("name", "material", "init_pos", "init_vel", "impulse"):
                if k in b:
                    new[k] = b[k]
            out["bodies"][i] = new
        elif getattr(flags, "deformable_as_rigid", False) \
                and b.get("type") == "fem":
            shape = b.get("shape", {"kind": "box_tet"})
            if shape.get("kind") != "box_tet":
                raise ConfigError(f"bodies[{i}]: --deformable-as-rigid only "
                                  f"supports box_tet shapes")
            size = shape.get("size", (1, 1, 1))
            new = {"type": "rigid",
                   "shape": {"kind": "box", "extents": list(size)},
                   "mass": b.get("mass", 1.0)}
            for k in ("name", "material", "init_pos", "init_vel", "impulse"):
                if k in b:
                    new[k] = b[k]
            out["bodies"][i] = new
    return out


def load_scene(path):
    try:
        with open(path) as f:
            cfg = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})")
    return parse_scene(cfg)


def scene_to_config(scene, body_cfgs):
    """Canonical config dict for a parsed scene (semantic round-trip)."""
    return {
        "seed": scene.seed,
        "dt": scene.dt,
        "horizon": scene.horizon,
        "render_stride": scene.render_stride,
        "gravity": list(scene.gravity),
        "contact": {"ke": scene.contact_ke, "kd": scene.contact_kd,
                    "kf": scene.contact_kf, "mu": scene.contact_mu},
        "planes": [{"normal": list(p.normal), "offset": p.offset,
                    "threshold": p.threshold} for p in scene.planes],
        "camera": {"position": list(scene.camera.position),
                   "target": list(scene.camera.target),
                   "up": list(scene.camera.up), "fov": scene.camera.fov,
                   "near": scene.camera.near, "far": scene.camera.far,
                   "width": scene.camera.width,
                   "height": scene.camera.height},
        "light": {"direction": list(scene.light.direction),
                  "color": list(scene.light.color)},
        "raster": {"sigma": scene.raster.sigma, "gamma": scene.raster.gamma,
                   "background": list(scene.raster.background)},
        "bodies": body_cfgs,
    }
