"""Scene description (bodies, planes, camera, materials) and the optimizable
parameter container.

A Scene owns geometry and defaults; ModelParams holds every optimizable
physical quantity (masses, Lame parameters, contact parameters, gravity,
initial velocities, pendulum geometry) in a layout mirrored exactly by
GradBuffer.d_params. Parameters are addressed with dotted keys such as
"body.0.mass" or "contact.ke".
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics.contact import ContactPlane
from .mathutil import normalize

DEFAULT_GRAVITY = np.array([0.0, 9.8, 0.0])  # magnitude vector; acts along -y


@dataclass
class Material:
    mode: str = "flat"  # flat | phong | textured
    color: tuple = (0.7, 0.7, 0.7)
    ambient: float = 0.25
    diffuse: float = 0.7
    specular: float = 0.0
    shininess: float = 16.0
    texture: np.ndarray = None  # (th, tw, 3) in [0, 1]
    uv: np.ndarray = None  # (N, 2) in [0, 1]^2


@dataclass
class Light:
    direction: tuple = (0.3, -1.0, 0.4)
    color: tuple = (1.0, 1.0, 1.0)

    def unit_direction(self):
        return normalize(np.asarray(self.direction, dtype=np.float64))


@dataclass
class Camera:
    position: tuple = (0.0, 1.0, 4.0)
    target: tuple = (0.0, 0.5, 0.0)
    up: tuple = (0.0, 1.0, 0.0)
    fov: float = np.pi / 3
    near: float = 0.05
    far: float = 100.0
    width: int = 64
    height: int = 64

    def __post_init__(self):
        if not (0.0 < self.fov < np.pi):
            raise ValueError("fov must be in (0, pi)")
        if self.near <= 0 or self.far <= self.near:
            raise ValueError("require 0 < near < far")


@dataclass
class RasterSettings:
    sigma: float = 1e-4
    gamma: float = 1e-4
    background: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.sigma <= 0 or self.gamma <= 0:
            raise ValueError("sigma and gamma must be positive")


class RigidBody:
    """Rigid body: surface mesh, uniform-density inertia per unit mass."""

    kind = "rigid"

    def __init__(self, verts, tris, mass=1.0, unit_inertia=None, init_pos=(0, 0, 0),
                 init_quat=(1, 0, 0, 0), init_vel=(0, 0, 0), init_omega=(0, 0, 0),
                 impulse=(0, 0, 0), material=None, name="rigid"):
        self.verts = np.asarray(verts, dtype=np.float64)
        self.tris = np.asarray(tris, dtype=np.int64)
        self.mass = float(mass)
        if mass <= 0:
            raise ValueError("rigid mass must be positive")
        if unit_inertia is None:
            ext = self.verts.max(axis=0) - self.verts.min(axis=0)
            from .meshes import box_unit_inertia

            unit_inertia = box_unit_inertia(ext)
        self.unit_inertia = np.asarray(unit_inertia, dtype=np.float64)
        w = np.linalg.eigvalsh(self.unit_inertia)
        if not np.allclose(self.unit_inertia, self.unit_inertia.T) or np.any(w <= 0):
            raise ValueError("unit inertia must be symmetric positive definite")
        self.unit_inertia_inv = np.linalg.inv(self.unit_inertia)
        self.init_pos = np.asarray(init_pos, dtype=np.float64)
        self.init_quat = normalize(np.asarray(init_quat, dtype=np.float64))
        self.init_vel = np.asarray(init_vel, dtype=np.float64)
        self.init_omega = np.asarray(init_omega, dtype=np.float64)
        # Known linear impulse applied at t=0: the start velocity gains
        # impulse / mass, which makes mass observable even in free flight.
        self.impulse = np.asarray(impulse, dtype=np.float64)
        self.material = material or Material()
        self.name = name


class FemBody:
    """Deformable solid: tetrahedral mesh with stable neo-Hookean elements."""

    kind = "fem"

    def __init__(self, mesh, mass=1.0, mu=1e4, lam=1e4, fixed=(), init_pos=(0, 0, 0),
                 init_vel=(0, 0, 0), impulse=(0, 0, 0), material=None,
                 actuated=False, name="fem"):
        self.mesh = mesh
        n, m = mesh.num_vertices, mesh.num_elements
        self.masses = np.full(n, mass / n) if np.isscalar(mass) else np.asarray(mass, float)
        if np.any(self.masses <= 0):
            raise ValueError("particle masses must be positive")
        self.mu = np.full(m, mu) if np.isscalar(mu) else np.asarray(mu, float)
        self.lam = np.full(m, lam) if np.isscalar(lam) else np.asarray(lam, float)
        if np.any(self.mu < 0) or np.any(self.lam < 0):
            raise ValueError("Lame parameters must be non-negative")
        self.fixed = np.zeros(n, dtype=bool)
        self.fixed[list(fixed)] = True
        self.init_pos = np.asarray(init_pos, dtype=np.float64)
        self.init_vel = np.asarray(init_vel, dtype=np.float64)
        # Known linear impulse at t=0, shared uniformly across particles:
        # every particle gains impulse / total_mass.
        self.impulse = np.asarray(impulse, dtype=np.float64)
        self.material = material or Material()
        self.actuated = actuated
        self.name = name


class ShellBody:
    """Thin shell (cloth): membrane + hinge bending + lift/drag."""

    kind = "shell"

    def __init__(self, mesh, mass=0.2, mu=500.0, lam=500.0, kb=0.01, fixed=(),
                 init_pos=(0, 0, 0), init_vel=(0, 0, 0), c_drag=1.0, c_lift=0.1,
                 wind=(0, 0, 0), material=None, actuated=False, name="cloth"):
        self.mesh = mesh
        n, m, e = mesh.num_vertices, mesh.num_elements, mesh.num_edges
        self.masses = np.full(n, mass / n) if np.isscalar(mass) else np.asarray(mass, float)
        if np.any(self.masses <= 0):
            raise ValueError("particle masses must be positive")
        self.mu = np.full(m, mu) if np.isscalar(mu) else np.asarray(mu, float)
        self.lam = np.full(m, lam) if np.isscalar(lam) else np.asarray(lam, float)
        self.kb = np.full(e, kb) if np.isscalar(kb) else np.asarray(kb, float)
        self.fixed = np.zeros(n, dtype=bool)
        self.fixed[list(fixed)] = True
        self.init_pos = np.asarray(init_pos, dtype=np.float64)
        self.init_vel = np.asarray(init_vel, dtype=np.float64)
        self.c_drag = float(c_drag)
        self.c_lift = float(c_lift)
        self.wind = np.asarray(wind, dtype=np.float64)
        self.material = material or Material()
        self.actuated = actuated
        self.name = name


class PendulumBody:
    """Simple (1 link) or double (2 link) pendulum; not rendered."""

    kind = "pendulum"

    def __init__(self, lengths=(1.0,), masses=(1.0,), init_angles=(0.5,),
                 init_rates=None, name="pendulum"):
        self.lengths = np.asarray(lengths, dtype=np.float64)
        if np.any(self.lengths <= 0):
            raise ValueError("pendulum lengths must be positive")
        self.masses = np.asarray(masses, dtype=np.float64)
        self.init_angles = np.asarray(init_angles, dtype=np.float64)
        k = len(self.lengths)
        if k not in (1, 2):
            raise ValueError("only simple and double pendula supported")
        self.init_rates = np.zeros(k) if init_rates is None else np.asarray(init_rates, float)
        self.name = name


@dataclass
class Scene:
    bodies: list = field(default_factory=list)
    planes: list = field(default_factory=list)
    contact_ke: float = 100.0
    contact_kd: float = 10.0
    contact_kf: float = 50.0
    contact_mu: float = 0.5
    gravity: np.ndarray = field(default_factory=lambda: DEFAULT_GRAVITY.copy())
    camera: Camera = field(default_factory=Camera)
    light: Light = field(default_factory=Light)
    raster: RasterSettings = field(default_factory=RasterSettings)
    dt: float = 1.0 / 60.0
    horizon: int = 60
    render_stride: int = 1
    seed: int = 0

    def validate(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.render_stride < 1:
            raise ValueError("render stride must be >= 1")
        if not (0.0 <= self.contact_mu <= 1.0):
            raise ValueError("friction coefficient must lie in [0, 1]")
        for v in (self.contact_ke, self.contact_kd, self.contact_kf):
            if v < 0:
                raise ValueError("contact stiffnesses must be non-negative")
        return self


class ModelParams:
    """Optimizable physical parameters, congruent with GradBuffer.d_params."""

    def __init__(self, body, contact, gravity):
        self.body = body  # list of dict[str, ndarray]
        self.contact = contact  # dict with ke, kd, kf, mu_c (0-d arrays)
        self.gravity = np.asarray(gravity, dtype=np.float64)

    @classmethod
    def from_scene(cls, scene):
        body = []
        for b in scene.bodies:
            if b.kind == "rigid":
                body.append({
                    "mass": np.array(b.mass),
                    "init_vel": b.init_vel.copy(),
                    "init_omega": b.init_omega.copy(),
                })
            elif b.kind in ("fem", "shell"):
                d = {
                    "mass": b.masses.copy(),
                    "mu": b.mu.copy(),
                    "lam": b.lam.copy(),
                    "init_vel": np.array(b.init_vel, dtype=np.float64).copy(),
                }
                if b.kind == "shell":
                    d["kb"] = b.kb.copy()
                    d["act_edge"] = np.zeros(b.mesh.num_edges)
                body.append(d)
            elif b.kind == "pendulum":
                body.append({
                    "length": b.lengths.copy(),
                    "mass": b.masses.copy(),
                    "init_angle": b.init_angles.copy(),
                    "init_rate": b.init_rates.copy(),
                })
        contact = {
            "ke": np.array(scene.contact_ke),
            "kd": np.array(scene.contact_kd),
            "kf": np.array(scene.contact_kf),
            "mu_c": np.array(scene.contact_mu),
        }
        return cls(body, contact, np.array(scene.gravity, dtype=np.float64))

    def copy(self):
        return ModelParams(
            [{k: np.array(v) for k, v in d.items()} for d in self.body],
            {k: np.array(v) for k, v in self.contact.items()},
            self.gravity.copy(),
        )

    def zeros_like(self):
        return ModelParams(
            [{k: np.zeros_like(v) for k, v in d.items()} for d in self.body],
            {k: np.zeros_like(v) for k, v in self.contact.items()},
            np.zeros_like(self.gravity),
        )

    def _slot(self, key):
        parts = key.split(".")
        if parts[0] == "body":
            return self.body[int(parts[1])], parts[2]
        if parts[0] == "contact":
            return self.contact, parts[1]
        if parts[0] == "gravity":
            return self.__dict__, "gravity"
        raise KeyError(key)

    def get(self, key):
        d, k = self._slot(key)
        return d[k]

    def set(self, key, value):
        d, k = self._slot(key)
        d[k] = np.asarray(value, dtype=np.float64).reshape(np.shape(d[k]))

    def to_vector(self, keys):
        return np.concatenate([np.atleast_1d(self.get(k)).ravel() for k in keys])

    def from_vector(self, keys, vec):
        """Returns a copy with the selected entries replaced from vec."""
        out = self.copy()
        i = 0
        for k in keys:
            n = np.atleast_1d(out.get(k)).size
            out.set(k, vec[i:i + n])
            i += n
        if i != len(vec):
            raise ValueError("vector length does not match selected keys")
        return out

    def all_finite(self):
        vals = [v for d in self.body for v in d.values()]
        vals += list(self.contact.values()) + [self.gravity]
        return all(np.all(np.isfinite(v)) for v in vals)


class GradBuffer:
    """Gradients w.r.t. the initial state and ModelParams."""

    def __init__(self, d_state0, d_params, d_control=None):
        self.d_state0 = d_state0
        self.d_params = d_params
        self.d_control = d_control

    def to_vector(self, keys):
        return self.d_params.to_vector(keys)
