import numpy as np
from diffsim import meshes
from diffsim.scene import Camera, Light, Material, RasterSettings, Scene, RigidBody, FemBody
from diffsim.render import raster, camera as camod
from diffsim.render.pipeline import render_frame, render_frame_vjp

rng = np.random.default_rng(1)

# --- raster FD check on a small random mesh ---
cam = Camera(position=(0.0, 0.6, 3.0), target=(0, 0.3, 0), width=24, height=20)
st = RasterSettings(sigma=1e-3, gamma=1e-3)
N = 9
ndc = rng.uniform(-0.8, 0.8, (N, 2))
depth = rng.uniform(2.0, 4.0, N)
tris = np.array([[0,1,2],[3,4,5],[6,7,8],[0,3,6]])
colors = rng.uniform(0.1, 0.9, (N, 3))

qr = rng.standard_normal((20,24,3)); qs = rng.standard_normal((20,24))
def loss(ndc_, depth_, colors_):
    rgb, sil, _ = raster.soft_rasterize(ndc_, depth_, tris, colors_, cam, st)
    return np.sum(qr*rgb) + np.sum(qs*sil)

rgb, sil, cache = raster.soft_rasterize(ndc, depth, tris, colors, cam, st)
nb, db, cb = raster.soft_rasterize_vjp(cache, qr, qs)
g = np.concatenate([nb.ravel(), db.ravel(), cb.ravel()])
x0 = np.concatenate([ndc.ravel(), depth.ravel(), colors.ravel()])
def fun(v):
    n_ = v[:N*2].reshape(N,2); d_ = v[N*2:N*3]; c_ = v[N*3:].reshape(N,3)
    return loss(n_, d_, c_)
eps = 1e-6
fd = np.array([(fun(x0 + eps*np.eye(len(x0))[i]) - fun(x0 - eps*np.eye(len(x0))[i]))/(2*eps) for i in range(len(x0))])
err = np.abs(g-fd)/np.maximum(np.abs(fd), 1e-3*np.abs(fd).max())
print("raster vjp max rel err:", err.max(), " |g|max", np.abs(g).max())
assert err.max() < 2e-3, err.max()

# sanity: silhouette in [0,1], rgb convex-ish
print("sil range", sil.min(), sil.max(), "rgb range", rgb.min(), rgb.max())

# --- hard vs soft at tiny sigma ---
st2 = RasterSettings(sigma=1e-7, gamma=1e-7)
rgb_s, sil_s, _ = raster.soft_rasterize(ndc, depth, tris, colors, cam, st2)
rgb_h, sil_h = raster.hard_rasterize(ndc, depth, tris, colors, cam, st2)
d = np.abs(rgb_s - rgb_h).max(axis=2)
print("hard-vs-soft: frac pixels >1e-3:", (d > 1e-3).mean())

# --- full pipeline FD on a rigid box + fem cube scene (phong) ---
verts, btris = meshes.box_surface((0.4, 0.4, 0.4))
mesh = meshes.box_tet_mesh(1, 1, 1, size=(0.5, 0.5, 0.5))
sc = Scene(bodies=[
    RigidBody(verts, btris, init_pos=(-0.4, 0.3, 0.0), init_quat=(0.9, 0.1, 0.3, 0.0),
              material=Material(mode="phong", color=(0.8, 0.3, 0.2), specular=0.4)),
    FemBody(mesh, init_pos=(0.3, 0.1, 0.0), material=Material(mode="flat", color=(0.2, 0.5, 0.8))),
], camera=Camera(position=(0.2, 0.8, 2.5), target=(0, 0.2, 0), width=20, height=16),
   raster=RasterSettings(sigma=2e-3, gamma=2e-3))
from diffsim.engine import initial_state
from diffsim.scene import ModelParams
state = initial_state(sc, ModelParams.from_scene(sc))

qr2 = rng.standard_normal((16,20,3)); qs2 = rng.standard_normal((16,20))
rgb, sil, cache = render_frame(sc, state)
print("scene rgb mean", rgb.mean(), "sil mean", sil.mean())
dw = render_frame_vjp(cache, qr2, qs2)

# FD against fem body vertex positions (body 1, direct world verts)
x = state[1]["x"]
g1 = dw[1]
idxs = [(0,1),(3,0),(7,2),(5,1)]
for (i,k) in idxs:
    e = 1e-5
    xp = x.copy(); xp[i,k] += e; sp = [state[0], {"x": xp, "v": state[1]["v"]}]
    xm = x.copy(); xm[i,k] -= e; sm = [state[0], {"x": xm, "v": state[1]["v"]}]
    rp, sp_, _ = render_frame(sc, sp); rm, sm_, _ = render_frame(sc, sm)
    fd = (np.sum(qr2*rp)+np.sum(qs2*sp_) - np.sum(qr2*rm)-np.sum(qs2*sm_))/(2*e)
    rel = abs(g1[i,k]-fd)/max(abs(fd),1e-6)
    print(f"pipeline fem vert ({i},{k}): analytic {g1[i,k]:+.6e} fd {fd:+.6e} rel {rel:.2e}")
    assert rel < 2e-3
print("render checks ok")
