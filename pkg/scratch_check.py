import sys
sys.path.insert(0, "src")
import numpy as np
from diffsim.meshes import TetMesh, cloth_grid, box_tet_mesh
from diffsim.dynamics import fem, shell, contact, rigid, pendulum, particles

rng = np.random.default_rng(0)

def fd_grad(f, x, eps=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp = x.copy(); xp[i] += eps
        xm = x.copy(); xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g

def rel(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-8))

# --- FEM ---
mesh = TetMesh(np.array([[0,0,0],[1,0,0],[0,1,0],[0,0,1.0]]), np.array([[0,1,2,3]]))
x = mesh.rest_positions + 0.1*rng.standard_normal((4,3))
mu = np.array([1000.0]); lam = np.array([800.0]); act = np.array([1.1])
f = fem.fem_forces(x, mesh, mu, lam, act)
fd = -fd_grad(lambda xx: fem.fem_energy(xx, mesh, mu, lam, act), x)
print("fem force vs -dU:", rel(f, fd))

cot = rng.standard_normal((4,3))
xb, mub, lamb, actb = fem.fem_forces_vjp(x, mesh, mu, lam, act, cot)
fdx = fd_grad(lambda xx: np.sum(fem.fem_forces(xx, mesh, mu, lam, act)*cot), x)
print("fem vjp x:", rel(xb, fdx))
print("fem vjp mu:", rel(mub, fd_grad(lambda m: np.sum(fem.fem_forces(x, mesh, m, lam, act)*cot), mu)))
print("fem vjp lam:", rel(lamb, fd_grad(lambda l: np.sum(fem.fem_forces(x, mesh, mu, l, act)*cot), lam)))
print("fem vjp act:", rel(actb, fd_grad(lambda a: np.sum(fem.fem_forces(x, mesh, mu, lam, a)*cot), act)))

# rest stability
mu0, lam0 = np.array([1000.0]), np.array([1000.0])
a0 = fem.passive_activation(mu0, lam0)
f0 = fem.fem_forces(mesh.rest_positions, mesh, mu0, lam0, a0)
print("fem rest force:", np.abs(f0).max())

# --- shell membrane ---
cm = cloth_grid(2, 2, size=(1.0, 1.0))
xs = cm.rest_positions + 0.05*rng.standard_normal(cm.rest_positions.shape)
M = cm.num_elements
smu = np.full(M, 500.0); slam = np.full(M, 400.0); sact = np.full(M, 1.2)
fm = shell.membrane_forces(xs, cm, smu, slam, sact)
fdm = -fd_grad(lambda xx: shell.membrane_energy(xx, cm, smu, slam, sact), xs)
print("membrane force vs -dU:", rel(fm, fdm))
cots = rng.standard_normal(xs.shape)
xb, mub, lamb, actb = shell.membrane_forces_vjp(xs, cm, smu, slam, sact, cots)
print("membrane vjp x:", rel(xb, fd_grad(lambda xx: np.sum(shell.membrane_forces(xx, cm, smu, slam, sact)*cots), xs)))
print("membrane vjp mu:", rel(mub, fd_grad(lambda m: np.sum(shell.membrane_forces(xs, cm, m, slam, sact)*cots), smu)))
print("membrane vjp act:", rel(actb, fd_grad(lambda a: np.sum(shell.membrane_forces(xs, cm, smu, slam, a)*cots), sact)))
# membrane rest force with passive act
sa0 = shell.shell_passive_activation(smu, slam)
print("membrane rest force:", np.abs(shell.membrane_forces(cm.rest_positions, cm, smu, slam, sa0)).max())

# --- bending ---
E = cm.num_edges
kb = np.full(E, 2.0); ae = np.full(E, 0.05)
rest = cm.rest_dihedral
fb = shell.bending_forces(xs, cm.edges, rest, kb, ae)
print("bending force sum:", np.abs(fb.sum(axis=0)).max())
xb, kbb, aeb = shell.bending_forces_vjp(xs, cm.edges, rest, kb, ae, cots)
print("bending vjp x:", rel(xb, fd_grad(lambda xx: np.sum(shell.bending_forces(xx, cm.edges, rest, kb, ae)*cots), xs)))
print("bending vjp kb:", rel(kbb, fd_grad(lambda k: np.sum(shell.bending_forces(xs, cm.edges, rest, k, ae)*cots), kb)))
print("bending vjp act:", rel(aeb, fd_grad(lambda a: np.sum(shell.bending_forces(xs, cm.edges, rest, kb, a)*cots), ae)))

# --- aero ---
vs = rng.standard_normal(xs.shape)
wind = np.array([0.3, 0.1, -0.2])
fa = shell.aero_forces(xs, vs, cm, 1.0, 0.1, wind)
xb, vb = shell.aero_forces_vjp(xs, vs, cm, 1.0, 0.1, wind, cots)
print("aero vjp x:", rel(xb, fd_grad(lambda xx: np.sum(shell.aero_forces(xx, vs, cm, 1.0, 0.1, wind)*cots), xs)))
print("aero vjp v:", rel(vb, fd_grad(lambda vv: np.sum(shell.aero_forces(xs, vv, cm, 1.0, 0.1, wind)*cots), vs)))

# --- contact ---
pl = contact.ContactPlane()
xc = rng.standard_normal((6,3))*0.5
xc[:,1] = rng.uniform(-0.05, 0.05, 6)
vc = rng.standard_normal((6,3))
ke, kd, kf, mc = 100.0, 5.0, 30.0, 0.6
cotc = rng.standard_normal((6,3))
xb, vb, keb, kdb, kfb, mub = contact.ground_contact_forces_vjp(xc, vc, pl, ke, kd, kf, mc, cotc)
print("contact vjp x:", rel(xb, fd_grad(lambda xx: np.sum(contact.ground_contact_forces(xx, vc, pl, ke, kd, kf, mc)*cotc), xc)))
print("contact vjp v:", rel(vb, fd_grad(lambda vv: np.sum(contact.ground_contact_forces(xc, vv, pl, ke, kd, kf, mc)*cotc), vc)))
print("contact vjp ke:", rel(np.array([keb]), fd_grad(lambda k: np.sum(contact.ground_contact_forces(xc, vc, pl, k[0], kd, kf, mc)*cotc), np.array([ke]))))
print("contact vjp kd:", rel(np.array([kdb]), fd_grad(lambda k: np.sum(contact.ground_contact_forces(xc, vc, pl, ke, k[0], kf, mc)*cotc), np.array([kd]))))
print("contact vjp kf:", rel(np.array([kfb]), fd_grad(lambda k: np.sum(contact.ground_contact_forces(xc, vc, pl, ke, kd, k[0], mc)*cotc), np.array([kf]))))
print("contact vjp mu:", rel(np.array([mub]), fd_grad(lambda k: np.sum(contact.ground_contact_forces(xc, vc, pl, ke, kd, kf, k[0])*cotc), np.array([mc]))))

# --- rigid step ---
from diffsim.mathutil import normalize
xr = np.array([0.1, 0.5, -0.2]); rr = normalize(rng.standard_normal(4))
vr = rng.standard_normal(3); wr = rng.standard_normal(3)
fr = rng.standard_normal(3); taur = rng.standard_normal(3); m = 2.0
Iu = np.diag([0.2, 0.3, 0.4]); Iui = np.linalg.inv(Iu); dt = 0.02
cots4 = [rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(3), rng.standard_normal(3)]
def rigid_scalar(xr_, rr_, vr_, wr_, fr_, taur_, m_):
    o = rigid.rigid_step(xr_, rr_, vr_, wr_, fr_, taur_, m_, Iu, Iui, dt)
    return sum(np.sum(a*b) for a, b in zip(o, cots4))
out = rigid.rigid_step_vjp(xr, rr, vr, wr, fr, taur, m, Iu, Iui, dt, cots4[0], cots4[1], cots4[2], cots4[3])
names = ["x","r","v","w","f","tau","m"]
args = [xr, rr, vr, wr, fr, taur, np.array([m])]
for i, nm in enumerate(names):
    def fwrap(a, i=i):
        aa = [np.asarray(z, dtype=float) for z in [xr, rr, vr, wr, fr, taur]] + [m]
        if i < 6: aa[i] = a
        else: aa[6] = a[0]
        return rigid_scalar(*aa)
    fd = fd_grad(fwrap, args[i])
    got = out[i] if i < 6 else np.array([out[6]])
    print(f"rigid vjp {nm}:", rel(got, fd))

# --- rigid contact wrench ---
verts = rng.standard_normal((8,3))*0.3
xr2 = np.array([0.0, 0.1, 0.0])
cotf = rng.standard_normal(3); cott = rng.standard_normal(3)
def wrench_scalar(xr_, rr_, vr_, wr_, ke_, kd_, kf_, mc_):
    f_, t_ = rigid.rigid_contact_wrench(xr_, rr_, vr_, wr_, verts, pl, ke_, kd_, kf_, mc_)
    return np.sum(f_*cotf) + np.sum(t_*cott)
outw = rigid.rigid_contact_wrench_vjp(xr2, rr, vr, wr, verts, pl, ke, kd, kf, mc, cotf, cott)
wargs = [xr2, rr, vr, wr, np.array([ke]), np.array([kd]), np.array([kf]), np.array([mc])]
wnames = ["x","r","v","w","ke","kd","kf","mu"]
for i, nm in enumerate(wnames):
    def fwrap(a, i=i):
        aa = [xr2, rr, vr, wr, ke, kd, kf, mc]
        aa[i] = a if i < 4 else a[0]
        return wrench_scalar(*aa)
    fd = fd_grad(fwrap, wargs[i])
    got = outw[i] if i < 4 else np.array([outw[i]])
    print(f"wrench vjp {nm}:", rel(got, fd))

# --- pendulum ---
for k in (1, 2):
    ang = rng.uniform(-1, 1, k); rate = rng.uniform(-1, 1, k)
    Ls = rng.uniform(0.5, 2.0, k); ms = rng.uniform(0.5, 2.0, k); g = 9.8
    ca = rng.standard_normal(k); cr = rng.standard_normal(k)
    def pscal(ang_, rate_, Ls_, ms_, g_):
        a1, r1 = pendulum.pendulum_step(ang_, rate_, Ls_, ms_, g_, 0.01)
        return np.sum(a1*ca) + np.sum(r1*cr)
    out = pendulum.pendulum_step_vjp(ang, rate, Ls, ms, g, 0.01, ca, cr)
    pargs = [ang, rate, Ls, ms, np.array([g])]
    pnames = ["ang","rate","L","m","g"]
    for i, nm in enumerate(pnames):
        def fwrap(a, i=i):
            aa = [ang, rate, Ls, ms, g]
            aa[i] = a if i < 4 else a[0]
            return pscal(*aa)
        fd = fd_grad(fwrap, pargs[i])
        got = out[i] if i < 4 else np.array([out[4]])
        print(f"pendulum{k} vjp {nm}:", rel(got, fd))

# --- particles ---
N = 5
xp = rng.standard_normal((N,3)); vp = rng.standard_normal((N,3)); fp = rng.standard_normal((N,3))
wp = np.array([0.0, 1.0, 0.5, 2.0, 1.5]); gv = np.array([0.0, 9.8, 0.0])
c1 = rng.standard_normal((N,3)); c2 = rng.standard_normal((N,3))
xb, vb, fb2, wb, gb = particles.integrate_particles_vjp(xp, vp, fp, wp, gv, 0.01, c1, c2)
def iscal(xp_, vp_, fp_, gv_):
    a, b = particles.integrate_particles(xp_, vp_, fp_, wp, gv_, 0.01)
    return np.sum(a*c1) + np.sum(b*c2)
print("particles vjp x:", rel(xb, fd_grad(lambda z: iscal(z, vp, fp, gv), xp)))
print("particles vjp v:", rel(vb, fd_grad(lambda z: iscal(xp, z, fp, gv), vp)))
print("particles vjp f:", rel(fb2, fd_grad(lambda z: iscal(xp, vp, z, gv), fp)))
print("particles vjp g:", rel(gb, fd_grad(lambda z: iscal(xp, vp, fp, z), gv)))
