"""Finite-difference checks of every force/step kernel's hand adjoint."""

import numpy as np
import pytest

from conftest import fd_grad, rel_err, rel_err_scaled

from diffsim.dynamics import contact, fem, particles, pendulum, rigid, shell
from diffsim.dynamics.contact import ContactPlane
from diffsim.mathutil import normalize
from diffsim.meshes import TetMesh, box_tet_mesh, cloth_grid

SEEDS = [0, 1, 2]


@pytest.mark.parametrize("seed", SEEDS)
def test_fem_force_is_negative_energy_gradient(seed):
    rng = np.random.default_rng(seed)
    mesh = TetMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]]),
                   np.array([[0, 1, 2, 3]]))
    x = mesh.rest_positions + 0.1 * rng.standard_normal((4, 3))
    mu = np.array([1000.0])
    lam = np.array([800.0])
    act = np.array([1.1])
    f = fem.fem_forces(x, mesh, mu, lam, act)
    fd = -fd_grad(lambda xx: fem.fem_energy(xx, mesh, mu, lam, act), x)
    assert rel_err_scaled(f, fd) < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_fem_force_vjp(seed):
    rng = np.random.default_rng(seed)
    mesh = box_tet_mesh(1, 1, 1)
    x = mesh.rest_positions + 0.05 * rng.standard_normal((8, 3))
    M = mesh.num_elements
    mu = rng.uniform(500, 2000, M)
    lam = rng.uniform(500, 2000, M)
    act = rng.uniform(0.9, 1.2, M)
    cot = rng.standard_normal((8, 3))
    xb, mub, lamb, actb = fem.fem_forces_vjp(x, mesh, mu, lam, act, cot)
    assert rel_err_scaled(xb, fd_grad(
        lambda z: np.sum(fem.fem_forces(z, mesh, mu, lam, act) * cot), x)) < 1e-4
    assert rel_err_scaled(mub, fd_grad(
        lambda z: np.sum(fem.fem_forces(x, mesh, z, lam, act) * cot), mu)) < 1e-4
    assert rel_err_scaled(lamb, fd_grad(
        lambda z: np.sum(fem.fem_forces(x, mesh, mu, z, act) * cot), lam)) < 1e-4
    assert rel_err_scaled(actb, fd_grad(
        lambda z: np.sum(fem.fem_forces(x, mesh, mu, lam, z) * cot), act)) < 1e-4


def test_fem_rest_state_is_force_free_with_passive_activation():
    mesh = box_tet_mesh(1, 1, 1)
    M = mesh.num_elements
    mu = np.full(M, 1000.0)
    lam = np.full(M, 1300.0)
    act = fem.passive_activation(mu, lam)
    f0 = fem.fem_forces(mesh.rest_positions, mesh, mu, lam, act)
    assert np.abs(f0).max() < 1e-9
    # independent oracle: the rest pose is a stationary point of the energy
    fd = fd_grad(lambda z: fem.fem_energy(z, mesh, mu, lam, act),
                 mesh.rest_positions, eps=1e-6)
    assert np.abs(fd).max() < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_membrane_force_and_vjp(seed):
    rng = np.random.default_rng(seed)
    cm = cloth_grid(2, 2, size=(1.0, 1.0))
    xs = cm.rest_positions + 0.05 * rng.standard_normal(cm.rest_positions.shape)
    M = cm.num_elements
    mu = rng.uniform(200, 800, M)
    lam = rng.uniform(200, 800, M)
    act = rng.uniform(0.9, 1.3, M)
    fm = shell.membrane_forces(xs, cm, mu, lam, act)
    fd = -fd_grad(lambda z: shell.membrane_energy(z, cm, mu, lam, act), xs)
    assert rel_err_scaled(fm, fd) < 1e-4
    cot = rng.standard_normal(xs.shape)
    xb, mub, lamb, actb = shell.membrane_forces_vjp(xs, cm, mu, lam, act, cot)
    assert rel_err_scaled(xb, fd_grad(
        lambda z: np.sum(shell.membrane_forces(z, cm, mu, lam, act) * cot), xs)) < 1e-4
    assert rel_err_scaled(mub, fd_grad(
        lambda z: np.sum(shell.membrane_forces(xs, cm, z, lam, act) * cot),
        mu, eps=1e-4)) < 1e-4
    assert rel_err_scaled(lamb, fd_grad(
        lambda z: np.sum(shell.membrane_forces(xs, cm, mu, z, act) * cot),
        lam, eps=1e-4)) < 1e-4
    assert rel_err_scaled(actb, fd_grad(
        lambda z: np.sum(shell.membrane_forces(xs, cm, mu, lam, z) * cot),
        act, eps=1e-5)) < 1e-4


def test_membrane_rest_state_is_force_free_with_passive_activation():
    cm = cloth_grid(3, 3)
    M = cm.num_elements
    mu = np.full(M, 500.0)
    lam = np.full(M, 700.0)
    act = shell.shell_passive_activation(mu, lam)
    f0 = shell.membrane_forces(cm.rest_positions, cm, mu, lam, act)
    assert np.abs(f0).max() < 1e-9


@pytest.mark.parametrize("seed", SEEDS)
def test_bending_force_vjp_and_balance(seed):
    rng = np.random.default_rng(seed)
    cm = cloth_grid(2, 2)
    xs = cm.rest_positions + 0.05 * rng.standard_normal(cm.rest_positions.shape)
    E = cm.num_edges
    kb = rng.uniform(0.5, 3.0, E)
    ae = rng.uniform(-0.1, 0.1, E)
    rest = cm.rest_dihedral
    fb = shell.bending_forces(xs, cm.edges, rest, kb, ae)
    assert np.abs(fb.sum(axis=0)).max() < 1e-10
    cot = rng.standard_normal(xs.shape)
    xb, kbb, aeb = shell.bending_forces_vjp(xs, cm.edges, rest, kb, ae, cot)
    assert rel_err_scaled(xb, fd_grad(
        lambda z: np.sum(shell.bending_forces(z, cm.edges, rest, kb, ae) * cot), xs)) < 1e-4
    assert rel_err_scaled(kbb, fd_grad(
        lambda z: np.sum(shell.bending_forces(xs, cm.edges, rest, z, ae) * cot), kb)) < 1e-4
    assert rel_err_scaled(aeb, fd_grad(
        lambda z: np.sum(shell.bending_forces(xs, cm.edges, rest, kb, z) * cot), ae)) < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_aero_force_vjp(seed):
    rng = np.random.default_rng(seed)
    cm = cloth_grid(2, 2)
    xs = cm.rest_positions + 0.05 * rng.standard_normal(cm.rest_positions.shape)
    vs = rng.standard_normal(xs.shape)
    wind = rng.standard_normal(3) * 0.4
    cot = rng.standard_normal(xs.shape)
    xb, vb = shell.aero_forces_vjp(xs, vs, cm, 1.0, 0.1, wind, cot)
    assert rel_err_scaled(xb, fd_grad(
        lambda z: np.sum(shell.aero_forces(z, vs, cm, 1.0, 0.1, wind) * cot), xs)) < 1e-4
    assert rel_err_scaled(vb, fd_grad(
        lambda z: np.sum(shell.aero_forces(xs, z, cm, 1.0, 0.1, wind) * cot), vs)) < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_ground_contact_vjp(seed):
    rng = np.random.default_rng(seed)
    pl = ContactPlane()
    x = rng.standard_normal((6, 3)) * 0.5
    x[:, 1] = rng.uniform(-0.05, 0.05, 6)
    v = rng.standard_normal((6, 3))
    ke, kd, kf, mc = 100.0, 5.0, 30.0, 0.6
    cot = rng.standard_normal((6, 3))
    xb, vb, keb, kdb, kfb, mub = contact.ground_contact_forces_vjp(
        x, v, pl, ke, kd, kf, mc, cot)

    def loss(xx=x, vv=v, ke_=ke, kd_=kd, kf_=kf, mc_=mc):
        return np.sum(contact.ground_contact_forces(xx, vv, pl, ke_, kd_, kf_, mc_) * cot)

    assert rel_err_scaled(xb, fd_grad(lambda z: loss(xx=z), x)) < 1e-4
    assert rel_err_scaled(vb, fd_grad(lambda z: loss(vv=z), v)) < 1e-4
    assert rel_err_scaled([keb], fd_grad(lambda z: loss(ke_=z[0]), np.array([ke]))) < 1e-4
    assert rel_err_scaled([kdb], fd_grad(lambda z: loss(kd_=z[0]), np.array([kd]))) < 1e-4
    assert rel_err_scaled([kfb], fd_grad(lambda z: loss(kf_=z[0]), np.array([kf]))) < 1e-4
    assert rel_err_scaled([mub], fd_grad(lambda z: loss(mc_=z[0]), np.array([mc]))) < 1e-4


def test_coulomb_cap_never_exceeded():
    rng = np.random.default_rng(7)
    pl = ContactPlane()
    ke, kd, kf, mc = 500.0, 10.0, 80.0, 0.45
    x = rng.standard_normal((2000, 3))
    x[:, 1] = rng.uniform(-0.2, 0.05, 2000)
    v = rng.standard_normal((2000, 3)) * 3.0
    f = contact.ground_contact_forces(x, v, pl, ke, kd, kf, mc)
    fn = f[:, 1]
    ft = np.linalg.norm(f[:, [0, 2]], axis=1)
    assert np.all(ft <= mc * np.abs(fn) + 1e-12)


@pytest.mark.parametrize("seed", SEEDS)
def test_rigid_step_vjp(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(3)
    r = normalize(rng.standard_normal(4))
    v = rng.standard_normal(3)
    w = rng.standard_normal(3)
    f = rng.standard_normal(3)
    tau = rng.standard_normal(3)
    m = 2.0
    Iu = np.diag([0.2, 0.3, 0.4])
    Iui = np.linalg.inv(Iu)
    dt = 0.02
    cots = [rng.standard_normal(3), rng.standard_normal(4),
            rng.standard_normal(3), rng.standard_normal(3)]

    def scal(x_, r_, v_, w_, f_, tau_, m_):
        o = rigid.rigid_step(x_, r_, v_, w_, f_, tau_, m_, Iu, Iui, dt)
        return sum(np.sum(a * b) for a, b in zip(o, cots))

    out = rigid.rigid_step_vjp(x, r, v, w, f, tau, m, Iu, Iui, dt, *cots)
    args = [x, r, v, w, f, tau]
    for i in range(6):
        def fwrap(a, i=i):
            aa = list(args)
            aa[i] = a
            return scal(*aa, m)
        assert rel_err_scaled(out[i], fd_grad(fwrap, args[i])) < 1e-4
    fd_m = fd_grad(lambda a: scal(*args, a[0]), np.array([m]))
    assert rel_err_scaled([out[6]], fd_m) < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_rigid_contact_wrench_vjp(seed):
    rng = np.random.default_rng(seed)
    pl = ContactPlane()
    verts = rng.standard_normal((8, 3)) * 0.3
    x = np.array([0.0, 0.1, 0.0])
    r = normalize(rng.standard_normal(4))
    v = rng.standard_normal(3)
    w = rng.standard_normal(3)
    ke, kd, kf, mc = 100.0, 5.0, 30.0, 0.6
    cf = rng.standard_normal(3)
    ct = rng.standard_normal(3)

    def scal(x_, r_, v_, w_, ke_, kd_, kf_, mc_):
        f_, t_ = rigid.rigid_contact_wrench(x_, r_, v_, w_, verts, pl,
                                            ke_, kd_, kf_, mc_)
        return np.sum(f_ * cf) + np.sum(t_ * ct)

    out = rigid.rigid_contact_wrench_vjp(x, r, v, w, verts, pl, ke, kd, kf, mc,
                                         cf, ct)
    args = [x, r, v, w]
    for i in range(4):
        def fwrap(a, i=i):
            aa = [x, r, v, w, ke, kd, kf, mc]
            aa[i] = a
            return scal(*aa)
        assert rel_err_scaled(out[i], fd_grad(fwrap, args[i])) < 1e-4
    scalars = [ke, kd, kf, mc]
    for j in range(4):
        def fwrap(a, j=j):
            aa = [x, r, v, w, ke, kd, kf, mc]
            aa[4 + j] = a[0]
            return scal(*aa)
        assert rel_err_scaled([out[4 + j]], fd_grad(fwrap, np.array([scalars[j]]))) < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("links", [1, 2])
def test_pendulum_step_vjp(seed, links):
    rng = np.random.default_rng(seed)
    ang = rng.uniform(-1, 1, links)
    rate = rng.uniform(-1, 1, links)
    L = rng.uniform(0.5, 2.0, links)
    m = rng.uniform(0.5, 2.0, links)
    g = 9.8
    ca = rng.standard_normal(links)
    cr = rng.standard_normal(links)

    def scal(ang_, rate_, L_, m_, g_):
        a1, r1 = pendulum.pendulum_step(ang_, rate_, L_, m_, g_, 0.01)
        return np.sum(a1 * ca) + np.sum(r1 * cr)

    out = pendulum.pendulum_step_vjp(ang, rate, L, m, g, 0.01, ca, cr)
    args = [ang, rate, L, m]
    for i in range(4):
        def fwrap(a, i=i):
            aa = [ang, rate, L, m, g]
            aa[i] = a
            return scal(*aa)
        assert rel_err_scaled(out[i], fd_grad(fwrap, args[i])) < 1e-4
    fd_g = fd_grad(lambda a: scal(ang, rate, L, m, a[0]), np.array([g]))
    assert rel_err_scaled([out[4]], fd_g) < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_particle_integrate_vjp(seed):
    rng = np.random.default_rng(seed)
    N = 5
    x = rng.standard_normal((N, 3))
    v = rng.standard_normal((N, 3))
    f = rng.standard_normal((N, 3))
    w = np.abs(rng.standard_normal(N))
    w[0] = 0.0  # a pinned particle
    g = np.array([0.0, 9.8, 0.0])
    c1 = rng.standard_normal((N, 3))
    c2 = rng.standard_normal((N, 3))
    xb, vb, fb, wb, gb = particles.integrate_particles_vjp(x, v, f, w, g, 0.01,
                                                           c1, c2)

    def scal(x_, v_, f_, g_):
        a, b = particles.integrate_particles(x_, v_, f_, w, g_, 0.01)
        return np.sum(a * c1) + np.sum(b * c2)

    assert rel_err_scaled(xb, fd_grad(lambda z: scal(z, v, f, g), x)) < 1e-4
    assert rel_err_scaled(vb, fd_grad(lambda z: scal(x, z, f, g), v)) < 1e-4
    assert rel_err_scaled(fb, fd_grad(lambda z: scal(x, v, z, g), f)) < 1e-4
    assert rel_err_scaled(gb, fd_grad(lambda z: scal(x, v, f, z), g)) < 1e-4


def test_static_particle_ignores_forces_and_gravity():
    x = np.zeros((2, 3))
    v = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    f = np.ones((2, 3)) * 5.0
    w = np.array([0.0, 1.0])
    g = np.array([0.0, 9.8, 0.0])
    x1, v1 = particles.integrate_particles(x, v, f, w, g, 0.1)
    assert np.array_equal(v1[0], v[0])
    assert np.array_equal(x1[0], x[0])
    # dynamic particle: gravity vector (0, 9.8, 0) accelerates along -y
    assert np.allclose(v1[1], v[1] + (f[1] - g) * 0.1)
    assert np.allclose(x1[1], x[1] + v1[1] * 0.1)
