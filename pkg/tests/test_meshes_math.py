"""Mesh builders, file I/O, and quaternion/linear-algebra helpers."""

import numpy as np
import pytest

from conftest import fd_grad, rel_err_scaled

from diffsim import mathutil, meshes
from diffsim.render.imageio import read_ppm, write_pgm, write_ppm


def test_box_tet_mesh_counts_and_volume():
    m = meshes.box_tet_mesh(2, 2, 2, size=(1.0, 1.0, 1.0))
    assert m.num_vertices == 27
    assert m.num_elements == 2 * 2 * 2 * 5
    # five tets per cube tile the cube: rest volumes sum to the box volume
    assert m.rest_volume.sum() == pytest.approx(1.0)
    assert m.rest_volume.min() > 0.0


def test_cloth_grid_shape_and_area():
    m = meshes.cloth_grid(3, 2, size=(3.0, 2.0))
    assert m.num_vertices == 4 * 3
    assert m.num_elements == 3 * 2 * 2
    assert m.rest_area.sum() == pytest.approx(6.0)
    # interior edges carry a rest dihedral
    assert m.num_edges == len(m.rest_dihedral)


def test_box_surface_is_closed_and_outward():
    verts, tris = meshes.box_surface((2.0, 2.0, 2.0))
    assert len(tris) == 12
    # divergence theorem: sum of cross-product areas gives zero net normal
    n = np.zeros(3)
    vol6 = 0.0
    for t in tris:
        a, b, c = verts[t]
        n += np.cross(b - a, c - a)
        vol6 += np.dot(a, np.cross(b, c))
    np.testing.assert_allclose(n, 0.0, atol=1e-12)
    assert vol6 / 6.0 == pytest.approx(8.0)  # outward orientation


def test_boundary_faces_of_single_tet():
    faces = meshes.boundary_faces(np.array([[0, 1, 2, 3]]))
    assert len(faces) == 4


def test_box_unit_inertia_matches_formula():
    ext = (2.0, 3.0, 4.0)
    Iu = meshes.box_unit_inertia(ext)
    w, h, d = ext
    expect = np.diag([(h * h + d * d) / 12.0, (w * w + d * d) / 12.0,
                      (w * w + h * h) / 12.0])
    np.testing.assert_allclose(Iu, expect)


def test_obj_roundtrip(tmp_path):
    verts, tris = meshes.box_surface((1.0, 2.0, 0.5))
    path = tmp_path / "box.obj"
    meshes.save_obj(path, verts, tris)
    v2, t2 = meshes.load_obj(path)
    np.testing.assert_allclose(v2, verts, atol=1e-12)
    np.testing.assert_array_equal(t2, tris)


def test_ppm_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, (5, 7, 3))
    path = tmp_path / "img.ppm"
    write_ppm(path, img)
    back = read_ppm(path)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 1.0 / 255.0


def test_pgm_header(tmp_path):
    path = tmp_path / "img.pgm"
    write_pgm(path, np.zeros((3, 4)))
    data = path.read_bytes()
    assert data.startswith(b"P5\n4 3\n255\n")
    assert len(data) == len(b"P5\n4 3\n255\n") + 12


def test_quat_rotate_matches_matrix(rng):
    q = mathutil.normalize(rng.standard_normal(4))
    p = rng.standard_normal(3)
    R = mathutil.quat_to_matrix(q)
    np.testing.assert_allclose(mathutil.quat_rotate(q, p), R @ p, atol=1e-12)


def test_quat_rotate_vjp_vs_fd(rng):
    q = mathutil.normalize(rng.standard_normal(4))
    p = rng.standard_normal(3)
    cot = rng.standard_normal(3)
    qb, pb = mathutil.quat_rotate_vjp(q, p, cot)
    fd_q = fd_grad(lambda z: np.sum(mathutil.quat_rotate(z, p) * cot), q)
    fd_p = fd_grad(lambda z: np.sum(mathutil.quat_rotate(q, z) * cot), p)
    assert rel_err_scaled(qb, fd_q) < 1e-4
    assert rel_err_scaled(pb, fd_p) < 1e-4


def test_normalize_vjp_vs_fd(rng):
    v = rng.standard_normal(4)
    cot = rng.standard_normal(4)
    vb = mathutil.normalize_vjp(v, cot)
    fd = fd_grad(lambda z: np.sum(mathutil.normalize(z) * cot), v)
    assert rel_err_scaled(vb, fd) < 1e-4


def test_cofactor_is_det_times_inverse_transpose(rng):
    F = rng.standard_normal((3, 3)) + np.eye(3)
    C = mathutil.cofactor(F[None])[0]
    np.testing.assert_allclose(C, np.linalg.det(F) * np.linalg.inv(F).T,
                               atol=1e-10)
