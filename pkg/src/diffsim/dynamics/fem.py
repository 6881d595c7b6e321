"""Stable neo-Hookean tetrahedral FEM forces and their analytic adjoint.

Energy density per element:

    Psi = mu/2*(I_C - 3) + lam/2*(J - act)^2 - mu/2*log(I_C + 1)

with I_C = tr(F^T F), J = det F, F = Ds * Dm^{-1}. The energy stays finite
under element inversion (J <= 0), so inverted elements are not an error.
Forces are the exact negative gradient of U = sum_e V_e Psi_e via the
analytic first Piola-Kirchhoff stress; the adjoint applies the analytic
Hessian of Psi (symmetric), so no numerical differentiation appears on
either path.
"""

import numpy as np

from ..mathutil import cofactor, cofactor_jvp


def passive_activation(mu, lam):
    """Activation making the rest pose force-free for this energy."""
    return 1.0 + 0.75 * mu / lam


def _deformation(x, mesh):
    t = mesh.tets
    Ds = np.stack(
        [x[t[:, 1]] - x[t[:, 0]], x[t[:, 2]] - x[t[:, 0]], x[t[:, 3]] - x[t[:, 0]]],
        axis=2,
    )
    F = Ds @ mesh.Dm_inv
    return F


def _invariants(F):
    IC = np.einsum("eij,eij->e", F, F)
    C = cofactor(F)
    J = np.einsum("ei,ei->e", C[:, :, 0], F[:, :, 0])
    return IC, C, J


def fem_energy(x, mesh, mu, lam, act):
    """Total elastic potential U(q); used as the finite-difference oracle."""
    F = _deformation(x, mesh)
    IC, _, J = _invariants(F)
    psi = 0.5 * mu * (IC - 3.0) + 0.5 * lam * (J - act) ** 2 - 0.5 * mu * np.log(IC + 1.0)
    return float(np.sum(mesh.rest_volume * psi))


def _pk1(F, mu, lam, act):
    IC, C, J = _invariants(F)
    s = (1.0 - 1.0 / (IC + 1.0))[:, None, None]
    return mu[:, None, None] * F * s + (lam * (J - act))[:, None, None] * C, (IC, C, J)


def fem_forces(x, mesh, mu, lam, act):
    """Per-vertex elastic forces, shape (N, 3)."""
    F = _deformation(x, mesh)
    P, _ = _pk1(F, mu, lam, act)
    H = -mesh.rest_volume[:, None, None] * (P @ np.transpose(mesh.Dm_inv, (0, 2, 1)))
    f = np.zeros_like(x)
    t = mesh.tets
    np.add.at(f, t[:, 1], H[:, :, 0])
    np.add.at(f, t[:, 2], H[:, :, 1])
    np.add.at(f, t[:, 3], H[:, :, 2])
    np.add.at(f, t[:, 0], -(H[:, :, 0] + H[:, :, 1] + H[:, :, 2]))
    return f


def fem_forces_vjp(x, mesh, mu, lam, act, cot):
    """Adjoint of fem_forces: returns (x_bar, mu_bar, lam_bar, act_bar)."""
    t = mesh.tets
    F = _deformation(x, mesh)
    IC, C, J = _invariants(F)
    s = 1.0 - 1.0 / (IC + 1.0)

    U = np.stack(
        [cot[t[:, 1]] - cot[t[:, 0]], cot[t[:, 2]] - cot[t[:, 0]], cot[t[:, 3]] - cot[t[:, 0]]],
        axis=2,
    )
    P_bar = -mesh.rest_volume[:, None, None] * (U @ mesh.Dm_inv)

    # parameter cotangents (mixed second derivatives of Psi)
    dP_dmu = F * s[:, None, None]
    PC = np.einsum("eij,eij->e", P_bar, C)
    mu_bar = np.einsum("eij,eij->e", P_bar, dP_dmu)
    lam_bar = (J - act) * PC
    act_bar = -lam * PC

    # F_bar = Hessian(Psi) applied to P_bar (symmetric operator)
    W = P_bar
    FW = np.einsum("eij,eij->e", F, W)
    CW = np.einsum("eij,eij->e", C, W)
    HW = (
        mu[:, None, None] * W * s[:, None, None]
        + (mu * 2.0 * FW / (IC + 1.0) ** 2)[:, None, None] * F
        + (lam * CW)[:, None, None] * C
        + (lam * (J - act))[:, None, None] * cofactor_jvp(F, W)
    )

    Ds_bar = HW @ np.transpose(mesh.Dm_inv, (0, 2, 1))
    x_bar = np.zeros_like(x)
    np.add.at(x_bar, t[:, 1], Ds_bar[:, :, 0])
    np.add.at(x_bar, t[:, 2], Ds_bar[:, :, 1])
    np.add.at(x_bar, t[:, 3], Ds_bar[:, :, 2])
    np.add.at(x_bar, t[:, 0], -(Ds_bar[:, :, 0] + Ds_bar[:, :, 1] + Ds_bar[:, :, 2]))
    return x_bar, mu_bar, lam_bar, act_bar
