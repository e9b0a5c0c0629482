import numpy as np
import pytest
import scipy.sparse.linalg as spla

from nlsrom.dg import DgSpace
from nlsrom.diagnostics import discrete_energy
from nlsrom.errors import ConfigurationError
from nlsrom.mesh import build_periodic_mesh
from nlsrom.sipg import OperatorSet, assemble_stiffness, energy_gradient


def test_symmetric_and_kills_constants(small_ops):
    A = small_ops.A
    assert abs(A - A.T).max() == 0.0
    assert np.abs(A @ np.ones(A.shape[0])).max() < 1e-12


def test_positive_semidefinite(small_ops):
    w = np.linalg.eigvalsh(small_ops.A.toarray())
    assert w.min() > -1e-10 * w.max()
    # only the constants are in the kernel on a periodic mesh
    assert np.sum(w < 1e-8 * w.max()) == 1


def test_harmonic_potential_on_constants():
    # c^T A c = int V = 0.5 * (16 * 1024/3 + 4 * 16 * 1024/3) on [-8, 8]^2
    space = DgSpace(build_periodic_mesh((-8, 8, -8, 8), 8, 8))
    A = assemble_stiffness(space, 0.5, lambda x, y: 0.5 * (x * x + 4 * y * y))
    c = np.ones(space.N)
    assert np.isclose(c @ A @ c, 40960.0 / 3.0, rtol=1e-12)


def test_dirichlet_energy_of_smooth_field():
    # a_h(u, u) -> alpha * int |grad u|^2 = 2 * 2 pi^2 for u = sin x
    vals = []
    for n in (16, 32):
        space = DgSpace(build_periodic_mesh((0, 2 * np.pi, 0, 2 * np.pi), n, n))
        A = assemble_stiffness(space, 2.0)
        u = space.l2_project(lambda x, y: np.sin(x))
        vals.append(u @ A @ u)
    exact = 4 * np.pi ** 2
    e1, e2 = abs(vals[0] - exact), abs(vals[1] - exact)
    assert e2 < 0.02 * exact and e2 < e1


def test_penalty_and_alpha_validated(small_space):
    with pytest.raises(ConfigurationError):
        assemble_stiffness(small_space, 1.0, kappa=0.0)
    with pytest.raises(ConfigurationError):
        assemble_stiffness(small_space, -1.0)


def test_nonlinearity_of_constant_state(small_ops):
    # psi = a: b_r = beta a^3 int phi_i = beta a^3 |K| / 3
    N = small_ops.N
    a = 0.7
    z = np.concatenate([a * np.ones(N), np.zeros(N)])
    b = small_ops.nonlinear(z)
    areas = np.repeat(small_ops.space.areas, 3)
    assert np.allclose(b[:N], 2.0 * a ** 3 * areas / 3.0)
    assert np.allclose(b[N:], 0.0)


def test_nonlinear_jacobian_matches_differences(small_ops, rng):
    z = rng.standard_normal(small_ops.dim)
    v = rng.standard_normal(small_ops.dim)
    h = 1e-6
    fd = (small_ops.nonlinear(z + h * v) - small_ops.nonlinear(z - h * v)) / (2 * h)
    Jv = small_ops.nonlinear_jacobian(z) @ v
    assert np.linalg.norm(fd - Jv) <= 1e-7 * np.linalg.norm(Jv)


def test_energy_gradient_matches_central_differences(small_ops, rng):
    z = rng.standard_normal(small_ops.dim)
    g = energy_gradient(small_ops, z)
    h = 1e-5
    for i in rng.choice(small_ops.dim, 12, replace=False):
        e = np.zeros(small_ops.dim)
        e[i] = h
        fd = (discrete_energy(small_ops, z + e) - discrete_energy(small_ops, z - e)) / (2 * h)
        assert abs(fd - g[i]) <= 1e-6 * max(abs(g[i]), 1.0)


def test_chord_solver_inverts_linear_part(small_ops, rng):
    theta_tau = 0.37e-3
    solve = small_ops.linear_part_solver(theta_tau)
    K = (small_ops.lhs - theta_tau * small_ops.structure @ small_ops.stiffness).tocsc()
    rhs = rng.standard_normal(small_ops.dim)
    assert np.allclose(solve(rhs), spla.spsolve(K, rhs), atol=1e-12)


def test_counters_track_full_evaluations(small_space):
    ops = OperatorSet(small_space, 1.0, 1.0)
    z = np.zeros(ops.dim)
    ops.nonlinear(z)
    ops.nonlinear(z)
    ops.nonlinear_jacobian(z)
    assert ops.counters["full_nonlinear"] == 2
    assert ops.counters["full_jacobian"] == 1


def test_local_evaluation_matches_global(small_ops, rng):
    z = rng.standard_normal(small_ops.dim)
    R, S = small_ops.split(z)
    els = np.array([3, 7, 11])
    br, bs = small_ops.local_nonlinear(R[els], S[els], els)
    full = small_ops.nonlinear(z)
    dofs = small_ops.space.dofs(els)
    assert np.allclose(br, full[dofs])
    assert np.allclose(bs, full[dofs + small_ops.N])
