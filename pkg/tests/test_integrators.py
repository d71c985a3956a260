"""Eigenvalue estimation, critical time steps, CDM, and leap-frog LTS."""

import math

import numpy as np
import pytest

from cutsem.assembly import (
    CartesianMesh,
    Material,
    assemble_global,
    element_stiffness,
)
from cutsem.errors import Diverged
from cutsem.geometry import _gauss_square, half_plane
from cutsem.gll import tensor_basis
from cutsem.integrators import (
    CFL_SAFETY,
    LtsConfig,
    LtsSolver,
    choose_pt,
    critical_dt_sweep,
    critical_timestep_table,
    element_max_eigenvalue,
    run_cdm,
)

MAT = Material(youngs_modulus=1.0, poisson_ratio=0.0, density=1.0)


def make_system(nx=6, ny=1, p=3, level_set=None, fix_left=True, **kwargs):
    mesh = CartesianMesh(lx=1.0, ly=0.1, nx=nx, ny=ny, p=p, level_set=level_set, **kwargs)
    if fix_left:
        mesh.fix_nodes(lambda x, y: np.abs(x) < 1e-12)
    return mesh, assemble_global(mesh, MAT)


def test_eigenvalue_diagonal_cases():
    assert element_max_eigenvalue(np.diag([4.0, 1.0]), np.ones(2)) == pytest.approx(4.0)
    assert element_max_eigenvalue(np.eye(2), np.full(2, 4.0)) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        element_max_eigenvalue(np.eye(2), np.array([1.0, 0.0]))


def test_eigenvalue_matches_dense_oracle_full_element():
    basis = tensor_basis(5)
    pts, wts = _gauss_square(10)
    ke = element_stiffness(basis, MAT, pts, wts, (0.5, 0.5))
    me = np.repeat(basis.node_weights() * 0.25, 2)
    got = element_max_eigenvalue(ke, me)
    inv_sqrt = 1.0 / np.sqrt(me)
    oracle = np.linalg.eigvalsh(inv_sqrt[:, None] * ke * inv_sqrt[None, :]).max()
    assert abs(got - oracle) <= 1e-8 * oracle


def test_eigenvalue_matches_dense_oracle_cut_element():
    basis = tensor_basis(5)
    from cutsem.geometry import build_cut_quadrature
    from cutsem.momentfit import lump_element

    cutq = build_cut_quadrature(half_plane(1.0, 0.0, 0.5), ((0.0, 1.0), (0.0, 1.0)), depth=4, gauss_degree=10)
    ke = element_stiffness(basis, MAT, cutq.points, cutq.weights, (0.5, 0.5))
    me = np.repeat(lump_element(basis, cutq, "fitted").weights * 0.25, 2)
    got = element_max_eigenvalue(ke, me)
    inv_sqrt = 1.0 / np.sqrt(me)
    oracle = np.linalg.eigvalsh(inv_sqrt[:, None] * ke * inv_sqrt[None, :]).max()
    assert abs(got - oracle) <= 1e-8 * oracle


def test_eigenvalue_clustered_tops():
    # nearly-degenerate and exactly-degenerate leading eigenvalues
    rng = np.random.default_rng(99)
    for gap in (0.0, 1e-9, 1e-7):
        evals = np.sort(rng.uniform(0.1, 0.9, size=20))
        evals = np.concatenate([evals, [1.0 - gap, 1.0]])
        q, _ = np.linalg.qr(rng.standard_normal((22, 22)))
        s = (q * evals) @ q.T
        s = 0.5 * (s + s.T)
        got = element_max_eigenvalue(s, np.ones(22))
        assert abs(got - 1.0) <= 1e-7, gap


def test_choose_pt():
    assert choose_pt(1.0, 1.0) == 2  # the safety factor forces refinement
    assert choose_pt(4e-8, 2.5e-9) == 17
    assert choose_pt(1.0, 2.0) == 1
    assert choose_pt(0.95, 1.0) == 1  # exact ratio must not round up
    with pytest.raises(ValueError):
        choose_pt(0.0, 1.0)


def test_critical_timestep_table_uncut_vs_cut():
    mesh, _ = make_system(nx=6, p=4, fix_left=False)
    table = critical_timestep_table(mesh, MAT)
    assert table.dt_c == min(table.per_element.values())
    assert math.isinf(table.dt_cut_min)
    ls = half_plane(1.0, 0.0, 0.95)
    mesh_cut, _ = make_system(nx=6, p=4, level_set=ls, fix_left=False)
    table_cut = critical_timestep_table(mesh_cut, MAT)
    assert table_cut.dt_cut_min < table_cut.dt_uncut_min
    assert table_cut.dt_c == pytest.approx(table_cut.dt_cut_min)


def test_cdm_zero_load_stays_zero():
    _, system = make_system()
    hist = run_cdm(system, 1e-4, 50)
    assert np.max(np.abs(hist.u_curr)) == 0.0


def test_cdm_harmonic_oscillator_period_error():
    # single DOF: M = 1, K = omega^2
    import scipy.sparse as sp

    from cutsem.assembly import GlobalSystem

    omega = 2.0 * math.pi
    k = sp.csr_matrix(np.array([[omega**2]]))
    system = GlobalSystem(
        k_indptr=k.indptr.astype(np.int64),
        k_indices=k.indices.astype(np.int64),
        k_data=k.data.astype(np.float64),
        lumped_mass=np.ones(1),
        dof_count=1,
        dirichlet_dofs=np.array([], dtype=np.int64),
        cut_element_dofs=np.array([], dtype=np.int64),
    )
    period = 2.0 * math.pi / omega
    err_period = abs(
        run_cdm(system, period / 1000, 1000, u0=np.array([1.0]), v0=np.zeros(1)).u_curr[0] - 1.0
    )
    assert err_period < 1e-4  # < 0.01% of the unit amplitude after one period

    # second-order convergence measured away from a displacement extremum,
    # where the endpoint error is linear in the accumulated phase error
    t_end = 0.35 * period

    def end_error(n_steps):
        dt = t_end / n_steps
        hist = run_cdm(system, dt, n_steps, u0=np.array([1.0]), v0=np.zeros(1))
        return abs(hist.u_curr[0] - math.cos(omega * t_end))

    ratio = end_error(500) / end_error(1000)
    assert 3.6 <= ratio <= 4.4


def test_lts_pt1_all_selected_matches_reference_leapfrog():
    _, system = make_system(nx=5, p=3)
    selection = np.ones(system.dof_count, dtype=bool)
    dt = 1e-4
    solver = LtsSolver(system, LtsConfig(dt, 1, selection))
    rng = np.random.default_rng(4)
    u0 = 1e-3 * rng.standard_normal(system.dof_count)
    u0[system.dirichlet_dofs] = 0.0
    state = solver.initial_state(u0=u0)
    # reference: standard leap-frog in the transformed variables
    z_prev, z_curr = state.z_prev.copy(), state.z_curr.copy()
    for n in range(100):
        state = solver.step(state)
        t = n * dt
        z_next = 2.0 * z_curr - z_prev + dt * dt * (solver.r_of(t) - solver.a_apply(z_curr))
        z_prev, z_curr = z_curr, z_next
        scale = max(np.max(np.abs(z_curr)), 1e-300)
        assert np.max(np.abs(state.z_curr - z_curr)) <= 1e-12 * scale


def test_lts_empty_selection_matches_pt1():
    _, system = make_system(nx=5, p=3)
    rng = np.random.default_rng(8)
    u0 = 1e-3 * rng.standard_normal(system.dof_count)
    u0[system.dirichlet_dofs] = 0.0
    dt = 1e-4
    empty = np.zeros(system.dof_count, dtype=bool)
    s1 = LtsSolver(system, LtsConfig(dt, 1, empty)).run(100, u0=u0)
    s3 = LtsSolver(system, LtsConfig(dt, 3, empty)).run(100, u0=u0)
    scale = max(np.max(np.abs(s1.z_curr)), 1e-300)
    assert np.max(np.abs(s1.z_curr - s3.z_curr)) <= 1e-12 * scale


def test_lts_matches_cdm_trajectory():
    _, system = make_system(nx=5, p=3)
    rng = np.random.default_rng(15)
    u0 = 1e-3 * rng.standard_normal(system.dof_count)
    u0[system.dirichlet_dofs] = 0.0
    dt = 1e-4
    hist = run_cdm(system, dt, 100, u0=u0)
    solver = LtsSolver(system, LtsConfig(dt, 1, np.ones(system.dof_count, dtype=bool)))
    state = solver.run(100, u0=u0)
    u_lts = solver.displacement(state)
    assert np.max(np.abs(u_lts - hist.u_curr)) <= 1e-9 * max(np.max(np.abs(hist.u_curr)), 1e-300)


def test_cdm_diverges_above_cfl():
    mesh, system = make_system(nx=5, p=4)
    table = critical_timestep_table(mesh, MAT)
    rng = np.random.default_rng(2)
    u0 = 1e-6 * rng.standard_normal(system.dof_count)
    u0[system.dirichlet_dofs] = 0.0
    with pytest.raises(Diverged):
        run_cdm(system, 1.2 * table.dt_c, 5000, u0=u0)
    # just below the limit the run stays bounded
    hist = run_cdm(system, 0.99 * table.dt_c, 5000, u0=u0)
    assert np.all(np.isfinite(hist.u_curr))


def test_lts_energy_bounded_at_half_cfl():
    ls = half_plane(1.0, 0.0, 0.95)
    mesh, system = make_system(nx=5, p=4, level_set=ls)
    table = critical_timestep_table(mesh, MAT)
    dt = 0.5 * table.dt_c
    ids = np.flatnonzero(mesh.node_active)
    coords = mesh.node_coords(ids)
    dofs = mesh.node_dofs(ids)
    u0 = np.zeros(system.dof_count)
    u0[dofs[0::2]] = 1e-3 * np.sin(np.pi * coords[:, 0] / 0.95)
    u0[system.dirichlet_dofs] = 0.0
    selection = np.zeros(system.dof_count, dtype=bool)
    selection[system.cut_element_dofs] = True
    selection[system.dirichlet_dofs] = False
    solver = LtsSolver(system, LtsConfig(dt, 2, selection))
    k = system.k_csr()
    us = []
    solver.run(3000, u0=u0, record=lambda s, t, u: us.append(u.copy()))
    us = [u0] + us
    energies = []
    for n in range(1, len(us) - 1):
        v = (us[n + 1] - us[n - 1]) / (2.0 * dt)
        e = 0.5 * v @ (system.lumped_mass * v) + 0.5 * us[n] @ (k @ us[n])
        energies.append(e)
    energies = np.array(energies)
    assert np.max(np.abs(energies / energies[0] - 1.0)) < 0.02


def test_critical_dt_sweep_rows():
    rows = critical_dt_sweep(3, [0.3, 0.7], ["fitted", "scaled"], [0.01], depth=3)
    assert len(rows) == 4
    for p, frac, scheme, eps, ratio in rows:
        assert p == 3
        assert 0.0 < ratio <= 1.5
    with pytest.raises(ValueError):
        critical_dt_sweep(3, [1.0], ["fitted"], [0.01])


def test_cfl_safety_constant():
    assert CFL_SAFETY == 0.95
