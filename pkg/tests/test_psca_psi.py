import numpy as np
import pytest
from dataclasses import replace

from bdris_isac.ao import SolverSettings
from bdris_isac.geometry import ScenarioConfig, make_scenario
from bdris_isac.manifold import feasibility_residual, random_feasible
from bdris_isac.metrics import FisherState, effective_channels, fim_blocks_from_beams, fim_matrix, link_gains
from bdris_isac.oracles import fd_complex_gradient, relative_error
from bdris_isac.psca_psi import (
    PsiIterate,
    analytic_gradient_psi,
    assemble_p_matrices,
    build_psi_iterate,
    comm_aux,
    lift_constant,
    psi_step,
    sigma_blocks,
    solve_psi_subproblem,
    surrogate_value,
)

from conftest import TINY, cplx, problem_at, random_beam, random_point

SETTINGS = SolverSettings()


def test_lift_constant_examples(rng):
    assert lift_constant(np.eye(3)) == pytest.approx(2e-6)
    assert lift_constant(-np.eye(3)) == pytest.approx(1 + 2e-6)
    x = cplx(rng, 6, 6)
    p = x + x.conj().T
    mu = lift_constant(p)
    assert np.linalg.eigvalsh(p + mu * np.eye(6))[0] >= 0


def test_sigma_zero_for_zero_j(tiny, rng):
    psi, beam = random_point(tiny, rng)
    fs = tiny_fisher(tiny, psi, beam)
    zero = FisherState(fs.blocks, fs.fim, fs.fim_inv, np.zeros_like(fs.j_mat))
    sig = sigma_blocks(tiny.bundle, zero, TINY.cpi_len, TINY.noise_sense)
    assert np.all(sig.total == 0)


def tiny_fisher(scn, psi, beam):
    return problem_at(scn, 0.5).fisher(psi, beam.w)


def test_sigma_single_target_s33(rng):
    cfg = replace(TINY, n_targets=1)
    scn = make_scenario(cfg, 1)
    psi, beam = random_point(scn, rng)
    fs = problem_at(scn, 0.5).fisher(psi, beam.w)
    sig = sigma_blocks(scn.bundle, fs, cfg.cpi_len, cfg.noise_sense)
    a, b = scn.bundle.a_mat[:, 0], scn.bundle.b_mat[:, 0]
    j = fs.j_mat
    expected = np.vdot(b, b) * (j[2, 2] + j[3, 3] + 2j * j[2, 3]) * np.outer(a.conj(), a)
    assert np.allclose(sig.s33, expected, rtol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_trace_identity(seed):
    rng = np.random.default_rng(seed)
    scn = make_scenario(TINY, seed)
    psi, beam = random_point(scn, rng)
    fs = problem_at(scn, 0.5).fisher(psi, beam.w)
    sig = sigma_blocks(scn.bundle, fs, TINY.cpi_len, TINY.noise_sense)
    hw = scn.channels.feed @ beam.w
    c = hw @ hw.conj().T
    for other in (psi, random_feasible(scn.topology, rng), cplx(rng, 4, 4)):
        lhs = np.real(np.trace(other @ c @ other.conj().T @ sig.total))
        f = fim_matrix(fim_blocks_from_beams(scn.bundle, other, scn.channels.feed, beam.w), TINY.cpi_len, TINY.noise_sense)
        rhs = np.trace(fs.j_mat @ f)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_p_matrices_structure(tiny, rng):
    psi, beam = random_point(tiny, rng)
    it = build_psi_iterate(problem_at(tiny, 0.6), psi, beam)
    assert np.allclose(it.p1, it.p1.conj().T, atol=1e-12 * np.abs(it.p1).max())
    assert np.linalg.eigvalsh(it.p1 + it.mu1 * np.eye(4))[0] >= -1e-8 * np.linalg.norm(it.p1, 2)
    assert np.allclose(it.c_mat, it.c_mat.conj().T)
    # communication only: P1 negative semidefinite; sensing only: P2 vanishes
    comm = build_psi_iterate(problem_at(tiny, 1.0), psi, beam)
    assert np.linalg.eigvalsh(comm.p1)[-1] <= 1e-12 * np.abs(comm.p1).max()
    sense = build_psi_iterate(problem_at(tiny, 0.0), psi, beam)
    assert np.all(sense.p2 == 0)


def test_assemble_p_formula(tiny, rng):
    psi, beam = random_point(tiny, rng)
    aux = comm_aux(psi, tiny.channels.feed, tiny.channels.users, beam, TINY.noise_comm)
    h_c, feed = tiny.channels.users, tiny.channels.feed
    p1, p2 = assemble_p_matrices(aux, None, h_c, feed, beam.w_comm, 0.5, 0.0)
    assert np.allclose(p1, -0.5 * h_c @ np.diag(aux.etas) @ h_c.conj().T)
    assert np.allclose(p2, 0.5 * h_c @ np.diag(aux.zetas).conj() @ beam.w_comm.conj().T @ feed.conj().T)


def test_zero_coefficients_zero_gradient(tiny, rng):
    psi, beam = random_point(tiny, rng)
    z = np.zeros((4, 4), dtype=complex)
    it = PsiIterate(psi, psi, z, z, 0.0, np.eye(4))
    assert np.all(analytic_gradient_psi(it) == 0)


def test_gradient_comm_only_single_user(rng):
    cfg = replace(TINY, n_users=1)
    scn = make_scenario(cfg, 2)
    psi, beam = random_point(scn, rng)
    p = problem_at(scn, 1.0)
    it = build_psi_iterate(p, psi, beam)
    fd = fd_complex_gradient(lambda x: p.objective(x, beam.w), psi)
    assert relative_error(analytic_gradient_psi(it), fd) < 1e-5


def test_gradient_sense_only_single_target(rng):
    cfg = replace(TINY, n_targets=1)
    scn = make_scenario(cfg, 2)
    psi, beam = random_point(scn, rng)
    p = problem_at(scn, 0.0, vs=1e-3)
    it = build_psi_iterate(p, psi, beam)
    fd = fd_complex_gradient(lambda x: p.objective(x, beam.w), psi)
    assert relative_error(analytic_gradient_psi(it), fd) < 1e-5


def test_surrogate_linear_term_is_gradient_plus_lift(tiny, rng):
    psi, beam = random_point(tiny, rng)
    it = build_psi_iterate(problem_at(tiny, 0.6, vs=1e-3), psi, beam)
    lin = fd_complex_gradient(lambda x: surrogate_value(it, x), psi)
    assert relative_error(lin, analytic_gradient_psi(it) + 2 * it.mu1 * psi @ it.c_mat) < 1e-6


def test_step_fixed_point_and_scaling(tiny, rng):
    topo = tiny.topology
    target = random_feasible(topo, rng)
    z = np.zeros((4, 4), dtype=complex)
    it = PsiIterate(target, target, z, target, 0.0, np.eye(4))
    assert np.allclose(psi_step(it, topo), target, atol=1e-12)
    psi, beam = random_point(tiny, rng)
    it = build_psi_iterate(problem_at(tiny, 0.6), psi, beam)
    scaled = PsiIterate(it.psi, it.theta, 3.0 * it.p1, 3.0 * it.p2, 3.0 * it.mu1, it.c_mat)
    assert np.allclose(psi_step(scaled, topo), psi_step(it, topo), atol=1e-12)


def test_step_improves_linearized_surrogate(tiny, rng):
    for _ in range(5):
        psi, beam = random_point(tiny, rng)
        it = build_psi_iterate(problem_at(tiny, 0.6, vs=1e-3), psi, beam)
        new = psi_step(it, tiny.topology)
        assert surrogate_value(it, new) >= surrogate_value(it, psi) - 1e-10 * abs(surrogate_value(it, psi))
        assert feasibility_residual(new, tiny.topology) < 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_subproblem_monotone(seed):
    rng = np.random.default_rng(seed)
    scn = make_scenario(replace(TINY, n_ris=6), seed)
    psi, beam = random_point(scn, rng)
    p = problem_at(scn, 0.7, vs=1e-2)
    res = solve_psi_subproblem(p, psi, beam, SETTINGS)
    obj = res.objectives
    assert all(b >= a - 1e-8 * abs(a) for a, b in zip(obj[:-1], obj[1:]))
    assert feasibility_residual(res.value, scn.topology) < 1e-9


def test_subproblem_fixed_point(tiny, rng):
    psi, beam = random_point(tiny, rng)
    # the communication-only subproblem reaches its fixed point quickly
    p = problem_at(tiny, 1.0)
    tight = SolverSettings(inner_tol=1e-14, max_inner=1000)
    out = solve_psi_subproblem(p, psi, beam, tight)
    again = solve_psi_subproblem(p, out.value, beam, SETTINGS)
    assert again.iterations <= 1
    assert again.objectives[-1] == pytest.approx(out.objectives[-1], abs=1e-9)


def test_single_connected_single_user_beats_random_search():
    cfg = ScenarioConfig(n_tx=2, n_ris=4, n_sensor=3, n_users=1, n_targets=1, topology="single")
    scn = make_scenario(cfg, 4)
    rng = np.random.default_rng(0)
    beam = random_beam(rng, 2, 1, cfg.power_budget)
    p = problem_at(scn, 1.0)
    psi0 = random_feasible(scn.topology, rng)
    res = solve_psi_subproblem(p, psi0, beam, SolverSettings(inner_tol=1e-12))

    def direct_gain(psi):
        g = effective_channels(psi, scn.channels.feed, scn.channels.users)
        return abs(link_gains(g, beam.w)[0, 0])

    best = max(direct_gain(random_feasible(scn.topology, rng)) for _ in range(1000))
    assert direct_gain(res.value) >= best * (1 - 1e-6)
