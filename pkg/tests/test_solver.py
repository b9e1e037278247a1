from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oldroydb import linear
from oldroydb import spectral as sp
from oldroydb.diagnostics import corotational_work, stretching_work
from oldroydb.errors import ConfigurationError
from oldroydb.littlewood_paley import sobolev_norm
from oldroydb.solver import (FlowState, InitSpec, SimConfig, g_alpha, make_initial_data,
                             rhs_nonlinear, run, step, strain_and_vorticity,
                             tensor_divergence_residual)


def random_state(grid, seed, u_amp=1.0, tau_amp=1.0, kmax=6):
    rng = np.random.default_rng(seed)
    u = sp.leray_project(grid, sp.random_field(grid, sp.VECTOR, rng, kmax=kmax))
    tau = sp.symmetrize(sp.random_field(grid, sp.TENSOR, rng, kmax=kmax))
    return FlowState(grid, u_amp * u, tau_amp * tau, 0.0)


def grad_sup(grid, u):
    gu = grid.to_physical(sp.grad(grid, u))
    return float(np.sqrt(np.max(np.sum(gu**2, axis=(0, 1)))))


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"dt": 0}, {"nu": 0}, {"alpha": 1.5}, {"a": -1}, {"n": 10 - 1}, {"dim": 1},
        {"output_stride": 0}, {"t_end": -1}, {"k0": 0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            SimConfig(**kw)

    def test_defaults(self):
        cfg = SimConfig()
        assert (cfg.dim, cfg.n, cfg.dt, cfg.nu) == (2, 64, 2e-3, 1.0)
        assert cfg.n_steps == 500

    def test_init_spec(self):
        with pytest.raises(ConfigurationError):
            InitSpec(u_h3=-1)


class TestKinematics:
    def test_shear(self, grid2):
        x, y = grid2.points()
        u = grid2.to_spectral(np.stack([np.sin(y), np.zeros_like(y)]))
        d, w = (grid2.to_physical(m) for m in strain_and_vorticity(grid2, u))
        np.testing.assert_allclose(d[0, 1], 0.5 * np.cos(y), atol=1e-14)
        np.testing.assert_allclose(d[1, 0], 0.5 * np.cos(y), atol=1e-14)
        np.testing.assert_allclose(w[0, 1], 0.5 * np.cos(y), atol=1e-14)
        np.testing.assert_allclose(w[1, 0], -0.5 * np.cos(y), atol=1e-14)

    def test_decomposition(self, grid3):
        u = random_state(grid3, 0, kmax=3).u
        d, w = strain_and_vorticity(grid3, u)
        np.testing.assert_allclose(d + w, sp.grad(grid3, u), atol=1e-14)
        np.testing.assert_array_equal(d, np.swapaxes(d, 0, 1))
        np.testing.assert_array_equal(w, -np.swapaxes(w, 0, 1))
        assert np.max(np.abs(np.einsum("ii...->...", d))) < 1e-14


class TestGAlpha:
    def test_identity_stress(self, grid2):
        u = random_state(grid2, 1).u
        tau = grid2.zeros(sp.TENSOR)
        tau[0, 0, 0, 0] = tau[1, 1, 0, 0] = 1.0
        assert sp.l2_norm(g_alpha(grid2, tau, u, 0.0)) < 1e-15
        d, _ = strain_and_vorticity(grid2, u)
        np.testing.assert_allclose(g_alpha(grid2, tau, u, 0.5), -sp.dealias_mask(grid2, d),
                                   atol=1e-15)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**31), alpha=st.floats(-1, 1), c=st.floats(-5, 5))
    def test_symmetric_and_bilinear(self, seed, alpha, c):
        grid = sp.PeriodicGrid(2, 16)
        s = random_state(grid, seed, kmax=4)
        g = g_alpha(grid, s.tau, s.u, alpha)
        np.testing.assert_allclose(g, np.swapaxes(g, 0, 1), atol=1e-15)
        np.testing.assert_allclose(g_alpha(grid, c * s.tau, s.u, alpha), c * g, atol=1e-13)
        np.testing.assert_allclose(g_alpha(grid, s.tau, c * s.u, alpha), c * g, atol=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_corotational_neutral(self, seed):
        grid = sp.PeriodicGrid(2, 32)
        s = random_state(grid, seed)
        bound = 1e-10 * sp.l2_norm(s.tau) ** 2 * grad_sup(grid, s.u)
        assert abs(corotational_work(grid, s.u, s.tau)) <= bound
        # spectral pairing of the dealiased term as well
        assert abs(sp.inner(g_alpha(grid, s.tau, s.u, 0.0), s.tau)) <= bound


class TestNonlinear:
    def test_zero_velocity(self, grid2):
        s = random_state(grid2, 2, u_amp=0.0)
        terms = rhs_nonlinear(s, SimConfig(n=32, alpha=0.3))
        assert sp.l2_norm(terms.g1) == 0 and sp.l2_norm(terms.g2) == 0

    def test_zero_stress(self, grid2):
        s = random_state(grid2, 3, tau_amp=0.0)
        terms = rhs_nonlinear(s, SimConfig(n=32))
        assert sp.l2_norm(terms.g2) == 0 and sp.l2_norm(terms.g1) > 0

    def test_disabled(self, grid2):
        terms = rhs_nonlinear(random_state(grid2, 4), SimConfig(n=32, nonlinear=False))
        assert sp.l2_norm(terms.g1) == 0 and sp.l2_norm(terms.g2) == 0

    def test_advection_neutral(self, grid2):
        s = random_state(grid2, 5)
        g1 = rhs_nonlinear(s, SimConfig(n=32)).g1
        scale = sp.l2_norm(s.u) ** 2 * grad_sup(grid2, s.u)
        assert abs(sp.inner(sp.leray_project(grid2, g1), s.u)) <= 1e-13 * scale

    def test_single_mode_shear_is_steady(self, grid2):
        x, y = grid2.points()
        u = grid2.to_spectral(np.stack([np.sin(y), np.zeros_like(y)]))
        s = FlowState(grid2, u, grid2.zeros(sp.TENSOR))
        g1 = rhs_nonlinear(s, SimConfig(n=32)).g1
        assert sp.l2_norm(g1) < 1e-15

    def test_g2_symmetric(self, grid2):
        g2 = rhs_nonlinear(random_state(grid2, 6), SimConfig(n=32, alpha=-0.7)).g2
        np.testing.assert_allclose(g2, np.swapaxes(g2, 0, 1), atol=1e-15)


class TestInitialData:
    def test_targets(self, grid2):
        s = make_initial_data(InitSpec(u_h3=0.01, tau_h3=0.02), grid2, 3)
        assert sobolev_norm(grid2, s.u, 3) == pytest.approx(0.01, rel=1e-12)
        assert sobolev_norm(grid2, s.tau, 3) == pytest.approx(0.02, rel=1e-12)
        assert sp.divergence_residual(grid2, s.u) < 1e-14
        np.testing.assert_array_equal(s.tau, np.swapaxes(s.tau, 0, 1))
        assert np.all(s.u[:, 0, 0] == 0)
        assert sp.conjugate_asymmetry(grid2, s.u) < 1e-15

    def test_deterministic(self, grid2):
        a = make_initial_data(InitSpec(), grid2, 11)
        b = make_initial_data(InitSpec(), grid2, 11)
        c = make_initial_data(InitSpec(), grid2, 12)
        np.testing.assert_array_equal(a.u, b.u)
        np.testing.assert_array_equal(a.tau, b.tau)
        assert not np.array_equal(a.u, c.u)

    @pytest.mark.parametrize("dim,n", [(2, 32), (3, 12)])
    def test_div_free_stress(self, dim, n):
        grid = sp.PeriodicGrid(dim, n)
        s = make_initial_data(InitSpec(tau_h3=1.0, div_free_tau=True, kmax=4), grid, 0)
        assert tensor_divergence_residual(grid, s.tau) <= 1e-10
        np.testing.assert_array_equal(s.tau, np.swapaxes(s.tau, 0, 1))
        assert sobolev_norm(grid, s.tau, 3) == pytest.approx(1.0, rel=1e-12)

    def test_zero_target(self, grid2):
        s = make_initial_data(InitSpec(u_h3=0.0), grid2, 0)
        assert not np.any(s.u)


class TestStep:
    def test_invariants(self, grid2):
        cfg = SimConfig(n=32, dt=5e-3, alpha=0.4, a=1.0)
        s = make_initial_data(InitSpec(u_h3=0.5, tau_h3=0.5), grid2, 0)
        s.u[:, 0, 0] = [0.1, -0.2]
        for _ in range(20):
            s = step(s, cfg)
        assert sp.divergence_residual(grid2, s.u) < 1e-12
        np.testing.assert_array_equal(s.tau, np.swapaxes(s.tau, 0, 1))
        np.testing.assert_array_equal(s.u[:, 0, 0], [0.1, -0.2])
        assert s.t == pytest.approx(0.1)

    def test_linear_local_order(self, grid2):
        # one step without nonlinear terms against the exact linear flow
        s = make_initial_data(InitSpec(u_h3=1.0, tau_h3=1.0, kmax=4), grid2, 1)
        errs = []
        for dt in (0.02, 0.01):
            cfg = SimConfig(n=32, dt=dt, nonlinear=False)
            s1 = step(s, cfg)
            u, tau = linear.linear_flow(grid2, s.u, s.tau, dt, nu=1.0, a=0.0)
            errs.append(sp.l2_norm(s1.u - u) + sp.l2_norm(s1.tau - tau))
        assert 7.0 < errs[0] / errs[1] < 9.0

    def test_decoupled_heat_flow(self, grid2):
        # symmetric stress with divergence-free rows and u = 0 never drives u
        s = make_initial_data(InitSpec(u_h3=0.0, tau_h3=1.0, div_free_tau=True, kmax=6),
                              grid2, 2)
        cfg = SimConfig(n=32, dt=0.01, t_end=0.5, a=1.0, nonlinear=False, output_stride=50)
        res = run(cfg, initial=s)
        assert sp.l2_norm(res.final.u) < 1e-12 * sp.l2_norm(s.tau)
        exact = linear.ptF_semigroup(grid2, s.tau, 0.5)
        assert sp.l2_norm(res.final.tau - exact) <= 1e-13 * sp.l2_norm(exact)


class TestRun:
    def test_t_end_zero(self):
        res = run(SimConfig(n=16, t_end=0.0, init=InitSpec(kmax=4)))
        assert len(res.records) == 1 and res.records[0].t == 0

    def test_record_times(self):
        res = run(SimConfig(n=16, dt=0.01, t_end=0.25, output_stride=10, init=InitSpec(kmax=4)))
        assert [r.t for r in res.records] == pytest.approx([0, 0.1, 0.2, 0.25])
        assert res.stats["steps"] == 25

    def test_keep_states(self):
        res = run(SimConfig(n=16, dt=0.01, t_end=0.1, output_stride=5, init=InitSpec(kmax=4)),
                  keep_states=True)
        assert len(res.states) == len(res.records) == 3
        assert res.states[-1].t == res.final.t

    def test_damping(self):
        base = SimConfig(n=32, dt=5e-3, t_end=1.0, output_stride=20, init=InitSpec(kmax=6))
        free = run(base)
        damped = run(replace(base, a=1.0))
        for f, d in zip(free.records[1:], damped.records[1:]):
            assert d.l2_tau < f.l2_tau

    def test_blow_up_is_reported(self, grid2):
        s = random_state(grid2, 0)
        s.tau[0, 0, 1, 0] = np.nan
        res = run(SimConfig(n=32, dt=0.01, t_end=0.1), initial=s)
        assert res.blew_up and res.blowup_time == pytest.approx(0.01)
        assert res.records[-1].blowup and len(res.records) == 2

    def test_wrong_grid(self, grid3):
        with pytest.raises(ConfigurationError):
            run(SimConfig(n=32), initial=random_state(grid3, 0, kmax=3))

    def test_three_dimensional(self):
        cfg = SimConfig(dim=3, n=12, dt=0.01, t_end=0.05, alpha=0.2,
                        init=InitSpec(u_h3=0.1, tau_h3=0.1, kmax=3))
        res = run(cfg, check_invariants=True)
        assert not res.blew_up
        assert res.stats["max_div_residual"] < 1e-12
        assert res.stats["max_symmetry_defect"] == 0
