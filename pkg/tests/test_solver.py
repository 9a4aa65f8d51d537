import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wiener_sqg.errors import GridMismatch, NoConvergence, NonFiniteState
from wiener_sqg.nonlinear import transport_term
from wiener_sqg.solver import (
    InitRecipe, SolverConfig, TimeGrid, Trajectory, c2_time, default_dt, duhamel_weight,
    etd2_weight, initial_data, l1_time, linear_flow, mirror_check, picard_map, picard_solve,
    simulate, step_etdrk2, step_exponential_euler, sup_distance,
)
from wiener_sqg.spectral import SpectralField, lattice, make_field, random_field, semigroup_apply, x_norm


def composite(a, b):
    d = Trajectory(a.grid, a.coeffs - b.coeffs, a.N)
    return sup_distance(a, b) + l1_time(d, 1.0)


class TestGridAndConfig:
    def test_grid(self):
        g = TimeGrid.covering(1.0, 0.25)
        assert g.J == 4 and np.array_equal(g.times, [0, 0.25, 0.5, 0.75, 1.0])
        assert g.index_of(0.5) == 2 and g.index_of(0.3) is None

    def test_grid_adjusts_step(self):
        g = TimeGrid.covering(1.0, 0.3)
        assert g.J == 4 and g.dt == 0.25

    def test_default_dt(self):
        assert default_dt(16, 0.1) == 1 / 64
        assert default_dt(16, 0.9) == 1 / 64
        assert default_dt(16, 2.0) == 1 / 128
        cfg = SolverConfig(N=16, T=8, init=InitRecipe(rho0=0.1))
        assert cfg.dt == 1 / 64 and cfg.r1 == pytest.approx(0.9 / 1.1)

    @pytest.mark.parametrize("bad", [dict(N=0), dict(T=0), dict(dt=-1.0), dict(kappa=0), dict(engine="rk4")])
    def test_invalid(self, bad):
        kw = dict(N=4, T=1.0) | bad
        with pytest.raises(ValueError):
            SolverConfig(**kw)
        with pytest.raises(ValueError):
            InitRecipe(rho0=0.0)

    def test_replace(self):
        cfg = SolverConfig(N=8, T=1.0, init=InitRecipe(rho0=0.2))
        new = cfg.replace(rho0=0.4, engine="etdrk2")
        assert new.rho0 == 0.4 and new.engine == "etdrk2" and new.dt == cfg.dt


class TestInitialData:
    def test_norm_and_determinism(self):
        r = InitRecipe(rho0=0.9, seed=11)
        f = initial_data(r, 8)
        assert x_norm(f, 0) == pytest.approx(0.9, rel=1e-14)
        assert f.array_equal(initial_data(r, 8))
        assert not f.array_equal(initial_data(InitRecipe(rho0=0.9, seed=12), 8))

    def test_steep_slope(self):
        f = initial_data(InitRecipe(rho0=0.3, slope=3.0), 16)
        ratio = x_norm(f, 1) / x_norm(f, 0)
        assert math.isfinite(ratio) and 1.0 < ratio < 16 * math.sqrt(2)

    def test_shell_recipes(self):
        Kabs = lattice(6)[2]
        f = initial_data(InitRecipe("lowest_shell", rho0=0.2), 6)
        assert set(np.unique(Kabs[f.coeffs != 0])) == {1.0}
        g = initial_data(InitRecipe("two_shells", rho0=0.2), 6)
        assert set(np.unique(Kabs[g.coeffs != 0])) == {1.0, 2.0}


class TestKernels:
    def test_weights_small_and_large(self):
        w = duhamel_weight(8, 0.1)
        Kabs = lattice(8)[2]
        assert w[8, 8] == 0.1
        nz = Kabs > 0
        assert np.allclose(w[nz], (1 - np.exp(-0.1 * Kabs[nz])) / Kabs[nz], rtol=1e-14)
        p2 = etd2_weight(8, 1e-6)
        # phi_2 -> dt/2 as z -> 0
        assert np.allclose(p2, 0.5e-6, rtol=1e-4)


class TestExponentialEuler:
    def test_single_mode_decays(self):
        theta = make_field(4, [((2, 1), 0.3 + 0.1j)])
        out = step_exponential_euler(theta, 0.1)
        assert out[2, 1] == pytest.approx((0.3 + 0.1j) * math.exp(-0.1 * math.sqrt(5)), rel=1e-14, abs=1e-16)

    def test_linear_march_is_exact(self, rng):
        theta = random_field(6, rng)
        cur = theta
        for _ in range(10):
            cur = step_exponential_euler(cur, 0.05, linear_only=True)
        assert cur.allclose(semigroup_apply(theta, 0.5), rtol=1e-13)

    def test_finite_difference_consistency(self):
        theta = initial_data(InitRecipe(rho0=0.5, seed=2), 8)
        dt = 1e-6
        out = step_exponential_euler(theta, dt)
        fd = (out.coeffs - theta.coeffs) / dt
        rhs = -lattice(8)[2] * theta.coeffs - transport_term(theta).coeffs
        assert np.max(np.abs(fd - rhs)) < 1e-5

    def test_rejects_bad_step(self, rng):
        with pytest.raises(ValueError):
            step_exponential_euler(random_field(2, rng), 0.0)


class TestETDRK2:
    def test_linear_and_single_mode(self, rng):
        theta = random_field(5, rng)
        assert step_etdrk2(theta, 0.1, linear_only=True).allclose(semigroup_apply(theta, 0.1), rtol=1e-14)
        single = make_field(4, [((1, 1), 1.0)])
        assert step_etdrk2(single, 0.2).allclose(semigroup_apply(single, 0.2), rtol=1e-14, atol=1e-16)

    def test_second_order(self):
        base = SolverConfig(N=12, T=1.0, engine="etdrk2", init=InitRecipe(rho0=0.5, seed=4))
        theta0 = initial_data(base.init, 12)
        dts = [1 / 32, 1 / 64]
        ref = simulate(base.replace(dt=dts[-1] / 4), theta0).state(-1)
        errs = [x_norm(simulate(base.replace(dt=d), theta0).state(-1) - ref, 0) for d in dts]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)


class TestPicard:
    def test_zero_trajectory_gives_linear_flow(self, rng):
        theta0 = random_field(5, rng)
        grid = TimeGrid(0.05, 10)
        zero = Trajectory(grid, np.zeros((11, 11, 11), complex), 5)
        assert np.allclose(picard_map(zero, theta0).coeffs, linear_flow(theta0, grid).coeffs, rtol=1e-14)

    def test_single_mode_held_constant(self):
        theta0 = make_field(4, [((1, 2), 0.4)])
        grid = TimeGrid(0.1, 8)
        held = Trajectory(grid, np.repeat(theta0.coeffs[None], 9, axis=0), 4)
        assert np.allclose(picard_map(held, theta0).coeffs, linear_flow(theta0, grid).coeffs,
                           rtol=0, atol=1e-16)

    def test_grid_mismatch(self, rng):
        grid = TimeGrid(0.1, 2)
        traj = Trajectory(grid, np.zeros((3, 9, 9), complex), 4)
        with pytest.raises(GridMismatch):
            picard_map(traj, random_field(3, rng))
        with pytest.raises(GridMismatch):
            Trajectory(grid, np.zeros((4, 9, 9), complex), 4)

    def test_contraction_on_the_ball(self):
        cfg = SolverConfig(N=8, T=1.0, dt=1 / 64, init=InitRecipe(rho0=0.2, seed=3))
        theta0 = initial_data(cfg.init, 8)
        rng = np.random.default_rng(1)
        lin = linear_flow(theta0, cfg.grid)
        sol = simulate(cfg, theta0)
        bump = np.stack([random_field(8, rng, slope=2).coeffs * math.exp(-t) for t in cfg.grid.times])
        other = Trajectory(cfg.grid, sol.coeffs + 0.05 * bump, 8)
        r0 = 0.5 * (1 + 0.2)
        for a, b in [(lin, sol), (lin, other), (sol, other)]:
            r1 = max(l1_time(a), l1_time(b))
            ratio = composite(picard_map(a, theta0), picard_map(b, theta0)) / composite(a, b)
            assert ratio <= r0 + r1 + 5 * cfg.dt

    def test_fixed_point_equals_march(self):
        cfg = SolverConfig(N=8, T=0.5, dt=1 / 128, init=InitRecipe(rho0=0.3, seed=5))
        pic, rep = picard_solve(cfg)
        march = simulate(cfg.replace(engine="expeuler"))
        assert rep.converged and rep.residual < 1e-12
        assert sup_distance(pic, march) < 1e-12
        assert rep.ratios_ok and rep.c2_time > 0

    def test_zero_data(self):
        cfg = SolverConfig(N=4, T=0.5, dt=0.05, init=InitRecipe(rho0=0.3))
        traj, rep = picard_solve(cfg, SpectralField.zeros(4))
        assert rep.iterations == 1 and rep.converged
        assert np.count_nonzero(traj.coeffs) == 0

    def test_no_convergence(self):
        cfg = SolverConfig(N=4, T=0.5, dt=0.05, max_iters=1, fixpoint_tol=1e-300,
                           init=InitRecipe(rho0=0.3))
        with pytest.raises(NoConvergence):
            picard_solve(cfg)

    def test_large_data_warns(self):
        cfg = SolverConfig(N=3, T=0.1, dt=0.02, init=InitRecipe(rho0=1.2))
        with pytest.warns(RuntimeWarning):
            picard_solve(cfg)

    def test_c2_time(self):
        theta0 = initial_data(InitRecipe(rho0=0.3, seed=1), 6)
        r1 = 0.5
        T = c2_time(theta0, r1)
        a, K = np.abs(theta0.coeffs), lattice(6)[2]
        lhs = np.sum((1 - np.exp(-T * K)) * a)
        assert lhs == pytest.approx((1 - 0.65) * r1, rel=1e-10)


class TestSimulate:
    def test_monotone_and_decay_rate(self):
        cfg = SolverConfig(N=16, T=8, init=InitRecipe(rho0=0.5, seed=0))
        traj = simulate(cfg)
        x0 = traj.x_norms(0)
        assert np.all(np.diff(x0) < 0)
        assert x0[-1] <= 12 * 0.5 * math.exp(-4)
        assert len(traj.reports) == traj.grid.J + 1 and traj.dropped.shape == (traj.grid.J + 1,)
        assert mirror_check(traj) == 0.0
        assert np.all(traj.coeffs[:, 16, 16] == 0)

    def test_zero_data(self):
        cfg = SolverConfig(N=4, T=0.5, dt=0.1)
        for engine in ("expeuler", "etdrk2", "picard"):
            traj = simulate(cfg.replace(engine=engine), SpectralField.zeros(4))
            assert np.count_nonzero(traj.coeffs) == 0

    def test_non_finite_state(self):
        arr = np.zeros((9, 9), complex)
        arr[5, 4] = arr[3, 4] = np.inf
        with pytest.raises(NonFiniteState) as err:
            simulate(SolverConfig(N=4, T=0.1, dt=0.05), SpectralField(4, arr))
        assert err.value.step == 0

    def test_grid_mismatch(self, rng):
        with pytest.raises(GridMismatch):
            simulate(SolverConfig(N=4, T=0.1, dt=0.05), random_field(3, rng))

    @given(st.integers(0, 1000), st.sampled_from(["expeuler", "etdrk2"]))
    def test_reality_and_mean_preserved(self, seed, engine):
        cfg = SolverConfig(N=5, T=0.25, dt=1 / 32, engine=engine, init=InitRecipe(rho0=0.6, seed=seed))
        traj = simulate(cfg)
        assert mirror_check(traj) == 0.0
        assert np.all(traj.coeffs[:, 5, 5] == 0)

    def test_deterministic(self):
        cfg = SolverConfig(N=8, T=1.0, init=InitRecipe(rho0=0.4, seed=9))
        assert np.array_equal(simulate(cfg).coeffs, simulate(cfg).coeffs)
