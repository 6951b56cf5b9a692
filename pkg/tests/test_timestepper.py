import numpy as np
import pytest
import scipy.linalg as sla

import transbeam.timestepper as ts
from transbeam.assembly import assemble
from transbeam.discretization import State, build_space, smooth_state
from transbeam.errors import ConfigurationError, SolverError
from transbeam.functionals import energy
from transbeam.model import BeamParameters, Forcing
from transbeam.timestepper import MemorySink, StepConfig, simulate, step


@pytest.fixture(scope="module")
def linear_ops(params):
    space = build_space(params, 3, 3)
    return assemble(space, params, Forcing(g1=1.0, g4=-0.5), nonlinear=False)


def cayley_oracle(ops, state, dt, steps):
    """Dense midpoint map for M x'' + C x' + K x = f written as a first-order system."""
    M, C, K = (A.toarray() for A in (ops.M, ops.C, ops.K_lin))
    n = M.shape[0]
    Minv = np.linalg.inv(M)
    A = np.block([[np.zeros((n, n)), np.eye(n)], [-Minv @ K, -Minv @ C]])
    b = np.concatenate([np.zeros(n), Minv @ ops.load])
    I = np.eye(2 * n)
    lhs = I - 0.5 * dt * A
    rhs = I + 0.5 * dt * A
    x = np.concatenate([state.z, state.v])
    for _ in range(steps):
        x = sla.solve(lhs, rhs @ x + dt * b)
    return x[:n], x[n:]


class TestStepConfig:
    @pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(dt=-1.0), dict(dt=np.inf),
                                        dict(newton_tol=0.0), dict(newton_max_iter=0),
                                        dict(t_end=-1.0)])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigurationError) as info:
            StepConfig(**kwargs)
        assert info.value.code == "INVALID_STEP"


class TestLinearExactness:
    def test_matches_cayley_map(self, linear_ops, rng):
        s0 = smooth_state(linear_ops.space, rng, amplitude=0.5)
        cfg = StepConfig(dt=0.01, t_end=0.2)
        out = simulate(linear_ops, s0, cfg)
        z, v = cayley_oracle(linear_ops, s0, cfg.dt, 20)
        np.testing.assert_allclose(out.final_state.z, z, atol=1e-10 * np.abs(z).max())
        np.testing.assert_allclose(out.final_state.v, v, atol=1e-10 * np.abs(v).max())

    def test_one_newton_iteration(self, linear_ops, rng):
        s0 = smooth_state(linear_ops.space, rng)
        _, _, info = step(linear_ops, s0, StepConfig(dt=0.01))
        assert info.iterations <= 2


class TestBalance:
    @pytest.mark.parametrize("dt", [1e-2, 1e-3])
    def test_linear_model_balances_to_round_off(self, linear_ops, dt):
        s0 = smooth_state(linear_ops.space, amplitude=0.5)
        out = simulate(linear_ops, s0, StepConfig(dt=dt, t_end=0.1, newton_tol=1e-13))
        assert out.max_abs_residual <= 1e-12 * out.initial_energy

    def test_nonlinear_defect_is_third_order(self, small_ops):
        s0 = smooth_state(small_ops.space, amplitude=0.5)
        worst = [simulate(small_ops, s0, StepConfig(dt=dt, t_end=0.004)).max_abs_residual
                 for dt in (2e-3, 1e-3, 5e-4)]
        ratios = np.array(worst[:-1]) / np.array(worst[1:])
        assert np.all(np.abs(np.log2(ratios) - 3.0) < 0.2)

    def test_cumulative_balance_sums_residuals(self, small_ops):
        s0 = smooth_state(small_ops.space, amplitude=0.5)
        out = simulate(small_ops, s0, StepConfig(dt=1e-2, t_end=0.1))
        assert out.cumulative_balance == pytest.approx(out.residuals.sum(), rel=1e-9,
                                                       abs=1e-15)

    def test_records_agree_with_direct_energy(self, small_ops):
        s0 = smooth_state(small_ops.space, amplitude=0.5)
        out = simulate(small_ops, s0, StepConfig(dt=1e-2, t_end=0.05))
        e = energy(small_ops.space, small_ops.params, out.final_state)
        assert out.final_energy == pytest.approx(e.total, rel=1e-12)
        assert out.records[0].energy_total == pytest.approx(
            energy(small_ops.space, small_ops.params, s0).total, rel=1e-12)
        assert len(out.records) == out.steps + 1 == 6
        assert out.records[-1].t == pytest.approx(0.05)

    def test_energy_decreases_without_load(self, small_ops):
        s0 = smooth_state(small_ops.space, amplitude=1.0)
        e = simulate(small_ops, s0, StepConfig(dt=1e-2, t_end=0.5)).energies
        assert np.all(np.diff(e) <= 1e-12 * e[0])


class TestTimeSymmetry:
    def test_backward_step_returns(self, small_ops):
        cfg = StepConfig(dt=0.02, newton_tol=1e-13)
        s0 = smooth_state(small_ops.space, amplitude=1.0)
        s1, _, _ = step(small_ops, s0, cfg)
        back, _, _ = step(small_ops, s1, cfg, dt=-cfg.dt)
        np.testing.assert_allclose(back.z, s0.z, atol=1e-11)
        np.testing.assert_allclose(back.v, s0.v, atol=1e-10)
        assert back.t == pytest.approx(0.0, abs=1e-15)


class TestOrder:
    def test_second_order_in_time(self, params):
        space = build_space(params, 3, 3)
        ops = assemble(space, params)
        s0 = smooth_state(space, amplitude=0.5)

        def final(dt):
            return simulate(ops, s0, StepConfig(dt=dt, t_end=0.2, newton_tol=1e-13)).final_state

        ref = final(2.5e-4)
        errs = [np.linalg.norm(final(dt).z - ref.z) for dt in (4e-3, 2e-3, 1e-3)]
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(rates - 2.0) < 0.15)


class TestStepRejection:
    def test_single_halving(self, small_ops, monkeypatch):
        real = ts.step
        cfg = StepConfig(dt=0.01, t_end=0.03)

        def flaky(ops, state, cfg_, dt=None, previous=None):
            if dt is None and abs(state.t - 0.01) < 1e-12:
                raise SolverError("NEWTON_DIVERGED", "forced")
            return real(ops, state, cfg_, dt=dt, previous=previous)

        monkeypatch.setattr(ts, "step", flaky)
        out = simulate(small_ops, smooth_state(small_ops.space), cfg)
        assert out.halvings == 1
        assert len(out.records) == 5
        assert [round(r.t, 12) for r in out.records] == [0.0, 0.01, 0.015, 0.02, 0.03]
        assert out.cumulative_balance == pytest.approx(out.residuals.sum(), rel=1e-9)

    def test_failure_reports_time(self, small_ops, monkeypatch):
        def always(*args, **kwargs):
            raise SolverError("NEWTON_DIVERGED", "forced")

        monkeypatch.setattr(ts, "step", always)
        with pytest.raises(SolverError) as info:
            simulate(small_ops, smooth_state(small_ops.space), StepConfig(dt=0.01, t_end=0.1))
        assert info.value.exit_code == 3
        assert info.value.details["t"] == 0.0

    def test_iteration_cap(self, params):
        space = build_space(params, 8, 8)
        ops = assemble(space, params)
        s0 = smooth_state(space, amplitude=1.0)
        with pytest.raises(SolverError) as info:
            simulate(ops, s0, StepConfig(dt=10.0, t_end=10.0, newton_max_iter=1))
        assert info.value.code == "NEWTON_DIVERGED"


class TestSinks:
    def test_memory_sink(self, small_ops):
        sink = MemorySink()
        cfg = StepConfig(dt=0.01, t_end=0.05, snapshot_every=2)
        out = simulate(small_ops, smooth_state(small_ops.space), cfg, [sink])
        assert sink.records == out.records
        assert [round(s.t, 12) for s in sink.snapshots] == [0.0, 0.02, 0.04]

    def test_zero_length_run(self, small_ops):
        s0 = smooth_state(small_ops.space)
        out = simulate(small_ops, s0, StepConfig(t_end=0.0))
        assert out.steps == 0 and out.max_abs_residual == 0.0
        assert out.final_state is s0


def undamped(ops):
    import dataclasses
    return dataclasses.replace(ops, C_kappa=0.0 * ops.C_kappa, C_gamma=0.0 * ops.C_gamma)


class TestSpecialRegimes:
    def test_zero_state_is_fixed_point(self, small_ops):
        s0 = State.zero(small_ops.space)
        s1, rec, _ = step(small_ops, s0, StepConfig(dt=0.1))
        assert not s1.z.any() and not s1.v.any()
        assert rec.balance_residual == 0.0

    def test_undamped_conservation_audit(self, params):
        space = build_space(params, 4, 4)
        ops = undamped(assemble(space, params))
        out = simulate(ops, smooth_state(space, amplitude=0.5), StepConfig(dt=1e-2, t_end=1.0))
        assert abs(out.final_energy - out.initial_energy) <= out.sum_abs_residual + 1e-14

    def test_undamped_linear_reversibility(self, params):
        space = build_space(params, 4, 4)
        ops = undamped(assemble(space, params, nonlinear=False))
        cfg = StepConfig(dt=1e-2, newton_tol=1e-13)
        s0 = smooth_state(space, amplitude=0.5)
        s = s0
        for _ in range(50):
            s, _, _ = step(ops, s, cfg)
        for _ in range(50):
            s, _, _ = step(ops, s, cfg, dt=-cfg.dt)
        scale = np.linalg.norm(np.concatenate([s0.z, s0.v]))
        assert np.linalg.norm(np.concatenate([s.z - s0.z, s.v - s0.v])) <= 1e-8 * scale

    def test_lyapunov_nonincreasing_with_autonomous_load(self, params):
        space = build_space(params, 4, 4)
        ops = assemble(space, params, Forcing(g1=(2.0, -1.0), g3=1.5))
        out = simulate(ops, smooth_state(space, amplitude=0.5), StepConfig(dt=1e-2, t_end=0.5))
        budget = np.cumsum(np.abs(out.residuals)) + 1e-10
        assert np.all(out.lyapunov[1:] - out.lyapunov[0] <= budget)
        assert np.all(np.diff(out.lyapunov) <= np.abs(out.residuals) + 1e-12)

    def test_newton_converges_quadratically(self, params):
        space = build_space(params, 8, 8)
        ops = assemble(space, params)
        s0 = smooth_state(space, amplitude=1.0)
        _, _, info = step(ops, s0, StepConfig(dt=1e-2, newton_tol=1e-14))
        r = info.residual_norms
        assert len(r) >= 3
        assert r[-1] / r[-2] <= 0.5
        assert r[2] <= 10.0 * r[1] ** 2 / r[0]

    def test_dissipation_rates_nonnegative(self, small_ops):
        out = simulate(small_ops, smooth_state(small_ops.space, amplitude=1.0),
                       StepConfig(dt=1e-2, t_end=0.1))
        assert all(r.dissipation_kappa_rate >= 0 and r.dissipation_gamma_rate >= 0
                   for r in out.records)
