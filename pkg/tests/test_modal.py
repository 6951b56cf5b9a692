import dataclasses

import numpy as np
import pytest

from transbeam.assembly import assemble
from transbeam.discretization import State, build_space, smooth_state
from transbeam.errors import ConfigurationError
from transbeam.functionals import state_norm_H
from transbeam.modal import (ModalBasis, ReducedSystem, build_basis, longitudinal_modes,
                             modal_simulate, transverse_modes)
from transbeam.model import BeamParameters
from transbeam.timestepper import MemorySink, StepConfig, simulate


def blocks(ops):
    nt = ops.space.dofs.n_transverse_free
    M, Kb, Km = (A.toarray() for A in (ops.M, ops.K_bend, ops.K_membrane))
    return (Kb[:nt, :nt], M[:nt, :nt]), (Km[nt:, nt:], M[nt:, nt:])


@pytest.fixture(scope="module")
def ops8(params):
    return assemble(build_space(params, 8, 8), params)


class TestEigenpairs:
    @pytest.mark.parametrize("which", ["transverse", "longitudinal"])
    def test_residual_order_orthonormality(self, ops8, which):
        fn = transverse_modes if which == "transverse" else longitudinal_modes
        (K, G) = blocks(ops8)[0 if which == "transverse" else 1]
        values, vectors = fn(ops8, 8)
        assert np.all(values > 0) and np.all(np.diff(values) > 0)
        for lam, x in zip(values, vectors.T):
            assert np.linalg.norm(K @ x - lam * G @ x) <= 1e-9 * np.linalg.norm(K @ x)
        gram = vectors.T @ G @ vectors
        assert np.abs(gram - np.eye(8)).max() <= 1e-10

    @pytest.mark.parametrize("count", [0, 10_000])
    def test_count_checked(self, ops8, count):
        with pytest.raises(ConfigurationError) as info:
            transverse_modes(ops8, count)
        assert info.value.code == "COUNT_TOO_LARGE"

    def test_doubling_stiffness_doubles_eigenvalues(self, params):
        stiff = params.replace(lambda1=2.0, lambda2=2.0)
        a = transverse_modes(assemble(build_space(params, 6, 6), params), 6)[0]
        b = transverse_modes(assemble(build_space(stiff, 6, 6), stiff), 6)[0]
        np.testing.assert_allclose(b, 2.0 * a, rtol=1e-10)

    def test_lowest_transverse_converges(self, params):
        coarse = transverse_modes(assemble(build_space(params, 16, 16), params), 1)[0][0]
        fine = transverse_modes(assemble(build_space(params, 32, 32), params), 1)[0][0]
        assert abs(fine - coarse) <= 0.01 * fine

    def test_longitudinal_string_spectrum(self, params):
        values = longitudinal_modes(assemble(build_space(params, 32, 32), params), 10)[0]
        k = np.arange(1, 11)
        np.testing.assert_allclose(values, (k * np.pi / params.L) ** 2, rtol=0.01)


class TestBasis:
    def test_metric_tags(self, ops8):
        b = build_basis(ops8, 3, 2)
        assert "beta" in b.transverse_metric and "rho" in b.longitudinal_metric
        assert b.size == 5 and len(b.transverse_pairs) == 3 and len(b.longitudinal_pairs) == 2

    def test_projection_reconstruction_identity(self, ops8, rng):
        b = build_basis(ops8, 5, 4)
        q = rng.standard_normal(b.size)
        np.testing.assert_allclose(b.project(ops8.M, b.reconstruct(q)), q, atol=1e-12)

    def test_reduced_mass_is_identity(self, ops8):
        red = ReducedSystem(ops8, build_basis(ops8, 5, 4))
        np.testing.assert_allclose(red.M, np.eye(9), atol=1e-12)


class TestModalSimulation:
    def test_full_basis_matches_fem(self, params):
        space = build_space(params, 4, 4)
        ops = assemble(space, params)
        s0 = smooth_state(space, amplitude=0.5)
        cfg = StepConfig(dt=1e-2, t_end=1.0, newton_tol=1e-13)
        basis = build_basis(ops)
        red = basis.reconstruct_state(modal_simulate(basis, ops, s0, cfg).final_state)
        ref = simulate(ops, s0, cfg).final_state
        assert state_norm_H(space, params, red - ref) <= 1e-8

    def test_zero_data(self, ops8):
        out = modal_simulate(build_basis(ops8, 3, 3), ops8, State.zero(ops8.space),
                             StepConfig(dt=0.05, t_end=0.5))
        assert not out.final_state.z.any() and out.final_energy == 0.0

    def test_single_mode_frequency(self, params):
        space = build_space(params, 6, 6)
        ops = assemble(space, params, nonlinear=False)
        ops = dataclasses.replace(ops, C_kappa=0 * ops.C_kappa, C_gamma=0 * ops.C_gamma)
        basis = build_basis(ops, 1, 1)
        omega = np.sqrt(basis.transverse_values[0])
        period = 2 * np.pi / omega
        x0 = basis.reconstruct([1.0, 0.0])
        sink = MemorySink()
        cfg = StepConfig(dt=period / 400, t_end=10 * period, newton_tol=1e-13,
                         snapshot_every=1)
        modal_simulate(basis, ops, State(x0, np.zeros_like(x0)), cfg, [sink])
        t = np.array([s.t for s in sink.snapshots])
        q = np.array([s.z[0] for s in sink.snapshots])
        up = np.nonzero((q[:-1] < 0) & (q[1:] >= 0))[0]
        crossings = t[up] - q[up] * (t[up + 1] - t[up]) / (q[up + 1] - q[up])
        measured = 2 * np.pi * (len(crossings) - 1) / (crossings[-1] - crossings[0])
        assert len(crossings) >= 9
        assert measured == pytest.approx(omega, rel=1e-3)

    def test_truncated_basis_is_dissipative(self, params):
        space = build_space(params, 6, 6)
        ops = assemble(space, params)
        out = modal_simulate(build_basis(ops, 4, 3), ops, smooth_state(space, amplitude=1.0),
                             StepConfig(dt=1e-2, t_end=1.0))
        e = out.energies
        assert np.all(e <= e[0] + out.sum_abs_residual + 1e-12)


def test_basis_is_frozen(ops8):
    b = build_basis(ops8, 2, 2)
    assert isinstance(b, ModalBasis)
    with pytest.raises(dataclasses.FrozenInstanceError):
        b.n_transverse_free = 0
