import numpy as np
import pytest
from hypothesis import given, strategies as st

from transbeam.assembly import assemble
from transbeam.discretization import State, build_space, interpolate_vector, smooth_state
from transbeam.errors import TransbeamError
from transbeam.functionals import (cross_term_H, decay_phi, displacement_norm_V,
                                   dissipation_rates, energy, compactness_ratio, q_functionals,
                                   state_norm_H, velocity_norm_W, work)
from transbeam.model import BeamParameters, Forcing


@pytest.fixture(scope="module")
def tent(params):
    """omega = x on the left, v = 1 - x on the right, at rest."""
    space = build_space(params, 4, 4)
    z = interpolate_vector(space, omega=lambda x: x, v=lambda x: 1 - x)
    return space, State(z, np.zeros_like(z))


class TestHandValues:
    def test_membrane_functionals_of_tent(self, params, tent):
        space, s = tent
        q1, q2 = q_functionals(space, s.z)
        assert q1 == pytest.approx(0.5, rel=1e-14)
        assert q2 == pytest.approx(0.5, rel=1e-14)

    def test_energy_and_decay_of_tent(self, params, tent):
        space, s = tent
        assert energy(space, params, s).total == pytest.approx(0.5, rel=1e-14)
        assert decay_phi(space, params, s) == pytest.approx(0.5, rel=1e-14)
        assert state_norm_H(space, params, s, squared=True) == pytest.approx(1.0, rel=1e-14)

    def test_kinetic_of_element_bump(self, params):
        # unit longitudinal rate at the three nodes of one interior element; the
        # neighbouring vertex shape functions add 2/15 h each, so 19 h / 15 overall
        space = build_space(params, 4, 4)
        full = np.zeros(space.dofs.n_full)
        e = 1
        full[space.dofs.longitudinal_map[e]] = 1.0
        v = space.restrict(full)
        h = space.mesh.h[e]
        kin = energy(space, params, State(np.zeros_like(v), v)).kinetic_longitudinal
        assert kin == pytest.approx(19.0 * h / 15.0, rel=1e-13)

    def test_work_of_constant_load(self, params, tent):
        space, s = tent
        # int_0^L0 x dx + int_L0^L (1 - x) dx = 1/8 + 1/8
        assert work(space, Forcing(g2=1.0, g4=1.0), s.z) == pytest.approx(0.25, rel=1e-14)
        assert work(space, None, s.z) == 0.0


class TestAgreementWithOperators:
    @given(seed=st.integers(0, 10_000))
    def test_energy_matches_matrices(self, small_space, small_ops, seed):
        s = smooth_state(small_space, np.random.default_rng(seed), amplitude=1.5)
        e = energy(small_space, small_ops.params, s)
        expected = 0.5 * s.v @ (small_ops.M @ s.v) + small_ops.stored_energy(s.z)
        assert e.total == pytest.approx(expected, rel=1e-12)
        assert e.kinetic == pytest.approx(0.5 * s.v @ (small_ops.M @ s.v), rel=1e-12)

    @given(seed=st.integers(0, 10_000))
    def test_norms_match_matrices(self, small_space, small_ops, seed):
        s = smooth_state(small_space, np.random.default_rng(seed), amplitude=1.5)
        p = small_ops.params
        assert velocity_norm_W(small_space, p, s.v, squared=True) == pytest.approx(
            s.v @ (small_ops.M @ s.v), rel=1e-12)
        assert displacement_norm_V(small_space, p, s.z, squared=True) == pytest.approx(
            s.z @ (small_ops.K_lin @ s.z), rel=1e-12)
        dk, dg = dissipation_rates(small_space, p, s.v)
        assert dk + dg == pytest.approx(s.v @ (small_ops.C @ s.v), rel=1e-12)

    def test_linear_model_has_quadratic_membrane_energy(self, small_space, params, rng):
        s = smooth_state(small_space, rng)
        q = q_functionals(small_space, s.z, nonlinear=False)
        ops = assemble(small_space, params, nonlinear=False)
        assert sum(q) == pytest.approx(s.z @ (ops.K_membrane @ s.z), rel=1e-12)


class TestCrossTerm:
    @given(seed=st.integers(0, 10_000))
    def test_identity_form_equals_nonlinear_power(self, small_space, small_ops, seed):
        rng = np.random.default_rng(seed)
        a = smooth_state(small_space, rng, amplitude=1.0)
        b = smooth_state(small_space, rng, amplitude=1.0)

        def n(z):
            return small_ops.force(z) - small_ops.K_lin @ z

        expected = -(a.v - b.v) @ (n(a.z) - n(b.z))
        got = cross_term_H(small_space, small_ops.params, a, b, convention="identity")
        assert got == pytest.approx(expected, rel=1e-10, abs=1e-13)

    def test_direct_form_differs(self, small_space, small_ops, rng):
        a = smooth_state(small_space, rng, amplitude=1.0)
        b = smooth_state(small_space, rng, amplitude=1.0)
        p = small_ops.params
        assert cross_term_H(small_space, p, a, b) != pytest.approx(
            -cross_term_H(small_space, p, a, b, convention="identity"))

    def test_equal_states_give_zero(self, small_space, params, rng):
        a = smooth_state(small_space, rng, amplitude=1.0)
        assert cross_term_H(small_space, params, a, a) == 0.0

    def test_unknown_convention(self, small_space, params):
        s = State.zero(small_space)
        with pytest.raises(TransbeamError) as info:
            cross_term_H(small_space, params, s, s, convention="other")
        assert info.value.code == "UNKNOWN_CONVENTION"


class TestCompactnessRatio:
    def test_zero_state(self, small_space):
        with pytest.raises(TransbeamError) as info:
            compactness_ratio(small_space, State.zero(small_space))
        assert info.value.code == "ZERO_DENOMINATOR"

    @pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
    def test_finite_and_positive(self, small_space, scale):
        s = smooth_state(small_space, amplitude=scale)
        r = compactness_ratio(small_space, s)
        assert np.isfinite(r) and r > 0
        assert compactness_ratio(small_space, s.z) == r


class TestStructuralProperties:
    def test_zero_state(self, small_space, params):
        s = State.zero(small_space)
        e = energy(small_space, params, s)
        assert e.total == 0.0 and q_functionals(small_space, s.z) == (0.0, 0.0)
        assert decay_phi(small_space, params, s) == 0.0

    @given(seed=st.integers(0, 10_000))
    def test_components_nonnegative(self, small_space, params, seed):
        s = smooth_state(small_space, np.random.default_rng(seed), amplitude=2.0)
        e = energy(small_space, params, s)
        parts = (e.kinetic_transverse, e.kinetic_rotational, e.kinetic_longitudinal,
                 e.bending, e.q1, e.q2)
        assert min(parts) >= 0.0
        assert e.total == pytest.approx(0.5 * sum(parts), rel=1e-14)
        assert e.lyapunov == e.total
        assert decay_phi(small_space, params, s) >= 0.0

    def test_norm_is_quadratic(self, small_space, params, rng):
        s = smooth_state(small_space, rng, amplitude=1.0)
        assert state_norm_H(small_space, params, s.scaled(2.0), squared=True) == pytest.approx(
            4.0 * state_norm_H(small_space, params, s, squared=True), rel=1e-12)

    def test_invariant_under_refinement(self, params, rng):
        from transbeam.discretization import prolong
        coarse, fine = build_space(params, 3, 2), build_space(params, 6, 8)
        s = smooth_state(coarse, rng, amplitude=1.0)
        f = State(prolong(coarse, fine, s.z), prolong(coarse, fine, s.v))
        for fn in (lambda sp_, x: q_functionals(sp_, x.z),
                   lambda sp_, x: energy(sp_, params, x).total,
                   lambda sp_, x: decay_phi(sp_, params, x),
                   lambda sp_, x: state_norm_H(sp_, params, x, squared=True)):
            np.testing.assert_allclose(fn(fine, f), fn(coarse, s), rtol=1e-12)

    def test_cross_term_vanishes_without_rates_and_membrane(self, small_space, params, rng):
        a = smooth_state(small_space, rng, amplitude=1.0)
        b = smooth_state(small_space, rng, amplitude=1.0)
        nt = small_space.dofs.n_transverse_free
        for s in (a, b):
            s.z[nt:] = 0.0
            s.v[:] = 0.0
        for conv in ("direct", "identity"):
            assert cross_term_H(small_space, params, a, b, convention=conv) == 0.0

    def test_cross_term_elementwise_hand_quadrature(self, params):
        # slopes sampled at each element's Gauss points, summed against the direct-form density
        space = build_space(params, 2, 2)
        sa = smooth_state(space, np.random.default_rng(1), amplitude=1.0)
        sb = smooth_state(space, np.random.default_rng(2), amplitude=1.0)
        d = sa - sb
        total = 0.0
        for e in range(space.mesh.n_elements):
            def slope(vec, longitudinal=False):
                return space.at_quadrature(vec, 1, longitudinal=longitudinal)[e]

            pa, pb, wa, wb = slope(sa.z), slope(sb.z), slope(sa.z, True), slope(sb.z, True)
            px, wx, ptx, wtx = slope(d.z), slope(d.z, True), slope(d.v), slope(d.v, True)
            density = (0.5 * ((wa + wb) * px + wx * (pa + pb)) * ptx + (pa + pb) * px * wtx
                       + 0.5 * (pa**2 + pa * pb + pb**2) * px * ptx)
            total += sum(w * f for w, f in zip(space.wq[e], density))
        assert cross_term_H(space, params, sa, sb) == pytest.approx(total, rel=1e-13)

    def test_compactness_ratio_decreases_for_large_states(self, small_space):
        s = smooth_state(small_space, amplitude=10.0)
        assert compactness_ratio(small_space, s.scaled(2.0)) <= compactness_ratio(small_space, s)
