from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steermon.discrete import (
    MultipartyDensityState,
    apply_local_unitary,
    make_ghz,
    make_w,
    partial_trace,
    pauli,
    random_mixed_state,
    random_pure_state,
    random_unitary,
    spin_matrices,
)
from steermon.gaussian import (
    P,
    QuadratureObservable,
    X,
    apply_loss,
    apply_symplectic,
    passive_symplectic,
    random_gaussian_state,
    squeezer_matrix,
    two_mode_squeezed,
)
from steermon.inference import (
    cross_conditioned_variance_sum,
    fibonacci_sphere,
    inf_variance_discrete,
    inf_variance_gaussian,
    symmetric_log_derivative,
)

from oracles import PAULI, W_PAULI_VAR, conditional_variance, eigbasis, gaussian_conditional, lossy_tmsv_E, reduce_qubits, w_ket


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_w_specified_matches_oracle(axis):
    psi = w_ket()
    rho_ab = reduce_qubits(np.outer(psi, psi.conj()), [0, 1], 3)
    expected = conditional_variance(rho_ab, eigbasis(PAULI[axis]), PAULI[axis])
    got = inf_variance_discrete(make_w(), "B", pauli(axis), "A", "specified", axis).variance
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(W_PAULI_VAR[axis], abs=1e-12)


def test_axis_target_uses_J_units():
    got = inf_variance_discrete(make_w(), "B", "z", "A", "specified", "z").variance
    assert got == pytest.approx(W_PAULI_VAR["z"] / 4, abs=1e-12)


def test_specified_requires_conditioning():
    with pytest.raises(ValueError, match="conditioning"):
        inf_variance_discrete(make_w(), "B", "z", "A", "specified")


def test_overlap_rejected():
    with pytest.raises(ValueError, match="overlap"):
        inf_variance_discrete(make_w(), "B", "z", "AB", "optimized")


def test_unknown_mode():
    with pytest.raises(ValueError):
        inf_variance_discrete(make_w(), "B", "z", "A", "best")


def test_sld_solves_lyapunov():
    rho = random_mixed_state(1, seed=3).matrix
    m = spin_matrices(0.5, "x")
    L = symmetric_log_derivative(rho, m)
    np.testing.assert_allclose((rho @ L + L @ rho) / 2, m, atol=1e-12)


def test_fibonacci_sphere_unit():
    pts = fibonacci_sphere(500)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("axis", ["x", "z"])
def test_sld_matches_grid_search_on_qubits(seed, axis):
    s = random_pure_state(3, seed=seed)
    sld = inf_variance_discrete(s, "B", axis, "A", "optimized").variance
    search = inf_variance_discrete(s, "B", axis, "A", "optimized", method="search").variance
    # the search can only find measurements the exact optimum already beats
    assert sld <= search + 1e-9
    assert search == pytest.approx(sld, abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_sld_matches_search_on_groups(seed):
    s = random_pure_state(3, seed=seed)
    sld = inf_variance_discrete(s, "B", "y", "AC", "optimized").variance
    search = inf_variance_discrete(s, "B", "y", "AC", "optimized", method="search", seed=seed).variance
    assert sld <= search + 1e-9
    assert search == pytest.approx(sld, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_optimized_never_worse_than_random_basis(seed):
    s = random_mixed_state(2, seed=seed)
    rho = s.matrix
    opt = inf_variance_discrete(s, "B", pauli("x"), "A", "optimized").variance
    u = random_unitary(2, seed + 100)
    assert opt <= conditional_variance(rho, u, PAULI["x"]) + 1e-12


def test_ghz_pairwise_and_group():
    g = make_ghz(3)
    assert inf_variance_discrete(g, "B", pauli("x"), "A", "optimized").variance == pytest.approx(1, abs=1e-9)
    assert inf_variance_discrete(g, "B", pauli("z"), "A", "optimized").variance == pytest.approx(0, abs=1e-9)
    xx = np.kron(pauli("x"), pauli("x"))
    assert inf_variance_discrete(g, "B", pauli("x"), "AC", "specified", xx).variance == pytest.approx(0, abs=1e-12)


def test_qutrit_target():
    psi = np.zeros(9)
    for k in range(3):
        psi[4 * k] = 1
    s = MultipartyDensityState.from_ket(psi, (3, 3))
    # maximally entangled qutrits: measuring J_z on A fixes J_z on B
    assert inf_variance_discrete(s, "B", "z", "A", "optimized").variance == pytest.approx(0, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), axis=st.sampled_from("xyz"))
def test_optimized_invariant_under_group_unitary(seed, axis):
    s = random_mixed_state(2, seed=seed, env_dim=2)
    rotated = apply_local_unitary(s, "A", random_unitary(2, seed + 1))
    a = inf_variance_discrete(s, "B", axis, "A", "optimized").variance
    b = inf_variance_discrete(rotated, "B", axis, "A", "optimized").variance
    assert a == pytest.approx(b, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), axis=st.sampled_from("xyz"))
def test_inference_bounded_by_marginal_variance(seed, axis):
    s = random_mixed_state(2, seed=seed)
    rb = partial_trace(s, "B").matrix
    op = spin_matrices(0.5, axis)
    marginal = np.trace(rb @ op @ op).real - np.trace(rb @ op).real ** 2
    assert 0 <= inf_variance_discrete(s, "B", axis, "A", "optimized").variance <= marginal + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_cross_conditioned_sum_bounded(seed):
    s = random_pure_state(4, seed=seed)
    total = cross_conditioned_variance_sum(s, "B", [("x", "A"), ("y", "C"), ("z", "D")])
    assert total >= 0.5 - 1e-9


def test_cross_conditioned_requires_disjoint():
    with pytest.raises(ValueError):
        cross_conditioned_variance_sum(make_ghz(4), "B", [("x", "A"), ("y", "A")])


class TestGaussian:
    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_tmsv(self, r):
        s = two_mode_squeezed(r)
        assert inf_variance_gaussian(s, "B", X(1, 2), "A").variance == pytest.approx(1 / np.cosh(2 * r), rel=1e-10)
        assert inf_variance_gaussian(s, "B", P(1, 2), "A").variance == pytest.approx(1 / np.cosh(2 * r), rel=1e-10)

    @pytest.mark.parametrize("eta", [0.1, 0.5, 0.9])
    def test_lossy_closed_form(self, eta):
        s = apply_loss(two_mode_squeezed(1.5), "A", eta)
        assert inf_variance_gaussian(s, "B", X(1, 2), "A").variance == pytest.approx(lossy_tmsv_E(1.5, eta), rel=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle(self, seed):
        s = random_gaussian_state(3, seed)
        t = X(1, 3).weights + 0.3 * P(1, 3).weights
        got = inf_variance_gaussian(s, "B", QuadratureObservable(t), "AC").variance
        assert got == pytest.approx(gaussian_conditional(s.cov, t, [0, 1, 4, 5]), rel=1e-9)

    def test_estimator_weights_live_on_group(self):
        res = inf_variance_gaussian(two_mode_squeezed(1), "B", X(1, 2), "A")
        w = res.conditioning
        assert w[2] == 0 and w[3] == 0
        assert w[0] == pytest.approx(np.tanh(2))

    def test_target_off_steered_rejected(self):
        with pytest.raises(ValueError):
            inf_variance_gaussian(two_mode_squeezed(1), "B", X(0, 2), "B")

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), r=st.floats(-1, 1))
    def test_invariant_under_group_symplectic(self, seed, r):
        s = random_gaussian_state(3, seed)
        g = apply_symplectic(s, squeezer_matrix(r), [0])
        g = apply_symplectic(g, passive_symplectic(random_unitary(2, seed)), [0, 2])
        for t in (X(1, 3), P(1, 3)):
            a = inf_variance_gaussian(s, "B", t, "AC").variance
            b = inf_variance_gaussian(g, "B", t, "AC").variance
            assert a == pytest.approx(b, rel=1e-8, abs=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_more_modes_never_hurt(self, seed):
        s = random_gaussian_state(3, seed)
        single = inf_variance_gaussian(s, "B", X(1, 3), "A").variance
        group = inf_variance_gaussian(s, "B", X(1, 3), "AC").variance
        assert group <= single + 1e-10
